//! Multi-class user equilibrium via the modified projection (extragradient)
//! method, with exact blockwise projection onto the demand simplices and a
//! relative-gap convergence test.
//!
//! The feasible set is a product of scaled simplices, one per (class, OD)
//! block, so the Euclidean projection decomposes blockwise and each block
//! projects in closed form by sort-and-threshold.

use crate::model::Model;
use crate::pathset::{path_link_flows, Block};
use crate::scenario::{FleetVector, InitialFlow, SolverConfig};
use crate::{Error, Result};

/// Exact Euclidean projection of `b` onto {x ≥ 0, Σx = d}: the unique
/// minimizer of ½‖x−b‖². O(n log n) by sorting.
pub fn project_block(b: &[f64], d: f64) -> Vec<f64> {
    let n = b.len();
    if n == 0 {
        return Vec::new();
    }
    if d <= 0.0 {
        return vec![0.0; n];
    }
    let mut sorted: Vec<f64> = b.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite entries"));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &value) in sorted.iter().enumerate() {
        cumulative += value;
        let candidate = (cumulative - d) / (k + 1) as f64;
        if value - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    b.iter().map(|&v| (v - theta).max(0.0)).collect()
}

/// Projects a global vector onto the feasible set by projecting every
/// (class, OD) block independently; the demand constraints are
/// block-diagonal, so this equals the global projection.
pub fn project_feasible(y: &[f64], blocks: &[Block]) -> Result<Vec<f64>> {
    let total: usize = blocks.iter().map(|b| b.len).sum();
    if total != y.len() {
        return Err(Error::DimensionMismatch {
            expected: total,
            got: y.len(),
        });
    }
    let mut out = vec![0.0; y.len()];
    for block in blocks {
        let projected = project_block(&y[block.range()], block.demand);
        out[block.range()].copy_from_slice(&projected);
    }
    Ok(out)
}

/// Relative gap: per block, the excess of the realized total cost over the
/// all-demand-on-cheapest-path cost, normalized by the latter; summed over
/// blocks. Zero-demand blocks contribute nothing (0/0 convention).
pub fn relative_gap(x: &[f64], costs: &[f64], blocks: &[Block]) -> f64 {
    let mut gap = 0.0;
    for block in blocks {
        if block.demand <= 0.0 || block.len == 0 {
            continue;
        }
        let range = block.range();
        let min_cost = costs[range.clone()]
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let denom = block.demand * min_cost;
        if !(denom > 0.0) {
            continue;
        }
        let realized: f64 = range.map(|p| x[p] * costs[p]).sum();
        gap += (realized - denom) / denom;
    }
    gap
}

/// Minimum path cost per block at the given costs.
pub fn block_min_costs(costs: &[f64], blocks: &[Block]) -> Vec<f64> {
    blocks
        .iter()
        .map(|b| {
            costs[b.range()]
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Largest relative Wardrop violation over used paths: max over paths with
/// x_p > flow_eps of (C_p − ρ_w)/ρ_w.
pub fn wardrop_violation(x: &[f64], costs: &[f64], blocks: &[Block], flow_eps: f64) -> f64 {
    let mins = block_min_costs(costs, blocks);
    let mut worst: f64 = 0.0;
    for (bi, block) in blocks.iter().enumerate() {
        if !(mins[bi] > 0.0) {
            continue;
        }
        for p in block.range() {
            if x[p] > flow_eps {
                worst = worst.max((costs[p] - mins[bi]) / mins[bi]);
            }
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    GapTolerance,
    StepTolerance,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct EquilibriumSolution {
    /// Equilibrium path flows in global path order.
    pub x: Vec<f64>,
    /// Path costs at `x`.
    pub path_costs: Vec<f64>,
    /// Total link flows f_a.
    pub link_flows: Vec<f64>,
    /// Per-class link flows f_a^k.
    pub class_link_flows: Vec<Vec<f64>>,
    /// ρ_w^k: minimum path cost per (class, OD) block.
    pub min_costs: Vec<f64>,
    /// Relative gap after each iteration.
    pub gap_trace: Vec<f64>,
    pub iterations: usize,
    /// True iff the final relative gap is below χ1.
    pub converged: bool,
    pub stop: StopReason,
}

impl EquilibriumSolution {
    pub fn final_gap(&self) -> f64 {
        self.gap_trace.last().copied().unwrap_or(f64::INFINITY)
    }
}

fn initial_flow(settings: &SolverConfig, blocks: &[Block], n: usize) -> Result<Vec<f64>> {
    match &settings.initial_flow {
        InitialFlow::UniformSplit => {
            let mut x = vec![0.0; n];
            for block in blocks {
                if block.len > 0 {
                    let share = block.demand / block.len as f64;
                    x[block.range()].fill(share);
                }
            }
            Ok(x)
        }
        InitialFlow::AllOnFirstPath => {
            let mut x = vec![0.0; n];
            for block in blocks {
                if block.len > 0 {
                    x[block.start] = block.demand;
                }
            }
            Ok(x)
        }
        InitialFlow::Given(x0) => {
            if x0.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: x0.len(),
                });
            }
            project_feasible(x0, blocks)
        }
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Solves the user-equilibrium variational inequality by the modified
/// projection method: two projections per iteration, the second evaluated
/// at the extragradient point. Stops when the relative gap drops below χ1
/// or the iterate change below χ2 (both, with `require_both`), or at the
/// iteration cap, returning the best-gap iterate either way.
pub fn solve_ue(
    model: &Model,
    fleet: &FleetVector,
    settings: &SolverConfig,
) -> Result<EquilibriumSolution> {
    let ps = &model.paths;
    let blocks = &ps.blocks;
    let caps = model.cost.resolve_fleet(fleet)?;
    let n = ps.total_paths();
    let psi = settings.psi;

    let mut x = initial_flow(settings, blocks, n)?;
    let mut costs = model.cost.cost_operator(ps, &x, &caps)?;

    let mut gap_trace = Vec::new();
    let mut best_gap = f64::INFINITY;
    let mut best_x = x.clone();
    let mut best_costs = costs.clone();
    let mut iterations = 0;
    let mut stop = StopReason::MaxIterations;

    for iter in 1..=settings.max_iterations {
        iterations = iter;

        let shifted: Vec<f64> = x.iter().zip(&costs).map(|(xi, ci)| xi - psi * ci).collect();
        let x_bar = project_feasible(&shifted, blocks)?;
        let costs_bar = model.cost.cost_operator(ps, &x_bar, &caps)?;

        let shifted: Vec<f64> = x
            .iter()
            .zip(&costs_bar)
            .map(|(xi, ci)| xi - psi * ci)
            .collect();
        let x_next = project_feasible(&shifted, blocks)?;
        let costs_next = model.cost.cost_operator(ps, &x_next, &caps)?;

        let gap = relative_gap(&x_next, &costs_next, blocks);
        let delta = max_abs_diff(&x_next, &x);
        gap_trace.push(gap);

        if gap < best_gap {
            best_gap = gap;
            best_x.copy_from_slice(&x_next);
            best_costs.copy_from_slice(&costs_next);
        }

        x = x_next;
        costs = costs_next;

        let gap_ok = gap < settings.chi1;
        let step_ok = delta < settings.chi2;
        let done = if settings.require_both {
            gap_ok && step_ok
        } else {
            gap_ok || step_ok
        };
        if done {
            stop = if gap_ok {
                StopReason::GapTolerance
            } else {
                StopReason::StepTolerance
            };
            break;
        }
    }

    let (class_link_flows, link_flows) = path_link_flows(&best_x, ps)?;
    let min_costs = block_min_costs(&best_costs, blocks);
    let converged = best_gap < settings.chi1;
    Ok(EquilibriumSolution {
        x: best_x,
        path_costs: best_costs,
        link_flows,
        class_link_flows,
        min_costs,
        gap_trace,
        iterations,
        converged,
        stop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_block(b: &[f64], d: f64) -> Vec<f64> {
        // Exhaustive active-set enumeration of the KKT system.
        let n = b.len();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for mask in 0..(1u32 << n) {
            let free: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            if free.is_empty() {
                continue;
            }
            let theta =
                (free.iter().map(|&i| b[i]).sum::<f64>() - d) / free.len() as f64;
            let mut x = vec![0.0; n];
            let mut feasible = true;
            for &i in &free {
                x[i] = b[i] - theta;
                if x[i] < -1e-12 {
                    feasible = false;
                }
            }
            if !feasible {
                continue;
            }
            // Dual feasibility on the active set.
            if (0..n)
                .filter(|i| !free.contains(i))
                .any(|i| b[i] - theta > 1e-12)
            {
                continue;
            }
            let obj: f64 = x.iter().zip(b).map(|(xi, bi)| (xi - bi).powi(2)).sum();
            if best.as_ref().map_or(true, |(o, _)| obj < *o) {
                best = Some((obj, x));
            }
        }
        best.expect("some active set is optimal").1
    }

    #[test]
    fn projection_fixed_cases() {
        assert_eq!(project_block(&[0.5, 0.5], 1.0), vec![0.5, 0.5]);
        assert_eq!(project_block(&[2.0, 0.0], 1.0), vec![1.0, 0.0]);
        // KKT by hand: free set {0, 1}, theta = 0.2.
        let x = project_block(&[0.9, 0.5, 0.1], 1.0);
        assert!((x[0] - 0.7).abs() < 1e-12);
        assert!((x[1] - 0.3).abs() < 1e-12);
        assert_eq!(x[2], 0.0);
    }

    #[test]
    fn projection_matches_kkt_enumeration() {
        let cases: &[(&[f64], f64)] = &[
            (&[-1.0, 2.0, 0.3], 1.0),
            (&[5.0, 5.0, 5.0, 5.0], 2.0),
            (&[-3.0, -4.0], 0.5),
            (&[0.1, 0.2, 0.3, 0.4, 0.5], 10.0),
        ];
        for (b, d) in cases {
            let fast = project_block(b, *d);
            let slow = brute_force_block(b, *d);
            for (f, s) in fast.iter().zip(&slow) {
                assert!((f - s).abs() < 1e-9, "b={b:?} d={d}: {fast:?} vs {slow:?}");
            }
        }
    }

    #[test]
    fn projection_is_feasible_and_idempotent() {
        let b = [0.3, -1.2, 4.0, 0.0];
        let d = 2.5;
        let x = project_block(&b, d);
        assert!((x.iter().sum::<f64>() - d).abs() < 1e-12);
        assert!(x.iter().all(|v| *v >= 0.0));
        let again = project_block(&x, d);
        for (a, b) in x.iter().zip(&again) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_demand_projects_to_zero() {
        assert_eq!(project_block(&[1.0, 2.0], 0.0), vec![0.0, 0.0]);
    }

    #[test]
    fn projecting_origin_gives_uniform_split() {
        let x = project_block(&[0.0, 0.0, 0.0], 6.0);
        assert_eq!(x, vec![2.0, 2.0, 2.0]);
    }

    fn one_block(len: usize, demand: f64) -> Vec<Block> {
        vec![Block {
            class: 0,
            od_id: "w:0".into(),
            origin: "o".into(),
            destination: "d".into(),
            start: 0,
            len,
            demand,
        }]
    }

    #[test]
    fn gap_examples() {
        let blocks = one_block(2, 1.0);
        // All flow on the minimum-cost path.
        assert_eq!(relative_gap(&[1.0, 0.0], &[2.0, 3.0], &blocks), 0.0);
        // All flow on the dearer path: (3-2)/2.
        assert!((relative_gap(&[0.0, 1.0], &[2.0, 3.0], &blocks) - 0.5).abs() < 1e-12);
        // Indifference: equal costs.
        assert_eq!(relative_gap(&[0.3, 0.7], &[5.0, 5.0], &blocks), 0.0);
    }

    #[test]
    fn zero_demand_block_is_skipped() {
        let blocks = one_block(2, 0.0);
        assert_eq!(relative_gap(&[0.0, 0.0], &[2.0, 3.0], &blocks), 0.0);
    }
}
