//! Upper-level fleet sizing: maximize provider profit over the per-link
//! fleet subject to the lower-level user equilibrium, plus scenario-grid
//! sweeps of the profit response.
//!
//! The default optimizer is a deterministic compass pattern search with
//! step contraction; a finite-difference quasi-Newton (projected BFGS) is
//! available as an option. Both respect box bounds on the fleet and
//! warm-start each lower-level solve from the incumbent equilibrium.

use std::collections::BTreeMap;

use crate::equilibrium::{solve_ue, EquilibriumSolution};
use crate::model::Model;
use crate::msp::{self, MspSpec, ProfitBreakdown};
use crate::scenario::{
    load_scenario_str, FleetVector, InitialFlow, OptimizerKind, SolverConfig,
};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct MpecSettings {
    pub optimizer: OptimizerKind,
    pub lower: f64,
    pub upper: f64,
    pub initial_step: f64,
    pub step_tol: f64,
    pub max_outer_iterations: usize,
    pub fd_step: f64,
    pub outer_tol: f64,
    pub multistarts: Vec<Vec<f64>>,
    pub warm_start: bool,
    pub solver: SolverConfig,
}

impl MpecSettings {
    /// Resolves the scenario's `mpec` block against the model's fleet
    /// dimension. Default multistart: lower bound, midpoint, upper bound.
    pub fn from_model(model: &Model) -> Result<MpecSettings> {
        let cfg = &model.cfg.mpec;
        let n = model.net.fleet_links.len();
        let lower = cfg.fleet_lower;
        let upper = cfg.fleet_upper;
        let multistarts = match &cfg.multistart {
            Some(points) => {
                let ids = model.net.fleet_link_ids();
                points
                    .iter()
                    .map(|point| {
                        ids.iter()
                            .map(|id| {
                                point
                                    .get(id)
                                    .copied()
                                    .ok_or_else(|| Error::MissingFleetValue(id.clone()))
                            })
                            .collect::<Result<Vec<f64>>>()
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            None => vec![
                vec![lower; n],
                vec![0.5 * (lower + upper); n],
                vec![upper; n],
            ],
        };
        Ok(MpecSettings {
            optimizer: cfg.optimizer,
            lower,
            upper,
            initial_step: cfg.initial_step.unwrap_or((upper - lower) / 8.0),
            step_tol: cfg.step_tol,
            max_outer_iterations: cfg.max_outer_iterations,
            fd_step: cfg.fd_step,
            outer_tol: cfg.outer_tol,
            multistarts,
            warm_start: cfg.warm_start,
            solver: model.cfg.solver.clone(),
        })
    }
}

/// One lower-level evaluation of the bilevel objective.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub profit: ProfitBreakdown,
    pub solution: EquilibriumSolution,
    /// False when the inner solver stopped without meeting the gap
    /// tolerance; the objective value is still returned.
    pub reliable: bool,
}

/// Solves the lower level at fleet `v` (optionally warm-started) and
/// evaluates the provider's profit there. Deterministic given settings and
/// warm start.
pub fn evaluate_objective(
    model: &Model,
    spec: &MspSpec,
    v: &[f64],
    warm_start: Option<&[f64]>,
    solver: &SolverConfig,
) -> Result<Evaluation> {
    let fleet = model.fleet_from_dense(v)?;
    let mut settings = solver.clone();
    if let Some(x0) = warm_start {
        settings.initial_flow = InitialFlow::Given(x0.to_vec());
    }
    let solution = solve_ue(model, &fleet, &settings)?;
    let profit = msp::profit(spec, model, &solution, &fleet)?;
    let reliable = solution.converged;
    Ok(Evaluation {
        profit,
        solution,
        reliable,
    })
}

#[derive(Debug, Clone)]
pub struct OuterStep {
    pub fleet: Vec<f64>,
    pub profit: f64,
}

#[derive(Debug, Clone)]
pub struct MpecResult {
    pub v_star: FleetVector,
    pub x_star: EquilibriumSolution,
    pub profit: ProfitBreakdown,
    /// Incumbent (fleet, profit) after each accepted outer step of the
    /// winning start; nondecreasing in profit.
    pub outer_trace: Vec<OuterStep>,
    /// Lower-level iteration count of every objective evaluation performed
    /// by the winning start.
    pub inner_iteration_counts: Vec<usize>,
    pub evaluations: usize,
    pub start_profits: Vec<f64>,
}

struct RunOutcome {
    v: Vec<f64>,
    eval: Evaluation,
    trace: Vec<OuterStep>,
    inner_counts: Vec<usize>,
    evaluations: usize,
}

struct Runner<'a> {
    model: &'a Model,
    spec: &'a MspSpec,
    settings: &'a MpecSettings,
    inner_counts: Vec<usize>,
    evaluations: usize,
}

impl<'a> Runner<'a> {
    fn eval(&mut self, v: &[f64], warm: Option<&[f64]>) -> Result<Evaluation> {
        let warm = if self.settings.warm_start { warm } else { None };
        let e = evaluate_objective(self.model, self.spec, v, warm, &self.settings.solver)?;
        self.inner_counts.push(e.solution.iterations);
        self.evaluations += 1;
        Ok(e)
    }
}

fn clamp(v: &mut [f64], lower: f64, upper: f64) {
    for x in v {
        *x = x.clamp(lower, upper);
    }
}

fn pattern_search(
    model: &Model,
    spec: &MspSpec,
    settings: &MpecSettings,
    start: Vec<f64>,
) -> Result<RunOutcome> {
    let mut runner = Runner {
        model,
        spec,
        settings,
        inner_counts: Vec::new(),
        evaluations: 0,
    };
    let n = start.len();
    let mut v = start;
    clamp(&mut v, settings.lower, settings.upper);
    let mut incumbent = runner.eval(&v, None)?;
    let mut warm = incumbent.solution.x.clone();
    let mut trace = vec![OuterStep {
        fleet: v.clone(),
        profit: incumbent.profit.profit,
    }];

    let mut step = settings.initial_step;
    let mut outer = 0;
    while step >= settings.step_tol && outer < settings.max_outer_iterations {
        outer += 1;
        let mut best: Option<(Vec<f64>, Evaluation)> = None;
        for i in 0..n {
            for sign in [1.0, -1.0] {
                let mut candidate = v.clone();
                candidate[i] = (candidate[i] + sign * step).clamp(settings.lower, settings.upper);
                if candidate[i] == v[i] {
                    continue;
                }
                let eval = runner.eval(&candidate, Some(&warm))?;
                let improves = eval.profit.profit
                    > incumbent.profit.profit + settings.outer_tol
                    && best
                        .as_ref()
                        .map_or(true, |(_, b)| eval.profit.profit > b.profit.profit);
                if improves {
                    best = Some((candidate, eval));
                }
            }
        }
        match best {
            Some((cv, ce)) => {
                v = cv;
                warm = ce.solution.x.clone();
                incumbent = ce;
                trace.push(OuterStep {
                    fleet: v.clone(),
                    profit: incumbent.profit.profit,
                });
            }
            None => step *= 0.5,
        }
    }

    Ok(RunOutcome {
        v,
        eval: incumbent,
        trace,
        inner_counts: runner.inner_counts,
        evaluations: runner.evaluations,
    })
}

fn fd_quasi_newton(
    model: &Model,
    spec: &MspSpec,
    settings: &MpecSettings,
    start: Vec<f64>,
) -> Result<RunOutcome> {
    let mut runner = Runner {
        model,
        spec,
        settings,
        inner_counts: Vec::new(),
        evaluations: 0,
    };
    let n = start.len();
    let mut v = start;
    clamp(&mut v, settings.lower, settings.upper);
    let mut incumbent = runner.eval(&v, None)?;
    let mut warm = incumbent.solution.x.clone();
    let mut trace = vec![OuterStep {
        fleet: v.clone(),
        profit: incumbent.profit.profit,
    }];

    // Inverse Hessian estimate for minimizing the negated profit.
    let mut h = identity(n);
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None; // (v, gradient)

    for _ in 0..settings.max_outer_iterations {
        // Central differences inside the box.
        let mut gradient = vec![0.0; n];
        for i in 0..n {
            let h_i = (settings.fd_step * v[i].abs()).max(settings.fd_step);
            let hi = (v[i] + h_i).min(settings.upper);
            let lo = (v[i] - h_i).max(settings.lower);
            let mut vp = v.clone();
            vp[i] = hi;
            let fp = runner.eval(&vp, Some(&warm))?.profit.profit;
            vp[i] = lo;
            let fm = runner.eval(&vp, Some(&warm))?.profit.profit;
            gradient[i] = -(fp - fm) / (hi - lo);
        }

        // Projected gradient: drop components pushing outside the box.
        let active_norm: f64 = gradient
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let blocked = (v[i] <= settings.lower && *g > 0.0)
                    || (v[i] >= settings.upper && *g < 0.0);
                if blocked {
                    0.0
                } else {
                    g * g
                }
            })
            .sum::<f64>()
            .sqrt();
        if active_norm < 1e-7 {
            break;
        }

        if let Some((pv, pg)) = &prev {
            let s: Vec<f64> = v.iter().zip(pv).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = gradient.iter().zip(pg).map(|(a, b)| a - b).collect();
            bfgs_update(&mut h, &s, &y);
        }

        let mut direction = mat_vec(&h, &gradient);
        for d in &mut direction {
            *d = -*d;
        }
        // Fall back to steepest descent when the model direction fails to
        // descend.
        if dot(&direction, &gradient) >= 0.0 {
            h = identity(n);
            direction = gradient.iter().map(|g| -g).collect();
        }

        let mut t = 1.0;
        let f0 = -incumbent.profit.profit;
        let slope = dot(&direction, &gradient);
        let mut accepted = false;
        while t > 1e-8 {
            let mut cand: Vec<f64> = v.iter().zip(&direction).map(|(a, d)| a + t * d).collect();
            clamp(&mut cand, settings.lower, settings.upper);
            let eval = runner.eval(&cand, Some(&warm))?;
            if -eval.profit.profit <= f0 + 1e-4 * t * slope {
                prev = Some((v.clone(), gradient.clone()));
                v = cand;
                warm = eval.solution.x.clone();
                incumbent = eval;
                trace.push(OuterStep {
                    fleet: v.clone(),
                    profit: incumbent.profit.profit,
                });
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    Ok(RunOutcome {
        v,
        eval: incumbent,
        trace,
        inner_counts: runner.inner_counts,
        evaluations: runner.evaluations,
    })
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect())
        .collect()
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, v)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn bfgs_update(h: &mut Vec<Vec<f64>>, s: &[f64], y: &[f64]) {
    let sy = dot(s, y);
    if sy <= 1e-12 {
        return;
    }
    let n = s.len();
    let hy = mat_vec(h, y);
    let yhy = dot(y, &hy);
    let c1 = (sy + yhy) / (sy * sy);
    for i in 0..n {
        for j in 0..n {
            h[i][j] += c1 * s[i] * s[j] - (hy[i] * s[j] + s[i] * hy[j]) / sy;
        }
    }
}

/// Best-of-multistart local maximizer of Pr(x*(v), v) over the fleet box.
pub fn solve_mpec(model: &Model, settings: &MpecSettings) -> Result<MpecResult> {
    let msp_id = model
        .cfg
        .mpec
        .optimized_msp
        .clone()
        .ok_or_else(|| Error::InvalidInput("mpec.optimized_msp is not set".into()))?;
    let spec = msp::assemble(model, &msp_id)?;
    if model.net.fleet_links.is_empty() {
        return Err(Error::InvalidInput(
            "the optimized MSP has no fleet decision links".into(),
        ));
    }

    let mut outcomes = Vec::new();
    for start in &settings.multistarts {
        let outcome = match settings.optimizer {
            OptimizerKind::PatternSearch => pattern_search(model, &spec, settings, start.clone())?,
            OptimizerKind::FiniteDifferenceQuasiNewton => {
                fd_quasi_newton(model, &spec, settings, start.clone())?
            }
        };
        outcomes.push(outcome);
    }

    let start_profits: Vec<f64> = outcomes.iter().map(|o| o.eval.profit.profit).collect();
    let winner = outcomes
        .iter()
        .enumerate()
        .filter(|(_, o)| o.eval.reliable)
        .max_by(|(_, a), (_, b)| {
            a.eval
                .profit
                .profit
                .partial_cmp(&b.eval.profit.profit)
                .expect("finite profits")
        })
        .map(|(i, _)| i)
        .ok_or(Error::AllStartsFailed)?;

    let evaluations = outcomes.iter().map(|o| o.evaluations).sum();
    let outcome = outcomes.swap_remove(winner);
    Ok(MpecResult {
        v_star: model.fleet_from_dense(&outcome.v)?,
        x_star: outcome.eval.solution,
        profit: outcome.eval.profit,
        outer_trace: outcome.trace,
        inner_iteration_counts: outcome.inner_counts,
        evaluations,
        start_profits,
    })
}

// ---------------------------------------------------------------------------
// Scenario sweeps
// ---------------------------------------------------------------------------

/// How each grid point of a sweep is solved.
#[derive(Debug, Clone)]
pub enum SweepSolveMode {
    /// Re-solve the fleet optimization at every point.
    Mpec,
    /// Solve the user equilibrium at a fixed fleet.
    FixedFleet(FleetSpec),
}

/// A fleet given either as a total spread uniformly over the decision
/// links, or per link.
#[derive(Debug, Clone)]
pub enum FleetSpec {
    Uniform(f64),
    PerLink(BTreeMap<String, f64>),
}

impl FleetSpec {
    pub fn resolve(&self, model: &Model) -> Result<FleetVector> {
        match self {
            FleetSpec::Uniform(total) => Ok(model.uniform_fleet(*total)),
            FleetSpec::PerLink(map) => model.fleet_from_map(map.clone()),
        }
    }
}

/// One sweep dimension: a scenario field (JSON pointer such as
/// `/subscriptions/0/daily_cost`, or the virtual axis `demand_scale`) and
/// its grid.
#[derive(Debug, Clone)]
pub struct SweepAxis {
    pub target: String,
    pub values: Vec<f64>,
}

/// Applies one override to a raw scenario document. Accepts any JSON
/// pointer into the document, or the virtual target `demand_scale`
/// multiplying every class demand.
pub fn apply_override(
    doc: &mut serde_json::Value,
    target: &str,
    value: serde_json::Value,
) -> Result<()> {
    if target == "demand_scale" {
        let scale = value
            .as_f64()
            .ok_or_else(|| Error::AxisResolution(target.to_string()))?;
        let classes = doc
            .get_mut("classes")
            .and_then(|c| c.as_array_mut())
            .ok_or_else(|| Error::AxisResolution(target.to_string()))?;
        for class in classes {
            let demand = class
                .get("demand")
                .and_then(|d| d.as_f64())
                .ok_or_else(|| Error::AxisResolution(target.to_string()))?;
            class["demand"] = serde_json::json!(demand * scale);
        }
        return Ok(());
    }
    match doc.pointer_mut(target) {
        Some(slot) => {
            *slot = value;
            Ok(())
        }
        None => Err(Error::AxisResolution(target.to_string())),
    }
}

/// A tidy table ready for CSV export.
#[derive(Debug, Clone)]
pub struct SweepTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Sweeps up to two scenario parameters over a grid, re-solving the MPEC
/// (or the equilibrium at fixed fleet) at every point. Rows come out in
/// deterministic grid order (second axis fastest); `jobs` > 1 distributes
/// points over threads without changing the order.
pub fn profit_response_sweep(
    base_doc: &serde_json::Value,
    axes: &[SweepAxis],
    mode: &SweepSolveMode,
    jobs: usize,
) -> Result<SweepTable> {
    if axes.is_empty() || axes.len() > 2 {
        return Err(Error::InvalidInput(
            "sweep needs one or two axes".to_string(),
        ));
    }
    let grid: Vec<Vec<f64>> = match axes.len() {
        1 => axes[0].values.iter().map(|&v| vec![v]).collect(),
        _ => {
            let mut g = Vec::new();
            for &a in &axes[0].values {
                for &b in &axes[1].values {
                    g.push(vec![a, b]);
                }
            }
            g
        }
    };

    let run_point = |point: &[f64]| -> Result<SweepPointRow> {
        let mut doc = base_doc.clone();
        for (axis, &value) in axes.iter().zip(point) {
            apply_override(&mut doc, &axis.target, serde_json::json!(value))?;
        }
        let cfg = load_scenario_str(&doc.to_string())?;
        let model = Model::build(&cfg)?;
        solve_sweep_point(&model, mode, point)
    };

    let jobs = jobs.max(1).min(grid.len().max(1));
    let mut rows: Vec<Option<SweepPointRow>> = (0..grid.len()).map(|_| None).collect();
    if jobs <= 1 {
        for (i, point) in grid.iter().enumerate() {
            rows[i] = Some(run_point(point)?);
        }
    } else {
        let results: Vec<Result<SweepPointRow>> = std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for chunk_start in 0..jobs {
                let grid = &grid;
                let run_point = &run_point;
                handles.push(scope.spawn(move || {
                    let mut out = Vec::new();
                    let mut i = chunk_start;
                    while i < grid.len() {
                        out.push((i, run_point(&grid[i])));
                        i += jobs;
                    }
                    out
                }));
            }
            let mut merged: Vec<Option<Result<SweepPointRow>>> =
                (0..grid.len()).map(|_| None).collect();
            for handle in handles {
                for (i, r) in handle.join().expect("sweep worker panicked") {
                    merged[i] = Some(r);
                }
            }
            merged.into_iter().map(|r| r.expect("all points run")).collect()
        });
        for (i, r) in results.into_iter().enumerate() {
            rows[i] = Some(r?);
        }
    }

    let rows: Vec<SweepPointRow> = rows.into_iter().map(|r| r.expect("filled")).collect();
    let mut header: Vec<String> = axes.iter().map(|a| axis_column_name(&a.target)).collect();
    if let Some(first) = rows.first() {
        header.extend(first.names.iter().cloned());
    }
    let table_rows = rows
        .into_iter()
        .zip(grid)
        .map(|(row, point)| {
            let mut cells: Vec<String> = point.iter().map(|v| format!("{v}")).collect();
            cells.extend(row.values);
            cells
        })
        .collect();
    Ok(SweepTable {
        header,
        rows: table_rows,
    })
}

fn axis_column_name(target: &str) -> String {
    if target == "demand_scale" {
        return target.to_string();
    }
    target.trim_start_matches('/').replace('/', ".")
}

struct SweepPointRow {
    names: Vec<String>,
    values: Vec<String>,
}

fn solve_sweep_point(model: &Model, mode: &SweepSolveMode, _point: &[f64]) -> Result<SweepPointRow> {
    let (fleet, profit, solution, inner_iterations) = match mode {
        SweepSolveMode::Mpec => {
            let settings = MpecSettings::from_model(model)?;
            let result = solve_mpec(model, &settings)?;
            let iters = result.inner_iteration_counts.iter().sum();
            (result.v_star, result.profit, result.x_star, iters)
        }
        SweepSolveMode::FixedFleet(spec) => {
            let fleet = spec.resolve(model)?;
            let solution = solve_ue(model, &fleet, &model.solver_settings())?;
            let msp_id = model
                .cfg
                .mpec
                .optimized_msp
                .clone()
                .ok_or_else(|| Error::InvalidInput("mpec.optimized_msp is not set".into()))?;
            let spec = msp::assemble(model, &msp_id)?;
            let profit = msp::profit(&spec, model, &solution, &fleet)?;
            let iters = solution.iterations;
            (fleet, profit, solution, iters)
        }
    };

    let split = crate::report::modal_split(model, &solution)?;
    let mut names = vec![
        "profit_eur_per_day".to_string(),
        "fixed_revenue_eur_per_day".to_string(),
        "variable_revenue_eur_per_day".to_string(),
        "fixed_cost_eur_per_day".to_string(),
        "variable_cost_eur_per_day".to_string(),
        "fleet_total_vehicles".to_string(),
        "converged".to_string(),
        "inner_iterations".to_string(),
        "relative_gap".to_string(),
    ];
    let mut values = vec![
        format!("{}", profit.profit),
        format!("{}", profit.fixed_revenue),
        format!("{}", profit.variable_revenue),
        format!("{}", profit.fixed_cost),
        format!("{}", profit.variable_cost),
        format!("{}", fleet.total()),
        format!("{}", solution.converged),
        format!("{inner_iterations}"),
        format!("{}", solution.final_gap()),
    ];
    for (name, share) in &split.leg_share {
        names.push(format!("leg_share_{name}"));
        values.push(format!("{share}"));
    }
    for (name, share) in &split.exclusive_share {
        names.push(format!("pure_share_{name}"));
        values.push(format!("{share}"));
    }
    for (name, count) in &split.subscribers {
        names.push(format!("subscribers_{name}"));
        values.push(format!("{count}"));
    }
    Ok(SweepPointRow { names, values })
}
