//! Path enumeration over the supernetwork and the link–path incidence.
//!
//! Paths are enumerated chain-first: a mode choice per leg, interchange
//! links between legs, access/egress at the home centroid. The global
//! path-flow vector is laid out block-contiguously per (class, OD pair) so
//! the equilibrium projection decomposes blockwise.

use std::collections::BTreeSet;

use crate::scenario::{ScenarioConfig, UsageRule};
use crate::supernet::Supernetwork;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct Path {
    pub class: usize,
    /// Link indices in traversal order.
    pub links: Vec<usize>,
    /// Mode index chosen on each chain leg.
    pub mode_seq: Vec<usize>,
    /// Distinct subscriptions the path activates, sorted. Each is charged
    /// once per day regardless of how many of its links the path touches.
    pub subs: Vec<usize>,
}

/// One (class, OD) block: a contiguous index range of the global path-flow
/// vector together with its fixed daily demand.
#[derive(Debug, Clone)]
pub struct Block {
    pub class: usize,
    pub od_id: String,
    pub origin: String,
    pub destination: String,
    pub start: usize,
    pub len: usize,
    pub demand: f64,
}

impl Block {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

#[derive(Debug, Clone)]
pub struct PathSet {
    pub paths: Vec<Path>,
    pub blocks: Vec<Block>,
    pub n_links: usize,
    pub n_classes: usize,
}

impl PathSet {
    pub fn total_paths(&self) -> usize {
        self.paths.len()
    }

    /// δ_{a,p} for one (link, path) pair.
    pub fn incidence(&self, link: usize, path: usize) -> u8 {
        u8::from(self.paths[path].links.contains(&link))
    }
}

/// Enumerates the feasible paths of one class, honoring mode availability,
/// interchange compatibility and subscription usage rules. Deterministic
/// order (lexicographic by link index sequence).
pub fn enumerate_class_paths(
    net: &Supernetwork,
    cfg: &ScenarioConfig,
    class: usize,
) -> Result<Vec<Path>> {
    let legs = &net.class_legs[class];
    let class_id = &net.class_ids[class];
    let home = legs[0].from;
    let cap = cfg.solver.path_cap;

    // Usage rules keyed by subscription index.
    let rules: Vec<Option<&UsageRule>> = cfg.subscriptions.iter().map(|s| s.usage_rule.as_ref()).collect();

    let mut paths: Vec<Path> = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    let mut generated = 0usize;

    // Depth-first product over per-leg mode choices.
    fn descend(
        net: &Supernetwork,
        legs: &[crate::supernet::ClassLeg],
        class: usize,
        home: usize,
        rules: &[Option<&UsageRule>],
        stack: &mut Vec<usize>,
        paths: &mut Vec<Path>,
        generated: &mut usize,
        cap: usize,
    ) -> Result<()> {
        let depth = stack.len();
        if depth == legs.len() {
            *generated += 1;
            if *generated > cap {
                return Err(Error::PathExplosion {
                    class: net.class_ids[class].clone(),
                    cap,
                });
            }
            if let Some(path) = materialize(net, legs, class, home, stack, rules) {
                paths.push(path);
            }
            return Ok(());
        }
        for &(mode, _) in &legs[depth].mode_links {
            if depth > 0 {
                let prev = stack[depth - 1];
                let loc = legs[depth].from;
                if prev != mode && net.interchange_link(loc, prev, mode).is_none() {
                    continue;
                }
            }
            stack.push(mode);
            descend(net, legs, class, home, rules, stack, paths, generated, cap)?;
            stack.pop();
        }
        Ok(())
    }

    fn materialize(
        net: &Supernetwork,
        legs: &[crate::supernet::ClassLeg],
        class: usize,
        home: usize,
        mode_seq: &[usize],
        rules: &[Option<&UsageRule>],
    ) -> Option<Path> {
        let mut links: Vec<usize> = Vec::with_capacity(mode_seq.len() * 2 + 2);
        let first = mode_seq[0];
        match net.gateway_access_link(home, first) {
            Some(ga) => {
                // Bundled mode: enter through the subscription gateway.
                let sub = net.sub_of_mode[first]?;
                links.push(net.gateway_link(home, sub)?);
                links.push(ga);
            }
            None => links.push(net.access_link(home, first)?),
        }
        for (i, &mode) in mode_seq.iter().enumerate() {
            if i > 0 && mode_seq[i - 1] != mode {
                links.push(net.interchange_link(legs[i].from, mode_seq[i - 1], mode)?);
            }
            let (_, link) = legs[i]
                .mode_links
                .iter()
                .find(|(m, _)| *m == mode)
                .copied()?;
            links.push(link);
        }
        links.push(net.egress_link(legs[legs.len() - 1].to, mode_seq[mode_seq.len() - 1])?);

        let subs: Vec<usize> = links
            .iter()
            .filter_map(|&l| net.links[l].subscription)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();

        // Subscription usage rules: a bundle demanding a mode must see it
        // ridden on at least one leg.
        for &sub in &subs {
            if let Some(UsageRule::MustUseMode(required)) = rules[sub] {
                let required_idx = net.mode_ids.iter().position(|m| m == required)?;
                if !mode_seq.contains(&required_idx) {
                    return None;
                }
            }
        }

        Some(Path {
            class,
            links,
            mode_seq: mode_seq.to_vec(),
            subs,
        })
    }

    descend(net, legs, class, home, &rules, &mut stack, &mut paths, &mut generated, cap)?;

    let demand = cfg.classes[class].demand;
    if paths.is_empty() && demand > 0.0 {
        return Err(Error::NoFeasiblePath(class_id.clone()));
    }
    paths.sort_by(|a, b| a.links.cmp(&b.links));
    debug_assert!(
        paths.windows(2).all(|w| w[0].links != w[1].links),
        "duplicate paths enumerated"
    );
    Ok(paths)
}

/// Enumerates all classes and assembles the block-contiguous path set.
pub fn build_pathset(net: &Supernetwork, cfg: &ScenarioConfig) -> Result<PathSet> {
    let mut paths: Vec<Path> = Vec::new();
    let mut blocks: Vec<Block> = Vec::new();
    for (ci, class) in cfg.classes.iter().enumerate() {
        let class_paths = enumerate_class_paths(net, cfg, ci)?;
        let od = class.od_pair();
        blocks.push(Block {
            class: ci,
            od_id: od.id,
            origin: od.origin,
            destination: od.destination,
            start: paths.len(),
            len: class_paths.len(),
            demand: class.demand,
        });
        paths.extend(class_paths);
    }
    Ok(PathSet {
        paths,
        blocks,
        n_links: net.n_links(),
        n_classes: net.n_classes(),
    })
}

/// Aggregates a path-flow vector into per-class and total link flows:
/// f_a^k = Σ_p x_p^k δ_{a,p} and f_a = Σ_k f_a^k.
pub fn path_link_flows(x: &[f64], ps: &PathSet) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if x.len() != ps.total_paths() {
        return Err(Error::DimensionMismatch {
            expected: ps.total_paths(),
            got: x.len(),
        });
    }
    let mut per_class = vec![vec![0.0; ps.n_links]; ps.n_classes];
    for (p, path) in ps.paths.iter().enumerate() {
        let flow = x[p];
        if flow == 0.0 {
            continue;
        }
        let class_flows = &mut per_class[path.class];
        for &l in &path.links {
            class_flows[l] += flow;
        }
    }
    let mut total = vec![0.0; ps.n_links];
    for class_flows in &per_class {
        for (t, f) in total.iter_mut().zip(class_flows) {
            *t += f;
        }
    }
    Ok((per_class, total))
}

/// Daily subscribers per subscription: travelers whose path activates it.
pub fn subscriber_counts(x: &[f64], ps: &PathSet, n_subs: usize) -> Result<Vec<f64>> {
    if x.len() != ps.total_paths() {
        return Err(Error::DimensionMismatch {
            expected: ps.total_paths(),
            got: x.len(),
        });
    }
    let mut counts = vec![0.0; n_subs];
    for (p, path) in ps.paths.iter().enumerate() {
        for &s in &path.subs {
            counts[s] += x[p];
        }
    }
    Ok(counts)
}

/// Largest per-class conservation residual over all non-centroid nodes,
/// plus the demand residual at the centroids. Zero for any feasible flow by
/// construction of path-based assignment; exposed for property tests.
pub fn conservation_residual(net: &Supernetwork, ps: &PathSet, x: &[f64]) -> Result<f64> {
    use crate::supernet::NodeKind;
    let (per_class, _) = path_link_flows(x, ps)?;
    let mut worst: f64 = 0.0;
    for (ci, class_flows) in per_class.iter().enumerate() {
        let mut net_flow = vec![0.0; net.nodes.len()];
        for (li, link) in net.links.iter().enumerate() {
            if !net.class_links[ci].contains(&li) {
                continue;
            }
            net_flow[link.tail] -= class_flows[li];
            net_flow[link.head] += class_flows[li];
        }
        let block = &ps.blocks[ci];
        let demand: f64 = x[block.range()].iter().sum();
        for (ni, node) in net.nodes.iter().enumerate() {
            let expected = match node.kind {
                NodeKind::OriginCentroid { .. } => {
                    if node.id == block.origin {
                        -demand
                    } else {
                        0.0
                    }
                }
                NodeKind::DestCentroid { .. } => {
                    if node.id == block.destination {
                        demand
                    } else {
                        0.0
                    }
                }
                _ => 0.0,
            };
            worst = worst.max((net_flow[ni] - expected).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::load_scenario_str;
    use crate::supernet::build_supernetwork;

    /// Two-leg tour, three freely interchangeable modes.
    fn three_mode_scenario() -> &'static str {
        r#"{
            "locations": ["H", "L1"],
            "modes": [
                {"id": "a", "kind": "other"},
                {"id": "b", "kind": "other"},
                {"id": "c", "kind": "other"}
            ],
            "classes": [{
                "id": "c1",
                "trip_chain": ["H", "L1", "H"],
                "demand": 10.0,
                "allowed_modes": ["a", "b", "c"],
                "unit_costs": {"a": {"main": 1.0}, "b": {"main": 1.0}, "c": {"main": 1.0}}
            }],
            "trip_links": [
                {"from": "H", "to": "L1", "modes": ["a", "b", "c"]},
                {"from": "L1", "to": "H", "modes": ["a", "b", "c"]}
            ],
            "cost_params": {
                "a": {"length_km": 5.0, "times": {"main": {"constant": 0.5}}},
                "b": {"length_km": 5.0, "times": {"main": {"constant": 0.6}}},
                "c": {"length_km": 5.0, "times": {"main": {"constant": 0.7}}}
            }
        }"#
    }

    #[test]
    fn two_leg_three_modes_gives_nine_paths() {
        let cfg = load_scenario_str(three_mode_scenario()).unwrap();
        let net = build_supernetwork(&cfg).unwrap();
        let ps = build_pathset(&net, &cfg).unwrap();
        assert_eq!(ps.total_paths(), 9);
        assert_eq!(ps.blocks.len(), 1);
        assert_eq!(ps.blocks[0].len, 9);
    }

    #[test]
    fn single_mode_single_path() {
        let cfg = load_scenario_str(
            &three_mode_scenario().replace(r#""allowed_modes": ["a", "b", "c"]"#, r#""allowed_modes": ["a"]"#),
        )
        .unwrap();
        let net = build_supernetwork(&cfg).unwrap();
        let ps = build_pathset(&net, &cfg).unwrap();
        assert_eq!(ps.total_paths(), 1);
        // access + 2 mode links + egress
        assert_eq!(ps.paths[0].links.len(), 4);
    }

    #[test]
    fn unit_flow_lands_on_path_links() {
        let cfg = load_scenario_str(three_mode_scenario()).unwrap();
        let net = build_supernetwork(&cfg).unwrap();
        let ps = build_pathset(&net, &cfg).unwrap();
        let mut x = vec![0.0; ps.total_paths()];
        x[3] = 5.0;
        let (_, total) = path_link_flows(&x, &ps).unwrap();
        for (li, f) in total.iter().enumerate() {
            let expected = if ps.paths[3].links.contains(&li) { 5.0 } else { 0.0 };
            assert_eq!(*f, expected, "link {li}");
        }
    }

    #[test]
    fn flows_are_linear() {
        let cfg = load_scenario_str(three_mode_scenario()).unwrap();
        let net = build_supernetwork(&cfg).unwrap();
        let ps = build_pathset(&net, &cfg).unwrap();
        let n = ps.total_paths();
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let y: Vec<f64> = (0..n).map(|i| (n - i) as f64).collect();
        let combo: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 2.0 * a + 3.0 * b).collect();
        let (_, fx) = path_link_flows(&x, &ps).unwrap();
        let (_, fy) = path_link_flows(&y, &ps).unwrap();
        let (_, fc) = path_link_flows(&combo, &ps).unwrap();
        for i in 0..fc.len() {
            assert!((fc[i] - (2.0 * fx[i] + 3.0 * fy[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let cfg = load_scenario_str(three_mode_scenario()).unwrap();
        let net = build_supernetwork(&cfg).unwrap();
        let ps = build_pathset(&net, &cfg).unwrap();
        let err = path_link_flows(&[1.0], &ps).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn conservation_holds_for_feasible_flows() {
        let cfg = load_scenario_str(three_mode_scenario()).unwrap();
        let net = build_supernetwork(&cfg).unwrap();
        let ps = build_pathset(&net, &cfg).unwrap();
        let x = vec![10.0 / 9.0; ps.total_paths()];
        let residual = conservation_residual(&net, &ps, &x).unwrap();
        assert!(residual < 1e-12, "residual {residual}");
    }
}
