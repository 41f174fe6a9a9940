//! Link and path costs: BPR/constant time functions, class-dependent values
//! of time, traveler-paid tariffs, and the path-cost operator consumed by
//! the equilibrium solver.
//!
//! Every mode-specific link bundles the three stages of a trip: reaching
//! the mode (access walk + wait), riding it (main), and leaving it (park +
//! egress walk). Main travel time may read the aggregate flow of the link's
//! congestion group, which is what makes the model non-separable.

use std::collections::BTreeMap;

use crate::pathset::{path_link_flows, PathSet};
use crate::scenario::{
    CapacitySpec, FleetVector, FlowArgument, ScenarioConfig, TimeFunctionSpec, TimeRole, TIME_ROLES,
};
use crate::supernet::{FleetSource, LinkKind, Supernetwork};
use crate::{Error, Result};

/// A compiled time function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeForm {
    Constant(f64),
    Bpr { t0: f64, alpha: f64, beta: f64 },
}

/// t(flow) in hours. Constant forms ignore both arguments; BPR forms demand
/// a positive capacity.
pub fn eval_time(form: &TimeForm, flow: f64, capacity: f64) -> Result<f64> {
    match *form {
        TimeForm::Constant(t0) => Ok(t0),
        TimeForm::Bpr { t0, alpha, beta } => {
            if !(capacity > 0.0) {
                return Err(Error::NonpositiveCapacity(format!(
                    "BPR with capacity {capacity}"
                )));
            }
            Ok(t0 * (1.0 + alpha * (flow / capacity).powf(beta)))
        }
    }
}

/// ∂t/∂flow of [`eval_time`], used to cross-check against finite differences.
pub fn eval_time_dflow(form: &TimeForm, flow: f64, capacity: f64) -> Result<f64> {
    match *form {
        TimeForm::Constant(_) => Ok(0.0),
        TimeForm::Bpr { t0, alpha, beta } => {
            if !(capacity > 0.0) {
                return Err(Error::NonpositiveCapacity(format!(
                    "BPR with capacity {capacity}"
                )));
            }
            Ok(t0 * alpha * beta * (flow / capacity).powf(beta - 1.0) / capacity)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum CapSource {
    Const(f64),
    LinkFleet,
}

#[derive(Debug, Clone, Copy)]
struct CompiledTf {
    form: TimeForm,
    capacity: CapSource,
    argument: FlowArgument,
}

/// Cost terms of one mode-specific link.
#[derive(Debug, Clone)]
struct LinkTerms {
    /// (user fuel + per-km tariff)·l_a + flat ticket, € per traversal.
    money_flat: f64,
    /// c_{a,h}: operator tariff multiplying the main time.
    tariff_hour: f64,
    times: [Option<CompiledTf>; 5],
}

/// Compiled, immutable cost model over a supernetwork. Pure function of
/// (path flows, fleet); safe to evaluate concurrently.
#[derive(Debug, Clone)]
pub struct CostModel {
    pub n_links: usize,
    pub n_classes: usize,
    terms: Vec<Option<LinkTerms>>,
    /// VOT coefficients [access, wait, main, park, egress] per (class, link).
    class_coeff: Vec<[f64; 5]>,
    /// c_s per subscription; charged once per activating path.
    sub_cost: Vec<f64>,
    group_members: Vec<Vec<usize>>,
    group_of: Vec<Option<usize>>,
    fleet_source: Vec<Option<FleetSource>>,
    link_ids: Vec<String>,
}

impl CostModel {
    pub fn compile(cfg: &ScenarioConfig, net: &Supernetwork) -> Result<CostModel> {
        let n_links = net.n_links();
        let n_classes = net.n_classes();
        let mut terms: Vec<Option<LinkTerms>> = vec![None; n_links];
        let mut class_coeff = vec![[0.0; 5]; n_links * n_classes];

        for (li, link) in net.links.iter().enumerate() {
            if link.kind != LinkKind::ModeSpecific {
                continue;
            }
            let mode = link.mode.expect("mode links carry a mode");
            let mode_id = net.mode_ids[mode].as_str();
            let params = cfg
                .cost_params
                .get(mode_id)
                .ok_or_else(|| Error::InvalidInput(format!("mode `{mode_id}` has no cost_params")))?;
            let mut times: [Option<CompiledTf>; 5] = [None; 5];
            for (slot, role) in TIME_ROLES.iter().enumerate() {
                times[slot] = params.times.get(*role).map(|spec| compile_tf(spec));
            }
            terms[li] = Some(LinkTerms {
                money_flat: (params.fuel_user_per_km + params.tariff_per_km) * link.length_km
                    + params.ticket,
                tariff_hour: params.tariff_per_hour,
                times,
            });
            for (ci, class) in cfg.classes.iter().enumerate() {
                let uc = class.unit_costs.get(mode_id).copied().unwrap_or_default();
                class_coeff[ci * n_links + li] = [uc.access, uc.wait, uc.main, uc.park, uc.egress];
            }
        }

        Ok(CostModel {
            n_links,
            n_classes,
            terms,
            class_coeff,
            sub_cost: cfg.subscriptions.iter().map(|s| s.daily_cost).collect(),
            group_members: net.groups.iter().map(|g| g.members.clone()).collect(),
            group_of: net.links.iter().map(|l| l.group).collect(),
            fleet_source: net.links.iter().map(|l| l.fleet_source).collect(),
            link_ids: net.links.iter().map(|l| l.id.clone()).collect(),
        })
    }

    /// Resolves the per-link capacity feeding fleet-dependent time
    /// functions: the decision variable for optimized links, the stationed
    /// fleet otherwise. NaN marks links without any fleet notion.
    pub fn resolve_fleet(&self, fleet: &FleetVector) -> Result<Vec<f64>> {
        let mut caps = vec![f64::NAN; self.n_links];
        for (li, source) in self.fleet_source.iter().enumerate() {
            caps[li] = match source {
                Some(FleetSource::Fixed(v)) => *v,
                Some(FleetSource::Decision) => fleet
                    .get(&self.link_ids[li])
                    .ok_or_else(|| Error::MissingFleetValue(self.link_ids[li].clone()))?,
                None => f64::NAN,
            };
        }
        Ok(caps)
    }

    /// Stage times of every link at the given total link flows.
    pub fn link_times(&self, total_flows: &[f64], link_caps: &[f64]) -> Result<Vec<[f64; 5]>> {
        let group_flows: Vec<f64> = self
            .group_members
            .iter()
            .map(|members| members.iter().map(|&l| total_flows[l]).sum())
            .collect();
        let mut out = vec![[0.0; 5]; self.n_links];
        for (li, terms) in self.terms.iter().enumerate() {
            let Some(terms) = terms else { continue };
            for slot in 0..5 {
                let Some(tf) = &terms.times[slot] else { continue };
                let flow = match tf.argument {
                    FlowArgument::Own => total_flows[li],
                    FlowArgument::Group => match self.group_of[li] {
                        Some(g) => group_flows[g],
                        None => total_flows[li],
                    },
                };
                let capacity = match tf.capacity {
                    CapSource::Const(c) => c,
                    CapSource::LinkFleet => {
                        let v = link_caps[li];
                        if !(v > 0.0) {
                            return Err(Error::NonpositiveCapacity(self.link_ids[li].clone()));
                        }
                        v
                    }
                };
                out[li][slot] = eval_time(&tf.form, flow, capacity)
                    .map_err(|_| Error::NonpositiveCapacity(self.link_ids[li].clone()))?;
            }
        }
        Ok(out)
    }

    /// C_a^k from precomputed stage times: access/wait + monetary main terms
    /// + value-of-time main + park/egress.
    pub fn link_cost(&self, class: usize, link: usize, times: &[f64; 5]) -> f64 {
        let Some(terms) = &self.terms[link] else {
            return 0.0;
        };
        let coeff = &self.class_coeff[class * self.n_links + link];
        coeff[0] * times[0]
            + coeff[1] * times[1]
            + (terms.tariff_hour + coeff[2]) * times[2]
            + coeff[3] * times[3]
            + coeff[4] * times[4]
            + terms.money_flat
    }

    /// C_a^k directly from link flows and resolved fleet capacities.
    pub fn link_cost_from_flows(
        &self,
        class: usize,
        link: usize,
        total_flows: &[f64],
        link_caps: &[f64],
    ) -> Result<f64> {
        let times = self.link_times(total_flows, link_caps)?;
        Ok(self.link_cost(class, link, &times[link]))
    }

    /// C_p^k = Σ activated subscriptions + Σ constituent link costs.
    pub fn path_cost(&self, ps: &PathSet, path: usize, times: &[[f64; 5]]) -> f64 {
        let p = &ps.paths[path];
        let mut cost: f64 = p.subs.iter().map(|&s| self.sub_cost[s]).sum();
        for &l in &p.links {
            cost += self.link_cost(p.class, l, &times[l]);
        }
        cost
    }

    /// The map C(x, v): path costs for all (class, path), in global path
    /// order. This is the operator the variational inequality and the
    /// projection iteration consume.
    pub fn cost_operator(&self, ps: &PathSet, x: &[f64], link_caps: &[f64]) -> Result<Vec<f64>> {
        let (_, total) = path_link_flows(x, ps)?;
        let times = self.link_times(&total, link_caps)?;
        Ok((0..ps.total_paths())
            .map(|p| self.path_cost(ps, p, &times))
            .collect())
    }

    /// Main-stage time per link at the given flows; used by revenue
    /// evaluation.
    pub fn main_times(&self, total_flows: &[f64], link_caps: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .link_times(total_flows, link_caps)?
            .iter()
            .map(|t| t[2])
            .collect())
    }

    pub fn link_id(&self, link: usize) -> &str {
        &self.link_ids[link]
    }
}

fn compile_tf(spec: &TimeFunctionSpec) -> CompiledTf {
    match spec {
        TimeFunctionSpec::Constant(t0) => CompiledTf {
            form: TimeForm::Constant(*t0),
            capacity: CapSource::Const(1.0),
            argument: FlowArgument::Own,
        },
        TimeFunctionSpec::Bpr(bpr) => CompiledTf {
            form: TimeForm::Bpr {
                t0: bpr.t0,
                alpha: bpr.alpha,
                beta: bpr.beta,
            },
            capacity: match bpr.capacity {
                CapacitySpec::Fixed(c) => CapSource::Const(c),
                CapacitySpec::Keyword(_) => CapSource::LinkFleet,
            },
            argument: bpr.argument,
        },
    }
}

/// Role slot used by [`CostModel::link_times`] output.
pub fn role_slot(role: TimeRole) -> usize {
    TIME_ROLES.iter().position(|r| *r == role).unwrap()
}

/// Convenience view of which subscriptions each path pays, with costs.
pub fn path_subscription_costs(ps: &PathSet, cfg: &ScenarioConfig) -> Vec<f64> {
    let costs: BTreeMap<usize, f64> = cfg
        .subscriptions
        .iter()
        .enumerate()
        .map(|(i, s)| (i, s.daily_cost))
        .collect();
    ps.paths
        .iter()
        .map(|p| p.subs.iter().map(|s| costs[s]).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pathset::build_pathset;
    use crate::scenario::load_scenario_str;
    use crate::supernet::build_supernetwork;

    #[test]
    fn bpr_baseline_and_saturation() {
        let f = TimeForm::Bpr { t0: 0.2, alpha: 4.0, beta: 2.0 };
        assert_eq!(eval_time(&f, 0.0, 250.0).unwrap(), 0.2);
        assert!((eval_time(&f, 250.0, 250.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bus_wait_parameters() {
        let f = TimeForm::Bpr { t0: 0.3, alpha: 0.15, beta: 2.0 };
        assert!((eval_time(&f, 150.0, 150.0).unwrap() - 0.345).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_capacity_is_rejected() {
        let f = TimeForm::Bpr { t0: 0.2, alpha: 4.0, beta: 2.0 };
        assert!(matches!(
            eval_time(&f, 1.0, 0.0),
            Err(Error::NonpositiveCapacity(_))
        ));
    }

    #[test]
    fn bpr_derivative_matches_central_differences() {
        let f = TimeForm::Bpr { t0: 0.15, alpha: 2.5, beta: 4.0 };
        let cap = 120.0;
        for flow in [5.0f64, 40.0, 95.0, 200.0] {
            let h = 1e-4 * flow.max(1.0);
            let fd = (eval_time(&f, flow + h, cap).unwrap()
                - eval_time(&f, flow - h, cap).unwrap())
                / (2.0 * h);
            let grad = eval_time_dflow(&f, flow, cap).unwrap();
            assert!(
                ((fd - grad) / grad).abs() < 1e-6,
                "flow {flow}: fd {fd} vs analytic {grad}"
            );
        }
    }

    /// One shared road leg ridden by two modes in the same congestion
    /// group, plus a third mode on a dedicated lane.
    fn shared_road_scenario() -> &'static str {
        r#"{
            "locations": ["H", "L1"],
            "modes": [
                {"id": "car", "kind": "private_car", "congestion_group": "road"},
                {"id": "pool", "kind": "carpooling", "congestion_group": "road"},
                {"id": "tram", "kind": "train"}
            ],
            "classes": [{
                "id": "c1",
                "trip_chain": ["H", "L1", "H"],
                "demand": 100.0,
                "allowed_modes": ["car", "pool", "tram"],
                "unit_costs": {
                    "car": {"main": 8.0},
                    "pool": {"main": 8.0},
                    "tram": {"main": 8.0}
                }
            }],
            "trip_links": [
                {"from": "H", "to": "L1", "modes": ["car", "pool", "tram"]},
                {"from": "L1", "to": "H", "modes": ["car", "pool", "tram"]}
            ],
            "cost_params": {
                "car": {
                    "length_km": 10.0,
                    "fuel_user_per_km": 0.37,
                    "times": {"main": {"bpr": {"t0": 0.2, "alpha": 4.0, "beta": 2.0, "capacity": 250.0, "argument": "group"}}}
                },
                "pool": {
                    "length_km": 10.0,
                    "times": {"main": {"bpr": {"t0": 0.2, "alpha": 4.0, "beta": 2.0, "capacity": 250.0, "argument": "group"}}}
                },
                "tram": {
                    "length_km": 10.0,
                    "times": {"main": {"constant": 0.4}}
                }
            }
        }"#
    }

    #[test]
    fn zero_flow_car_cost_is_the_constant_floor() {
        let cfg = load_scenario_str(shared_road_scenario()).unwrap();
        let net = build_supernetwork(&cfg).unwrap();
        let model = CostModel::compile(&cfg, &net).unwrap();
        let caps = vec![f64::NAN; net.n_links()];
        let flows = vec![0.0; net.n_links()];
        let car = net.link_idx("ms:car:H>L1").unwrap();
        let cost = model.link_cost_from_flows(0, car, &flows, &caps).unwrap();
        // 8 €/h · 0.2 h free-flow + 0.37 €/km · 10 km
        assert!((cost - (8.0 * 0.2 + 3.7)).abs() < 1e-12);
    }

    #[test]
    fn group_flow_couples_modes_and_dedicated_lane_does_not() {
        let cfg = load_scenario_str(shared_road_scenario()).unwrap();
        let net = build_supernetwork(&cfg).unwrap();
        let model = CostModel::compile(&cfg, &net).unwrap();
        let caps = vec![f64::NAN; net.n_links()];
        let car = net.link_idx("ms:car:H>L1").unwrap();
        let pool = net.link_idx("ms:pool:H>L1").unwrap();
        let tram = net.link_idx("ms:tram:H>L1").unwrap();

        let mut flows = vec![0.0; net.n_links()];
        flows[car] = 100.0;
        let pool_base = model.link_cost_from_flows(0, pool, &flows, &caps).unwrap();
        let tram_base = model.link_cost_from_flows(0, tram, &flows, &caps).unwrap();

        flows[car] = 200.0;
        let pool_bumped = model.link_cost_from_flows(0, pool, &flows, &caps).unwrap();
        let tram_bumped = model.link_cost_from_flows(0, tram, &flows, &caps).unwrap();

        assert!(pool_bumped > pool_base, "shared road must couple modes");
        assert_eq!(tram_bumped, tram_base, "dedicated lane must stay separable");
    }

    #[test]
    fn operator_orders_costs_by_global_path_order() {
        let cfg = load_scenario_str(shared_road_scenario()).unwrap();
        let net = build_supernetwork(&cfg).unwrap();
        let ps = build_pathset(&net, &cfg).unwrap();
        let model = CostModel::compile(&cfg, &net).unwrap();
        let caps = vec![f64::NAN; net.n_links()];
        let x = vec![0.0; ps.total_paths()];
        let costs = model.cost_operator(&ps, &x, &caps).unwrap();
        assert_eq!(costs.len(), ps.total_paths());
        assert!(costs.iter().all(|c| *c > 0.0));
    }
}
