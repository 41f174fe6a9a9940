//! Mobility-service-provider economics: revenue and cost decomposition of
//! one provider at an equilibrium solution.

use crate::equilibrium::EquilibriumSolution;
use crate::model::Model;
use crate::pathset::subscriber_counts;
use crate::scenario::{ComponentMask, FleetVector, ShareAmount, VcForm};
use crate::supernet::{FleetSource, LinkKind};
use crate::{Error, Result};

/// One provider's owned links, tariffs and operating-cost parameters,
/// assembled from the modes it runs.
#[derive(Debug, Clone)]
pub struct MspSpec {
    pub id: String,
    /// Mode indices operated by this provider.
    pub owned_modes: Vec<usize>,
    /// Mode-specific link indices of the owned modes.
    pub owned_links: Vec<usize>,
    /// €/subscriber this provider collects per subscription.
    pub sub_share: Vec<(usize, f64)>,
    link_econ: Vec<LinkEcon>,
    lease: Vec<LeaseTerm>,
}

#[derive(Debug, Clone)]
struct LinkEcon {
    link: usize,
    tariff_hour: f64,
    tariff_km: f64,
    ticket: f64,
    length_km: f64,
    fuel_per_km: f64,
    gamma: f64,
    vc_form: VcForm,
    mask: ComponentMask,
}

#[derive(Debug, Clone)]
struct LeaseTerm {
    rate: f64,
    links: Vec<usize>,
    enabled: bool,
}

/// €/day profit decomposition. `profit` is exactly
/// `fixed_revenue + variable_revenue - fixed_cost - variable_cost`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfitBreakdown {
    pub fixed_revenue: f64,
    pub variable_revenue: f64,
    pub fixed_cost: f64,
    pub variable_cost: f64,
    pub profit: f64,
}

impl ProfitBreakdown {
    fn assemble(fr: f64, vr: f64, fc: f64, vc: f64) -> ProfitBreakdown {
        ProfitBreakdown {
            fixed_revenue: fr,
            variable_revenue: vr,
            fixed_cost: fc,
            variable_cost: vc,
            profit: fr + vr - fc - vc,
        }
    }
}

/// Collects the provider's owned links, tariffs, lease terms and
/// subscription shares from the scenario.
pub fn assemble(model: &Model, msp_id: &str) -> Result<MspSpec> {
    let cfg = &model.cfg;
    let net = &model.net;
    let owned_modes: Vec<usize> = cfg
        .modes
        .iter()
        .enumerate()
        .filter(|(_, m)| m.owner_msp.as_deref() == Some(msp_id))
        .map(|(i, _)| i)
        .collect();
    if owned_modes.is_empty() {
        return Err(Error::UnknownMsp(msp_id.to_string()));
    }

    let mut owned_links = Vec::new();
    let mut link_econ = Vec::new();
    let mut lease = Vec::new();
    for &mi in &owned_modes {
        let mode = &cfg.modes[mi];
        let params = cfg
            .cost_params
            .get(&mode.id)
            .ok_or_else(|| Error::InvalidInput(format!("mode `{}` has no cost_params", mode.id)))?;
        let msp_params = params.msp.clone().unwrap_or_default();
        let mask = msp_params
            .components
            .unwrap_or_else(|| ComponentMask::for_kind(mode.kind));
        let gamma = if mask.relocation {
            msp_params.relocation_factor
        } else {
            0.0
        };
        let mut mode_links = Vec::new();
        for (li, link) in net.links.iter().enumerate() {
            if link.kind == LinkKind::ModeSpecific && link.mode == Some(mi) {
                owned_links.push(li);
                mode_links.push(li);
                link_econ.push(LinkEcon {
                    link: li,
                    tariff_hour: if mask.tariff_hour { params.tariff_per_hour } else { 0.0 },
                    tariff_km: if mask.tariff_km { params.tariff_per_km } else { 0.0 },
                    ticket: if mask.ticket { params.ticket } else { 0.0 },
                    length_km: link.length_km,
                    fuel_per_km: msp_params.fuel_per_km,
                    gamma,
                    vc_form: msp_params.vc_form,
                    mask,
                });
            }
        }
        lease.push(LeaseTerm {
            rate: msp_params.lease_per_vehicle,
            links: mode_links,
            enabled: mask.lease,
        });
    }

    // Per-subscriber € this provider collects from each subscription.
    let mut sub_share = Vec::new();
    for (si, sub) in cfg.subscriptions.iter().enumerate() {
        let pool_for = |mask: &ComponentMask| {
            let fee = if mask.subscription_fee { sub.daily_cost } else { 0.0 };
            let subsidy = if mask.subsidy { sub.daily_subsidy } else { 0.0 };
            fee + subsidy
        };
        let member_owner_mask = || -> Option<ComponentMask> {
            let owners: std::collections::BTreeSet<&str> = sub
                .member_modes
                .iter()
                .filter_map(|m| {
                    cfg.modes
                        .iter()
                        .find(|md| md.id == *m)
                        .and_then(|md| md.owner_msp.as_deref())
                })
                .collect();
            if owners.len() == 1 && owners.contains(msp_id) {
                let mi = owned_modes[0];
                let params = cfg.cost_params.get(&cfg.modes[mi].id)?;
                Some(
                    params
                        .msp
                        .as_ref()
                        .and_then(|m| m.components)
                        .unwrap_or_else(|| ComponentMask::for_kind(cfg.modes[mi].kind)),
                )
            } else {
                None
            }
        };
        match &sub.revenue_allocation {
            Some(alloc) => {
                let fixed_total: f64 = alloc
                    .iter()
                    .filter_map(|s| match s.amount {
                        ShareAmount::Fixed(v) => Some(v),
                        ShareAmount::Keyword(_) => None,
                    })
                    .sum();
                for share in alloc {
                    if share.msp != msp_id {
                        continue;
                    }
                    let amount = match share.amount {
                        ShareAmount::Fixed(v) => v,
                        ShareAmount::Keyword(_) => {
                            (sub.daily_cost + sub.daily_subsidy - fixed_total).max(0.0)
                        }
                    };
                    sub_share.push((si, amount));
                }
            }
            None => {
                if let Some(mask) = member_owner_mask() {
                    let pool = pool_for(&mask);
                    if pool != 0.0 {
                        sub_share.push((si, pool));
                    }
                } else if sub
                    .member_modes
                    .iter()
                    .any(|m| owned_modes.iter().any(|&mi| cfg.modes[mi].id == *m))
                {
                    return Err(Error::InvalidInput(format!(
                        "subscription `{}` spans several providers and needs an explicit revenue_allocation",
                        sub.id
                    )));
                }
            }
        }
    }

    Ok(MspSpec {
        id: msp_id.to_string(),
        owned_modes,
        owned_links,
        sub_share,
        link_econ,
        lease,
    })
}

/// FR: subscription fees plus subsidies, per daily subscriber.
pub fn fixed_revenue(spec: &MspSpec, model: &Model, sol: &EquilibriumSolution) -> Result<f64> {
    let counts = subscriber_counts(&sol.x, &model.paths, model.cfg.subscriptions.len())?;
    Ok(spec
        .sub_share
        .iter()
        .map(|&(si, amount)| amount * counts[si])
        .sum())
}

/// VR: usage-based revenue on the owned links, with the on-board time
/// evaluated at the equilibrium flows (group flow where non-separable).
pub fn variable_revenue(
    spec: &MspSpec,
    model: &Model,
    sol: &EquilibriumSolution,
    fleet: &FleetVector,
) -> Result<f64> {
    let caps = model.cost.resolve_fleet(fleet)?;
    let main_times = model.cost.main_times(&sol.link_flows, &caps)?;
    Ok(spec
        .link_econ
        .iter()
        .map(|e| {
            let flow = sol.link_flows[e.link];
            (e.tariff_hour * main_times[e.link] + e.tariff_km * e.length_km + e.ticket) * flow
        })
        .sum())
}

/// FC: lease cost of all vehicles the provider deploys, decision-variable
/// and stationed alike.
pub fn fixed_cost(spec: &MspSpec, model: &Model, fleet: &FleetVector) -> Result<f64> {
    let mut total = 0.0;
    for term in &spec.lease {
        if !term.enabled || term.rate == 0.0 {
            continue;
        }
        let mut vehicles = 0.0;
        for &li in &term.links {
            vehicles += match model.net.links[li].fleet_source {
                Some(FleetSource::Fixed(v)) => v,
                Some(FleetSource::Decision) => fleet
                    .get(&model.net.links[li].id)
                    .ok_or_else(|| Error::MissingFleetValue(model.net.links[li].id.clone()))?,
                None => 0.0,
            };
        }
        total += term.rate * vehicles;
    }
    Ok(total)
}

/// VC: distance-based operating cost with the relocation surcharge.
pub fn variable_cost(spec: &MspSpec, sol: &EquilibriumSolution) -> f64 {
    spec.link_econ
        .iter()
        .map(|e| {
            let base = e.fuel_per_km * e.length_km;
            let flat = if e.mask.fuel_flat { 1.0 } else { 0.0 };
            let per_user = if e.mask.fuel_per_user { 1.0 } else { 0.0 };
            let flow = sol.link_flows[e.link];
            match e.vc_form {
                // The verbatim form keeps its (1 + f_a) factor whenever any
                // fuel component applies to the mode.
                VcForm::Eq5 if flat + per_user > 0.0 => {
                    base * (1.0 + flow) * (1.0 + e.gamma)
                }
                VcForm::Eq5 => 0.0,
                VcForm::Table2 => base * flat + base * per_user * flow * (1.0 + e.gamma),
            }
        })
        .sum()
}

/// Full breakdown; the identity Pr = FR + VR − FC − VC holds bit-exactly.
pub fn profit(
    spec: &MspSpec,
    model: &Model,
    sol: &EquilibriumSolution,
    fleet: &FleetVector,
) -> Result<ProfitBreakdown> {
    let fr = fixed_revenue(spec, model, sol)?;
    let vr = variable_revenue(spec, model, sol, fleet)?;
    let fc = fixed_cost(spec, model, fleet)?;
    let vc = variable_cost(spec, sol);
    Ok(ProfitBreakdown::assemble(fr, vr, fc, vc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::solve_ue;
    use crate::scenario::load_scenario_str;

    /// One shared-ride mode with a subscription, fleet capacity and tariffs.
    fn operator_scenario() -> &'static str {
        r#"{
            "locations": ["H", "L1"],
            "modes": [{"id": "share", "kind": "car_sharing_one_way", "owner_msp": "op"}],
            "subscriptions": [{
                "id": "pass", "daily_cost": 2.0, "member_modes": ["share"]
            }],
            "classes": [{
                "id": "c1",
                "trip_chain": ["H", "L1", "H"],
                "demand": 100.0,
                "allowed_modes": ["share"],
                "unit_costs": {"share": {"main": 8.0, "access": 8.0, "wait": 8.0, "egress": 8.0}}
            }],
            "trip_links": [
                {"from": "H", "to": "L1", "modes": ["share"]},
                {"from": "L1", "to": "H", "modes": ["share"]}
            ],
            "cost_params": {
                "share": {
                    "length_km": 10.0,
                    "tariff_per_hour": 0.6,
                    "tariff_per_km": 0.6,
                    "msp": {"fuel_per_km": 0.3, "lease_per_vehicle": 6.0, "relocation_factor": 0.1},
                    "times": {
                        "access": {"bpr": {"t0": 0.0125, "alpha": 0.15, "beta": 4.0, "capacity": "fleet"}},
                        "main": {"constant": 0.2}
                    }
                }
            },
            "mpec": {"optimized_msp": "op"}
        }"#
    }

    fn solved() -> (Model, EquilibriumSolution, FleetVector, MspSpec) {
        let cfg = load_scenario_str(operator_scenario()).unwrap();
        let model = Model::build(&cfg).unwrap();
        let fleet = model.uniform_fleet(72.0);
        let sol = solve_ue(&model, &fleet, &model.solver_settings()).unwrap();
        let spec = assemble(&model, "op").unwrap();
        (model, sol, fleet, spec)
    }

    #[test]
    fn subscriber_revenue_counts_each_traveler_once() {
        let (model, sol, _, spec) = solved();
        // Single mode: every traveler subscribes exactly once.
        let fr = fixed_revenue(&spec, &model, &sol).unwrap();
        assert!((fr - 2.0 * 100.0).abs() < 1e-9, "fr = {fr}");
    }

    #[test]
    fn usage_revenue_at_fixed_times() {
        let (model, sol, fleet, spec) = solved();
        // Two links, all 100 travelers on each: (0.6*0.2 + 0.6*10) * 100 * 2.
        let vr = variable_revenue(&spec, &model, &sol, &fleet).unwrap();
        assert!((vr - 2.0 * (0.6 * 0.2 + 6.0) * 100.0).abs() < 1e-9, "vr = {vr}");
    }

    #[test]
    fn lease_cost_is_rate_times_vehicles() {
        let (model, _, fleet, spec) = solved();
        let fc = fixed_cost(&spec, &model, &fleet).unwrap();
        assert!((fc - 6.0 * 72.0).abs() < 1e-9, "fc = {fc}");
    }

    #[test]
    fn variable_cost_follows_the_printed_form() {
        let (model, sol, fleet, spec) = solved();
        // Per link: 0.3*10*(1+100)*1.1, two links.
        let vc = variable_cost(&spec, &sol);
        assert!((vc - 2.0 * 3.0 * 101.0 * 1.1).abs() < 1e-9, "vc = {vc}");
        let breakdown = profit(&spec, &model, &sol, &fleet).unwrap();
        let identity = breakdown.fixed_revenue + breakdown.variable_revenue
            - breakdown.fixed_cost
            - breakdown.variable_cost;
        assert_eq!(breakdown.profit, identity);
    }

    #[test]
    fn relocation_without_fuel_costs_nothing() {
        let (model, sol, fleet, _) = solved();
        let mut cfg = model.cfg.clone();
        let params = cfg.cost_params.get_mut("share").unwrap();
        params.msp.as_mut().unwrap().fuel_per_km = 0.0;
        let model2 = Model::build(&cfg).unwrap();
        let spec2 = assemble(&model2, "op").unwrap();
        assert_eq!(variable_cost(&spec2, &sol), 0.0);
        let _ = fleet;
    }
}
