//! Bundles a validated configuration with its derived supernetwork, path
//! set and compiled cost model.

use std::collections::BTreeMap;

use crate::cost::CostModel;
use crate::pathset::{build_pathset, PathSet};
use crate::scenario::{FleetVector, ScenarioConfig, SolverConfig};
use crate::supernet::{build_supernetwork, Supernetwork};
use crate::Result;

/// Immutable solve-ready model; safe to share across threads.
#[derive(Debug, Clone)]
pub struct Model {
    pub cfg: ScenarioConfig,
    pub net: Supernetwork,
    pub paths: PathSet,
    pub cost: CostModel,
}

impl Model {
    pub fn build(cfg: &ScenarioConfig) -> Result<Model> {
        let net = build_supernetwork(cfg)?;
        let paths = build_pathset(&net, cfg)?;
        let cost = CostModel::compile(cfg, &net)?;
        Ok(Model {
            cfg: cfg.clone(),
            net,
            paths,
            cost,
        })
    }

    pub fn solver_settings(&self) -> SolverConfig {
        self.cfg.solver.clone()
    }

    /// Fleet spreading `total` vehicles uniformly over the decision links.
    pub fn uniform_fleet(&self, total: f64) -> FleetVector {
        FleetVector::uniform(total, &self.net.fleet_link_ids())
    }

    /// Fleet at the configured lower bound on every decision link.
    pub fn lower_bound_fleet(&self) -> FleetVector {
        let lb = self.cfg.mpec.fleet_lower;
        FleetVector::new(
            self.net
                .fleet_link_ids()
                .into_iter()
                .map(|id| (id, lb))
                .collect(),
        )
    }

    /// Fleet from explicit per-link values; ids must be decision links.
    pub fn fleet_from_map(&self, entries: BTreeMap<String, f64>) -> Result<FleetVector> {
        for id in entries.keys() {
            let idx = self
                .net
                .link_idx(id)
                .ok_or_else(|| crate::Error::InvalidInput(format!("unknown link `{id}`")))?;
            if !self.net.fleet_links.contains(&idx) {
                return Err(crate::Error::InvalidInput(format!(
                    "link `{id}` is not a fleet decision link"
                )));
            }
        }
        let ids = self.net.fleet_link_ids();
        for id in &ids {
            if !entries.contains_key(id) {
                return Err(crate::Error::MissingFleetValue(id.clone()));
            }
        }
        Ok(FleetVector::new(entries))
    }

    /// Dense fleet vector in decision-link order.
    pub fn fleet_to_dense(&self, fleet: &FleetVector) -> Result<Vec<f64>> {
        self.net
            .fleet_link_ids()
            .iter()
            .map(|id| {
                fleet
                    .get(id)
                    .ok_or_else(|| crate::Error::MissingFleetValue(id.clone()))
            })
            .collect()
    }

    /// Fleet vector from dense values in decision-link order.
    pub fn fleet_from_dense(&self, values: &[f64]) -> Result<FleetVector> {
        let ids = self.net.fleet_link_ids();
        if values.len() != ids.len() {
            return Err(crate::Error::DimensionMismatch {
                expected: ids.len(),
                got: values.len(),
            });
        }
        Ok(FleetVector::new(
            ids.into_iter().zip(values.iter().copied()).collect(),
        ))
    }

    pub fn total_demand(&self) -> f64 {
        self.cfg.classes.iter().map(|c| c.demand).sum()
    }
}
