//! Supernetwork expansion: classes' trip chains and modal layers become a
//! multi-layer directed graph of access, mode-specific, interchange and
//! subscription links.
//!
//! Mode-specific links are keyed physically by (mode, from, to), so classes
//! whose chains traverse the same directed leg share one link and their
//! flows aggregate on it. Subscriptions unlocking a single mode ride on the
//! access and interchange links entering that mode; subscriptions bundling
//! several modes get a dedicated gateway: one zero-length subscription link
//! from the origin centroid into the bundle, from which the member layers
//! are reached. Bundled modes interchange only among themselves.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::scenario::{ScenarioConfig, TimeFunctionSpec, TIME_ROLES};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum LinkKind {
    Access,
    Egress,
    ModeSpecific,
    Interchange,
    Subscription,
}

impl fmt::Display for LinkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LinkKind::Access => "access",
            LinkKind::Egress => "egress",
            LinkKind::ModeSpecific => "mode",
            LinkKind::Interchange => "interchange",
            LinkKind::Subscription => "subscription",
        };
        f.write_str(s)
    }
}

/// Where a mode-specific link's service capacity comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FleetSource {
    /// Vehicles stationed on the link, fixed in the scenario.
    Fixed(f64),
    /// The upper-level decision variable v_a.
    Decision,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum NodeKind {
    /// Departure side of a home centroid.
    OriginCentroid { loc: usize },
    /// Arrival side of a home centroid.
    DestCentroid { loc: usize },
    /// A location inside one modal layer.
    Modal { loc: usize, mode: usize },
    /// Entry point of a multi-mode subscription bundle.
    Gateway { loc: usize, sub: usize },
}

#[derive(Debug, Clone)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
}

#[derive(Debug, Clone)]
pub struct LinkRecord {
    pub id: String,
    pub kind: LinkKind,
    pub tail: usize,
    pub head: usize,
    pub mode: Option<usize>,
    pub length_km: f64,
    pub subscription: Option<usize>,
    pub fleet_source: Option<FleetSource>,
    /// Directed base-network leg for mode-specific links.
    pub leg: Option<(usize, usize)>,
    /// Congestion-group index for mode-specific links.
    pub group: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct CongestionGroup {
    pub id: String,
    pub members: Vec<usize>,
}

/// Per-class, per-leg view used by path enumeration: the (mode, link)
/// choices available on each consecutive location pair of the chain.
#[derive(Debug, Clone)]
pub struct ClassLeg {
    pub from: usize,
    pub to: usize,
    /// Sorted by mode index.
    pub mode_links: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct Supernetwork {
    pub nodes: Vec<Node>,
    pub links: Vec<LinkRecord>,
    pub groups: Vec<CongestionGroup>,
    pub loc_ids: Vec<String>,
    pub mode_ids: Vec<String>,
    pub sub_ids: Vec<String>,
    pub class_ids: Vec<String>,
    /// Subscription unlocking each mode, if any.
    pub sub_of_mode: Vec<Option<usize>>,
    /// Links usable by each class.
    pub class_links: Vec<BTreeSet<usize>>,
    pub class_legs: Vec<Vec<ClassLeg>>,
    /// Mode-specific links whose capacity is the decision variable, sorted.
    pub fleet_links: Vec<usize>,
    link_index: BTreeMap<String, usize>,
    access_links: BTreeMap<(usize, usize), usize>,
    gateway_links: BTreeMap<(usize, usize), usize>,
    gateway_access_links: BTreeMap<(usize, usize), usize>,
    interchange_links: BTreeMap<(usize, usize, usize), usize>,
    egress_links: BTreeMap<(usize, usize), usize>,
}

/// Deterministic construction key. The derived order (kind first, then
/// location and mode indices) fixes the link numbering for byte-identical
/// rebuilds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum LinkKey {
    Subscription { home: usize, sub: usize },
    Access { home: usize, mode: usize, gateway: Option<usize> },
    ModeSpecific { from: usize, to: usize, mode: usize },
    Interchange { loc: usize, from_mode: usize, to_mode: usize },
    Egress { home: usize, mode: usize },
}

/// Interchange compatibility: modes of a multi-mode bundle stay inside it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Domain {
    Open,
    Bundle(usize),
}

impl Supernetwork {
    pub fn n_links(&self) -> usize {
        self.links.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_ids.len()
    }

    pub fn link_idx(&self, id: &str) -> Option<usize> {
        self.link_index.get(id).copied()
    }

    pub fn mode_link(&self, from: usize, to: usize, mode: usize) -> Option<usize> {
        self.link_index
            .get(&mode_link_id(&self.loc_ids, &self.mode_ids, from, to, mode))
            .copied()
    }

    pub fn access_link(&self, home: usize, mode: usize) -> Option<usize> {
        self.access_links.get(&(home, mode)).copied()
    }

    pub fn gateway_link(&self, home: usize, sub: usize) -> Option<usize> {
        self.gateway_links.get(&(home, sub)).copied()
    }

    pub fn gateway_access_link(&self, home: usize, mode: usize) -> Option<usize> {
        self.gateway_access_links.get(&(home, mode)).copied()
    }

    pub fn interchange_link(&self, loc: usize, from_mode: usize, to_mode: usize) -> Option<usize> {
        self.interchange_links.get(&(loc, from_mode, to_mode)).copied()
    }

    pub fn egress_link(&self, home: usize, mode: usize) -> Option<usize> {
        self.egress_links.get(&(home, mode)).copied()
    }

    /// Link ids usable by each class, keyed by class id.
    pub fn class_subgraph(&self) -> BTreeMap<String, BTreeSet<String>> {
        self.class_ids
            .iter()
            .zip(&self.class_links)
            .map(|(cid, links)| {
                (
                    cid.clone(),
                    links.iter().map(|&l| self.links[l].id.clone()).collect(),
                )
            })
            .collect()
    }

    /// Ids of the decision-variable fleet links, in deterministic order.
    pub fn fleet_link_ids(&self) -> Vec<String> {
        self.fleet_links
            .iter()
            .map(|&l| self.links[l].id.clone())
            .collect()
    }
}

fn mode_link_id(locs: &[String], modes: &[String], from: usize, to: usize, mode: usize) -> String {
    format!("ms:{}:{}>{}", modes[mode], locs[from], locs[to])
}

/// Expands a validated scenario into the supernetwork.
pub fn build_supernetwork(cfg: &ScenarioConfig) -> Result<Supernetwork> {
    let loc_ids: Vec<String> = cfg.locations.clone();
    let mode_ids: Vec<String> = cfg.modes.iter().map(|m| m.id.clone()).collect();
    let sub_ids: Vec<String> = cfg.subscriptions.iter().map(|s| s.id.clone()).collect();
    let class_ids: Vec<String> = cfg.classes.iter().map(|k| k.id.clone()).collect();

    let loc_idx: BTreeMap<&str, usize> = loc_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mode_idx: BTreeMap<&str, usize> = mode_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();

    let mut sub_of_mode: Vec<Option<usize>> = vec![None; mode_ids.len()];
    for (si, sub) in cfg.subscriptions.iter().enumerate() {
        for m in &sub.member_modes {
            if let Some(&mi) = mode_idx.get(m.as_str()) {
                sub_of_mode[mi] = Some(si);
            }
        }
    }
    let domain_of_mode: Vec<Domain> = (0..mode_ids.len())
        .map(|mi| match sub_of_mode[mi] {
            Some(si) if cfg.subscriptions[si].member_modes.len() > 1 => Domain::Bundle(si),
            _ => Domain::Open,
        })
        .collect();

    // Whether a mode's time functions draw capacity from the fleet.
    let uses_fleet: BTreeMap<&str, bool> = cfg
        .cost_params
        .iter()
        .map(|(m, p)| {
            let uses = TIME_ROLES.iter().any(|&r| {
                matches!(p.times.get(r), Some(TimeFunctionSpec::Bpr(b)) if b.capacity.is_fleet())
            });
            (m.as_str(), uses)
        })
        .collect();

    let leg_entry: BTreeMap<(usize, usize), &crate::scenario::TripLeg> = cfg
        .trip_links
        .iter()
        .map(|leg| ((loc_idx[leg.from.as_str()], loc_idx[leg.to.as_str()]), leg))
        .collect();

    // Gather link keys and the per-class usable sets.
    let mut keys: BTreeSet<LinkKey> = BTreeSet::new();
    let mut class_keys: Vec<BTreeSet<LinkKey>> = vec![BTreeSet::new(); class_ids.len()];
    let mut class_leg_modes: Vec<Vec<(usize, usize, Vec<usize>)>> = Vec::with_capacity(class_ids.len());

    for (ci, class) in cfg.classes.iter().enumerate() {
        let allowed: BTreeSet<usize> = class
            .allowed_modes
            .iter()
            .filter_map(|m| mode_idx.get(m.as_str()).copied())
            .collect();
        let mut legs_here: Vec<(usize, usize, Vec<usize>)> = Vec::new();
        for (from, to) in class.legs() {
            let (fi, ti) = (loc_idx[from], loc_idx[to]);
            let entry = leg_entry.get(&(fi, ti)).ok_or_else(|| {
                Error::InvalidInput(format!("no trip_links entry for leg {from}->{to}"))
            })?;
            let leg_modes: Vec<usize> = entry
                .modes
                .mode_ids()
                .iter()
                .filter_map(|m| mode_idx.get(*m).copied())
                .filter(|mi| allowed.contains(mi))
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            if leg_modes.is_empty() {
                return Err(Error::EmptyModeSet {
                    class: class.id.clone(),
                    from: from.to_string(),
                    to: to.to_string(),
                });
            }
            for &mi in &leg_modes {
                let key = LinkKey::ModeSpecific { from: fi, to: ti, mode: mi };
                keys.insert(key);
                class_keys[ci].insert(key);
            }
            legs_here.push((fi, ti, leg_modes));
        }

        let home = loc_idx[class.trip_chain[0].as_str()];
        // Access side: first-leg modes.
        for &mi in &legs_here[0].2 {
            match domain_of_mode[mi] {
                Domain::Bundle(si) => {
                    for key in [
                        LinkKey::Subscription { home, sub: si },
                        LinkKey::Access { home, mode: mi, gateway: Some(si) },
                    ] {
                        keys.insert(key);
                        class_keys[ci].insert(key);
                    }
                }
                Domain::Open => {
                    let key = LinkKey::Access { home, mode: mi, gateway: None };
                    keys.insert(key);
                    class_keys[ci].insert(key);
                }
            }
        }
        // Interchanges at every intermediate chain location, between all
        // compatible mode pairs present on the adjoining legs.
        for w in legs_here.windows(2) {
            let loc = w[0].1;
            for &m1 in &w[0].2 {
                for &m2 in &w[1].2 {
                    if m1 == m2 || domain_of_mode[m1] != domain_of_mode[m2] {
                        continue;
                    }
                    let key = LinkKey::Interchange { loc, from_mode: m1, to_mode: m2 };
                    keys.insert(key);
                    class_keys[ci].insert(key);
                }
            }
        }
        // Egress side: last-leg modes.
        for &mi in &legs_here[legs_here.len() - 1].2 {
            let key = LinkKey::Egress { home, mode: mi };
            keys.insert(key);
            class_keys[ci].insert(key);
        }
        class_leg_modes.push(legs_here);
    }

    // Materialize nodes.
    let mut node_keys: BTreeSet<NodeKind> = BTreeSet::new();
    for key in &keys {
        match *key {
            LinkKey::Subscription { home, sub } => {
                node_keys.insert(NodeKind::OriginCentroid { loc: home });
                node_keys.insert(NodeKind::Gateway { loc: home, sub });
            }
            LinkKey::Access { home, mode, gateway } => {
                if let Some(sub) = gateway {
                    node_keys.insert(NodeKind::Gateway { loc: home, sub });
                } else {
                    node_keys.insert(NodeKind::OriginCentroid { loc: home });
                }
                node_keys.insert(NodeKind::Modal { loc: home, mode });
            }
            LinkKey::ModeSpecific { from, to, mode } => {
                node_keys.insert(NodeKind::Modal { loc: from, mode });
                node_keys.insert(NodeKind::Modal { loc: to, mode });
            }
            LinkKey::Interchange { loc, from_mode, to_mode } => {
                node_keys.insert(NodeKind::Modal { loc, mode: from_mode });
                node_keys.insert(NodeKind::Modal { loc, mode: to_mode });
            }
            LinkKey::Egress { home, mode } => {
                node_keys.insert(NodeKind::Modal { loc: home, mode });
                node_keys.insert(NodeKind::DestCentroid { loc: home });
            }
        }
    }
    let nodes: Vec<Node> = node_keys
        .into_iter()
        .map(|kind| Node {
            id: node_id(&loc_ids, &mode_ids, &sub_ids, kind),
            kind,
        })
        .collect();
    let node_of: BTreeMap<NodeKind, usize> =
        nodes.iter().enumerate().map(|(i, n)| (n.kind, i)).collect();

    // Materialize links in key order.
    let optimized_msp = cfg.mpec.optimized_msp.as_deref();
    let mut links: Vec<LinkRecord> = Vec::with_capacity(keys.len());
    let mut link_of_key: BTreeMap<LinkKey, usize> = BTreeMap::new();
    for key in &keys {
        let idx = links.len();
        let record = match *key {
            LinkKey::Subscription { home, sub } => LinkRecord {
                id: format!("sub:{}:{}", loc_ids[home], sub_ids[sub]),
                kind: LinkKind::Subscription,
                tail: node_of[&NodeKind::OriginCentroid { loc: home }],
                head: node_of[&NodeKind::Gateway { loc: home, sub }],
                mode: None,
                length_km: 0.0,
                subscription: Some(sub),
                fleet_source: None,
                leg: None,
                group: None,
            },
            LinkKey::Access { home, mode, gateway } => LinkRecord {
                id: match gateway {
                    Some(sub) => format!("acc:{}:{}@{}", loc_ids[home], sub_ids[sub], mode_ids[mode]),
                    None => format!("acc:{}@{}", loc_ids[home], mode_ids[mode]),
                },
                kind: LinkKind::Access,
                tail: match gateway {
                    Some(sub) => node_of[&NodeKind::Gateway { loc: home, sub }],
                    None => node_of[&NodeKind::OriginCentroid { loc: home }],
                },
                head: node_of[&NodeKind::Modal { loc: home, mode }],
                mode: Some(mode),
                length_km: 0.0,
                subscription: if gateway.is_some() { None } else { sub_of_mode[mode] },
                fleet_source: None,
                leg: None,
                group: None,
            },
            LinkKey::ModeSpecific { from, to, mode } => {
                let entry = leg_entry[&(from, to)];
                let mode_id = mode_ids[mode].as_str();
                let params = cfg.cost_params.get(mode_id).ok_or_else(|| {
                    Error::InvalidInput(format!("mode `{mode_id}` has no cost_params"))
                })?;
                let ov = entry.modes.override_for(mode_id);
                let length = ov.and_then(|o| o.length_km).unwrap_or(params.length_km);
                let fleet_source = if *uses_fleet.get(mode_id).unwrap_or(&false) {
                    match ov.and_then(|o| o.fixed_fleet) {
                        Some(v) => Some(FleetSource::Fixed(v)),
                        None => {
                            let owner = cfg.modes[mode].owner_msp.as_deref();
                            if owner.is_some() && owner == optimized_msp {
                                Some(FleetSource::Decision)
                            } else {
                                return Err(Error::InvalidInput(format!(
                                    "fleet capacity unresolved on leg {}->{} for mode `{mode_id}`",
                                    loc_ids[from], loc_ids[to]
                                )));
                            }
                        }
                    }
                } else {
                    ov.and_then(|o| o.fixed_fleet).map(FleetSource::Fixed)
                };
                LinkRecord {
                    id: mode_link_id(&loc_ids, &mode_ids, from, to, mode),
                    kind: LinkKind::ModeSpecific,
                    tail: node_of[&NodeKind::Modal { loc: from, mode }],
                    head: node_of[&NodeKind::Modal { loc: to, mode }],
                    mode: Some(mode),
                    length_km: length,
                    subscription: None,
                    fleet_source,
                    leg: Some((from, to)),
                    group: None,
                }
            }
            LinkKey::Interchange { loc, from_mode, to_mode } => LinkRecord {
                id: format!(
                    "ich:{}:{}>{}",
                    loc_ids[loc], mode_ids[from_mode], mode_ids[to_mode]
                ),
                kind: LinkKind::Interchange,
                tail: node_of[&NodeKind::Modal { loc, mode: from_mode }],
                head: node_of[&NodeKind::Modal { loc, mode: to_mode }],
                mode: Some(to_mode),
                length_km: 0.0,
                subscription: match domain_of_mode[to_mode] {
                    Domain::Bundle(_) => None,
                    Domain::Open => sub_of_mode[to_mode],
                },
                fleet_source: None,
                leg: None,
                group: None,
            },
            LinkKey::Egress { home, mode } => LinkRecord {
                id: format!("egr:{}@{}", loc_ids[home], mode_ids[mode]),
                kind: LinkKind::Egress,
                tail: node_of[&NodeKind::Modal { loc: home, mode }],
                head: node_of[&NodeKind::DestCentroid { loc: home }],
                mode: Some(mode),
                length_km: 0.0,
                subscription: None,
                fleet_source: None,
                leg: None,
                group: None,
            },
        };
        link_of_key.insert(*key, idx);
        links.push(record);
    }

    // Congestion groups: mode-specific links partitioned by (leg, declared
    // group); undeclared modes form singletons.
    let mut group_map: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (li, link) in links.iter().enumerate() {
        if link.kind != LinkKind::ModeSpecific {
            continue;
        }
        let (from, to) = link.leg.expect("mode links carry a leg");
        let mode = link.mode.expect("mode links carry a mode");
        let gid = match &cfg.modes[mode].congestion_group {
            Some(g) => format!("{g}@{}>{}", loc_ids[from], loc_ids[to]),
            None => format!("own@{}", link.id),
        };
        group_map.entry(gid).or_default().push(li);
    }
    let mut groups: Vec<CongestionGroup> = Vec::with_capacity(group_map.len());
    for (gid, members) in group_map {
        for &li in &members {
            links[li].group = Some(groups.len());
        }
        groups.push(CongestionGroup { id: gid, members });
    }

    let class_links: Vec<BTreeSet<usize>> = class_keys
        .iter()
        .map(|keys| keys.iter().map(|k| link_of_key[k]).collect())
        .collect();

    let class_legs: Vec<Vec<ClassLeg>> = class_leg_modes
        .iter()
        .map(|legs| {
            legs.iter()
                .map(|(from, to, modes)| ClassLeg {
                    from: *from,
                    to: *to,
                    mode_links: modes
                        .iter()
                        .map(|&mi| {
                            (mi, link_of_key[&LinkKey::ModeSpecific { from: *from, to: *to, mode: mi }])
                        })
                        .collect(),
                })
                .collect()
        })
        .collect();

    let fleet_links: Vec<usize> = links
        .iter()
        .enumerate()
        .filter(|(_, l)| matches!(l.fleet_source, Some(FleetSource::Decision)))
        .map(|(i, _)| i)
        .collect();

    let link_index: BTreeMap<String, usize> =
        links.iter().enumerate().map(|(i, l)| (l.id.clone(), i)).collect();
    let mut access_links = BTreeMap::new();
    let mut gateway_links = BTreeMap::new();
    let mut gateway_access_links = BTreeMap::new();
    let mut interchange_links = BTreeMap::new();
    let mut egress_links = BTreeMap::new();
    for (key, &idx) in &link_of_key {
        match *key {
            LinkKey::Access { home, mode, gateway } => {
                if gateway.is_some() {
                    gateway_access_links.insert((home, mode), idx);
                } else {
                    access_links.insert((home, mode), idx);
                }
            }
            LinkKey::Subscription { home, sub } => {
                gateway_links.insert((home, sub), idx);
            }
            LinkKey::Interchange { loc, from_mode, to_mode } => {
                interchange_links.insert((loc, from_mode, to_mode), idx);
            }
            LinkKey::Egress { home, mode } => {
                egress_links.insert((home, mode), idx);
            }
            LinkKey::ModeSpecific { .. } => {}
        }
    }

    Ok(Supernetwork {
        nodes,
        links,
        groups,
        loc_ids,
        mode_ids,
        sub_ids,
        class_ids,
        sub_of_mode,
        class_links,
        class_legs,
        fleet_links,
        link_index,
        access_links,
        gateway_links,
        gateway_access_links,
        interchange_links,
        egress_links,
    })
}

fn node_id(locs: &[String], modes: &[String], subs: &[String], kind: NodeKind) -> String {
    match kind {
        NodeKind::OriginCentroid { loc } => format!("{}:o", locs[loc]),
        NodeKind::DestCentroid { loc } => format!("{}:d", locs[loc]),
        NodeKind::Modal { loc, mode } => format!("{}@{}", locs[loc], modes[mode]),
        NodeKind::Gateway { loc, sub } => format!("{}:gw:{}", locs[loc], subs[sub]),
    }
}

/// Partitions mode-specific links into congestion groups, keyed by group id.
pub fn congestion_groups(net: &Supernetwork) -> BTreeMap<String, BTreeSet<String>> {
    net.groups
        .iter()
        .map(|g| {
            (
                g.id.clone(),
                g.members.iter().map(|&l| net.links[l].id.clone()).collect(),
            )
        })
        .collect()
}

/// Renders the supernetwork in Graphviz DOT for visual inspection.
pub fn export_dot(net: &Supernetwork) -> String {
    let mut out = String::from("digraph supernetwork {\n  rankdir=LR;\n");
    for node in &net.nodes {
        let shape = match node.kind {
            NodeKind::OriginCentroid { .. } | NodeKind::DestCentroid { .. } => "doublecircle",
            NodeKind::Modal { .. } => "circle",
            NodeKind::Gateway { .. } => "diamond",
        };
        out.push_str(&format!("  \"{}\" [shape={}];\n", node.id, shape));
    }
    for link in &net.links {
        let style = match link.kind {
            LinkKind::ModeSpecific => "solid",
            LinkKind::Access | LinkKind::Egress => "dashed",
            LinkKind::Interchange => "dotted",
            LinkKind::Subscription => "bold",
        };
        let mut label = link.id.clone();
        if let Some(sub) = link.subscription {
            label.push_str(&format!("\\n[{}]", net.sub_ids[sub]));
        }
        out.push_str(&format!(
            "  \"{}\" -> \"{}\" [style={}, label=\"{}\"];\n",
            net.nodes[link.tail].id, net.nodes[link.head].id, style, label
        ));
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::load_scenario_str;

    fn single_mode_scenario() -> &'static str {
        r#"{
            "locations": ["H", "L1"],
            "modes": [{"id": "m", "kind": "other"}],
            "classes": [{
                "id": "c1",
                "trip_chain": ["H", "L1", "H"],
                "demand": 10.0,
                "allowed_modes": ["m"],
                "unit_costs": {"m": {"main": 1.0}}
            }],
            "trip_links": [
                {"from": "H", "to": "L1", "modes": ["m"]},
                {"from": "L1", "to": "H", "modes": ["m"]}
            ],
            "cost_params": {"m": {"length_km": 5.0, "times": {"main": {"constant": 0.5}}}}
        }"#
    }

    #[test]
    fn minimal_expansion_counts() {
        let cfg = load_scenario_str(single_mode_scenario()).unwrap();
        let net = build_supernetwork(&cfg).unwrap();
        // 1 access + 2 mode links + 1 egress, no interchange with one mode.
        assert_eq!(net.n_links(), 4);
        let kinds: Vec<LinkKind> = net.links.iter().map(|l| l.kind).collect();
        assert_eq!(kinds.iter().filter(|k| **k == LinkKind::Access).count(), 1);
        assert_eq!(kinds.iter().filter(|k| **k == LinkKind::ModeSpecific).count(), 2);
        assert_eq!(kinds.iter().filter(|k| **k == LinkKind::Egress).count(), 1);
    }

    #[test]
    fn rebuild_is_byte_identical() {
        let cfg = load_scenario_str(single_mode_scenario()).unwrap();
        let a = export_dot(&build_supernetwork(&cfg).unwrap());
        let b = export_dot(&build_supernetwork(&cfg).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn empty_mode_set_is_reported() {
        let mut cfg = load_scenario_str(single_mode_scenario()).unwrap();
        cfg.classes[0].allowed_modes = vec!["m".into()];
        cfg.trip_links[1].modes = crate::scenario::LegModes::List(vec![]);
        // Bypass load-time validation to exercise the builder error.
        let err = build_supernetwork(&cfg).unwrap_err();
        match err {
            Error::EmptyModeSet { class, from, to } => {
                assert_eq!(class, "c1");
                assert_eq!((from.as_str(), to.as_str()), ("L1", "H"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }
}
