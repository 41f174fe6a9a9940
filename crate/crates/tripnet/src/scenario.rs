//! Scenario configuration: domain types, JSON ingestion and validation.
//!
//! A scenario file describes user classes with their daily trip chains,
//! the transport modes and subscriptions available in the study area, the
//! per-leg mode offer, all cost parameters, and the solver / fleet-sizing
//! settings. Units are €/day for money, hours for time and km for distance.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Smallest admissible fleet value. Fleet sizes are kept strictly positive
/// so that fleet-capacity BPR terms stay finite; the open constraint
/// `v_a > 0` becomes the closed bound `v_a >= FLEET_EPSILON`.
pub const FLEET_EPSILON: f64 = 1e-3;

// ---------------------------------------------------------------------------
// Top-level scenario document
// ---------------------------------------------------------------------------

/// A fully parsed scenario document. Immutable after load; safe to share
/// across concurrent solver instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub meta: Meta,
    pub locations: Vec<String>,
    pub modes: Vec<Mode>,
    #[serde(default)]
    pub subscriptions: Vec<Subscription>,
    pub classes: Vec<UserClass>,
    pub trip_links: Vec<TripLeg>,
    pub cost_params: BTreeMap<String, ModeCostParams>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub mpec: MpecConfig,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Parameters the source material leaves implicit, with a note on the
    /// value assumed here.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub assumed: BTreeMap<String, String>,
}

/// A transport mode (one modal layer of the supernetwork).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    pub id: String,
    #[serde(default)]
    pub kind: ModeKind,
    /// Modes sharing physical infrastructure declare the same group; a mode
    /// with no group contributes only its own flow to its travel-time
    /// functions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub congestion_group: Option<String>,
    /// The mobility service provider operating this layer, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub owner_msp: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    PrivateCar,
    PrivateBike,
    Bus,
    Train,
    CarSharingOneWay,
    CarSharingRoundTrip,
    BikeSharingOneWay,
    EScooter,
    Taxi,
    Carpooling,
    #[default]
    Other,
}

/// A daily mobility subscription or bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Subscription {
    pub id: String,
    /// c_s, €/day charged to each subscriber.
    pub daily_cost: f64,
    /// r_s, €/day received per subscriber from an external actor.
    #[serde(default)]
    pub daily_subsidy: f64,
    /// Modes this subscription unlocks. A mode may be unlocked by at most
    /// one subscription.
    pub member_modes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage_rule: Option<UsageRule>,
    /// How (c_s + r_s) is split among providers. Defaults to the owner of
    /// the single member mode receiving everything.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revenue_allocation: Option<Vec<RevenueShare>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum UsageRule {
    /// Paths activating the subscription must ride this mode on at least
    /// one leg.
    MustUseMode(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RevenueShare {
    pub msp: String,
    pub amount: ShareAmount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ShareAmount {
    /// Fixed €/day per subscriber.
    Fixed(f64),
    /// Whatever remains of (c_s + r_s) after the fixed shares.
    Keyword(RemainderWord),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RemainderWord {
    Remainder,
}

/// A user class: a closed daily trip chain plus cost perception parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserClass {
    pub id: String,
    /// Ordered locations visited in a day; first == last (the home
    /// centroid).
    pub trip_chain: Vec<String>,
    /// Travelers per day.
    pub demand: f64,
    pub allowed_modes: Vec<String>,
    /// Class-dependent €/hour values of time per mode.
    #[serde(default)]
    pub unit_costs: BTreeMap<String, UnitCosts>,
}

/// Values of time (€/hour) a class attaches to the stages of one
/// mode-specific link.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitCosts {
    #[serde(default)]
    pub access: f64,
    #[serde(default)]
    pub wait: f64,
    #[serde(default)]
    pub main: f64,
    #[serde(default)]
    pub park: f64,
    #[serde(default)]
    pub egress: f64,
}

/// One directed trip leg of the base network and the modes serving it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripLeg {
    pub from: String,
    pub to: String,
    pub modes: LegModes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LegModes {
    /// Plain list of mode ids.
    List(Vec<String>),
    /// Mode ids with per-leg overrides.
    Detailed(BTreeMap<String, LegModeOverride>),
}

impl LegModes {
    pub fn mode_ids(&self) -> Vec<&str> {
        match self {
            LegModes::List(v) => v.iter().map(|s| s.as_str()).collect(),
            LegModes::Detailed(m) => m.keys().map(|s| s.as_str()).collect(),
        }
    }

    pub fn override_for(&self, mode: &str) -> Option<&LegModeOverride> {
        match self {
            LegModes::List(_) => None,
            LegModes::Detailed(m) => m.get(mode),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LegModeOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_km: Option<f64>,
    /// Vehicles stationed on this leg when the capacity is not a decision
    /// variable. Feeds fleet-capacity time functions and the owner's lease
    /// cost.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_fleet: Option<f64>,
}

// ---------------------------------------------------------------------------
// Cost parameters
// ---------------------------------------------------------------------------

/// All per-mode cost parameters: tariffs paid by travelers, time functions
/// for the trip stages, and the operator-side economics.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeCostParams {
    /// l_a, km per mode-specific link (overridable per leg).
    #[serde(default)]
    pub length_km: f64,
    /// Fuel/energy the traveler pays directly (private vehicles), €/km.
    #[serde(default)]
    pub fuel_user_per_km: f64,
    /// c_{a,h}: tariff per on-board hour, €/h. Paid by travelers, earned by
    /// the operator.
    #[serde(default)]
    pub tariff_per_hour: f64,
    /// c_{a,km}: tariff per km, €/km.
    #[serde(default)]
    pub tariff_per_km: f64,
    /// c_{a,fixed}: flat fee per link use, €.
    #[serde(default)]
    pub ticket: f64,
    /// Parsed and stored but unused by any cost equation; flagged as a
    /// warning diagnostic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub booking_factor: Option<f64>,
    /// Operator-side parameters, present for modes run by an MSP.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub msp: Option<MspCostParams>,
    #[serde(default)]
    pub times: TimeSpecSet,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MspCostParams {
    /// Operator fuel/energy cost, €/km.
    #[serde(default)]
    pub fuel_per_km: f64,
    /// Linear lease/investment rate, €/vehicle/day.
    #[serde(default)]
    pub lease_per_vehicle: f64,
    /// γ: relocation surcharge on variable costs.
    #[serde(default)]
    pub relocation_factor: f64,
    #[serde(default)]
    pub vc_form: VcForm,
    /// Which profit components apply; defaults derived from the mode kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<ComponentMask>,
}

/// Which variable-cost formula the operator uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VcForm {
    /// c_fuel·l_a·(1 + f_a)·(1 + γ)
    #[default]
    Eq5,
    /// Flow-proportional bookkeeping: c_fuel·l_a·f_a·(1 + γ)
    Table2,
}

/// Profit components an MSP's evaluation includes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentMask {
    #[serde(default = "yes")]
    pub subscription_fee: bool,
    #[serde(default = "yes")]
    pub subsidy: bool,
    #[serde(default = "yes")]
    pub tariff_hour: bool,
    #[serde(default = "yes")]
    pub tariff_km: bool,
    #[serde(default = "yes")]
    pub ticket: bool,
    #[serde(default = "yes")]
    pub lease: bool,
    #[serde(default = "yes")]
    pub fuel_flat: bool,
    #[serde(default = "yes")]
    pub fuel_per_user: bool,
    #[serde(default = "yes")]
    pub relocation: bool,
}

fn yes() -> bool {
    true
}

impl Default for ComponentMask {
    fn default() -> Self {
        ComponentMask {
            subscription_fee: true,
            subsidy: true,
            tariff_hour: true,
            tariff_km: true,
            ticket: true,
            lease: true,
            fuel_flat: true,
            fuel_per_user: true,
            relocation: true,
        }
    }
}

impl ComponentMask {
    /// Default mask per mode kind. Private modes have no operator at all.
    pub fn for_kind(kind: ModeKind) -> ComponentMask {
        use ModeKind::*;
        let none = ComponentMask {
            subscription_fee: false,
            subsidy: false,
            tariff_hour: false,
            tariff_km: false,
            ticket: false,
            lease: false,
            fuel_flat: false,
            fuel_per_user: false,
            relocation: false,
        };
        match kind {
            PrivateCar | PrivateBike => none,
            Bus => ComponentMask {
                tariff_hour: false,
                tariff_km: false,
                fuel_per_user: false,
                ..ComponentMask::default()
            },
            Train => ComponentMask {
                tariff_hour: false,
                fuel_per_user: false,
                ..ComponentMask::default()
            },
            CarSharingOneWay => ComponentMask {
                fuel_flat: false,
                ..ComponentMask::default()
            },
            CarSharingRoundTrip => ComponentMask {
                fuel_flat: false,
                relocation: false,
                ..ComponentMask::default()
            },
            BikeSharingOneWay | EScooter => ComponentMask {
                tariff_km: false,
                fuel_flat: false,
                ..ComponentMask::default()
            },
            Taxi => ComponentMask {
                subscription_fee: false,
                subsidy: false,
                tariff_km: false,
                fuel_flat: false,
                ..ComponentMask::default()
            },
            Carpooling => ComponentMask {
                subscription_fee: false,
                tariff_hour: false,
                tariff_km: false,
                fuel_per_user: false,
                relocation: false,
                ..ComponentMask::default()
            },
            Other => ComponentMask::default(),
        }
    }
}

/// Time functions for the five stages of a mode-specific link.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpecSet {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub access: Option<TimeFunctionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wait: Option<TimeFunctionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub main: Option<TimeFunctionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub park: Option<TimeFunctionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub egress: Option<TimeFunctionSpec>,
}

impl TimeSpecSet {
    pub fn get(&self, role: TimeRole) -> Option<&TimeFunctionSpec> {
        match role {
            TimeRole::Access => self.access.as_ref(),
            TimeRole::Wait => self.wait.as_ref(),
            TimeRole::Main => self.main.as_ref(),
            TimeRole::Park => self.park.as_ref(),
            TimeRole::Egress => self.egress.as_ref(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TimeRole {
    Access,
    Wait,
    Main,
    Park,
    Egress,
}

pub const TIME_ROLES: [TimeRole; 5] = [
    TimeRole::Access,
    TimeRole::Wait,
    TimeRole::Main,
    TimeRole::Park,
    TimeRole::Egress,
];

impl fmt::Display for TimeRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TimeRole::Access => "access",
            TimeRole::Wait => "wait",
            TimeRole::Main => "main",
            TimeRole::Park => "park",
            TimeRole::Egress => "egress",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeFunctionSpec {
    /// Fixed duration in hours.
    Constant(f64),
    /// t0·(1 + α·(flow/capacity)^β)
    Bpr(BprSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BprSpec {
    pub t0: f64,
    pub alpha: f64,
    pub beta: f64,
    pub capacity: CapacitySpec,
    #[serde(default)]
    pub argument: FlowArgument,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CapacitySpec {
    Fixed(f64),
    Keyword(FleetWord),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FleetWord {
    /// Capacity supplied by the link's fleet value at solve time.
    Fleet,
}

impl CapacitySpec {
    pub fn is_fleet(&self) -> bool {
        matches!(self, CapacitySpec::Keyword(FleetWord::Fleet))
    }
}

/// Which flow a congestible time function reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowArgument {
    /// The link's own total flow over all classes.
    #[default]
    Own,
    /// The aggregate flow of the link's congestion group on the same leg.
    Group,
}

// ---------------------------------------------------------------------------
// Solver and fleet-optimization settings
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// ψ: constant step length of the projection iteration, in (0, 1).
    #[serde(default = "default_psi")]
    pub psi: f64,
    /// χ1: relative-gap tolerance.
    #[serde(default = "default_chi1")]
    pub chi1: f64,
    /// χ2: iterate-change tolerance (infinity norm).
    #[serde(default = "default_chi2")]
    pub chi2: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default)]
    pub initial_flow: InitialFlow,
    /// Hard cap on enumerated paths per class.
    #[serde(default = "default_path_cap")]
    pub path_cap: usize,
    /// Stop only when both the gap and the iterate-change tests fire.
    #[serde(default)]
    pub require_both: bool,
}

fn default_psi() -> f64 {
    0.5
}
fn default_chi1() -> f64 {
    1e-4
}
fn default_chi2() -> f64 {
    1e-6
}
fn default_max_iterations() -> usize {
    100_000
}
fn default_path_cap() -> usize {
    100_000
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            psi: default_psi(),
            chi1: default_chi1(),
            chi2: default_chi2(),
            max_iterations: default_max_iterations(),
            initial_flow: InitialFlow::default(),
            path_cap: default_path_cap(),
            require_both: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialFlow {
    #[default]
    UniformSplit,
    AllOnFirstPath,
    Given(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpecConfig {
    /// The MSP whose fleet is the upper-level decision variable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimized_msp: Option<String>,
    #[serde(default = "default_fleet_lower")]
    pub fleet_lower: f64,
    #[serde(default = "default_fleet_upper")]
    pub fleet_upper: f64,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    /// Initial pattern-search step in vehicles; defaults to an eighth of
    /// the bound range.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_step: Option<f64>,
    /// Pattern search stops once the step shrinks below this.
    #[serde(default = "default_step_tol")]
    pub step_tol: f64,
    #[serde(default = "default_max_outer")]
    pub max_outer_iterations: usize,
    /// Relative central-difference step of the quasi-Newton option.
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    /// Objective-improvement tolerance of the outer loop.
    #[serde(default = "default_outer_tol")]
    pub outer_tol: f64,
    /// Explicit starting fleets (link id → vehicles); defaults to lower
    /// bound, midpoint and upper bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multistart: Option<Vec<BTreeMap<String, f64>>>,
    /// Warm-start each lower-level solve from the incumbent equilibrium.
    #[serde(default = "yes")]
    pub warm_start: bool,
}

fn default_fleet_lower() -> f64 {
    FLEET_EPSILON
}
fn default_fleet_upper() -> f64 {
    1000.0
}
fn default_step_tol() -> f64 {
    0.25
}
fn default_max_outer() -> usize {
    200
}
fn default_fd_step() -> f64 {
    1e-3
}
fn default_outer_tol() -> f64 {
    1e-9
}

impl Default for MpecConfig {
    fn default() -> Self {
        MpecConfig {
            optimized_msp: None,
            fleet_lower: default_fleet_lower(),
            fleet_upper: default_fleet_upper(),
            optimizer: OptimizerKind::default(),
            initial_step: None,
            step_tol: default_step_tol(),
            max_outer_iterations: default_max_outer(),
            fd_step: default_fd_step(),
            outer_tol: default_outer_tol(),
            multistart: None,
            warm_start: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    PatternSearch,
    FiniteDifferenceQuasiNewton,
}

// ---------------------------------------------------------------------------
// Fleet vector and OD pairs
// ---------------------------------------------------------------------------

/// Per-link fleet sizes of the optimized MSP. Entries are clamped to
/// [`FLEET_EPSILON`] on construction.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FleetVector {
    entries: BTreeMap<String, f64>,
}

impl FleetVector {
    pub fn new(entries: BTreeMap<String, f64>) -> FleetVector {
        let entries = entries
            .into_iter()
            .map(|(k, v)| (k, v.max(FLEET_EPSILON)))
            .collect();
        FleetVector { entries }
    }

    /// Spreads a total fleet uniformly over the given links.
    pub fn uniform(total: f64, link_ids: &[String]) -> FleetVector {
        let each = if link_ids.is_empty() {
            0.0
        } else {
            total / link_ids.len() as f64
        };
        FleetVector::new(link_ids.iter().map(|id| (id.clone(), each)).collect())
    }

    pub fn get(&self, link_id: &str) -> Option<f64> {
        self.entries.get(link_id).copied()
    }

    pub fn set(&mut self, link_id: &str, value: f64) {
        self.entries
            .insert(link_id.to_string(), value.max(FLEET_EPSILON));
    }

    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, f64)> {
        self.entries.iter().map(|(k, v)| (k, *v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Origin–destination pair served by one class. Under closed daily tours
/// each class maps to exactly one OD pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ODPair {
    pub id: String,
    pub origin: String,
    pub destination: String,
    pub class: String,
}

impl UserClass {
    /// The (origin, destination) centroid pair of this class's tour.
    pub fn od_pair(&self) -> ODPair {
        let home = self.trip_chain.first().cloned().unwrap_or_default();
        ODPair {
            id: format!("w:{}", self.id),
            origin: format!("{home}:o"),
            destination: format!("{home}:d"),
            class: self.id.clone(),
        }
    }

    /// Consecutive location pairs of the chain.
    pub fn legs(&self) -> Vec<(&str, &str)> {
        self.trip_chain
            .windows(2)
            .map(|w| (w[0].as_str(), w[1].as_str()))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Diagnostics and validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Severity::Warning => f.write_str("warning"),
            Severity::Error => f.write_str("error"),
        }
    }
}

/// One validation finding, carrying the offending field path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub path: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.severity, self.path, self.message)
    }
}

/// Loads and fully validates a scenario file. Fails with `Error::Validation`
/// if any error-severity diagnostic is found.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path.as_ref())?;
    load_scenario_str(&text)
}

/// Same as [`load_scenario`] but from an in-memory document.
pub fn load_scenario_str(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig =
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let diags = validate_scenario(&cfg);
    if diags.iter().any(|d| d.severity == Severity::Error) {
        return Err(Error::Validation(
            diags
                .into_iter()
                .filter(|d| d.severity == Severity::Error)
                .collect(),
        ));
    }
    Ok(cfg)
}

/// Serializes a configuration back to pretty JSON. `load_scenario_str ∘
/// serialize_scenario` is the identity.
pub fn serialize_scenario(cfg: &ScenarioConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("scenario serialization cannot fail")
}

struct Checker {
    diags: Vec<Diagnostic>,
}

impl Checker {
    fn error(&mut self, path: impl Into<String>, msg: impl Into<String>) {
        self.diags.push(Diagnostic {
            severity: Severity::Error,
            path: path.into(),
            message: msg.into(),
        });
    }

    fn warn(&mut self, path: impl Into<String>, msg: impl Into<String>) {
        self.diags.push(Diagnostic {
            severity: Severity::Warning,
            path: path.into(),
            message: msg.into(),
        });
    }

    fn nonnegative(&mut self, value: f64, path: String) {
        if !(value >= 0.0) {
            self.error(path, format!("must be nonnegative, got {value}"));
        }
    }
}

/// Checks every structural invariant of a parsed scenario. Returns an empty
/// list iff the configuration is fully consistent; findings carry severity
/// and the offending field path.
pub fn validate_scenario(cfg: &ScenarioConfig) -> Vec<Diagnostic> {
    let mut c = Checker { diags: Vec::new() };

    let locations: BTreeSet<&str> = cfg.locations.iter().map(|s| s.as_str()).collect();
    if locations.len() != cfg.locations.len() {
        c.error("locations", "duplicate location ids");
    }
    let mode_ids: BTreeSet<&str> = cfg.modes.iter().map(|m| m.id.as_str()).collect();
    if mode_ids.len() != cfg.modes.len() {
        c.error("modes", "duplicate mode ids");
    }
    let sub_ids: BTreeSet<&str> = cfg.subscriptions.iter().map(|s| s.id.as_str()).collect();
    if sub_ids.len() != cfg.subscriptions.len() {
        c.error("subscriptions", "duplicate subscription ids");
    }
    let class_ids: BTreeSet<&str> = cfg.classes.iter().map(|k| k.id.as_str()).collect();
    if class_ids.len() != cfg.classes.len() {
        c.error("classes", "duplicate class ids");
    }
    let msp_ids: BTreeSet<&str> = cfg
        .modes
        .iter()
        .filter_map(|m| m.owner_msp.as_deref())
        .collect();

    // Mode ↔ subscription relationship.
    let mut sub_of_mode: BTreeMap<&str, &str> = BTreeMap::new();
    for (i, sub) in cfg.subscriptions.iter().enumerate() {
        let base = format!("subscriptions[{i}]");
        c.nonnegative(sub.daily_cost, format!("{base}.daily_cost"));
        c.nonnegative(sub.daily_subsidy, format!("{base}.daily_subsidy"));
        if sub.member_modes.is_empty() {
            c.warn(
                format!("{base}.member_modes"),
                "subscription unlocks no mode",
            );
        }
        for m in &sub.member_modes {
            if !mode_ids.contains(m.as_str()) {
                c.error(format!("{base}.member_modes"), format!("unknown mode `{m}`"));
            } else if let Some(prev) = sub_of_mode.insert(m.as_str(), sub.id.as_str()) {
                c.error(
                    format!("{base}.member_modes"),
                    format!("mode `{m}` already unlocked by subscription `{prev}`"),
                );
            }
        }
        if let Some(UsageRule::MustUseMode(m)) = &sub.usage_rule {
            if !sub.member_modes.iter().any(|x| x == m) {
                c.error(
                    format!("{base}.usage_rule"),
                    format!("rule references mode `{m}` outside member_modes"),
                );
            }
        }
        if let Some(alloc) = &sub.revenue_allocation {
            let mut remainders = 0usize;
            let mut fixed_sum = 0.0;
            for (j, share) in alloc.iter().enumerate() {
                if !msp_ids.contains(share.msp.as_str()) {
                    c.error(
                        format!("{base}.revenue_allocation[{j}].msp"),
                        format!("`{}` is not an owner of any mode", share.msp),
                    );
                }
                match share.amount {
                    ShareAmount::Fixed(v) => {
                        c.nonnegative(v, format!("{base}.revenue_allocation[{j}].amount"));
                        fixed_sum += v;
                    }
                    ShareAmount::Keyword(_) => remainders += 1,
                }
            }
            if remainders > 1 {
                c.error(
                    format!("{base}.revenue_allocation"),
                    "more than one remainder share",
                );
            }
            if fixed_sum > sub.daily_cost + sub.daily_subsidy + 1e-12 {
                c.warn(
                    format!("{base}.revenue_allocation"),
                    "fixed shares exceed the per-subscriber pool",
                );
            }
        }
    }

    // Classes.
    for (i, class) in cfg.classes.iter().enumerate() {
        let base = format!("classes[{i}]");
        if class.trip_chain.len() < 3 {
            c.error(
                format!("{base}.trip_chain"),
                "a closed daily tour needs at least three entries",
            );
        } else if class.trip_chain.first() != class.trip_chain.last() {
            c.error(
                format!("{base}.trip_chain"),
                "tour must start and end at the home centroid",
            );
        }
        for loc in &class.trip_chain {
            if !locations.contains(loc.as_str()) {
                c.error(format!("{base}.trip_chain"), format!("unknown location `{loc}`"));
            }
        }
        let mut seen_legs = BTreeSet::new();
        for (a, b) in class.legs() {
            if !seen_legs.insert((a, b)) {
                c.error(
                    format!("{base}.trip_chain"),
                    format!("directed leg {a}->{b} repeats within the tour"),
                );
            }
        }
        c.nonnegative(class.demand, format!("{base}.demand"));
        if class.allowed_modes.is_empty() {
            c.error(format!("{base}.allowed_modes"), "empty mode set");
        }
        for m in &class.allowed_modes {
            if !mode_ids.contains(m.as_str()) {
                c.error(format!("{base}.allowed_modes"), format!("unknown mode `{m}`"));
            }
        }
        for (m, uc) in &class.unit_costs {
            let p = format!("{base}.unit_costs.{m}");
            if !mode_ids.contains(m.as_str()) {
                c.error(p.clone(), format!("unknown mode `{m}`"));
            } else if !class.allowed_modes.iter().any(|x| x == m) {
                c.warn(p.clone(), "unit costs given for a mode the class cannot use");
            }
            for (v, name) in [
                (uc.access, "access"),
                (uc.wait, "wait"),
                (uc.main, "main"),
                (uc.park, "park"),
                (uc.egress, "egress"),
            ] {
                c.nonnegative(v, format!("{p}.{name}"));
            }
        }
    }

    // Trip legs.
    let mut leg_index: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for (i, leg) in cfg.trip_links.iter().enumerate() {
        let base = format!("trip_links[{i}]");
        for loc in [&leg.from, &leg.to] {
            if !locations.contains(loc.as_str()) {
                c.error(base.clone(), format!("unknown location `{loc}`"));
            }
        }
        if leg.from == leg.to {
            c.error(base.clone(), "leg endpoints coincide");
        }
        if leg_index
            .insert((leg.from.as_str(), leg.to.as_str()), i)
            .is_some()
        {
            c.error(base.clone(), format!("duplicate leg {}->{}", leg.from, leg.to));
        }
        if leg.modes.mode_ids().is_empty() {
            c.error(format!("{base}.modes"), "leg served by no mode");
        }
        for m in leg.modes.mode_ids() {
            if !mode_ids.contains(m) {
                c.error(format!("{base}.modes"), format!("unknown mode `{m}`"));
            }
            if let Some(ov) = leg.modes.override_for(m) {
                if let Some(l) = ov.length_km {
                    if !(l > 0.0) {
                        c.error(
                            format!("{base}.modes.{m}.length_km"),
                            "length must be positive",
                        );
                    }
                }
                if let Some(v) = ov.fixed_fleet {
                    if !(v > 0.0) {
                        c.error(
                            format!("{base}.modes.{m}.fixed_fleet"),
                            "fixed fleet must be positive",
                        );
                    }
                }
            }
        }
    }
    for (i, class) in cfg.classes.iter().enumerate() {
        for (a, b) in class.legs() {
            if !leg_index.contains_key(&(a, b)) {
                c.error(
                    format!("classes[{i}].trip_chain"),
                    format!("no trip_links entry covers leg {a}->{b}"),
                );
            }
        }
    }

    // Cost parameters.
    for (mode_id, params) in &cfg.cost_params {
        let base = format!("cost_params.{mode_id}");
        let Some(mode) = cfg.modes.iter().find(|m| m.id == *mode_id) else {
            c.error(base, format!("unknown mode `{mode_id}`"));
            continue;
        };
        c.nonnegative(params.length_km, format!("{base}.length_km"));
        c.nonnegative(params.fuel_user_per_km, format!("{base}.fuel_user_per_km"));
        c.nonnegative(params.tariff_per_hour, format!("{base}.tariff_per_hour"));
        c.nonnegative(params.tariff_per_km, format!("{base}.tariff_per_km"));
        c.nonnegative(params.ticket, format!("{base}.ticket"));
        if params.booking_factor.is_some() {
            c.warn(
                format!("{base}.booking_factor"),
                "booking factor is parsed and stored but enters no cost equation",
            );
        }
        if let Some(msp) = &params.msp {
            c.nonnegative(msp.fuel_per_km, format!("{base}.msp.fuel_per_km"));
            c.nonnegative(msp.lease_per_vehicle, format!("{base}.msp.lease_per_vehicle"));
            c.nonnegative(msp.relocation_factor, format!("{base}.msp.relocation_factor"));
            if mode.owner_msp.is_none() {
                c.warn(
                    format!("{base}.msp"),
                    "operator parameters on a mode with no owner_msp",
                );
            }
        }
        let kind_mask = ComponentMask::for_kind(mode.kind);
        if params.tariff_per_hour > 0.0 && !kind_mask.tariff_hour {
            c.warn(
                format!("{base}.tariff_per_hour"),
                format!("per-hour tariff is unusual for mode kind {:?}", mode.kind),
            );
        }
        if params.tariff_per_km > 0.0 && !kind_mask.tariff_km {
            c.warn(
                format!("{base}.tariff_per_km"),
                format!("per-km tariff is unusual for mode kind {:?}", mode.kind),
            );
        }
        for role in TIME_ROLES {
            if let Some(TimeFunctionSpec::Bpr(bpr)) = params.times.get(role) {
                let p = format!("{base}.times.{role}");
                c.nonnegative(bpr.t0, format!("{p}.t0"));
                c.nonnegative(bpr.alpha, format!("{p}.alpha"));
                if !(bpr.beta >= 1.0) {
                    c.error(format!("{p}.beta"), "BPR exponent must be at least 1");
                }
                if let CapacitySpec::Fixed(cap) = bpr.capacity {
                    if !(cap > 0.0) {
                        c.error(format!("{p}.capacity"), "capacity must be positive");
                    }
                }
                if bpr.argument == FlowArgument::Group && mode.congestion_group.is_none() {
                    c.error(
                        format!("{p}.argument"),
                        format!(
                            "mode `{mode_id}` uses a group-flow argument but declares no congestion_group"
                        ),
                    );
                }
            } else if let Some(TimeFunctionSpec::Constant(t0)) = params.times.get(role) {
                c.nonnegative(*t0, format!("{base}.times.{role}"));
            }
        }
    }

    // Every mode used on a leg needs cost parameters and a usable length.
    let mut legs_using_fleet: Vec<(usize, &str)> = Vec::new();
    for (i, leg) in cfg.trip_links.iter().enumerate() {
        for m in leg.modes.mode_ids() {
            let Some(params) = cfg.cost_params.get(m) else {
                c.error(
                    format!("trip_links[{i}].modes"),
                    format!("mode `{m}` has no cost_params entry"),
                );
                continue;
            };
            let length = leg
                .modes
                .override_for(m)
                .and_then(|o| o.length_km)
                .unwrap_or(params.length_km);
            if !(length > 0.0) {
                c.error(
                    format!("trip_links[{i}].modes.{m}"),
                    "mode-specific links need a positive length",
                );
            }
            let uses_fleet = TIME_ROLES.iter().any(|&r| {
                matches!(params.times.get(r), Some(TimeFunctionSpec::Bpr(b)) if b.capacity.is_fleet())
            });
            if uses_fleet {
                legs_using_fleet.push((i, m));
            }
        }
    }

    // Fleet-capacity links must either carry a fixed fleet or belong to the
    // optimized MSP.
    let optimized = cfg.mpec.optimized_msp.as_deref();
    for (i, m) in legs_using_fleet {
        let leg = &cfg.trip_links[i];
        let has_override = leg
            .modes
            .override_for(m)
            .and_then(|o| o.fixed_fleet)
            .is_some();
        let owner = cfg
            .modes
            .iter()
            .find(|md| md.id == m)
            .and_then(|md| md.owner_msp.as_deref());
        if !has_override && owner != optimized {
            c.error(
                format!("trip_links[{i}].modes.{m}"),
                "fleet capacity unresolved: link is not optimized and has no fixed_fleet",
            );
        }
    }

    if let Some(msp) = optimized {
        if !msp_ids.contains(msp) {
            c.error("mpec.optimized_msp", format!("`{msp}` owns no mode"));
        }
    }
    if !(cfg.mpec.fleet_lower >= FLEET_EPSILON) {
        c.error(
            "mpec.fleet_lower",
            format!("must be at least {FLEET_EPSILON}"),
        );
    }
    if !(cfg.mpec.fleet_upper > cfg.mpec.fleet_lower) {
        c.error("mpec.fleet_upper", "must exceed fleet_lower");
    }
    if !(cfg.mpec.step_tol > 0.0) {
        c.error("mpec.step_tol", "must be positive");
    }
    if !(cfg.mpec.fd_step > 0.0) {
        c.error("mpec.fd_step", "must be positive");
    }

    if !(cfg.solver.psi > 0.0 && cfg.solver.psi < 1.0) {
        c.error("solver.psi", "step length must lie strictly between 0 and 1");
    }
    if !(cfg.solver.chi1 > 0.0) {
        c.error("solver.chi1", "tolerance must be positive");
    }
    if !(cfg.solver.chi2 > 0.0) {
        c.error("solver.chi2", "tolerance must be positive");
    }
    if cfg.solver.max_iterations == 0 {
        c.error("solver.max_iterations", "must be positive");
    }
    if let InitialFlow::Given(x) = &cfg.solver.initial_flow {
        if x.iter().any(|v| !(*v >= 0.0)) {
            c.error("solver.initial_flow", "given flows must be nonnegative");
        }
    }

    // Congestion groups whose members disagree on main capacity are almost
    // certainly a transcription slip.
    let mut group_caps: BTreeMap<&str, f64> = BTreeMap::new();
    for mode in &cfg.modes {
        let Some(group) = mode.congestion_group.as_deref() else {
            continue;
        };
        if let Some(params) = cfg.cost_params.get(&mode.id) {
            if let Some(TimeFunctionSpec::Bpr(b)) = &params.times.main {
                if let CapacitySpec::Fixed(cap) = b.capacity {
                    if let Some(prev) = group_caps.insert(group, cap) {
                        if (prev - cap).abs() > 1e-9 {
                            c.warn(
                                format!("cost_params.{}.times.main.capacity", mode.id),
                                format!(
                                    "congestion group `{group}` mixes main capacities {prev} and {cap}"
                                ),
                            );
                        }
                    }
                }
            }
        }
    }

    c.diags.sort_by(|a, b| {
        b.severity
            .cmp(&a.severity)
            .then_with(|| a.path.cmp(&b.path))
            .then_with(|| a.message.cmp(&b.message))
    });
    c.diags
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_scenario() -> String {
        r#"{
            "locations": ["H", "L1"],
            "modes": [{"id": "walkbus", "kind": "bus"}],
            "classes": [{
                "id": "c1",
                "trip_chain": ["H", "L1", "H"],
                "demand": 10.0,
                "allowed_modes": ["walkbus"],
                "unit_costs": {"walkbus": {"main": 1.0}}
            }],
            "trip_links": [
                {"from": "H", "to": "L1", "modes": ["walkbus"]},
                {"from": "L1", "to": "H", "modes": ["walkbus"]}
            ],
            "cost_params": {
                "walkbus": {
                    "length_km": 5.0,
                    "times": {"main": {"constant": 0.5}}
                }
            }
        }"#
        .to_string()
    }

    #[test]
    fn minimal_scenario_loads() {
        let cfg = load_scenario_str(&minimal_scenario()).unwrap();
        assert_eq!(cfg.classes.len(), 1);
        assert!(validate_scenario(&cfg).is_empty());
    }

    #[test]
    fn round_trip_is_identity() {
        let cfg = load_scenario_str(&minimal_scenario()).unwrap();
        let text = serialize_scenario(&cfg);
        let cfg2 = load_scenario_str(&text).unwrap();
        assert_eq!(cfg, cfg2);
    }

    #[test]
    fn open_tour_is_rejected() {
        let text = minimal_scenario().replace(r#"["H", "L1", "H"]"#, r#"["H", "L1"]"#);
        let err = load_scenario_str(&text).unwrap_err();
        match err {
            Error::Validation(diags) => {
                assert!(diags.iter().any(|d| d.path.contains("trip_chain")));
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn negative_subscription_cost_is_rejected() {
        let mut cfg = load_scenario_str(&minimal_scenario()).unwrap();
        cfg.subscriptions.push(Subscription {
            id: "s".into(),
            daily_cost: -1.0,
            daily_subsidy: 0.0,
            member_modes: vec!["walkbus".into()],
            usage_rule: None,
            revenue_allocation: None,
        });
        let diags = validate_scenario(&cfg);
        assert!(diags
            .iter()
            .any(|d| d.severity == Severity::Error && d.path.contains("daily_cost")));
    }

    #[test]
    fn group_argument_without_group_is_an_error() {
        let mut cfg = load_scenario_str(&minimal_scenario()).unwrap();
        cfg.cost_params.get_mut("walkbus").unwrap().times.main = Some(TimeFunctionSpec::Bpr(
            BprSpec {
                t0: 0.5,
                alpha: 1.0,
                beta: 2.0,
                capacity: CapacitySpec::Fixed(100.0),
                argument: FlowArgument::Group,
            },
        ));
        let diags = validate_scenario(&cfg);
        assert!(diags
            .iter()
            .any(|d| d.severity == Severity::Error && d.message.contains("congestion_group")));
    }

    #[test]
    fn empty_subscription_is_a_warning() {
        let mut cfg = load_scenario_str(&minimal_scenario()).unwrap();
        cfg.subscriptions.push(Subscription {
            id: "s".into(),
            daily_cost: 1.0,
            daily_subsidy: 0.0,
            member_modes: vec![],
            usage_rule: None,
            revenue_allocation: None,
        });
        let diags = validate_scenario(&cfg);
        assert!(diags
            .iter()
            .any(|d| d.severity == Severity::Warning && d.message.contains("unlocks no mode")));
    }

    #[test]
    fn booking_factor_is_flagged_unused() {
        let mut cfg = load_scenario_str(&minimal_scenario()).unwrap();
        cfg.cost_params.get_mut("walkbus").unwrap().booking_factor = Some(0.2);
        let diags = validate_scenario(&cfg);
        assert!(diags
            .iter()
            .any(|d| d.severity == Severity::Warning && d.path.contains("booking_factor")));
    }

    #[test]
    fn fleet_vector_clamps_to_epsilon() {
        let v = FleetVector::new([("a".to_string(), 0.0)].into_iter().collect());
        assert_eq!(v.get("a"), Some(FLEET_EPSILON));
    }
}
