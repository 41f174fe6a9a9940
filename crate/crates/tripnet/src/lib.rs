//! Multi-modal trip-chain supernetwork equilibrium and fleet-sizing toolkit.
//!
//! The library builds a supernetwork from daily trip chains and modal
//! layers, enumerates feasible paths per user class, computes the
//! multi-class user equilibrium with non-separable link costs via a
//! modified projection (extragradient) method, evaluates mobility service
//! provider profit at equilibrium, and sizes a provider's fleet by solving
//! the resulting bilevel program.
//!
//! Typical flow:
//!
//! ```no_run
//! use tripnet::model::Model;
//!
//! let cfg = tripnet::scenario::load_scenario("scenarios/ex1.json")?;
//! let model = Model::build(&cfg)?;
//! let fleet = model.uniform_fleet(36.0);
//! let solution = tripnet::equilibrium::solve_ue(&model, &fleet, &model.solver_settings())?;
//! println!("relative gap: {:?}", solution.gap_trace.last());
//! # Ok::<(), tripnet::Error>(())
//! ```
//!
//! Each runnable capability has a dedicated example under `examples/`; the
//! thin `tripnet` binary exposes the same operations as subcommands.

pub mod cli;
pub mod cost;
pub mod equilibrium;
pub mod model;
pub mod mpec;
pub mod msp;
pub mod pathset;
pub mod report;
pub mod scenario;
pub mod supernet;

use scenario::Diagnostic;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to parse scenario: {0}")]
    Parse(String),
    #[error("scenario validation failed:\n{}", format_diagnostics(.0))]
    Validation(Vec<Diagnostic>),
    #[error("class `{class}` has no usable mode on leg {from}->{to}")]
    EmptyModeSet {
        class: String,
        from: String,
        to: String,
    },
    #[error("no feasible path for class `{0}` with positive demand")]
    NoFeasiblePath(String),
    #[error("path enumeration for class `{class}` exceeded the cap of {cap}")]
    PathExplosion { class: String, cap: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("nonpositive capacity while evaluating link `{0}`")]
    NonpositiveCapacity(String),
    #[error("fleet value missing for link `{0}`")]
    MissingFleetValue(String),
    #[error("unknown MSP `{0}`")]
    UnknownMsp(String),
    #[error("every multistart point failed to produce a converged equilibrium")]
    AllStartsFailed,
    #[error("cannot resolve sweep axis `{0}`")]
    AxisResolution(String),
    #[error("{0}")]
    InvalidInput(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| format!("  {d}"))
        .collect::<Vec<_>>()
        .join("\n")
}
