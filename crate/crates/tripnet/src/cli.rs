//! Command-line front end. The binary stays thin: every subcommand
//! delegates to library calls.
//!
//! Exit codes: 0 success, 1 validation/model error, 2 solver
//! non-convergence, 3 I/O or usage error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::equilibrium::solve_ue;
use crate::model::Model;
use crate::mpec::{
    profit_response_sweep, solve_mpec, FleetSpec, MpecSettings, SweepAxis, SweepSolveMode,
};
use crate::msp;
use crate::report;
use crate::scenario::{load_scenario, validate_scenario, FleetVector, OptimizerKind, Severity};
use crate::supernet::export_dot;
use crate::{Error, Result};

#[derive(Parser)]
#[command(
    name = "tripnet",
    version,
    about = "Multi-modal trip-chain equilibrium and fleet sizing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file and print its diagnostics.
    Validate { scenario: PathBuf },
    /// Emit the supernetwork as Graphviz DOT.
    ExportDot {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump the enumerated paths per class as CSV.
    Paths {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the user equilibrium at a fixed fleet.
    SolveUe {
        #[arg(long)]
        scenario: PathBuf,
        /// Fleet assignment: `v=TOTAL` (uniform over decision links) or
        /// per-link `LINK_ID=VEHICLES`, repeatable.
        #[arg(long = "fleet")]
        fleet: Vec<String>,
        #[arg(long)]
        psi: Option<f64>,
        #[arg(long = "gap-tol")]
        gap_tol: Option<f64>,
        #[arg(long = "step-tol")]
        step_tol: Option<f64>,
        #[arg(long = "max-iter")]
        max_iter: Option<usize>,
        /// Stop only when both the gap and step tests fire.
        #[arg(long)]
        require_both: bool,
        /// Per-path flows and costs (CSV); stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Relative-gap trace (CSV).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Evaluate one provider's profit at a stored equilibrium.
    Profit {
        #[arg(long)]
        scenario: PathBuf,
        /// Equilibrium CSV produced by solve-ue.
        #[arg(long)]
        equilibrium: PathBuf,
        #[arg(long = "fleet")]
        fleet: Vec<String>,
        /// Provider id; defaults to the scenario's optimized MSP.
        #[arg(long)]
        msp: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimize the provider's fleet subject to the equilibrium.
    SolveMpec {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        optimizer: Option<String>,
        /// Result JSON; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Outer-iteration trace (CSV).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Re-solve over a one- or two-dimensional parameter grid.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// JSON pointer (e.g. /subscriptions/0/daily_cost) or demand_scale.
        #[arg(long)]
        axis: String,
        /// Comma list `a,b,c` or range `start:end:count`.
        #[arg(long)]
        grid: String,
        #[arg(long)]
        axis2: Option<String>,
        #[arg(long)]
        grid2: Option<String>,
        /// Solve the equilibrium at this fixed fleet instead of re-running
        /// the fleet optimization per point.
        #[arg(long = "ue-fleet")]
        ue_fleet: Vec<String>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a bundled example end to end into a report directory.
    Reproduce {
        /// One of: ex1, ex1-separable, ex2, ex3.
        example: String,
        #[arg(long, default_value = "reports")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

/// Parses argv, runs the subcommand and maps errors onto exit codes.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code_for(&err)
        }
    }
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Io(_) => 3,
        Error::AllStartsFailed => 2,
        _ => 1,
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => Ok(std::fs::write(path, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn csv_text(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut text = header.join(",");
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    text
}

fn parse_fleet_args(args: &[String]) -> Result<FleetSpec> {
    if args.is_empty() {
        return Err(Error::InvalidInput(
            "no fleet given; pass --fleet v=TOTAL or --fleet LINK=VEHICLES".into(),
        ));
    }
    let mut total: Option<f64> = None;
    let mut per_link: BTreeMap<String, f64> = BTreeMap::new();
    for arg in args {
        let (key, value) = arg
            .split_once('=')
            .ok_or_else(|| Error::InvalidInput(format!("bad fleet assignment `{arg}`")))?;
        let value: f64 = value
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad fleet value in `{arg}`")))?;
        if key == "v" {
            total = Some(value);
        } else {
            per_link.insert(key.to_string(), value);
        }
    }
    match (total, per_link.is_empty()) {
        (Some(t), true) => Ok(FleetSpec::Uniform(t)),
        (None, false) => Ok(FleetSpec::PerLink(per_link)),
        _ => Err(Error::InvalidInput(
            "mixing v=TOTAL with per-link fleet values is ambiguous".into(),
        )),
    }
}

fn parse_grid(text: &str) -> Result<Vec<f64>> {
    if let Some((range, count)) = text.rsplit_once(':').and_then(|(head, count)| {
        head.split_once(':').map(|(a, b)| ((a, b), count))
    }) {
        let (a, b) = range;
        let start: f64 = a.parse().map_err(|_| bad_grid(text))?;
        let end: f64 = b.parse().map_err(|_| bad_grid(text))?;
        let n: usize = count.parse().map_err(|_| bad_grid(text))?;
        if n < 2 {
            return Ok(vec![start]);
        }
        let step = (end - start) / (n - 1) as f64;
        return Ok((0..n).map(|i| start + step * i as f64).collect());
    }
    text.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| bad_grid(text)))
        .collect()
}

fn bad_grid(text: &str) -> Error {
    Error::InvalidInput(format!("cannot parse grid `{text}`"))
}

fn resolve_fleet(model: &Model, args: &[String]) -> Result<FleetVector> {
    parse_fleet_args(args)?.resolve(model)
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Validate { scenario } => {
            let text = std::fs::read_to_string(&scenario)?;
            let cfg: crate::scenario::ScenarioConfig =
                serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
            let diags = validate_scenario(&cfg);
            for d in &diags {
                eprintln!("{d}");
            }
            if diags.iter().any(|d| d.severity == Severity::Error) {
                return Ok(1);
            }
            eprintln!("{}: ok", scenario.display());
            Ok(0)
        }
        Command::ExportDot { scenario, out } => {
            let cfg = load_scenario(&scenario)?;
            let net = crate::supernet::build_supernetwork(&cfg)?;
            emit(out.as_deref(), &export_dot(&net))?;
            Ok(0)
        }
        Command::Paths { scenario, out } => {
            let cfg = load_scenario(&scenario)?;
            let model = Model::build(&cfg)?;
            let rows = model
                .paths
                .paths
                .iter()
                .enumerate()
                .map(|(p, path)| {
                    vec![
                        model.net.class_ids[path.class].clone(),
                        format!("{p}"),
                        path.links
                            .iter()
                            .map(|&l| model.net.links[l].id.as_str())
                            .collect::<Vec<_>>()
                            .join(";"),
                        path.subs
                            .iter()
                            .map(|&s| model.net.sub_ids[s].as_str())
                            .collect::<Vec<_>>()
                            .join(";"),
                    ]
                })
                .collect();
            emit(
                out.as_deref(),
                &csv_text(&["class", "path_id", "links", "subscriptions"], rows),
            )?;
            Ok(0)
        }
        Command::SolveUe {
            scenario,
            fleet,
            psi,
            gap_tol,
            step_tol,
            max_iter,
            require_both,
            out,
            trace,
        } => {
            let cfg = load_scenario(&scenario)?;
            let model = Model::build(&cfg)?;
            let fleet = if model.net.fleet_links.is_empty() && fleet.is_empty() {
                FleetVector::default()
            } else {
                resolve_fleet(&model, &fleet)?
            };
            let mut settings = model.solver_settings();
            if let Some(v) = psi {
                settings.psi = v;
            }
            if let Some(v) = gap_tol {
                settings.chi1 = v;
            }
            if let Some(v) = step_tol {
                settings.chi2 = v;
            }
            if let Some(v) = max_iter {
                settings.max_iterations = v;
            }
            settings.require_both = require_both;
            let sol = solve_ue(&model, &fleet, &settings)?;
            match out {
                Some(path) => {
                    report::write_equilibrium_csv(&path, &model, &sol)?;
                }
                None => {
                    // Rebuild through the shared writer for identical bytes.
                    let tmp = std::env::temp_dir().join(format!(
                        "tripnet-eq-{}.csv",
                        std::process::id()
                    ));
                    report::write_equilibrium_csv(&tmp, &model, &sol)?;
                    print!("{}", std::fs::read_to_string(&tmp)?);
                    let _ = std::fs::remove_file(&tmp);
                }
            }
            if let Some(path) = trace {
                report::write_gap_trace_csv(&path, &sol)?;
            }
            eprintln!(
                "iterations: {}, relative gap: {:e}, converged: {}",
                sol.iterations,
                sol.final_gap(),
                sol.converged
            );
            Ok(if sol.converged { 0 } else { 2 })
        }
        Command::Profit {
            scenario,
            equilibrium,
            fleet,
            msp: msp_id,
            out,
        } => {
            let cfg = load_scenario(&scenario)?;
            let model = Model::build(&cfg)?;
            let fleet = if model.net.fleet_links.is_empty() && fleet.is_empty() {
                FleetVector::default()
            } else {
                resolve_fleet(&model, &fleet)?
            };
            let x = report::read_equilibrium_flows(&equilibrium, model.paths.total_paths())?;
            let caps = model.cost.resolve_fleet(&fleet)?;
            let costs = model.cost.cost_operator(&model.paths, &x, &caps)?;
            let (class_link_flows, link_flows) =
                crate::pathset::path_link_flows(&x, &model.paths)?;
            let sol = crate::equilibrium::EquilibriumSolution {
                min_costs: crate::equilibrium::block_min_costs(&costs, &model.paths.blocks),
                x,
                path_costs: costs,
                link_flows,
                class_link_flows,
                gap_trace: vec![],
                iterations: 0,
                converged: true,
                stop: crate::equilibrium::StopReason::GapTolerance,
            };
            let msp_id = msp_id
                .or_else(|| model.cfg.mpec.optimized_msp.clone())
                .ok_or_else(|| Error::InvalidInput("no --msp given and none optimized".into()))?;
            let spec = msp::assemble(&model, &msp_id)?;
            let breakdown = msp::profit(&spec, &model, &sol, &fleet)?;
            let rows = vec![
                vec!["fixed_revenue".into(), format!("{}", breakdown.fixed_revenue)],
                vec![
                    "variable_revenue".into(),
                    format!("{}", breakdown.variable_revenue),
                ],
                vec!["fixed_cost".into(), format!("{}", breakdown.fixed_cost)],
                vec!["variable_cost".into(), format!("{}", breakdown.variable_cost)],
                vec!["profit".into(), format!("{}", breakdown.profit)],
            ];
            emit(out.as_deref(), &csv_text(&["component", "eur_per_day"], rows))?;
            Ok(0)
        }
        Command::SolveMpec {
            scenario,
            optimizer,
            out,
            trace,
        } => {
            let cfg = load_scenario(&scenario)?;
            let model = Model::build(&cfg)?;
            let mut settings = MpecSettings::from_model(&model)?;
            if let Some(name) = optimizer {
                settings.optimizer = match name.as_str() {
                    "pattern-search" => OptimizerKind::PatternSearch,
                    "fd-quasi-newton" => OptimizerKind::FiniteDifferenceQuasiNewton,
                    other => {
                        return Err(Error::InvalidInput(format!(
                            "unknown optimizer `{other}`; expected pattern-search or fd-quasi-newton"
                        )))
                    }
                };
            }
            let result = solve_mpec(&model, &settings)?;
            let json = serde_json::json!({
                "fleet": result.v_star.iter().map(|(k, v)| (k.clone(), v)).collect::<BTreeMap<String, f64>>(),
                "fleet_total_vehicles": result.v_star.total(),
                "profit_eur_per_day": result.profit.profit,
                "fixed_revenue": result.profit.fixed_revenue,
                "variable_revenue": result.profit.variable_revenue,
                "fixed_cost": result.profit.fixed_cost,
                "variable_cost": result.profit.variable_cost,
                "objective_evaluations": result.evaluations,
                "inner_iterations_total": result.inner_iteration_counts.iter().sum::<usize>(),
                "converged": result.x_star.converged,
                "start_profits": result.start_profits,
            });
            emit(
                out.as_deref(),
                &(serde_json::to_string_pretty(&json).expect("serializable") + "\n"),
            )?;
            if let Some(path) = trace {
                report::write_csv(
                    &path,
                    &["outer_step", "fleet_total_vehicles", "profit_eur_per_day"],
                    result.outer_trace.iter().enumerate().map(|(i, s)| {
                        vec![
                            format!("{i}"),
                            format!("{}", s.fleet.iter().sum::<f64>()),
                            format!("{}", s.profit),
                        ]
                    }),
                )?;
            }
            Ok(if result.x_star.converged { 0 } else { 2 })
        }
        Command::Sweep {
            scenario,
            axis,
            grid,
            axis2,
            grid2,
            ue_fleet,
            jobs,
            out,
        } => {
            let text = std::fs::read_to_string(&scenario)?;
            let doc: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
            let mut axes = vec![SweepAxis {
                target: axis,
                values: parse_grid(&grid)?,
            }];
            match (axis2, grid2) {
                (Some(target), Some(grid2)) => axes.push(SweepAxis {
                    target,
                    values: parse_grid(&grid2)?,
                }),
                (None, None) => {}
                _ => {
                    return Err(Error::InvalidInput(
                        "--axis2 and --grid2 must be given together".into(),
                    ))
                }
            }
            let mode = if ue_fleet.is_empty() {
                SweepSolveMode::Mpec
            } else {
                SweepSolveMode::FixedFleet(parse_fleet_args(&ue_fleet)?)
            };
            let table = profit_response_sweep(&doc, &axes, &mode, jobs)?;
            let header: Vec<&str> = table.header.iter().map(|s| s.as_str()).collect();
            emit(out.as_deref(), &csv_text(&header, table.rows))?;
            Ok(0)
        }
        Command::Reproduce {
            example,
            out_dir,
            jobs,
        } => {
            let dir = out_dir.join(&example);
            let summary = report::reproduce(&example, &dir, jobs)?;
            eprint!("{summary}");
            eprintln!("report written to {}", dir.display());
            Ok(0)
        }
    }
}
