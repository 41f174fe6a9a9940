//! Run manifests, CSV export, modal-split summaries and the scripted
//! reproduction pipelines for the bundled example scenarios.
//!
//! CSV dialect: comma-separated, `.` decimal point, LF line endings, UTF-8,
//! header row naming units. Re-running a pipeline on the same inputs
//! produces byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::equilibrium::{solve_ue, EquilibriumSolution};
use crate::model::Model;
use crate::mpec::{
    apply_override, profit_response_sweep, solve_mpec, MpecSettings, SweepAxis, SweepSolveMode,
};
use crate::msp;
use crate::scenario::load_scenario_str;
use crate::{Error, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

// ---------------------------------------------------------------------------
// Golden scenarios
// ---------------------------------------------------------------------------

pub const GOLDEN_IDS: [&str; 5] = ["ex1", "ex1-separable", "ex2", "ex3", "ex3-solo"];

/// Returns the bundled scenario document for one of the example ids.
pub fn golden_scenario(id: &str) -> Option<&'static str> {
    match id {
        "ex1" => Some(include_str!("../scenarios/ex1.json")),
        "ex1-separable" => Some(include_str!("../scenarios/ex1-separable.json")),
        "ex2" => Some(include_str!("../scenarios/ex2.json")),
        "ex3" => Some(include_str!("../scenarios/ex3.json")),
        "ex3-solo" => Some(include_str!("../scenarios/ex3-solo.json")),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// CSV and manifest plumbing
// ---------------------------------------------------------------------------

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for byte in digest {
        let _ = write!(out, "{byte:02x}");
    }
    out
}

fn csv_field(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Writes a CSV file and returns its path for manifest bookkeeping.
pub fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<PathBuf> {
    let mut text = String::new();
    text.push_str(
        &header
            .iter()
            .map(|h| csv_field(h))
            .collect::<Vec<_>>()
            .join(","),
    );
    text.push('\n');
    for row in rows {
        text.push_str(&row.iter().map(|c| csv_field(c)).collect::<Vec<_>>().join(","));
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(path.to_path_buf())
}

/// Provenance record tying every output file of a run to its inputs.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: Vec<String>,
    pub scenario: String,
    pub scenario_sha256: String,
    pub settings: serde_json::Value,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &[String], scenario_name: &str, scenario_text: &str) -> RunManifest {
        RunManifest {
            tool_version: TOOL_VERSION.to_string(),
            command: command.to_vec(),
            scenario: scenario_name.to_string(),
            scenario_sha256: sha256_hex(scenario_text.as_bytes()),
            settings: serde_json::Value::Null,
            outputs: Vec::new(),
        }
    }

    pub fn record(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(self).expect("serializable") + "\n")?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Solution exports
// ---------------------------------------------------------------------------

/// Shares of travel by mode and by subscription at a solution.
#[derive(Debug, Clone)]
pub struct ModalSplit {
    /// Person-legs ridden on each mode over all person-legs.
    pub leg_share: Vec<(String, f64)>,
    /// Travelers riding a single mode all day over total demand.
    pub exclusive_share: Vec<(String, f64)>,
    /// Daily subscribers per subscription.
    pub subscribers: Vec<(String, f64)>,
}

pub fn modal_split(model: &Model, sol: &EquilibriumSolution) -> Result<ModalSplit> {
    let ps = &model.paths;
    let n_modes = model.net.mode_ids.len();
    let mut legs_by_mode = vec![0.0; n_modes];
    let mut exclusive = vec![0.0; n_modes];
    let mut total_legs = 0.0;
    for (p, path) in ps.paths.iter().enumerate() {
        let flow = sol.x[p];
        total_legs += flow * path.mode_seq.len() as f64;
        for &m in &path.mode_seq {
            legs_by_mode[m] += flow;
        }
        let first = path.mode_seq[0];
        if path.mode_seq.iter().all(|&m| m == first) {
            exclusive[first] += flow;
        }
    }
    let demand = model.total_demand();
    let subscribers =
        crate::pathset::subscriber_counts(&sol.x, ps, model.net.sub_ids.len())?;
    Ok(ModalSplit {
        leg_share: model
            .net
            .mode_ids
            .iter()
            .enumerate()
            .map(|(m, id)| {
                (
                    id.clone(),
                    if total_legs > 0.0 { legs_by_mode[m] / total_legs } else { 0.0 },
                )
            })
            .collect(),
        exclusive_share: model
            .net
            .mode_ids
            .iter()
            .enumerate()
            .map(|(m, id)| {
                (
                    id.clone(),
                    if demand > 0.0 { exclusive[m] / demand } else { 0.0 },
                )
            })
            .collect(),
        subscribers: model
            .net
            .sub_ids
            .iter()
            .enumerate()
            .map(|(s, id)| (id.clone(), subscribers[s]))
            .collect(),
    })
}

/// Per-path flows and costs of a solved equilibrium.
pub fn write_equilibrium_csv(
    path: &Path,
    model: &Model,
    sol: &EquilibriumSolution,
) -> Result<PathBuf> {
    let ps = &model.paths;
    let mut rows = Vec::with_capacity(ps.total_paths());
    for (bi, block) in ps.blocks.iter().enumerate() {
        for p in block.range() {
            let path = &ps.paths[p];
            rows.push(vec![
                model.net.class_ids[block.class].clone(),
                block.od_id.clone(),
                format!("{p}"),
                format!("{}", sol.x[p]),
                format!("{}", sol.path_costs[p]),
                format!("{}", sol.min_costs[bi]),
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
            ]);
        }
    }
    write_csv(
        path,
        &[
            "class",
            "od",
            "path_id",
            "flow_travelers_per_day",
            "cost_eur_per_day",
            "block_min_cost_eur_per_day",
            "links",
            "subscriptions",
        ],
        rows,
    )
}

/// Reads path flows back from an equilibrium CSV, in global path order.
pub fn read_equilibrium_flows(path: &Path, expected_paths: usize) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    let mut flows = vec![0.0; expected_paths];
    let mut seen = 0usize;
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() < 4 {
            return Err(Error::InvalidInput(format!(
                "equilibrium CSV line {} is malformed",
                i + 1
            )));
        }
        let idx: usize = cells[2]
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad path_id on line {}", i + 1)))?;
        let flow: f64 = cells[3]
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad flow on line {}", i + 1)))?;
        if idx >= expected_paths {
            return Err(Error::DimensionMismatch {
                expected: expected_paths,
                got: idx + 1,
            });
        }
        flows[idx] = flow;
        seen += 1;
    }
    if seen != expected_paths {
        return Err(Error::DimensionMismatch {
            expected: expected_paths,
            got: seen,
        });
    }
    Ok(flows)
}

pub fn write_gap_trace_csv(path: &Path, sol: &EquilibriumSolution) -> Result<PathBuf> {
    write_csv(
        path,
        &["iteration", "relative_gap"],
        sol.gap_trace
            .iter()
            .enumerate()
            .map(|(i, g)| vec![format!("{}", i + 1), format!("{g}")]),
    )
}

pub fn write_modal_split_csv(path: &Path, split: &ModalSplit) -> Result<PathBuf> {
    let mut rows = Vec::new();
    for (name, v) in &split.leg_share {
        rows.push(vec!["leg_share".into(), name.clone(), format!("{v}")]);
    }
    for (name, v) in &split.exclusive_share {
        rows.push(vec!["pure_mode_share".into(), name.clone(), format!("{v}")]);
    }
    for (name, v) in &split.subscribers {
        rows.push(vec![
            "subscribers_travelers_per_day".into(),
            name.clone(),
            format!("{v}"),
        ]);
    }
    write_csv(path, &["metric", "name", "value"], rows)
}

pub fn write_profit_csv(path: &Path, breakdown: &msp::ProfitBreakdown) -> Result<PathBuf> {
    write_csv(
        path,
        &["component", "eur_per_day"],
        [
            vec!["fixed_revenue".to_string(), format!("{}", breakdown.fixed_revenue)],
            vec![
                "variable_revenue".to_string(),
                format!("{}", breakdown.variable_revenue),
            ],
            vec!["fixed_cost".to_string(), format!("{}", breakdown.fixed_cost)],
            vec!["variable_cost".to_string(), format!("{}", breakdown.variable_cost)],
            vec!["profit".to_string(), format!("{}", breakdown.profit)],
        ],
    )
}

pub fn write_sweep_csv(path: &Path, table: &crate::mpec::SweepTable) -> Result<PathBuf> {
    let header: Vec<&str> = table.header.iter().map(|s| s.as_str()).collect();
    write_csv(path, &header, table.rows.clone())
}

// ---------------------------------------------------------------------------
// Profit curves
// ---------------------------------------------------------------------------

/// Pr at a grid of total fleet sizes, spread uniformly over the decision
/// links; the one-dimensional brute-force view of the fleet response.
pub fn profit_curve(model: &Model, msp_id: &str, totals: &[f64]) -> Result<Vec<(f64, f64)>> {
    let spec = msp::assemble(model, msp_id)?;
    let mut out = Vec::with_capacity(totals.len());
    let mut warm: Option<Vec<f64>> = None;
    for &total in totals {
        let fleet = model.uniform_fleet(total);
        let mut settings = model.solver_settings();
        if let Some(x0) = &warm {
            settings.initial_flow = crate::scenario::InitialFlow::Given(x0.clone());
        }
        let sol = solve_ue(model, &fleet, &settings)?;
        let breakdown = msp::profit(&spec, model, &sol, &fleet)?;
        warm = Some(sol.x.clone());
        out.push((total, breakdown.profit));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Reproduction pipelines
// ---------------------------------------------------------------------------

fn load_golden(id: &str) -> Result<(serde_json::Value, Model, &'static str)> {
    let text = golden_scenario(id)
        .ok_or_else(|| Error::InvalidInput(format!("unknown example `{id}`")))?;
    let doc: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let cfg = load_scenario_str(text)?;
    let model = Model::build(&cfg)?;
    Ok((doc, model, text))
}

fn trend(ok: bool, text: &str) -> String {
    format!("[{}] {text}\n", if ok { "ok" } else { "MISMATCH" })
}

/// Runs the full pipeline for one bundled example and writes its report
/// directory. Returns the summary text.
pub fn reproduce(example: &str, out_dir: &Path, jobs: usize) -> Result<String> {
    fs::create_dir_all(out_dir)?;
    let mut manifest = RunManifest::new(
        &["reproduce".to_string(), example.to_string()],
        example,
        golden_scenario(example.trim_end_matches("-separable"))
            .or_else(|| golden_scenario(example))
            .unwrap_or(""),
    );
    let summary = match example {
        "ex1" => reproduce_ex1(out_dir, &mut manifest, jobs)?,
        "ex1-separable" => reproduce_ex1_separable(out_dir, &mut manifest)?,
        "ex2" => reproduce_ex2(out_dir, &mut manifest, jobs)?,
        "ex3" => reproduce_ex3(out_dir, &mut manifest)?,
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown example `{other}`; expected ex1, ex1-separable, ex2 or ex3"
            )))
        }
    };
    let summary_path = out_dir.join("summary.txt");
    fs::write(&summary_path, &summary)?;
    manifest.record(&summary_path);
    manifest.write(out_dir)?;
    Ok(summary)
}

fn reproduce_ex1(out_dir: &Path, manifest: &mut RunManifest, jobs: usize) -> Result<String> {
    let (doc, model, _) = load_golden("ex1")?;
    let settings = MpecSettings::from_model(&model)?;
    let result = solve_mpec(&model, &settings)?;

    manifest.record(&write_csv(
        &out_dir.join("outer_trace.csv"),
        &["outer_step", "fleet_total_vehicles", "profit_eur_per_day"],
        result.outer_trace.iter().enumerate().map(|(i, s)| {
            vec![
                format!("{i}"),
                format!("{}", s.fleet.iter().sum::<f64>()),
                format!("{}", s.profit),
            ]
        }),
    )?);

    let mpec_json = serde_json::json!({
        "fleet": result.v_star.iter().map(|(k, v)| (k.clone(), v)).collect::<BTreeMap<String, f64>>(),
        "fleet_total_vehicles": result.v_star.total(),
        "profit_eur_per_day": result.profit.profit,
        "fixed_revenue": result.profit.fixed_revenue,
        "variable_revenue": result.profit.variable_revenue,
        "fixed_cost": result.profit.fixed_cost,
        "variable_cost": result.profit.variable_cost,
        "objective_evaluations": result.evaluations,
        "inner_iterations_total": result.inner_iteration_counts.iter().sum::<usize>(),
        "start_profits": result.start_profits,
    });
    let mpec_path = out_dir.join("mpec_result.json");
    fs::write(&mpec_path, serde_json::to_string_pretty(&mpec_json).expect("serializable") + "\n")?;
    manifest.record(&mpec_path);

    manifest.record(&write_equilibrium_csv(
        &out_dir.join("equilibrium.csv"),
        &model,
        &result.x_star,
    )?);
    manifest.record(&write_gap_trace_csv(&out_dir.join("gap_trace.csv"), &result.x_star)?);
    let split = modal_split(&model, &result.x_star)?;
    manifest.record(&write_modal_split_csv(&out_dir.join("modal_split.csv"), &split)?);
    manifest.record(&write_profit_csv(&out_dir.join("profit.csv"), &result.profit)?);

    let totals: Vec<f64> = (1..=12).map(|i| 5.0 * i as f64).collect();
    let curve = profit_curve(&model, "shareco", &totals)?;
    manifest.record(&write_csv(
        &out_dir.join("profit_curve.csv"),
        &["fleet_total_vehicles", "profit_eur_per_day"],
        curve.iter().map(|(v, p)| vec![format!("{v}"), format!("{p}")]),
    )?);

    // Competitor response: how the optimized profit moves with bus capacity.
    let axis = SweepAxis {
        target: "/cost_params/bus/times/wait/bpr/capacity".to_string(),
        values: vec![100.0, 150.0, 200.0],
    };
    let table = profit_response_sweep(&doc, &[axis], &SweepSolveMode::Mpec, jobs)?;
    manifest.record(&write_sweep_csv(&out_dir.join("bus_capacity_sweep.csv"), &table)?);
    let bus_profits: Vec<f64> = table
        .rows
        .iter()
        .map(|r| r[1].parse::<f64>().expect("profit column"))
        .collect();

    let best_grid = curve
        .iter()
        .cloned()
        .max_by(|a, b| a.1.partial_cmp(&b.1).expect("finite"))
        .expect("nonempty grid");
    let v_total = result.v_star.total();
    let mut s = String::new();
    let _ = write!(
        s,
        "example 1 report\n\
         fleet optimum: {v_total:.2} vehicles, profit {:.2} eur/day\n\
         inner iterations at the optimum solve: {}\n",
        result.profit.profit,
        result.x_star.iterations,
    );
    s.push_str(&trend(
        result.x_star.converged,
        "lower level converged at the fleet optimum",
    ));
    s.push_str(&trend(
        (v_total - best_grid.0).abs() <= 10.0,
        &format!(
            "grid maximum at {} vehicles brackets the optimizer's {v_total:.2}",
            best_grid.0
        ),
    ));
    s.push_str(&trend(
        bus_profits.windows(2).all(|w| w[0] >= w[1] - 1e-6),
        "optimized profit falls as the bus operator adds capacity",
    ));
    Ok(s)
}

fn reproduce_ex1_separable(out_dir: &Path, manifest: &mut RunManifest) -> Result<String> {
    let (_, base_model, _) = load_golden("ex1")?;
    let base_settings = MpecSettings::from_model(&base_model)?;
    let base = solve_mpec(&base_model, &base_settings)?;

    let (sep_doc, _, _) = load_golden("ex1-separable")?;
    let mut rows = Vec::new();
    let mut results = Vec::new();
    for (car_cap, share_cap) in [(220.0, 30.0), (210.0, 40.0)] {
        let mut doc = sep_doc.clone();
        apply_override(
            &mut doc,
            "/cost_params/car/times/main/bpr/capacity",
            serde_json::json!(car_cap),
        )?;
        apply_override(
            &mut doc,
            "/cost_params/carshare/times/main/bpr/capacity",
            serde_json::json!(share_cap),
        )?;
        let cfg = load_scenario_str(&doc.to_string())?;
        let model = Model::build(&cfg)?;
        let settings = MpecSettings::from_model(&model)?;
        let result = solve_mpec(&model, &settings)?;

        let totals: Vec<f64> = (1..=12).map(|i| 5.0 * i as f64).collect();
        let curve = profit_curve(&model, "shareco", &totals)?;
        manifest.record(&write_csv(
            &out_dir.join(format!("profit_curve_split_{car_cap:.0}_{share_cap:.0}.csv")),
            &["fleet_total_vehicles", "profit_eur_per_day"],
            curve.iter().map(|(v, p)| vec![format!("{v}"), format!("{p}")]),
        )?);

        rows.push(vec![
            format!("{car_cap:.0}-{share_cap:.0}"),
            format!("{}", result.v_star.total()),
            format!("{}", result.profit.profit),
        ]);
        results.push(((car_cap, share_cap), result));
    }
    rows.push(vec![
        "non-separable".to_string(),
        format!("{}", base.v_star.total()),
        format!("{}", base.profit.profit),
    ]);
    manifest.record(&write_csv(
        &out_dir.join("separable_comparison.csv"),
        &["capacity_split", "fleet_total_vehicles", "profit_eur_per_day"],
        rows,
    )?);

    let mut s = String::from("example 1, separable capacity splits\n");
    let _ = write!(
        s,
        "non-separable optimum: {:.2} vehicles, profit {:.2} eur/day\n",
        base.v_star.total(),
        base.profit.profit
    );
    for ((car_cap, share_cap), result) in &results {
        let _ = write!(
            s,
            "split [{car_cap:.0}-{share_cap:.0}]: {:.2} vehicles, profit {:.2} eur/day\n",
            result.v_star.total(),
            result.profit.profit
        );
        s.push_str(&trend(
            result.v_star.total() < base.v_star.total(),
            &format!("split [{car_cap:.0}-{share_cap:.0}] understates the fleet vs non-separable"),
        ));
        s.push_str(&trend(
            (result.profit.profit - base.profit.profit).abs() > 1e-6,
            &format!("split [{car_cap:.0}-{share_cap:.0}] misestimates the optimal profit"),
        ));
    }
    Ok(s)
}

fn reproduce_ex2(out_dir: &Path, manifest: &mut RunManifest, jobs: usize) -> Result<String> {
    let (doc, model, _) = load_golden("ex2")?;
    let package_idx = model
        .cfg
        .subscriptions
        .iter()
        .position(|s| s.id == "package")
        .ok_or_else(|| Error::InvalidInput("ex2 must declare a `package` subscription".into()))?;
    let price_axis = SweepAxis {
        target: format!("/subscriptions/{package_idx}/daily_cost"),
        values: vec![0.5, 0.75, 1.0, 1.25, 1.5],
    };
    let demand_axis = SweepAxis {
        target: "demand_scale".to_string(),
        values: vec![1.0, 1.4, 1.8],
    };
    let table = profit_response_sweep(&doc, &[demand_axis, price_axis], &SweepSolveMode::Mpec, jobs)?;
    manifest.record(&write_sweep_csv(&out_dir.join("price_demand_sweep.csv"), &table)?);

    let col = |name: &str| -> usize {
        table
            .header
            .iter()
            .position(|h| h == name)
            .unwrap_or_else(|| panic!("column {name} missing"))
    };
    let pkg_col = col("subscribers_package");
    let car_col = col("pure_share_car");
    let profit_col = col("profit_eur_per_day");
    let demand_col = 0usize;
    let price_count = 5usize;

    let cell = |r: usize, c: usize| table.rows[r][c].parse::<f64>().expect("numeric cell");
    let mut monotone_ok = true;
    for d in 0..3 {
        for i in 0..price_count - 1 {
            let row = d * price_count + i;
            if cell(row + 1, pkg_col) > cell(row, pkg_col) + 1e-6 {
                monotone_ok = false;
            }
            if cell(row + 1, car_col) < cell(row, car_col) - 1e-6 {
                monotone_ok = false;
            }
        }
    }
    let best_profit_row = (0..table.rows.len())
        .max_by(|&a, &b| cell(a, profit_col).partial_cmp(&cell(b, profit_col)).expect("finite"))
        .expect("rows");
    let best_subscribers_row = (0..table.rows.len())
        .max_by(|&a, &b| cell(a, pkg_col).partial_cmp(&cell(b, pkg_col)).expect("finite"))
        .expect("rows");

    let mut s = String::from("example 2 report: bus + car-sharing package\n");
    let _ = write!(
        s,
        "grid: package price 0.5..1.5 eur/day x demand scale 1.0/1.4/1.8\n\
         best profit at row {best_profit_row} (demand_scale {}, price {})\n",
        table.rows[best_profit_row][demand_col], table.rows[best_profit_row][1]
    );
    s.push_str(&trend(
        monotone_ok,
        "package share falls and private-car share rises with the package price",
    ));
    s.push_str(&trend(
        best_profit_row == best_subscribers_row,
        "highest profit coincides with the largest subscriber count",
    ));
    Ok(s)
}

fn reproduce_ex3(out_dir: &Path, manifest: &mut RunManifest) -> Result<String> {
    let (_, solo_model, _) = load_golden("ex3-solo")?;
    let solo_settings = MpecSettings::from_model(&solo_model)?;
    let solo = solve_mpec(&solo_model, &solo_settings)?;

    let (doc, comp_model, _) = load_golden("ex3")?;
    let comp_settings = MpecSettings::from_model(&comp_model)?;
    let comp = solve_mpec(&comp_model, &comp_settings)?;

    let totals: Vec<f64> = (1..=12).map(|i| 10.0 * i as f64).collect();
    for (tag, model) in [("solo", &solo_model), ("competitor", &comp_model)] {
        let curve = profit_curve(model, "bike1co", &totals)?;
        manifest.record(&write_csv(
            &out_dir.join(format!("profit_curve_{tag}.csv")),
            &["fleet_total_vehicles", "profit_eur_per_day"],
            curve.iter().map(|(v, p)| vec![format!("{v}"), format!("{p}")]),
        )?);
    }

    // Pricing scenarios for the incumbent under competition:
    // (package price, cost per hour, subsidy).
    let sub_idx = comp_model
        .cfg
        .subscriptions
        .iter()
        .position(|s| s.id == "bike1_pass")
        .ok_or_else(|| Error::InvalidInput("ex3 must declare `bike1_pass`".into()))?;
    let scenarios: [(&str, f64, f64, f64); 4] = [
        ("scenario1", 1.0, 0.8, 0.0),
        ("scenario2", 2.0, 0.6, 0.0),
        ("scenario3", 0.5, 1.2, 0.0),
        ("scenario4", 0.8, 0.8, 1.0),
    ];
    let mut rows = Vec::new();
    let mut profits = Vec::new();
    for (name, price, per_hour, subsidy) in scenarios {
        let mut sdoc = doc.clone();
        apply_override(
            &mut sdoc,
            &format!("/subscriptions/{sub_idx}/daily_cost"),
            serde_json::json!(price),
        )?;
        apply_override(
            &mut sdoc,
            &format!("/subscriptions/{sub_idx}/daily_subsidy"),
            serde_json::json!(subsidy),
        )?;
        apply_override(
            &mut sdoc,
            "/cost_params/bike1/tariff_per_hour",
            serde_json::json!(per_hour),
        )?;
        let cfg = load_scenario_str(&sdoc.to_string())?;
        let model = Model::build(&cfg)?;
        let settings = MpecSettings::from_model(&model)?;
        let result = solve_mpec(&model, &settings)?;
        rows.push(vec![
            name.to_string(),
            format!("{price}"),
            format!("{per_hour}"),
            format!("{subsidy}"),
            format!("{}", result.v_star.total()),
            format!("{}", result.profit.profit),
        ]);
        profits.push((name, result.profit.profit));
    }
    rows.push(vec![
        "baseline_solo".to_string(),
        String::new(),
        String::new(),
        String::new(),
        format!("{}", solo.v_star.total()),
        format!("{}", solo.profit.profit),
    ]);
    rows.push(vec![
        "baseline_competitor".to_string(),
        String::new(),
        String::new(),
        String::new(),
        format!("{}", comp.v_star.total()),
        format!("{}", comp.profit.profit),
    ]);
    manifest.record(&write_csv(
        &out_dir.join("scenarios.csv"),
        &[
            "scenario",
            "subscription_price_eur_per_day",
            "tariff_per_hour_eur",
            "subsidy_eur_per_day",
            "fleet_total_vehicles",
            "profit_eur_per_day",
        ],
        rows,
    )?);

    let s4 = profits
        .iter()
        .find(|(n, _)| *n == "scenario4")
        .expect("scenario4 present")
        .1;
    let others_max = profits
        .iter()
        .filter(|(n, _)| *n != "scenario4")
        .map(|(_, p)| *p)
        .fold(f64::NEG_INFINITY, f64::max);

    let mut s = String::from("example 3 report: bike-sharing competition\n");
    let _ = write!(
        s,
        "incumbent alone: profit {:.2} eur/day at {:.1} vehicles\n\
         with subsidized entrant: profit {:.2} eur/day at {:.1} vehicles\n",
        solo.profit.profit,
        solo.v_star.total(),
        comp.profit.profit,
        comp.v_star.total()
    );
    s.push_str(&trend(
        comp.profit.profit < solo.profit.profit,
        "the entrant strictly reduces the incumbent's maximum profit",
    ));
    s.push_str(&trend(
        s4 > others_max,
        "the subsidized scenario 4 beats scenarios 1-3",
    ));
    Ok(s)
}
