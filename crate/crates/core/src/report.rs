//! Solution and sweep artifacts in CSV and JSON.
//!
//! CSV files are UTF-8 with a header row; column order is fixed by the row
//! structs below and mirrored in the `*_HEADER` constants.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::allocation::{check_feasibility, Kappa};
use crate::config::ScenarioConfig;
use crate::error::{PlannerError, Result};
use crate::optimizer::{KappaTrace, ParetoSolution, Regime, SolveOutcome};
use crate::ris::scenario_phase_design;
use crate::scenario::{linear_to_db, watt_to_dbm, Scenario};
use crate::sweep::SweepRow;

pub const SUMMARY_HEADER: &str = "seed,kappa_opt,cs_subcarriers,uav_subcarriers,r_star_m,u_haps,n_uav,coverage_pct,served_pct,outage_count,lambda_true,lambda_true_db,lambda_upp,lambda_upp_db,stopped_early";
pub const USER_HEADER: &str = "user,x_m,y_m,radius_m,zone,server,uav_x_m,uav_y_m,ris_elements,subcarriers,power_w,power_dbm,rate_bps,meets_min_rate";
pub const TRACE_HEADER: &str = "kappa,cs_subcarriers,uav_subcarriers,r_star_m,u_haps,n_uav,outage_count,lambda_true,lambda_upp";
pub const BASELINE_HEADER: &str = "regime,kappa,coverage_pct,u_haps,n_uav,outage,lambda_upp_db";
pub const SWEEP_HEADER: &str = "value,seed,kappa,u_haps,coverage_pct,n_uav,lambda_true_db,lambda_upp_db,r_star_m,outage_count,wall_ms,error";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSummary {
    pub seed: u64,
    pub kappa_opt: Kappa,
    pub cs_subcarriers: usize,
    pub uav_subcarriers: usize,
    pub r_star_m: f64,
    pub u_haps: usize,
    pub n_uav: usize,
    /// Share of users served through the HAPS-RIS.
    pub coverage_pct: f64,
    /// Share of users meeting the minimum rate through either tier.
    pub served_pct: f64,
    pub outage_count: usize,
    pub lambda_true: f64,
    pub lambda_true_db: Option<f64>,
    pub lambda_upp: Option<f64>,
    pub lambda_upp_db: Option<f64>,
    pub stopped_early: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRow {
    pub user: usize,
    pub x_m: f64,
    pub y_m: f64,
    pub radius_m: f64,
    pub zone: String,
    pub server: String,
    pub uav_x_m: Option<f64>,
    pub uav_y_m: Option<f64>,
    pub ris_elements: u64,
    /// Subcarrier indices joined with `;`.
    pub subcarriers: String,
    /// Total transmit power over the user's subcarriers.
    pub power_w: f64,
    pub power_dbm: Option<f64>,
    pub rate_bps: f64,
    pub meets_min_rate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub regime: Regime,
    pub kappa: Kappa,
    pub coverage_pct: f64,
    pub u_haps: usize,
    pub n_uav: usize,
    pub outage: usize,
    pub lambda_upp_db: Option<f64>,
}

/// Everything written by a solve run. Holds the input both in config units
/// (dB) and as the linear scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionArtifact {
    pub summary: SolutionSummary,
    pub users: Vec<UserRow>,
    pub trace: Vec<KappaTrace>,
    pub solution: ParetoSolution,
    pub config: ScenarioConfig,
    pub scenario: Scenario,
}

fn positive_db(x: f64) -> Option<f64> {
    (x > 0.0).then(|| linear_to_db(x))
}

pub fn user_rows(solution: &ParetoSolution, scenario: &Scenario) -> Vec<UserRow> {
    let phase = scenario_phase_design(scenario);
    let report = check_feasibility(&solution.plan, scenario, Some(&solution.deployment), &phase);
    report
        .users
        .iter()
        .map(|o| {
            let u = o.user;
            let p = scenario.users[u];
            let (subcarriers, uav) = if let Some(l) = solution.plan.haps_link(u) {
                (l.subcarriers.clone(), None)
            } else if let Some(l) = solution.plan.uav_link(u) {
                (l.subcarriers.clone(), Some(solution.deployment.uav_position(l.uav)))
            } else {
                (Vec::new(), None)
            };
            let ris_elements = solution
                .plan
                .ris_clusters
                .as_ref()
                .and_then(|c| c.cluster_of(u))
                .map_or(0, |r| r.end - r.start);
            UserRow {
                user: u,
                x_m: p.x,
                y_m: p.y,
                radius_m: scenario.user_radius(u),
                zone: if solution.plan.zone.haps_zone.contains(&u) { "haps" } else { "uav" }.into(),
                server: o.server.to_string(),
                uav_x_m: uav.map(|q| q.x),
                uav_y_m: uav.map(|q| q.y),
                ris_elements,
                subcarriers: subcarriers
                    .iter()
                    .map(|s| s.to_string())
                    .collect::<Vec<_>>()
                    .join(";"),
                power_w: o.power_w,
                power_dbm: (o.power_w > 0.0).then(|| watt_to_dbm(o.power_w)),
                rate_bps: o.rate_bps,
                meets_min_rate: o.meets_min_rate,
            }
        })
        .collect()
}

pub fn build_artifact(
    outcome: &SolveOutcome,
    config: &ScenarioConfig,
    scenario: &Scenario,
    seed: u64,
) -> SolutionArtifact {
    let b = &outcome.best;
    let users = user_rows(b, scenario);
    let served = users.iter().filter(|u| u.meets_min_rate).count();
    SolutionArtifact {
        summary: SolutionSummary {
            seed,
            kappa_opt: b.kappa,
            cs_subcarriers: b.split.cs_subcarriers,
            uav_subcarriers: b.split.uav_subcarriers,
            r_star_m: b.r_star_m,
            u_haps: b.u_haps,
            n_uav: b.n_uav_star,
            coverage_pct: b.coverage_pct,
            served_pct: 100.0 * served as f64 / scenario.user_count() as f64,
            outage_count: b.outage_users.len(),
            lambda_true: b.lambda_true,
            lambda_true_db: positive_db(b.lambda_true),
            lambda_upp: b.lambda_upp,
            lambda_upp_db: b.lambda_upp.and_then(positive_db),
            stopped_early: outcome.stopped_early,
        },
        users,
        trace: outcome.trace(),
        solution: b.clone(),
        config: config.clone(),
        scenario: scenario.clone(),
    }
}

pub fn baseline_row(regime: Regime, solution: &ParetoSolution) -> BaselineRow {
    BaselineRow {
        regime,
        kappa: solution.kappa,
        coverage_pct: solution.coverage_pct,
        u_haps: solution.u_haps,
        n_uav: solution.n_uav_star,
        outage: solution.outage_users.len(),
        lambda_upp_db: solution.lambda_upp.and_then(positive_db),
    }
}

fn csv_err(e: csv::Error) -> PlannerError {
    PlannerError::Io(e.to_string())
}

/// Serializes `rows` as CSV with the struct's field order as header.
pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| PlannerError::Io(e.to_string()))
}

pub fn artifact_from_json(text: &str) -> Result<SolutionArtifact> {
    serde_json::from_str(text).map_err(|e| PlannerError::Io(e.to_string()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| PlannerError::Io(format!("{}: {e}", path.display())))
}

fn sibling(path: &Path, suffix: &str) -> std::path::PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("solution");
    path.with_file_name(format!("{stem}_{suffix}.csv"))
}

/// Writes the artifact as one JSON document at `path`.
pub fn write_solution_json(artifact: &SolutionArtifact, path: &Path) -> Result<()> {
    write_file(path, &to_json(artifact)?)
}

/// Writes per-user rows to `path` and the summary and kappa trace to
/// `<stem>_summary.csv` and `<stem>_trace.csv` next to it. Returns all paths.
pub fn write_solution_csv(artifact: &SolutionArtifact, path: &Path) -> Result<Vec<std::path::PathBuf>> {
    let summary = sibling(path, "summary");
    let trace = sibling(path, "trace");
    write_file(path, &csv_string(&artifact.users)?)?;
    write_file(&summary, &csv_string(std::slice::from_ref(&artifact.summary))?)?;
    write_file(&trace, &csv_string(&artifact.trace)?)?;
    Ok(vec![path.to_path_buf(), summary, trace])
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    write_file(path, &csv_string(rows)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::{solve, OptimizerConfig};

    fn header_of(csv: &str) -> &str {
        csv.lines().next().unwrap()
    }

    #[test]
    fn headers_match_constants() {
        let cfg = ScenarioConfig::default();
        let s = cfg.build(1).unwrap();
        let o = solve(&s, &OptimizerConfig { q_max: 2, ..Default::default() }, 1).unwrap();
        let a = build_artifact(&o, &cfg, &s, 1);
        assert_eq!(header_of(&csv_string(&a.users).unwrap()), USER_HEADER);
        assert_eq!(header_of(&csv_string(&[a.summary.clone()]).unwrap()), SUMMARY_HEADER);
        assert_eq!(header_of(&csv_string(&a.trace).unwrap()), TRACE_HEADER);
        let b = baseline_row(Regime::Optimized, &o.best);
        assert_eq!(header_of(&csv_string(&[b]).unwrap()), BASELINE_HEADER);
    }

    #[test]
    fn json_round_trip() {
        let cfg = ScenarioConfig::default();
        let s = cfg.build(4).unwrap();
        let o = solve(&s, &OptimizerConfig { q_max: 3, ..Default::default() }, 4).unwrap();
        let a = build_artifact(&o, &cfg, &s, 4);
        let back = artifact_from_json(&to_json(&a).unwrap()).unwrap();
        assert_eq!(back, a);
    }
}
