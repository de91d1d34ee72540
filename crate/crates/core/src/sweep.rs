//! Seeded batch experiments over one scenario parameter, plus the minimum
//! RIS size search.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocation::Kappa;
use crate::config::ScenarioConfig;
use crate::error::{PlannerError, Result};
use crate::optimizer::{run_baseline, solve, OptimizerConfig, Regime, SolveOutcome};
use crate::scenario::{linear_to_db, Scenario};

/// Largest RIS size considered by [`min_ris_for_full_coverage`].
pub const M_MAX: u64 = 100_000_000;

/// Relative bracket width at which the RIS-size bisection stops.
pub const BISECTION_RTOL: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVariable {
    /// Total RIS element count.
    M,
    /// CS transmit power, dBm.
    #[serde(rename = "P_cs")]
    PCs,
    /// Minimum user rate, bit/s.
    #[serde(rename = "r0")]
    R0,
    /// Bandwidth portioning factor; each cell solves with a single-point grid.
    #[serde(rename = "kappa")]
    Kappa,
}

fn default_regime() -> Regime {
    Regime::Optimized
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
    #[serde(default = "default_regime")]
    pub regime: Regime,
    /// Seeds `0..replications`.
    #[serde(default = "one")]
    pub replications: u64,
    #[serde(default)]
    pub scenario: ScenarioConfig,
}

impl SweepSpec {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| {
            let message = e.message().to_string();
            let field = message.split('`').nth(1).unwrap_or("sweep").to_string();
            PlannerError::Config { field, message }
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(PlannerError::config("grid", "must not be empty"));
        }
        let inc = self.grid.windows(2).all(|w| w[0] < w[1]);
        let dec = self.grid.windows(2).all(|w| w[0] > w[1]);
        if !(inc || dec) {
            return Err(PlannerError::config("grid", "must be strictly monotone"));
        }
        if self.replications == 0 {
            return Err(PlannerError::config("replications", "must be >= 1"));
        }
        Ok(())
    }

    /// Scenario config with the swept variable set to `value`.
    pub fn cell_config(&self, value: f64) -> ScenarioConfig {
        let mut cfg = self.scenario.clone();
        match self.variable {
            SweepVariable::M => cfg.M = value.round() as u64,
            SweepVariable::PCs => cfg.P_cs_dbm = value,
            SweepVariable::R0 => cfg.r0_bps = value,
            SweepVariable::Kappa => {
                cfg.optimizer = cfg.optimizer.with_grid(vec![Kappa(value)]);
            }
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub seed: u64,
    pub kappa: Option<Kappa>,
    pub u_haps: usize,
    pub coverage_pct: f64,
    pub n_uav: usize,
    pub lambda_true_db: Option<f64>,
    pub lambda_upp_db: Option<f64>,
    pub r_star_m: f64,
    pub outage_count: usize,
    pub wall_ms: f64,
    pub error: Option<String>,
}

impl SweepRow {
    /// Equality ignoring wall time.
    pub fn same_outcome(&self, other: &SweepRow) -> bool {
        SweepRow {
            wall_ms: 0.0,
            ..self.clone()
        } == SweepRow {
            wall_ms: 0.0,
            ..other.clone()
        }
    }

    fn failed(value: f64, seed: u64, wall_ms: f64, e: &PlannerError) -> Self {
        Self {
            value,
            seed,
            kappa: None,
            u_haps: 0,
            coverage_pct: 0.0,
            n_uav: 0,
            lambda_true_db: None,
            lambda_upp_db: None,
            r_star_m: f64::NAN,
            outage_count: 0,
            wall_ms,
            error: Some(e.to_string()),
        }
    }
}

fn positive_db(x: f64) -> Option<f64> {
    (x > 0.0).then(|| linear_to_db(x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub variable: SweepVariable,
    pub regime: Regime,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Mean of `f` over the seeds of each grid value, in row order.
    pub fn mean_by_value(&self, f: impl Fn(&SweepRow) -> f64) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64, usize)> = Vec::new();
        for r in self.rows.iter().filter(|r| r.error.is_none()) {
            match out.last_mut() {
                Some(last) if last.0 == r.value => {
                    last.1 += f(r);
                    last.2 += 1;
                }
                _ => out.push((r.value, f(r), 1)),
            }
        }
        out.into_iter().map(|(v, s, n)| (v, s / n as f64)).collect()
    }
}

fn solve_cell(cfg: &ScenarioConfig, regime: Regime, variable: SweepVariable, seed: u64) -> Result<SolveOutcome> {
    let scenario = cfg.build(seed)?;
    match variable {
        SweepVariable::Kappa => solve(&scenario, &cfg.optimizer, seed),
        _ => run_baseline(regime, &scenario, &cfg.optimizer, seed),
    }
}

/// One (value, seed) cell, computed exactly as inside [`run_sweep`].
pub fn run_cell(spec: &SweepSpec, value: f64, seed: u64) -> SweepRow {
    let start = Instant::now();
    let cfg = spec.cell_config(value);
    let outcome = solve_cell(&cfg, spec.regime, spec.variable, seed);
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    match outcome {
        Ok(o) => {
            let b = &o.best;
            SweepRow {
                value,
                seed,
                kappa: Some(b.kappa),
                u_haps: b.u_haps,
                coverage_pct: b.coverage_pct,
                n_uav: b.n_uav_star,
                lambda_true_db: positive_db(b.lambda_true),
                lambda_upp_db: b.lambda_upp.and_then(positive_db),
                r_star_m: b.r_star_m,
                outage_count: b.outage_users.len(),
                wall_ms,
                error: None,
            }
        }
        Err(e) => SweepRow::failed(value, seed, wall_ms, &e),
    }
}

/// Evaluates every grid value with every seed in parallel. Failing cells are
/// recorded as rows with `error` set; rows are sorted by value, then seed.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let cells: Vec<(f64, u64)> = spec
        .grid
        .iter()
        .flat_map(|&v| (0..spec.replications).map(move |s| (v, s)))
        .collect();
    let mut rows: Vec<SweepRow> = cells
        .par_iter()
        .map(|&(v, s)| run_cell(spec, v, s))
        .collect();
    rows.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.seed.cmp(&b.seed)));
    Ok(SweepResult {
        variable: spec.variable,
        regime: spec.regime,
        rows,
    })
}

/// Service model for the minimum RIS size search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CoverageRegime {
    /// All subcarriers to the CS, no UAVs.
    HapsOnly,
    /// Equal split with at most `max_uav` UAVs serving the inner zone.
    UavAssisted { max_uav: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinRisResult {
    /// Smallest feasible element count found.
    pub m_min: u64,
    /// Largest count known infeasible (0 when nothing smaller was tried).
    pub m_infeasible: u64,
    pub evaluations: usize,
}

fn serves_everyone(
    m: u64,
    regime: CoverageRegime,
    template: &Scenario,
    config: &OptimizerConfig,
    seed: u64,
) -> Result<bool> {
    let scenario = template.with_ris_elements(m);
    let best = match regime {
        CoverageRegime::HapsOnly => run_baseline(Regime::HapsOnly, &scenario, config, seed)?.best,
        CoverageRegime::UavAssisted { max_uav } => {
            let cfg = OptimizerConfig {
                max_uav: Some(max_uav),
                ..config.with_grid(vec![Kappa::EQUAL])
            };
            solve(&scenario, &cfg, seed)?.best
        }
    };
    Ok(best.outage_users.is_empty())
}

/// Smallest RIS size that serves every user at rate `r0` (no outage).
///
/// Doubles `M` from 1 until feasible (capped at [`M_MAX`]), then bisects until
/// the bracket is one element or [`BISECTION_RTOL`] wide. The lower bracket is
/// always infeasible and the upper always feasible.
pub fn min_ris_for_full_coverage(
    r0_bps: f64,
    regime: CoverageRegime,
    template: &Scenario,
    config: &OptimizerConfig,
    seed: u64,
) -> Result<MinRisResult> {
    if !(r0_bps > 0.0) {
        return Err(PlannerError::config("r0_bps", "must be > 0"));
    }
    let template = template.with_min_rate(r0_bps);
    let mut evaluations = 0;
    let mut feasible = |m: u64| {
        evaluations += 1;
        serves_everyone(m, regime, &template, config, seed)
    };

    let mut lo = 0u64;
    let mut hi = 1u64;
    loop {
        if feasible(hi)? {
            break;
        }
        if hi >= M_MAX {
            return Err(PlannerError::NotAchievable { m_max: M_MAX });
        }
        lo = hi;
        hi = (hi * 2).min(M_MAX);
    }
    while hi - lo > 1 && (hi - lo) as f64 > BISECTION_RTOL * hi as f64 {
        let mid = lo + (hi - lo) / 2;
        if feasible(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(MinRisResult {
        m_min: hi,
        m_infeasible: lo,
        evaluations,
    })
}

fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[idx[k]] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties. `NaN` when either
/// input is constant or shorter than two.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "spearman inputs differ in length");
    if x.len() < 2 {
        return f64::NAN;
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return f64::NAN;
    }
    sxy / (sxx * syy).sqrt()
}
