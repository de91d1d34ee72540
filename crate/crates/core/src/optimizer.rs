//! Dynamic Pareto search over the bandwidth portioning factor.
//!
//! For every kappa on the grid the inner lexicographic optimizer first shrinks
//! the UAV-zone radius as far as the HAPS-RIS zone stays rate-feasible
//! (maximizing HAPS coverage), then lowers the UAV count as far as k-means
//! placement keeps every UAV-zone user feasible. The best point over the grid
//! is returned together with a per-kappa trace.

use std::cmp::{Ordering, Reverse};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocation::{
    build_plan, check_feasibility, check_structure, haps_user_rate, partition, split_bandwidth,
    AllocationPlan, BandwidthSplit, Kappa, ZonePartition,
};
use crate::error::{PlannerError, Result};
use crate::placement::{
    kmeans_place, pathloss_upper_bound, true_total_pathloss, UavDeployment, DEFAULT_KMEANS_MAX_ITER,
    KMEANS_RESTARTS,
};
use crate::ris::{scenario_phase_design, PhaseDesign};
use crate::scenario::{Point3, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Explicit kappa grid; when absent the grid is `1, 1.5, 2, ...` with
    /// `q_max` entries.
    pub kappa_grid: Option<Vec<Kappa>>,
    pub q_max: usize,
    /// Radius decrement per scan step, meters.
    pub delta_r_m: f64,
    /// UAV-count decrement per scan step.
    pub delta_n: usize,
    /// Cap on radius-scan steps.
    pub t_max: usize,
    /// Cap on UAV-count scan steps.
    pub t_prime_max: usize,
    /// Convergence threshold for the kappa-to-kappa change in UAV count and coverage.
    pub epsilon: f64,
    /// Starting UAV count; `None` starts from the UAV-zone population.
    pub n_uav_init: Option<usize>,
    /// Hard cap on deployable UAVs.
    pub max_uav: Option<usize>,
    /// Stop the kappa scan once consecutive points change by less than `epsilon`.
    pub early_stop: bool,
    pub kmeans_max_iter: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kappa_grid: None,
            q_max: 20,
            delta_r_m: 50.0,
            delta_n: 1,
            t_max: 1000,
            t_prime_max: 1000,
            epsilon: 1.0,
            n_uav_init: None,
            max_uav: None,
            early_stop: false,
            kmeans_max_iter: DEFAULT_KMEANS_MAX_ITER,
        }
    }
}

impl OptimizerConfig {
    pub fn with_grid(&self, grid: Vec<Kappa>) -> Self {
        Self {
            kappa_grid: Some(grid),
            ..self.clone()
        }
    }

    /// The kappa values actually scanned, at most `q_max` of them.
    pub fn effective_grid(&self) -> Vec<Kappa> {
        match &self.kappa_grid {
            Some(g) => g.iter().copied().take(self.q_max.max(1)).collect(),
            None => (0..self.q_max.max(1))
                .map(|q| Kappa(1.0 + 0.5 * q as f64))
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_r_m > 0.0) {
            return Err(PlannerError::config("optimizer.delta_r_m", "must be > 0"));
        }
        if self.delta_n == 0 {
            return Err(PlannerError::config("optimizer.delta_n", "must be >= 1"));
        }
        if !(self.epsilon > 0.0) {
            return Err(PlannerError::config("optimizer.epsilon", "must be > 0"));
        }
        if self.q_max == 0 {
            return Err(PlannerError::config("optimizer.q_max", "must be >= 1"));
        }
        if let Some(g) = &self.kappa_grid {
            if g.is_empty() {
                return Err(PlannerError::config("optimizer.kappa_grid", "must not be empty"));
            }
            if g.windows(2).any(|w| !(w[0].0 < w[1].0)) {
                return Err(PlannerError::config(
                    "optimizer.kappa_grid",
                    "must be strictly increasing",
                ));
            }
        }
        Ok(())
    }

    /// Upper bound on inner iterations of one solve:
    /// `Q_max * (T + T' * kmeans_max_iter * restarts)`.
    pub fn iteration_cap(&self, scenario: &Scenario) -> usize {
        let radius_steps = self.radius_grid(scenario, true).len();
        let uav_steps = self.t_prime_max.min(scenario.user_count());
        self.effective_grid().len()
            * (radius_steps + uav_steps + uav_steps * self.kmeans_max_iter * KMEANS_RESTARTS)
    }

    /// Descending radius grid `R0 - t*delta` for `t = 1..`, positive radii only
    /// unless `include_center`.
    pub fn radius_grid(&self, scenario: &Scenario, include_center: bool) -> Vec<f64> {
        let r0 = scenario.coverage_radius_m;
        let mut out: Vec<f64> = (1..=self.t_max)
            .map(|t| r0 - t as f64 * self.delta_r_m)
            .take_while(|&r| r > 1e-9 * r0.max(1.0))
            .collect();
        if include_center && out.len() < self.t_max {
            out.push(0.0);
        }
        out
    }
}

/// Baseline operating points plus the optimized one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    UavOnly,
    HapsOnly,
    EqualSplit,
    Optimized,
}

impl Regime {
    pub const ALL: [Regime; 4] = [
        Regime::UavOnly,
        Regime::HapsOnly,
        Regime::EqualSplit,
        Regime::Optimized,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::UavOnly => "uav-only",
            Regime::HapsOnly => "haps-only",
            Regime::EqualSplit => "equal-split",
            Regime::Optimized => "optimized",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = PlannerError;

    fn from_str(s: &str) -> Result<Self> {
        Regime::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| PlannerError::config("regime", format!("unknown regime `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusProbe {
    pub radius_m: f64,
    pub haps_users: usize,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HapsCoverage {
    pub radius_m: f64,
    pub zone: ZonePartition,
    pub u_haps: usize,
    pub probes: Vec<RadiusProbe>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavProbe {
    pub n_uav: usize,
    pub feasible: bool,
    pub violators: usize,
    pub kmeans_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavSizing {
    pub n_uav: usize,
    pub n_uav_init: usize,
    pub deployment: UavDeployment,
    pub plan: AllocationPlan,
    pub outage_users: Vec<usize>,
    pub probes: Vec<UavProbe>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationCounts {
    pub radius_probes: usize,
    pub uav_probes: usize,
    pub kmeans_iterations: usize,
}

impl IterationCounts {
    pub fn total(&self) -> usize {
        self.radius_probes + self.uav_probes + self.kmeans_iterations
    }

    fn add(&mut self, o: &IterationCounts) {
        self.radius_probes += o.radius_probes;
        self.uav_probes += o.uav_probes;
        self.kmeans_iterations += o.kmeans_iterations;
    }
}

/// One operating point of the joint problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoSolution {
    pub kappa: Kappa,
    pub split: BandwidthSplit,
    pub r_star_m: f64,
    pub n_uav_star: usize,
    pub n_uav_init: usize,
    pub u_haps: usize,
    pub coverage_pct: f64,
    pub outage_users: Vec<usize>,
    /// Total average UAV path loss over served pairs (linear).
    pub lambda_true: f64,
    /// Upper bound on `lambda_true`; absent when alpha != 2.
    pub lambda_upp: Option<f64>,
    pub deployment: UavDeployment,
    pub plan: AllocationPlan,
    pub iterations: IterationCounts,
}

impl ParetoSolution {
    /// Sort key: fewer outage users, more HAPS users, fewer UAVs, lower bound.
    fn rank(&self) -> (usize, Reverse<usize>, usize) {
        (self.outage_users.len(), Reverse(self.u_haps), self.n_uav_star)
    }

    fn loss_key(&self) -> f64 {
        self.lambda_upp.unwrap_or(self.lambda_true)
    }

    /// Lexicographic comparison; `Less` means `self` is the better point.
    pub fn lexicographic_cmp(&self, other: &Self) -> Ordering {
        self.rank()
            .cmp(&other.rank())
            .then_with(|| self.loss_key().total_cmp(&other.loss_key()))
    }

    pub fn summary(&self) -> KappaTrace {
        KappaTrace {
            kappa: self.kappa,
            cs_subcarriers: self.split.cs_subcarriers,
            uav_subcarriers: self.split.uav_subcarriers,
            r_star_m: self.r_star_m,
            u_haps: self.u_haps,
            n_uav: self.n_uav_star,
            outage_count: self.outage_users.len(),
            lambda_true: self.lambda_true,
            lambda_upp: self.lambda_upp,
        }
    }
}

/// Per-kappa summary row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaTrace {
    pub kappa: Kappa,
    pub cs_subcarriers: usize,
    pub uav_subcarriers: usize,
    pub r_star_m: f64,
    pub u_haps: usize,
    pub n_uav: usize,
    pub outage_count: usize,
    pub lambda_true: f64,
    pub lambda_upp: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub best: ParetoSolution,
    /// Evaluated operating points in grid order.
    pub candidates: Vec<ParetoSolution>,
    pub stopped_early: bool,
    pub iterations: IterationCounts,
}

impl SolveOutcome {
    pub fn trace(&self) -> Vec<KappaTrace> {
        self.candidates.iter().map(ParetoSolution::summary).collect()
    }
}

/// Seed of the k-means placement evaluated for `n_uav` UAVs under run seed `seed`.
pub fn placement_seed(seed: u64, n_uav: u64) -> u64 {
    let mut z = seed.wrapping_add(n_uav.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn no_uav_service(split: &BandwidthSplit, config: &OptimizerConfig) -> bool {
    split.uav_subcarriers == 0 || config.max_uav == Some(0)
}

/// Whether every HAPS-zone user of `zone` meets the minimum rate.
fn haps_zone_feasible(
    zone: &ZonePartition,
    split: &BandwidthSplit,
    scenario: &Scenario,
    phase: &PhaseDesign,
    seed: u64,
) -> bool {
    if zone.haps_zone.is_empty() {
        return true;
    }
    let Ok(plan) = build_plan(zone, split, None, scenario, seed) else {
        return false;
    };
    if !check_structure(&plan, scenario, None).is_empty() {
        return false;
    }
    zone.haps_zone.iter().all(|&u| {
        haps_user_rate(u, &plan, scenario, phase).is_ok_and(|r| r >= scenario.min_rate_bps)
    })
}

/// Radius scan: the smallest grid radius whose HAPS zone is fully feasible.
/// Falls back to `R0` (empty HAPS zone) when no radius works or the CS band is empty.
pub fn maximize_haps_coverage(
    kappa: Kappa,
    scenario: &Scenario,
    config: &OptimizerConfig,
    phase: &PhaseDesign,
    seed: u64,
) -> HapsCoverage {
    let split = split_bandwidth(kappa, scenario.total_subcarriers);
    let mut best = scenario.coverage_radius_m;
    let mut probes = Vec::new();

    if split.cs_subcarriers > 0 {
        // with no UAV tier the HAPS zone may extend to the center
        for radius in config.radius_grid(scenario, no_uav_service(&split, config)) {
            let zone = partition(scenario, radius);
            let feasible = haps_zone_feasible(&zone, &split, scenario, phase, seed);
            probes.push(RadiusProbe {
                radius_m: radius,
                haps_users: zone.haps_zone.len(),
                feasible,
            });
            if feasible {
                best = radius;
            }
        }
    }

    let zone = partition(scenario, best);
    HapsCoverage {
        radius_m: best,
        u_haps: zone.haps_zone.len(),
        zone,
        probes,
    }
}

struct UavEval {
    deployment: UavDeployment,
    plan: Option<AllocationPlan>,
    violators: Vec<usize>,
}

fn evaluate_uav_count(
    n: usize,
    zone: &ZonePartition,
    split: &BandwidthSplit,
    scenario: &Scenario,
    config: &OptimizerConfig,
    phase: &PhaseDesign,
    seed: u64,
) -> Result<UavEval> {
    let points: Vec<Point3> = zone.uav_zone.iter().map(|&u| scenario.users[u]).collect();
    let deployment = kmeans_place(
        &points,
        n,
        placement_seed(seed, n as u64),
        config.kmeans_max_iter,
        scenario.uav_altitude_m,
    )?
    .with_user_ids(&zone.uav_zone);

    let plan = match build_plan(zone, split, Some(&deployment), scenario, seed) {
        Ok(p) => p,
        Err(PlannerError::NoSubcarriersForUser { .. }) => {
            return Ok(UavEval {
                deployment,
                plan: None,
                violators: zone.uav_zone.clone(),
            })
        }
        Err(e) => return Err(e),
    };
    let report = check_feasibility(&plan, scenario, Some(&deployment), phase);
    let mut violators: Vec<usize> = report
        .violating_users
        .iter()
        .copied()
        .filter(|u| zone.uav_zone.contains(u))
        .collect();
    if !report.structural_ok {
        violators = zone.uav_zone.clone();
    }
    Ok(UavEval {
        deployment,
        plan: Some(plan),
        violators,
    })
}

/// UAV-count scan `N0, N0 - delta, ...`: the smallest count for which k-means
/// placement serves every UAV-zone user at the minimum rate. When even `N0`
/// fails, `N0` is kept and its violators are reported as outage.
pub fn minimize_uav_count(
    zone: &ZonePartition,
    kappa: Kappa,
    scenario: &Scenario,
    config: &OptimizerConfig,
    phase: &PhaseDesign,
    seed: u64,
) -> Result<UavSizing> {
    let split = split_bandwidth(kappa, scenario.total_subcarriers);
    let b = zone.uav_zone.len();
    let altitude = scenario.uav_altitude_m;

    if b == 0 || no_uav_service(&split, config) {
        let plan = build_plan(zone, &split, None, scenario, seed)?;
        return Ok(UavSizing {
            n_uav: 0,
            n_uav_init: 0,
            deployment: UavDeployment::empty(altitude),
            plan,
            outage_users: zone.uav_zone.clone(),
            probes: Vec::new(),
        });
    }

    let n0 = config
        .n_uav_init
        .unwrap_or(b)
        .min(b)
        .min(config.max_uav.unwrap_or(usize::MAX))
        .max(1);

    let mut probes = Vec::new();
    let mut first: Option<(usize, UavEval)> = None;
    let mut best: Option<(usize, UavEval)> = None;
    let mut n = n0;
    for _ in 0..config.t_prime_max.max(1) {
        let eval = evaluate_uav_count(n, zone, &split, scenario, config, phase, seed)?;
        let feasible = eval.violators.is_empty() && eval.plan.is_some();
        probes.push(UavProbe {
            n_uav: n,
            feasible,
            violators: eval.violators.len(),
            kmeans_iterations: eval.deployment.iterations,
        });
        if feasible {
            best = Some((n, eval));
        } else if first.is_none() && best.is_none() {
            first = Some((n, eval));
        }
        if n <= config.delta_n {
            break;
        }
        n -= config.delta_n;
    }

    let (n_uav, eval) = match (best, first) {
        (Some(b), _) => b,
        (None, Some(f)) => f,
        (None, None) => unreachable!("at least one probe runs"),
    };
    let plan = match eval.plan {
        Some(p) => p,
        None => build_plan(zone, &split, None, scenario, seed)?,
    };
    Ok(UavSizing {
        n_uav,
        n_uav_init: n0,
        deployment: eval.deployment,
        plan,
        outage_users: eval.violators,
        probes,
    })
}

/// Runs both lexicographic stages for one kappa.
pub fn evaluate_kappa(
    kappa: Kappa,
    scenario: &Scenario,
    config: &OptimizerConfig,
    phase: &PhaseDesign,
    seed: u64,
) -> Result<ParetoSolution> {
    let haps = maximize_haps_coverage(kappa, scenario, config, phase, seed);
    let uav = minimize_uav_count(&haps.zone, kappa, scenario, config, phase, seed)?;

    let lambda_true = true_total_pathloss(&uav.deployment, scenario);
    let lambda_upp = pathloss_upper_bound(&uav.deployment, scenario, uav.n_uav_init).ok();
    let iterations = IterationCounts {
        radius_probes: haps.probes.len(),
        uav_probes: uav.probes.len(),
        kmeans_iterations: uav.probes.iter().map(|p| p.kmeans_iterations).sum(),
    };
    let u_haps = uav.plan.u_haps();
    Ok(ParetoSolution {
        kappa,
        split: uav.plan.split,
        r_star_m: haps.radius_m,
        n_uav_star: uav.n_uav,
        n_uav_init: uav.n_uav_init,
        u_haps,
        coverage_pct: 100.0 * u_haps as f64 / scenario.user_count() as f64,
        outage_users: uav.outage_users,
        lambda_true,
        lambda_upp,
        deployment: uav.deployment,
        plan: uav.plan,
        iterations,
    })
}

/// Full dynamic Pareto search over the configured kappa grid.
pub fn solve(scenario: &Scenario, config: &OptimizerConfig, seed: u64) -> Result<SolveOutcome> {
    config.validate()?;
    let phase = scenario_phase_design(scenario);
    let grid = config.effective_grid();

    let mut candidates = grid
        .par_iter()
        .map(|&k| evaluate_kappa(k, scenario, config, &phase, seed))
        .collect::<Result<Vec<_>>>()?;

    let mut stopped_early = false;
    if config.early_stop {
        if let Some(q) = (1..candidates.len()).find(|&q| {
            let (a, b) = (&candidates[q - 1], &candidates[q]);
            (a.n_uav_star as f64 - b.n_uav_star as f64).abs() < config.epsilon
                && (a.u_haps as f64 - b.u_haps as f64).abs() < config.epsilon
        }) {
            stopped_early = q + 1 < candidates.len();
            candidates.truncate(q + 1);
        }
    }

    let mut iterations = IterationCounts::default();
    for c in &candidates {
        iterations.add(&c.iterations);
    }
    // min_by keeps the first of equal elements, i.e. the earliest kappa
    let best = candidates
        .iter()
        .min_by(|a, b| a.lexicographic_cmp(b))
        .cloned()
        .expect("grid is non-empty");
    Ok(SolveOutcome {
        best,
        candidates,
        stopped_early,
        iterations,
    })
}

/// Solves one of the baseline regimes: UAV-only (all subcarriers to UAVs),
/// HAPS-only (all to the CS), equal split (kappa = 1), or the full search.
pub fn run_baseline(
    regime: Regime,
    scenario: &Scenario,
    config: &OptimizerConfig,
    seed: u64,
) -> Result<SolveOutcome> {
    let cfg = match regime {
        Regime::UavOnly => config.with_grid(vec![Kappa::UAV_ONLY]),
        Regime::HapsOnly => config.with_grid(vec![Kappa::HAPS_ONLY]),
        Regime::EqualSplit => config.with_grid(vec![Kappa::EQUAL]),
        Regime::Optimized => config.clone(),
    };
    solve(scenario, &cfg, seed)
}
