//! World model: user layout, node geometry, radio parameters and resource budgets.
//!
//! All quantities are stored in linear SI units. Decibel conversion happens once,
//! at the config boundary (see [`crate::config`]).

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PlannerError, Result};

/// Rejection-sampling attempts allowed per requested user.
pub const PLACEMENT_ATTEMPTS_PER_USER: u64 = 10_000;

/// Cartesian position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub const fn ground(x: f64, y: f64) -> Self {
        Self { x, y, z: 0.0 }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Distance in the horizontal (x, y) plane.
    pub fn horizontal_distance(&self, other: &Point3) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    /// Carrier frequency, Hz.
    pub fc_hz: f64,
    /// Propagation speed, m/s.
    pub c_mps: f64,
    /// Path-loss exponent.
    pub alpha: f64,
    /// Excess path-loss multiplier for LoS links.
    pub eta1: f64,
    /// Excess path-loss multiplier for NLoS links.
    pub eta2: f64,
    /// LoS-probability environment constants.
    pub psi: f64,
    pub beta: f64,
    /// Noise power spectral density, W/Hz.
    pub n0_w_per_hz: f64,
    /// Linear antenna gains.
    pub g_cs: f64,
    pub g_uav: f64,
    pub g_user: f64,
    /// RIS reflection efficiency in [0, 1].
    pub mu: f64,
}

impl RadioParams {
    pub fn wavelength_m(&self) -> f64 {
        self.c_mps / self.fc_hz
    }

    /// The constant (4*pi*f_c/c) shared by every Friis term.
    pub fn friis_factor(&self) -> f64 {
        4.0 * PI * self.fc_hz / self.c_mps
    }
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            fc_hz: 2.0e9,
            c_mps: 3.0e8,
            alpha: 2.0,
            eta1: 1.0,
            eta2: 31.0,
            psi: 5.0,
            beta: 0.5,
            n0_w_per_hz: dbm_to_watt(-174.0),
            g_cs: db_to_linear(43.2),
            g_uav: 1.0,
            g_user: 1.0,
            mu: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Ground users (z = 0).
    pub users: Vec<Point3>,
    pub cs_pos: Point3,
    pub haps_pos: Point3,
    pub coverage_center: Point3,
    pub coverage_radius_m: f64,
    pub min_separation_m: f64,
    /// Altitude shared by every UAV.
    pub uav_altitude_m: f64,
    pub radio: RadioParams,
    pub total_subcarriers: usize,
    pub bandwidth_hz: f64,
    pub p_cs_max_w: f64,
    pub p_uav_max_w: f64,
    /// Total RIS element count.
    pub ris_elements: u64,
    /// Minimum per-user rate, bit/s.
    pub min_rate_bps: f64,
    /// Forbid two UAVs from using the same subcarrier (zero inter-UAV interference).
    #[serde(default)]
    pub strict_cross_uav_orthogonality: bool,
}

impl Scenario {
    /// Bandwidth of one subcarrier, `BW / L_tot`.
    pub fn subcarrier_bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz / self.total_subcarriers as f64
    }

    pub fn noise_power_w(&self) -> f64 {
        self.radio.n0_w_per_hz * self.subcarrier_bandwidth_hz()
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    /// Horizontal distance of user `i` to the coverage center.
    pub fn user_radius(&self, i: usize) -> f64 {
        self.users[i].horizontal_distance(&self.coverage_center)
    }

    /// Scenario with every simulation parameter at its reference value and a
    /// seeded 20-user layout.
    pub fn reference(seed: u64) -> Result<Self> {
        crate::config::ScenarioConfig::default().build(seed)
    }

    /// Copy with a different RIS element count.
    pub fn with_ris_elements(&self, m: u64) -> Self {
        Self {
            ris_elements: m,
            ..self.clone()
        }
    }

    pub fn with_min_rate(&self, r0_bps: f64) -> Self {
        Self {
            min_rate_bps: r0_bps,
            ..self.clone()
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) / 1000.0
}

pub fn watt_to_dbm(w: f64) -> f64 {
    10.0 * (w * 1000.0).log10()
}

/// Draws `count` points uniformly in the disk of radius `radius_m` around the
/// origin such that every pair is at least `min_separation_m` apart.
///
/// Rejection sampling with a budget of [`PLACEMENT_ATTEMPTS_PER_USER`] proposals
/// per requested point. The output is a pure function of the arguments.
pub fn generate_users(
    count: usize,
    radius_m: f64,
    min_separation_m: f64,
    seed: u64,
) -> Result<Vec<Point3>> {
    if count == 0 {
        return Err(PlannerError::config("users", "user count must be at least 1"));
    }
    if !(radius_m >= 0.0) || !(min_separation_m >= 0.0) {
        return Err(PlannerError::config(
            "R0_m",
            "coverage radius and minimum separation must be non-negative",
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let budget = PLACEMENT_ATTEMPTS_PER_USER * count as u64;
    let min_sq = min_separation_m * min_separation_m;
    let mut points: Vec<Point3> = Vec::with_capacity(count);
    let mut attempts = 0u64;

    while points.len() < count {
        if attempts >= budget {
            return Err(PlannerError::PlacementBudgetExhausted {
                count,
                placed: points.len(),
                attempts,
            });
        }
        attempts += 1;

        // sqrt of a uniform variate gives a uniform areal density
        let r = radius_m * rng.gen::<f64>().sqrt();
        let theta = 2.0 * PI * rng.gen::<f64>();
        let candidate = Point3::ground(r * theta.cos(), r * theta.sin());

        let clear = points.iter().all(|p| {
            let dx = p.x - candidate.x;
            let dy = p.y - candidate.y;
            dx * dx + dy * dy >= min_sq
        });
        if clear {
            points.push(candidate);
        }
    }
    Ok(points)
}

/// A violated scenario invariant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Checks every scenario and radio invariant and reports all violations.
pub fn validate(s: &Scenario) -> std::result::Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    let mut push = |field: &str, message: String| {
        out.push(Violation {
            field: field.to_string(),
            message,
        })
    };
    let r = &s.radio;

    if !(r.fc_hz > 0.0) {
        push("fc_hz", format!("carrier frequency must be > 0 (got {})", r.fc_hz));
    }
    if !(r.c_mps > 0.0) {
        push("c_mps", format!("propagation speed must be > 0 (got {})", r.c_mps));
    }
    if !(r.alpha >= 2.0) {
        push("alpha", format!("path-loss exponent must be >= 2 (got {})", r.alpha));
    }
    if !(r.eta1 >= 1.0) {
        push("eta1", format!("eta1 >= 1 violated (got {})", r.eta1));
    }
    if !(r.eta2 >= r.eta1) {
        push(
            "eta2",
            format!("eta2 >= eta1 violated (eta1 = {}, eta2 = {})", r.eta1, r.eta2),
        );
    }
    if !(r.psi >= 0.0) {
        push("psi", format!("psi must be >= 0 (got {})", r.psi));
    }
    if !(r.beta >= 0.0) {
        push("beta", format!("beta must be >= 0 (got {})", r.beta));
    }
    if !(r.n0_w_per_hz > 0.0) {
        push("N0_dbm_hz", "noise spectral density must be > 0".to_string());
    }
    for (name, g) in [("G_cs_db", r.g_cs), ("G_uav_db", r.g_uav), ("G_user_db", r.g_user)] {
        if !(g > 0.0) || !g.is_finite() {
            push(name, format!("antenna gain must be finite and positive (got {g})"));
        }
    }
    if !(0.0..=1.0).contains(&r.mu) {
        push("mu", format!("reflection efficiency must lie in [0, 1] (got {})", r.mu));
    }

    for (name, p) in [
        ("cs_pos_m", s.cs_pos),
        ("haps_pos_m", s.haps_pos),
        ("coverage_center_m", s.coverage_center),
    ] {
        if !p.is_finite() {
            push(name, "position must be finite".to_string());
        }
    }
    if !(s.coverage_radius_m > 0.0) {
        push("R0_m", format!("coverage radius must be > 0 (got {})", s.coverage_radius_m));
    }
    if !(s.min_separation_m >= 0.0) {
        push("D0_m", "minimum separation must be >= 0".to_string());
    }
    if !(s.uav_altitude_m > 0.0) {
        push("uav_altitude_m", "UAV altitude must be > 0".to_string());
    }
    if s.total_subcarriers < 2 {
        push(
            "L_tot",
            format!("at least 2 subcarriers required (got {})", s.total_subcarriers),
        );
    }
    if !(s.bandwidth_hz > 0.0) {
        push("BW_hz", "per-subcarrier bandwidth must be > 0".to_string());
    }
    if !(s.p_cs_max_w > 0.0) {
        push("P_cs_dbm", "CS power budget must be > 0".to_string());
    }
    if !(s.p_uav_max_w > 0.0) {
        push("P_uav_dbm", "UAV power budget must be > 0".to_string());
    }
    if s.ris_elements < 1 {
        push("M", "at least one RIS element required".to_string());
    }
    if !(s.min_rate_bps >= 0.0) {
        push("r0_bps", "minimum rate must be >= 0".to_string());
    }
    if s.users.is_empty() {
        push("users", "at least one user required".to_string());
    }

    // relative slack for coordinates that went through a text round-trip
    let tol = 1e-9 * s.coverage_radius_m.abs().max(1.0);
    for (i, u) in s.users.iter().enumerate() {
        if !u.is_finite() {
            push("users", format!("user {i} has a non-finite coordinate"));
            continue;
        }
        if u.z != 0.0 {
            push("users", format!("user {i} is not on the ground (z = {})", u.z));
        }
        let d = u.horizontal_distance(&s.coverage_center);
        if d > s.coverage_radius_m + tol {
            push(
                "users",
                format!(
                    "user outside coverage: user {i} at distance {d:.3} m exceeds R0 = {} m",
                    s.coverage_radius_m
                ),
            );
        }
    }
    for i in 0..s.users.len() {
        for j in (i + 1)..s.users.len() {
            let d = s.users[i].horizontal_distance(&s.users[j]);
            if d + tol < s.min_separation_m {
                push(
                    "users",
                    format!(
                        "users {i} and {j} are {d:.3} m apart, below D0 = {} m",
                        s.min_separation_m
                    ),
                );
            }
        }
    }

    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn min_pairwise(points: &[Point3]) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                best = best.min(points[i].horizontal_distance(&points[j]));
            }
        }
        best
    }

    #[test]
    fn single_user_inside_disk() {
        let pts = generate_users(1, 500.0, 100.0, 7).unwrap();
        assert_eq!(pts.len(), 1);
        assert!(pts[0].x * pts[0].x + pts[0].y * pts[0].y <= 500.0 * 500.0);
    }

    #[test]
    fn twenty_users_respect_separation() {
        let pts = generate_users(20, 500.0, 100.0, 42).unwrap();
        assert_eq!(pts.len(), 20);
        assert!(min_pairwise(&pts) >= 100.0);
        assert!(pts.iter().all(|p| p.x.hypot(p.y) <= 500.0 && p.z == 0.0));
    }

    #[test]
    fn overpacked_disk_exhausts_budget() {
        // 200 disks of radius 50 m cannot fit in a 10 m disk: area ratio
        // 200 * 50^2 far exceeds (10 + 50)^2.
        assert!(200.0 * 50.0f64.powi(2) > 60.0f64.powi(2));
        let err = generate_users(200, 10.0, 100.0, 1).unwrap_err();
        assert!(matches!(err, PlannerError::PlacementBudgetExhausted { count: 200, placed: 1, .. }));
    }

    #[test]
    fn same_seed_same_layout() {
        let a = generate_users(20, 500.0, 100.0, 3).unwrap();
        let b = generate_users(20, 500.0, 100.0, 3).unwrap();
        assert_eq!(a, b);
        let c = generate_users(20, 500.0, 100.0, 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn default_scenario_validates() {
        let s = Scenario::reference(0).unwrap();
        assert_eq!(validate(&s), Ok(()));
    }

    #[test]
    fn swapped_eta_reported() {
        let mut s = Scenario::reference(0).unwrap();
        s.radio.eta1 = 31.0;
        s.radio.eta2 = 1.0;
        let v = validate(&s).unwrap_err();
        assert!(v.iter().any(|v| v.field == "eta2" && v.message.contains("eta2 >= eta1")));
    }

    #[test]
    fn user_outside_coverage_reported() {
        let mut s = Scenario::reference(0).unwrap();
        s.users[0] = Point3::ground(600.0, 0.0);
        let v = validate(&s).unwrap_err();
        assert!(v.iter().any(|v| v.field == "users" && v.message.contains("user outside coverage")));
    }

    #[test]
    fn unit_conversions() {
        assert!((dbm_to_watt(40.0) - 10.0).abs() < 1e-12);
        assert!((dbm_to_watt(20.0) - 0.1).abs() < 1e-14);
        assert!((watt_to_dbm(10.0) - 40.0).abs() < 1e-12);
        assert!((linear_to_db(db_to_linear(43.2)) - 43.2).abs() < 1e-12);
    }

    #[test]
    fn subcarrier_bandwidth_matches_split() {
        let s = Scenario::reference(0).unwrap();
        assert_eq!(s.subcarrier_bandwidth_hz(), 100e6 / 64.0);
    }
}
