//! TOML scenario files. Field names follow the canonical parameter names;
//! dB and dBm quantities are converted to linear units in [`ScenarioConfig::build`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{PlannerError, Result};
use crate::optimizer::OptimizerConfig;
use crate::scenario::{
    db_to_linear, dbm_to_watt, generate_users, validate, Point3, RadioParams, Scenario,
};

/// Either a user count (seeded random layout) or explicit ground positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum UsersSpec {
    Count(usize),
    Positions(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct ScenarioConfig {
    pub users: UsersSpec,
    pub R0_m: f64,
    pub D0_m: f64,
    pub coverage_center_m: [f64; 3],
    pub cs_pos_m: [f64; 3],
    pub haps_pos_m: [f64; 3],
    pub uav_altitude_m: f64,
    pub fc_hz: f64,
    pub c_mps: f64,
    pub alpha: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub psi: f64,
    pub beta: f64,
    pub N0_dbm_hz: f64,
    pub G_cs_db: f64,
    pub G_uav_db: f64,
    pub G_user_db: f64,
    pub P_cs_dbm: f64,
    pub P_uav_dbm: f64,
    pub L_tot: usize,
    pub BW_hz: f64,
    pub M: u64,
    pub r0_bps: f64,
    pub mu: f64,
    pub strict_cross_uav_orthogonality: bool,
    /// Fixes the user layout regardless of the run seed.
    pub layout_seed: Option<u64>,
    pub optimizer: OptimizerConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            users: UsersSpec::Count(20),
            R0_m: 500.0,
            D0_m: 100.0,
            coverage_center_m: [0.0, 0.0, 0.0],
            cs_pos_m: [-10_000.0, 0.0, 1_000.0],
            haps_pos_m: [-5_000.0, 100.0, 20_000.0],
            uav_altitude_m: 100.0,
            fc_hz: 2e9,
            c_mps: 3e8,
            alpha: 2.0,
            eta1: 1.0,
            eta2: 31.0,
            psi: 5.0,
            beta: 0.5,
            N0_dbm_hz: -174.0,
            G_cs_db: 43.2,
            G_uav_db: 0.0,
            G_user_db: 0.0,
            P_cs_dbm: 40.0,
            P_uav_dbm: 20.0,
            L_tot: 64,
            BW_hz: 100e6,
            M: 350_000,
            r0_bps: 2e6,
            mu: 1.0,
            strict_cross_uav_orthogonality: false,
            layout_seed: None,
            optimizer: OptimizerConfig::default(),
        }
    }
}

fn point(p: [f64; 3]) -> Point3 {
    Point3::new(p[0], p[1], p[2])
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| {
            let message = e.message().to_string();
            // toml reports unknown keys as "unknown field `x`, expected ..."
            let field = message
                .split('`')
                .nth(1)
                .unwrap_or("config")
                .to_string();
            PlannerError::Config { field, message }
        })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PlannerError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn radio(&self) -> RadioParams {
        RadioParams {
            fc_hz: self.fc_hz,
            c_mps: self.c_mps,
            alpha: self.alpha,
            eta1: self.eta1,
            eta2: self.eta2,
            psi: self.psi,
            beta: self.beta,
            n0_w_per_hz: dbm_to_watt(self.N0_dbm_hz),
            g_cs: db_to_linear(self.G_cs_db),
            g_uav: db_to_linear(self.G_uav_db),
            g_user: db_to_linear(self.G_user_db),
            mu: self.mu,
        }
    }

    /// Builds and validates the scenario. Random layouts use `layout_seed` if
    /// set, otherwise `seed`.
    pub fn build(&self, seed: u64) -> Result<Scenario> {
        let center = point(self.coverage_center_m);
        let users = match &self.users {
            UsersSpec::Count(n) => {
                generate_users(*n, self.R0_m, self.D0_m, self.layout_seed.unwrap_or(seed))?
                    .into_iter()
                    .map(|p| Point3::ground(p.x + center.x, p.y + center.y))
                    .collect()
            }
            UsersSpec::Positions(ps) => ps.iter().map(|p| Point3::ground(p[0], p[1])).collect(),
        };
        let scenario = Scenario {
            users,
            cs_pos: point(self.cs_pos_m),
            haps_pos: point(self.haps_pos_m),
            coverage_center: center,
            coverage_radius_m: self.R0_m,
            min_separation_m: self.D0_m,
            uav_altitude_m: self.uav_altitude_m,
            radio: self.radio(),
            total_subcarriers: self.L_tot,
            bandwidth_hz: self.BW_hz,
            p_cs_max_w: dbm_to_watt(self.P_cs_dbm),
            p_uav_max_w: dbm_to_watt(self.P_uav_dbm),
            ris_elements: self.M,
            min_rate_bps: self.r0_bps,
            strict_cross_uav_orthogonality: self.strict_cross_uav_orthogonality,
        };
        validate(&scenario).map_err(|v| {
            let first = &v[0];
            PlannerError::Config {
                field: first.field.clone(),
                message: v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; "),
            }
        })?;
        self.optimizer.validate()?;
        Ok(scenario)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_build() {
        let s = ScenarioConfig::default().build(0).unwrap();
        assert_eq!(s.user_count(), 20);
        assert!((s.p_cs_max_w - 10.0).abs() < 1e-12);
        assert!((s.p_uav_max_w - 0.1).abs() < 1e-12);
        assert!((s.subcarrier_bandwidth_hz() - 1.5625e6).abs() < 1e-6);
        assert!((s.radio.g_cs - 10f64.powf(4.32)).abs() < 1e-6);
    }

    #[test]
    fn empty_file_is_default() {
        assert_eq!(ScenarioConfig::from_toml_str("").unwrap(), ScenarioConfig::default());
    }

    #[test]
    fn toml_round_trip() {
        let mut c = ScenarioConfig::default();
        c.users = UsersSpec::Positions(vec![[10.0, 0.0], [-200.0, 5.5]]);
        c.optimizer.max_uav = Some(2);
        let back = ScenarioConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_key_names_the_field() {
        let err = ScenarioConfig::from_toml_str("R0_meters = 3.0").unwrap_err();
        match err {
            PlannerError::Config { field, .. } => assert_eq!(field, "R0_meters"),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn invalid_value_names_the_field() {
        let c = ScenarioConfig::from_toml_str("eta1 = 40.0").unwrap();
        match c.build(0).unwrap_err() {
            PlannerError::Config { field, .. } => assert_eq!(field, "eta2"),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn explicit_positions() {
        let c = ScenarioConfig::from_toml_str("users = [[0.0, 0.0], [150.0, 0.0]]").unwrap();
        let s = c.build(9).unwrap();
        assert_eq!(s.users, vec![Point3::ground(0.0, 0.0), Point3::ground(150.0, 0.0)]);
    }
}
