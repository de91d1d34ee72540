//! Link-level formulas: air-to-ground UAV links, the CS -> RIS -> user cascade,
//! noise and Shannon-rate aggregation.

use serde::{Deserialize, Serialize};

use crate::allocation::{AllocationPlan, UavLink};
use crate::error::{PlannerError, Result};
use crate::placement::UavDeployment;
use crate::ris::PhaseDesign;
use crate::scenario::{Point3, RadioParams, Scenario};

/// Air-to-ground statistics of one user/UAV pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UavLinkStats {
    pub distance_m: f64,
    pub elevation_deg: f64,
    pub p_los: f64,
    pub p_nlos: f64,
    /// Average path loss (linear).
    pub avg_pathloss: f64,
    /// |h|^2 = G_uav * G_user / avg_pathloss.
    pub channel_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateBreakdown {
    pub per_subcarrier_snr: Vec<f64>,
    pub rate_bps: f64,
}

pub fn distance_3d(a: &Point3, b: &Point3) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Elevation of `uav` seen from `user`, degrees.
pub fn elevation_angle_deg(user: &Point3, uav: &Point3) -> Result<f64> {
    let d = distance_3d(user, uav);
    if d == 0.0 {
        return Err(PlannerError::DegenerateGeometry(
            "user and UAV are co-located".into(),
        ));
    }
    let s = ((uav.z - user.z) / d).clamp(-1.0, 1.0);
    Ok(s.asin().to_degrees())
}

/// Sigmoid LoS probability of an air-to-ground link.
pub fn p_los(elevation_deg: f64, psi: f64, beta: f64) -> f64 {
    1.0 / (1.0 + psi * (-beta * (elevation_deg - psi)).exp())
}

/// Free-space term `(4*pi*f_c*d/c)^alpha`.
pub fn free_space_loss(distance_m: f64, radio: &RadioParams) -> f64 {
    (radio.friis_factor() * distance_m).powf(radio.alpha)
}

/// Friis loss with exponent 2, used on both hops of the RIS cascade.
pub fn friis_loss(distance_m: f64, radio: &RadioParams) -> f64 {
    let k = radio.friis_factor() * distance_m;
    k * k
}

pub fn uav_link_stats(user: &Point3, uav: &Point3, radio: &RadioParams) -> UavLinkStats {
    let d = distance_3d(user, uav);
    // a zero-length link has no defined elevation; treat it as nadir
    let elevation = elevation_angle_deg(user, uav).unwrap_or(90.0);
    let los = p_los(elevation, radio.psi, radio.beta);
    let nlos = 1.0 - los;
    let fspl = free_space_loss(d, radio);
    let avg = (los * radio.eta1 + nlos * radio.eta2) * fspl;
    UavLinkStats {
        distance_m: d,
        elevation_deg: elevation,
        p_los: los,
        p_nlos: nlos,
        avg_pathloss: avg,
        channel_gain: radio.g_uav * radio.g_user / avg,
    }
}

/// LoS/NLoS-averaged path loss between a ground user and a UAV (linear).
pub fn uav_avg_pathloss(user: &Point3, uav: &Point3, radio: &RadioParams) -> f64 {
    uav_link_stats(user, uav, radio).avg_pathloss
}

/// Per-element cascaded power gain |h|^2 of CS -> RIS element -> user.
pub fn cascade_element_gain(
    cs: &Point3,
    element: &Point3,
    user: &Point3,
    radio: &RadioParams,
) -> f64 {
    let l1 = friis_loss(distance_3d(cs, element), radio);
    let l2 = friis_loss(distance_3d(element, user), radio);
    radio.g_cs * radio.g_user / (l1 * l2)
}

pub fn noise_power_w(n0_w_per_hz: f64, bandwidth_hz: f64) -> f64 {
    n0_w_per_hz * bandwidth_hz
}

/// SINR of `user` served by `uav` on `subcarrier`.
///
/// Interference is summed over every other UAV that transmits on the same
/// subcarrier in `plan`, through that UAV's channel to `user`.
pub fn uav_sinr(
    user: usize,
    uav: usize,
    subcarrier: usize,
    plan: &AllocationPlan,
    scenario: &Scenario,
    deployment: &UavDeployment,
) -> Result<f64> {
    let missing = PlannerError::UnassignedLink {
        user,
        uav,
        subcarrier,
    };
    let link = plan
        .uav_links
        .iter()
        .find(|l| l.user == user && l.uav == uav)
        .ok_or_else(|| missing.clone())?;
    let power = link.power_on(subcarrier).ok_or(missing)?;
    if uav >= deployment.n_uav {
        return Err(PlannerError::DegenerateGeometry(format!(
            "UAV {uav} is not part of the deployment"
        )));
    }

    let radio = &scenario.radio;
    let rx = &scenario.users[user];
    let signal = power * uav_link_stats(rx, &deployment.uav_position(uav), radio).channel_gain;

    let mut interference = 0.0;
    for other in plan.uav_links.iter().filter(|l| l.uav != uav) {
        if let Some(p) = other.power_on(subcarrier) {
            let tx = deployment.uav_position(other.uav);
            interference += p * uav_link_stats(rx, &tx, radio).channel_gain;
        }
    }
    Ok(signal / (scenario.noise_power_w() + interference))
}

/// Transmitters active on each subcarrier of a plan, for evaluating many UAV
/// links without rescanning the plan per subcarrier.
#[derive(Debug, Clone)]
pub struct UavInterference {
    on_subcarrier: Vec<Vec<(usize, f64)>>,
    uav_positions: Vec<Point3>,
}

impl UavInterference {
    pub fn new(plan: &AllocationPlan, scenario: &Scenario, deployment: &UavDeployment) -> Self {
        let mut on_subcarrier = vec![Vec::new(); scenario.total_subcarriers];
        for link in &plan.uav_links {
            for (&l, &p) in link.subcarriers.iter().zip(&link.power_w) {
                if l >= on_subcarrier.len() {
                    on_subcarrier.resize(l + 1, Vec::new());
                }
                on_subcarrier[l].push((link.uav, p));
            }
        }
        Self {
            on_subcarrier,
            uav_positions: (0..deployment.n_uav).map(|j| deployment.uav_position(j)).collect(),
        }
    }

    /// SINR of `link` on each of its subcarriers, in link order. Matches
    /// [`uav_sinr`] evaluated per subcarrier.
    pub fn link_sinrs(&self, link: &UavLink, scenario: &Scenario) -> Result<Vec<f64>> {
        if link.uav >= self.uav_positions.len() {
            return Err(PlannerError::DegenerateGeometry(format!(
                "UAV {} is not part of the deployment",
                link.uav
            )));
        }
        let rx = &scenario.users[link.user];
        let gains: Vec<f64> = self
            .uav_positions
            .iter()
            .map(|p| uav_link_stats(rx, p, &scenario.radio).channel_gain)
            .collect();
        let noise = scenario.noise_power_w();
        Ok(link
            .subcarriers
            .iter()
            .zip(&link.power_w)
            .map(|(&l, &p)| {
                let interference: f64 = self.on_subcarrier[l]
                    .iter()
                    .filter(|(j, _)| *j != link.uav)
                    .map(|&(j, q)| q * gains[j])
                    .sum();
                p * gains[link.uav] / (noise + interference)
            })
            .collect())
    }
}

/// SNR of HAPS-zone `user` on `subcarrier` with all RIS elements collapsed onto
/// the HAPS position.
pub fn haps_snr(
    user: usize,
    subcarrier: usize,
    plan: &AllocationPlan,
    scenario: &Scenario,
    phase: &PhaseDesign,
) -> Result<f64> {
    let missing = PlannerError::UnassignedUser { user, subcarrier };
    let link = plan
        .haps_links
        .iter()
        .find(|l| l.user == user)
        .ok_or_else(|| missing.clone())?;
    let power = link.power_on(subcarrier).ok_or_else(|| missing.clone())?;
    let cluster = plan
        .ris_clusters
        .as_ref()
        .and_then(|c| c.cluster_of(user))
        .ok_or(missing)?;

    let h = cascade_element_gain(
        &scenario.cs_pos,
        &scenario.haps_pos,
        &scenario.users[user],
        &scenario.radio,
    )
    .sqrt();
    let coherent = phase.coherent_sum(cluster, scenario.radio.mu).norm() * h;
    Ok(power * coherent * coherent / scenario.noise_power_w())
}

/// Shannon rate summed over subcarriers of bandwidth `b_l_hz`.
pub fn user_rate(per_subcarrier_snr: &[f64], b_l_hz: f64) -> f64 {
    per_subcarrier_snr
        .iter()
        .map(|g| b_l_hz * (1.0 + g).log2())
        .sum()
}

pub fn rate_breakdown(per_subcarrier_snr: Vec<f64>, b_l_hz: f64) -> RateBreakdown {
    let rate_bps = user_rate(&per_subcarrier_snr, b_l_hz);
    RateBreakdown {
        per_subcarrier_snr,
        rate_bps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs())
    }

    #[test]
    fn distances() {
        let o = Point3::default();
        assert_eq!(distance_3d(&o, &Point3::new(3.0, 4.0, 0.0)), 5.0);
        assert_eq!(distance_3d(&o, &Point3::new(0.0, 0.0, 100.0)), 100.0);
        let d = distance_3d(&Point3::new(100.0, 200.0, 0.0), &Point3::new(-50.0, 40.0, 100.0));
        let expected = (150.0f64 * 150.0 + 160.0 * 160.0 + 100.0 * 100.0).sqrt();
        assert!(close(d, expected, 1e-15));
        assert!((d - 241.039).abs() < 1e-3);
    }

    #[test]
    fn elevation_angles() {
        let user = Point3::default();
        assert!((elevation_angle_deg(&user, &Point3::new(0.0, 0.0, 100.0)).unwrap() - 90.0).abs() < 1e-12);
        assert!((elevation_angle_deg(&user, &Point3::new(100.0, 0.0, 100.0)).unwrap() - 45.0).abs() < 1e-12);
        let e = elevation_angle_deg(&user, &Point3::new(500.0, 0.0, 100.0)).unwrap();
        let expected = (100.0 / (500.0f64.powi(2) + 100.0f64.powi(2)).sqrt()).asin().to_degrees();
        assert!((e - expected).abs() < 1e-12);
        assert!((e - 11.309).abs() < 1e-3);
        assert!(elevation_angle_deg(&user, &user).is_err());
    }

    #[test]
    fn los_probability_values() {
        assert!((p_los(5.0, 5.0, 0.5) - 1.0 / 6.0).abs() < 1e-15);
        assert!((p_los(5.0, 5.0, 3.0) - 1.0 / 6.0).abs() < 1e-15);
        assert!((p_los(90.0, 5.0, 0.5) - 1.0).abs() < 1e-15);
        let p = p_los(20.0, 5.0, 0.5);
        assert!((p - 1.0 / (1.0 + 5.0 * (-7.5f64).exp())).abs() < 1e-15);
        assert!((p - 0.997242).abs() < 1e-6);
    }

    #[test]
    fn unit_argument_friis_gives_eta1() {
        let radio = RadioParams::default();
        let d = radio.c_mps / (4.0 * std::f64::consts::PI * radio.fc_hz);
        let user = Point3::default();
        let uav = Point3::new(0.0, 0.0, d);
        let l = uav_avg_pathloss(&user, &uav, &radio);
        // elevation 90 deg: p_los = 1 - 5 e^{-42.5}
        assert!((l - radio.eta1).abs() < 1e-12);
    }

    #[test]
    fn free_space_at_one_km() {
        let radio = RadioParams::default();
        let db = 10.0 * free_space_loss(1000.0, &radio).log10();
        let expected = 20.0 * (4.0 * std::f64::consts::PI * 2e9 * 1000.0 / 3e8f64).log10();
        assert!((db - expected).abs() < 1e-9);
        assert!((db - 98.46).abs() < 0.01);
    }

    #[test]
    fn nadir_user_at_100m() {
        let radio = RadioParams::default();
        let l = uav_avg_pathloss(&Point3::default(), &Point3::new(0.0, 0.0, 100.0), &radio);
        assert!((10.0 * l.log10() - 78.46).abs() < 0.01);
    }

    #[test]
    fn rates() {
        assert_eq!(user_rate(&[1.0], 1.5625e6), 1.5625e6);
        assert_eq!(user_rate(&[], 1.5625e6), 0.0);
        assert!((user_rate(&[3.0, 15.0], 1.5625e6) - 9.375e6).abs() < 1e-6);
    }

    #[test]
    fn noise_floor() {
        let n0 = crate::scenario::dbm_to_watt(-174.0);
        let dbm = crate::scenario::watt_to_dbm(noise_power_w(n0, 100e6 / 64.0));
        assert!((dbm - (-174.0 + 10.0 * 1.5625e6f64.log10())).abs() < 1e-9);
        assert!((dbm + 112.06).abs() < 0.01);
    }
}
