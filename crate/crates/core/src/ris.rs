//! RIS phase design, element clustering, and exact per-element cascade evaluation.

use std::f64::consts::TAU;
use std::ops::Range;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{cascade_element_gain, distance_3d};
use crate::error::{PlannerError, Result};
use crate::scenario::{Point3, RadioParams, Scenario};

/// Per-element phase shifts. Uniform designs are stored compactly because
/// surfaces can reach 10^8 elements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhaseProfile {
    Uniform { phase: f64, elements: u64 },
    PerElement { phases: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDesign {
    /// CS-side phase shared by all elements under the collapsed geometry.
    pub xi0: f64,
    /// User-side phase shared by all elements under the collapsed geometry.
    pub omega0: f64,
    pub profile: PhaseProfile,
}

impl PhaseDesign {
    pub fn per_element(xi0: f64, omega0: f64, phases: Vec<f64>) -> Self {
        let phases = phases.into_iter().map(|p| p.rem_euclid(TAU)).collect();
        Self {
            xi0,
            omega0,
            profile: PhaseProfile::PerElement { phases },
        }
    }

    pub fn len(&self) -> u64 {
        match &self.profile {
            PhaseProfile::Uniform { elements, .. } => *elements,
            PhaseProfile::PerElement { phases } => phases.len() as u64,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn phase(&self, m: u64) -> f64 {
        match &self.profile {
            PhaseProfile::Uniform { phase, .. } => *phase,
            PhaseProfile::PerElement { phases } => phases[m as usize],
        }
    }

    pub fn phases(&self) -> Vec<f64> {
        (0..self.len()).map(|m| self.phase(m)).collect()
    }

    /// Collapsed-geometry reflection coefficient `mu * exp(-j(phi - xi0 - omega0))`.
    pub fn reflection(&self, m: u64, mu: f64) -> Complex64 {
        Complex64::from_polar(mu, -(self.phase(m) - self.xi0 - self.omega0))
    }

    /// Sum of collapsed reflection coefficients over an element range.
    pub fn coherent_sum(&self, elements: Range<u64>, mu: f64) -> Complex64 {
        match &self.profile {
            PhaseProfile::Uniform { .. } => {
                let n = elements.end.saturating_sub(elements.start) as f64;
                self.reflection(elements.start, mu) * n
            }
            PhaseProfile::PerElement { .. } => {
                elements.map(|m| self.reflection(m, mu)).sum()
            }
        }
    }
}

/// Closed-form phase design: every element set to `xi0 + omega0 (mod 2*pi)`,
/// which makes each collapsed reflection coefficient real and maximal.
pub fn closed_form_phase(xi0: f64, omega0: f64, elements: u64) -> PhaseDesign {
    PhaseDesign {
        xi0,
        omega0,
        profile: PhaseProfile::Uniform {
            phase: (xi0 + omega0).rem_euclid(TAU),
            elements,
        },
    }
}

/// Collapsed-geometry phase anchors `(xi0, omega0)`: propagation phases of
/// CS -> HAPS and HAPS -> coverage center.
pub fn collapsed_phase_anchors(scenario: &Scenario) -> (f64, f64) {
    let lambda = scenario.radio.wavelength_m();
    let xi0 = (TAU * distance_3d(&scenario.cs_pos, &scenario.haps_pos) / lambda).rem_euclid(TAU);
    let omega0 =
        (TAU * distance_3d(&scenario.haps_pos, &scenario.coverage_center) / lambda).rem_euclid(TAU);
    (xi0, omega0)
}

/// Closed-form design for a whole scenario.
pub fn scenario_phase_design(scenario: &Scenario) -> PhaseDesign {
    let (xi0, omega0) = collapsed_phase_anchors(scenario);
    closed_form_phase(xi0, omega0, scenario.ris_elements)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RisCluster {
    pub user: usize,
    pub first_element: u64,
}

/// Injective assignment of contiguous element blocks to HAPS-zone users.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RisClustering {
    pub total_elements: u64,
    pub elements_per_cluster: u64,
    pub clusters: Vec<RisCluster>,
}

impl RisClustering {
    pub fn cluster_of(&self, user: usize) -> Option<Range<u64>> {
        self.clusters
            .iter()
            .find(|c| c.user == user)
            .map(|c| c.first_element..c.first_element + self.elements_per_cluster)
    }

    pub fn idle_elements(&self) -> u64 {
        self.total_elements - self.elements_per_cluster * self.clusters.len() as u64
    }
}

/// Splits `elements` into `|users|` blocks of `floor(M/|C|)` elements and maps
/// them to users through a seeded random permutation. Leftover elements idle.
pub fn cluster_ris(users: &[usize], elements: u64, seed: u64) -> Result<RisClustering> {
    let n = users.len();
    if n == 0 || elements < n as u64 {
        return Err(PlannerError::InsufficientElements { elements, users: n });
    }
    let per = elements / n as u64;
    let mut slots: Vec<u64> = (0..n as u64).collect();
    slots.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let clusters = users
        .iter()
        .zip(slots)
        .map(|(&user, slot)| RisCluster {
            user,
            first_element: slot * per,
        })
        .collect();
    Ok(RisClustering {
        total_elements: elements,
        elements_per_cluster: per,
        clusters,
    })
}

/// Square planar grid of `side * side` elements, horizontal, centered at `center`.
pub fn planar_element_grid(center: &Point3, side: usize, spacing_m: f64) -> Vec<Point3> {
    let offset = (side as f64 - 1.0) / 2.0;
    let mut out = Vec::with_capacity(side * side);
    for r in 0..side {
        for c in 0..side {
            out.push(Point3::new(
                center.x + (c as f64 - offset) * spacing_m,
                center.y + (r as f64 - offset) * spacing_m,
                center.z,
            ));
        }
    }
    out
}

/// `|sum_m h_m * theta_m|^2` with true per-element Friis distances and
/// propagation phases `2*pi*d/lambda` on both hops.
pub fn exact_cascade_gain(
    cs: &Point3,
    user: &Point3,
    element_positions: &[Point3],
    phase: &PhaseDesign,
    radio: &RadioParams,
) -> f64 {
    let lambda = radio.wavelength_m();
    let sum: Complex64 = element_positions
        .iter()
        .enumerate()
        .map(|(m, e)| {
            let h = cascade_element_gain(cs, e, user, radio).sqrt();
            let xi = TAU * distance_3d(cs, e) / lambda;
            let omega = TAU * distance_3d(e, user) / lambda;
            let theta = Complex64::from_polar(radio.mu, -(phase.phase(m as u64) - xi - omega));
            theta * h
        })
        .sum();
    sum.norm_sqr()
}

/// Collapsed-model counterpart of [`exact_cascade_gain`] for `elements`
/// co-located at `haps`.
pub fn collapsed_cascade_gain(
    cs: &Point3,
    haps: &Point3,
    user: &Point3,
    elements: u64,
    phase: &PhaseDesign,
    radio: &RadioParams,
) -> f64 {
    let h = cascade_element_gain(cs, haps, user, radio).sqrt();
    (phase.coherent_sum(0..elements, radio.mu) * h).norm_sqr()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_anchor_phases() {
        let d = closed_form_phase(0.0, 0.0, 8);
        assert!(d.phases().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn summed_anchor_phases() {
        let d = closed_form_phase(PI / 3.0, PI / 4.0, 5);
        for p in d.phases() {
            assert!((p - 7.0 * PI / 12.0).abs() < 1e-15);
        }
        for m in 0..5 {
            let r = d.reflection(m, 0.8);
            assert!((r.re - 0.8).abs() < 1e-15 && r.im.abs() < 1e-15);
        }
    }

    #[test]
    fn phases_wrap_into_range() {
        let d = closed_form_phase(5.0, 4.0, 1);
        let p = d.phase(0);
        assert!((0.0..TAU).contains(&p));
        assert!((p - (9.0 - TAU)).abs() < 1e-12);
    }

    #[test]
    fn cluster_sizes() {
        let users: Vec<usize> = (0..20).collect();
        let c = cluster_ris(&users, 1000, 1).unwrap();
        assert_eq!(c.elements_per_cluster, 50);
        assert_eq!(c.idle_elements(), 0);

        let c = cluster_ris(&[4, 9, 11], 7, 2).unwrap();
        assert_eq!(c.elements_per_cluster, 2);
        assert_eq!(c.idle_elements(), 1);

        let err = cluster_ris(&[0, 1, 2, 3, 4, 5], 5, 0).unwrap_err();
        assert_eq!(err, PlannerError::InsufficientElements { elements: 5, users: 6 });
    }

    #[test]
    fn clusters_are_disjoint_and_seeded() {
        let users: Vec<usize> = (0..13).map(|i| i * 3).collect();
        let a = cluster_ris(&users, 1001, 9).unwrap();
        let b = cluster_ris(&users, 1001, 9).unwrap();
        assert_eq!(a, b);
        let mut seen = vec![false; 1001];
        for u in &users {
            for m in a.cluster_of(*u).unwrap() {
                assert!(!seen[m as usize]);
                seen[m as usize] = true;
            }
        }
    }

    #[test]
    fn single_element_exact_equals_collapsed() {
        let s = Scenario::reference(0).unwrap();
        let design = closed_form_phase(0.3, 1.1, 1);
        let user = s.users[3];
        let exact = exact_cascade_gain(&s.cs_pos, &user, &[s.haps_pos], &design, &s.radio);
        let collapsed = collapsed_cascade_gain(&s.cs_pos, &s.haps_pos, &user, 1, &design, &s.radio);
        assert!((exact - collapsed).abs() <= 1e-12 * collapsed);
    }

    #[test]
    fn colocated_elements_add_coherently() {
        let s = Scenario::reference(0).unwrap();
        let design = closed_form_phase(0.0, 0.0, 16);
        let user = Point3::default();
        let single = exact_cascade_gain(&s.cs_pos, &user, &[s.haps_pos], &design, &s.radio);
        let stack = vec![s.haps_pos; 16];
        let many = exact_cascade_gain(&s.cs_pos, &user, &stack, &design, &s.radio);
        assert!((many - 256.0 * single).abs() <= 1e-10 * many);
    }

    #[test]
    fn grid_is_centered() {
        let c = Point3::new(1.0, 2.0, 3.0);
        let g = planar_element_grid(&c, 10, 0.075);
        assert_eq!(g.len(), 100);
        let mx: f64 = g.iter().map(|p| p.x).sum::<f64>() / 100.0;
        let my: f64 = g.iter().map(|p| p.y).sum::<f64>() / 100.0;
        assert!((mx - 1.0).abs() < 1e-12 && (my - 2.0).abs() < 1e-12);
        assert!(g.iter().all(|p| p.z == 3.0));
    }
}
