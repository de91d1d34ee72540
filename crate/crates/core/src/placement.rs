//! UAV placement by k-means over UAV-zone users, and the total-path-loss
//! upper bound that k-means minimizes.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::uav_avg_pathloss;
use crate::error::{PlannerError, Result};
use crate::scenario::{Point3, Scenario};

pub const KMEANS_RESTARTS: usize = 20;
pub const DEFAULT_KMEANS_MAX_ITER: usize = 100;

/// UAV positions and user association for one UAV count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavDeployment {
    pub n_uav: usize,
    pub altitude_m: f64,
    /// Horizontal UAV positions, meters.
    pub centroids: Vec<[f64; 2]>,
    /// Scenario user index of each clustered point.
    pub users: Vec<usize>,
    /// UAV index serving `users[i]`.
    pub membership: Vec<usize>,
    /// Sum of squared horizontal user-to-UAV distances, m^2.
    pub kmeans_objective: f64,
    /// Lloyd + refinement iterations spent over all restarts.
    pub iterations: usize,
}

impl UavDeployment {
    pub fn empty(altitude_m: f64) -> Self {
        Self {
            n_uav: 0,
            altitude_m,
            centroids: Vec::new(),
            users: Vec::new(),
            membership: Vec::new(),
            kmeans_objective: 0.0,
            iterations: 0,
        }
    }

    pub fn uav_position(&self, j: usize) -> Point3 {
        let [x, y] = self.centroids[j];
        Point3::new(x, y, self.altitude_m)
    }

    /// Scenario indices of the users served by UAV `j`, ascending.
    pub fn members(&self, j: usize) -> Vec<usize> {
        let mut m: Vec<usize> = self
            .users
            .iter()
            .zip(&self.membership)
            .filter(|(_, &uav)| uav == j)
            .map(|(&u, _)| u)
            .collect();
        m.sort_unstable();
        m
    }

    pub fn uav_of(&self, user: usize) -> Option<usize> {
        self.users
            .iter()
            .position(|&u| u == user)
            .map(|i| self.membership[i])
    }

    /// Relabels clustered points with scenario user indices.
    pub fn with_user_ids(mut self, ids: &[usize]) -> Self {
        assert_eq!(ids.len(), self.users.len());
        self.users = ids.to_vec();
        self
    }
}

/// Outcome of a single seeded k-means run.
#[derive(Debug, Clone)]
pub struct KmeansRun {
    pub centroids: Vec<[f64; 2]>,
    pub membership: Vec<usize>,
    pub objective: f64,
    /// Objective after every centroid update or refinement move.
    pub history: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

fn nearest(p: [f64; 2], centroids: &[[f64; 2]]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, &c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        // strict comparison keeps the lowest index on ties
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

fn means(points: &[[f64; 2]], membership: &[usize], k: usize) -> (Vec<[f64; 2]>, Vec<usize>) {
    let mut sums = vec![[0.0f64; 2]; k];
    let mut counts = vec![0usize; k];
    for (p, &j) in points.iter().zip(membership) {
        sums[j][0] += p[0];
        sums[j][1] += p[1];
        counts[j] += 1;
    }
    let centroids = sums
        .iter()
        .zip(&counts)
        .map(|(s, &n)| {
            if n == 0 {
                [f64::NAN, f64::NAN]
            } else {
                [s[0] / n as f64, s[1] / n as f64]
            }
        })
        .collect();
    (centroids, counts)
}

pub fn clustering_objective(points: &[[f64; 2]], centroids: &[[f64; 2]], membership: &[usize]) -> f64 {
    points
        .iter()
        .zip(membership)
        .map(|(&p, &j)| sq_dist(p, centroids[j]))
        .sum()
}

fn plus_plus_seeding(points: &[[f64; 2]], k: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let n = points.len();
    let mut centroids = vec![points[rng.gen_range(0..n)]];
    let mut d2: Vec<f64> = points.iter().map(|&p| sq_dist(p, centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut idx = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    idx = i;
                    break;
                }
                target -= w;
            }
            idx
        } else {
            rng.gen_range(0..n)
        };
        let c = points[pick];
        centroids.push(c);
        for (d, &p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, c));
        }
    }
    centroids
}

/// Moves the point farthest from its own centroid (taken from a cluster with
/// at least two members) into each empty cluster.
fn reseed_empty(points: &[[f64; 2]], membership: &mut [usize], k: usize) -> Vec<[f64; 2]> {
    loop {
        let (centroids, counts) = means(points, membership, k);
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return centroids;
        };
        let far = (0..points.len())
            .filter(|&i| counts[membership[i]] > 1)
            .max_by(|&a, &b| {
                let da = sq_dist(points[a], centroids[membership[a]]);
                let db = sq_dist(points[b], centroids[membership[b]]);
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .expect("k <= n guarantees a cluster with two members");
        membership[far] = empty;
    }
}

/// One Hartigan pass: single-point moves that strictly lower the objective.
fn refine_pass(points: &[[f64; 2]], membership: &mut [usize], k: usize, history: &mut Vec<f64>) -> bool {
    let mut moved = false;
    let (mut centroids, mut counts) = means(points, membership, k);
    for i in 0..points.len() {
        let a = membership[i];
        if counts[a] < 2 {
            continue;
        }
        let na = counts[a] as f64;
        let removal_gain = na / (na - 1.0) * sq_dist(points[i], centroids[a]);
        let mut best = None;
        let mut best_delta = 0.0;
        for b in (0..k).filter(|&b| b != a) {
            let nb = counts[b] as f64;
            let delta = nb / (nb + 1.0) * sq_dist(points[i], centroids[b]) - removal_gain;
            if delta < best_delta {
                best_delta = delta;
                best = Some(b);
            }
        }
        // ignore moves whose gain is lost in rounding
        if let Some(b) = best.filter(|_| best_delta < -1e-12 * removal_gain.max(1e-300)) {
            membership[i] = b;
            let (c, n) = means(points, membership, k);
            centroids = c;
            counts = n;
            history.push(clustering_objective(points, &centroids, membership));
            moved = true;
        }
    }
    moved
}

/// Single seeded k-means run: k-means++ seeding, Lloyd iterations to a stable
/// membership, then single-point refinement until no move lowers the objective.
pub fn kmeans_run(points: &[[f64; 2]], k: usize, seed: u64, max_iter: usize) -> KmeansRun {
    assert!(k >= 1 && k <= points.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_seeding(points, k, &mut rng);
    let mut membership: Vec<usize> = points.iter().map(|&p| nearest(p, &centroids)).collect();
    let mut history = Vec::new();
    let mut iterations = 0;

    loop {
        // Lloyd phase
        while iterations < max_iter {
            iterations += 1;
            centroids = reseed_empty(points, &mut membership, k);
            history.push(clustering_objective(points, &centroids, &membership));
            let next: Vec<usize> = points.iter().map(|&p| nearest(p, &centroids)).collect();
            if next == membership {
                break;
            }
            membership = next;
        }
        if iterations >= max_iter {
            break;
        }
        iterations += 1;
        if !refine_pass(points, &mut membership, k, &mut history) {
            break;
        }
    }

    // the iteration cap can stop Lloyd on a membership with an empty cluster
    centroids = reseed_empty(points, &mut membership, k);
    let objective = clustering_objective(points, &centroids, &membership);
    KmeansRun {
        centroids,
        membership,
        objective,
        history,
        iterations,
    }
}

fn restart_seed(seed: u64, restart: usize) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ (restart as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Places `k` UAVs over `users` (positions in the UAV zone) at `altitude_m`,
/// keeping the best of [`KMEANS_RESTARTS`] seeded runs.
///
/// Membership indices refer to positions in `users`; relabel with
/// [`UavDeployment::with_user_ids`].
pub fn kmeans_place(
    users: &[Point3],
    k: usize,
    seed: u64,
    max_iter: usize,
    altitude_m: f64,
) -> Result<UavDeployment> {
    if users.is_empty() {
        if k == 0 {
            return Ok(UavDeployment::empty(altitude_m));
        }
        return Err(PlannerError::EmptyZone { k });
    }
    if k == 0 || k > users.len() {
        return Err(PlannerError::InvalidClusterCount {
            k,
            points: users.len(),
        });
    }
    let points: Vec<[f64; 2]> = users.iter().map(|p| [p.x, p.y]).collect();

    let mut best: Option<KmeansRun> = None;
    let mut iterations = 0;
    for r in 0..KMEANS_RESTARTS {
        let run = kmeans_run(&points, k, restart_seed(seed, r), max_iter);
        iterations += run.iterations;
        if best.as_ref().map_or(true, |b| run.objective < b.objective) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart");
    Ok(UavDeployment {
        n_uav: k,
        altitude_m,
        centroids: best.centroids,
        users: (0..users.len()).collect(),
        membership: best.membership,
        kmeans_objective: best.objective,
        iterations,
    })
}

/// Upper bound on the total average UAV path loss:
/// `eta2 * (4*pi*f_c/c)^2 * (z^2 * I * N0 + kmeans_objective)`. Valid for alpha = 2.
pub fn pathloss_upper_bound(
    deployment: &UavDeployment,
    scenario: &Scenario,
    initial_uav_count: usize,
) -> Result<f64> {
    let radio = &scenario.radio;
    if radio.alpha != 2.0 {
        return Err(PlannerError::InvalidAlpha(radio.alpha));
    }
    let k = radio.friis_factor();
    let z = deployment.altitude_m;
    let vertical = z * z * scenario.user_count() as f64 * initial_uav_count as f64;
    Ok(radio.eta2 * k * k * (vertical + deployment.kmeans_objective))
}

/// Sum of average path losses over every served user and its UAV.
pub fn true_total_pathloss(deployment: &UavDeployment, scenario: &Scenario) -> f64 {
    deployment
        .users
        .iter()
        .zip(&deployment.membership)
        .map(|(&u, &j)| uav_avg_pathloss(&scenario.users[u], &deployment.uav_position(j), &scenario.radio))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_corners_single_uav() {
        let pts: Vec<Point3> = [(100.0, 100.0), (-100.0, 100.0), (-100.0, -100.0), (100.0, -100.0)]
            .iter()
            .map(|&(x, y)| Point3::ground(x, y))
            .collect();
        let d = kmeans_place(&pts, 1, 0, 100, 100.0).unwrap();
        assert!(d.centroids[0][0].abs() < 1e-12 && d.centroids[0][1].abs() < 1e-12);
        assert!((d.kmeans_objective - 80_000.0).abs() < 1e-9);
    }

    #[test]
    fn one_uav_per_user() {
        let pts: Vec<Point3> = (0..5).map(|i| Point3::ground(i as f64 * 37.0, (i * i) as f64)).collect();
        let d = kmeans_place(&pts, 5, 3, 100, 100.0).unwrap();
        assert_eq!(d.kmeans_objective, 0.0);
        let mut m = d.membership.clone();
        m.sort();
        assert_eq!(m, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn two_pairs_found() {
        let pts = vec![
            Point3::ground(0.0, 0.0),
            Point3::ground(10.0, 0.0),
            Point3::ground(1000.0, 0.0),
            Point3::ground(1000.0, 10.0),
        ];
        let d = kmeans_place(&pts, 2, 11, 100, 100.0).unwrap();
        assert!((d.kmeans_objective - 100.0).abs() < 1e-9);
        assert_eq!(d.membership[0], d.membership[1]);
        assert_eq!(d.membership[2], d.membership[3]);
        assert_ne!(d.membership[0], d.membership[2]);
    }

    #[test]
    fn empty_zone_errors() {
        assert_eq!(kmeans_place(&[], 2, 0, 10, 100.0), Err(PlannerError::EmptyZone { k: 2 }));
        assert_eq!(kmeans_place(&[], 0, 0, 10, 100.0).unwrap().n_uav, 0);
        assert!(matches!(
            kmeans_place(&[Point3::default()], 2, 0, 10, 100.0),
            Err(PlannerError::InvalidClusterCount { .. })
        ));
    }

    #[test]
    fn coincident_points_do_not_leave_empty_clusters() {
        let pts = vec![Point3::ground(5.0, 5.0); 6];
        let d = kmeans_place(&pts, 3, 1, 50, 100.0).unwrap();
        assert_eq!(d.kmeans_objective, 0.0);
        assert!(d.centroids.iter().all(|c| c[0].is_finite()));
    }

    #[test]
    fn bound_with_zero_clustering_term() {
        let s = Scenario::reference(0).unwrap();
        let pts = vec![Point3::ground(10.0, 20.0)];
        let d = kmeans_place(&pts, 1, 0, 10, 100.0).unwrap();
        let k = s.radio.friis_factor();
        let expected = s.radio.eta2 * k * k * 100.0 * 100.0 * 20.0 * 3.0;
        let b = pathloss_upper_bound(&d, &s, 3).unwrap();
        assert!((b - expected).abs() <= 1e-12 * expected);

        let mut s2 = s.clone();
        s2.radio.eta2 *= 2.0;
        assert!((pathloss_upper_bound(&d, &s2, 3).unwrap() - 2.0 * b).abs() <= 1e-12 * b);

        s2.radio.alpha = 2.5;
        assert_eq!(pathloss_upper_bound(&d, &s2, 3), Err(PlannerError::InvalidAlpha(2.5)));
    }

    #[test]
    fn true_loss_of_nadir_user() {
        let s = Scenario::reference(0).unwrap();
        let d = kmeans_place(&[Point3::default()], 1, 0, 10, 100.0).unwrap();
        let expected = uav_avg_pathloss(&Point3::default(), &Point3::new(0.0, 0.0, 100.0), &s.radio);
        let mut s1 = s.clone();
        s1.users = vec![Point3::default()];
        assert_eq!(true_total_pathloss(&d, &s1), expected);
        assert_eq!(true_total_pathloss(&UavDeployment::empty(100.0), &s1), 0.0);
    }
}
