use haps_planner::allocation::{build_plan, check_structure, partition, split_bandwidth, Kappa};
use haps_planner::channel::{free_space_loss, p_los, uav_link_stats, user_rate};
use haps_planner::placement::{kmeans_place, kmeans_run, pathloss_upper_bound, true_total_pathloss};
use haps_planner::ris::cluster_ris;
use haps_planner::scenario::{generate_users, Point3, RadioParams, Scenario};
use proptest::prelude::*;

fn radio_strategy() -> impl Strategy<Value = RadioParams> {
    (1.0..5.0f64, 0.0..40.0f64, 0.0..20.0f64, 0.0..2.0f64, 2.0..4.0f64).prop_map(
        |(eta1, extra, psi, beta, alpha)| RadioParams {
            eta1,
            eta2: eta1 + extra,
            psi,
            beta,
            alpha,
            ..RadioParams::default()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn los_probabilities_are_complementary(theta in 0.0..90.0f64, psi in 0.0..20.0f64, beta in 0.0..3.0f64) {
        let p = p_los(theta, psi, beta);
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!((p + (1.0 - p) - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn los_probability_grows_with_elevation(a in 0.0..90.0f64, b in 0.0..90.0f64) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(p_los(lo, 5.0, 0.5) <= p_los(hi, 5.0, 0.5));
    }

    #[test]
    fn average_loss_between_los_and_nlos(
        radio in radio_strategy(),
        x in -1000.0..1000.0f64, y in -1000.0..1000.0f64, z in 1.0..500.0f64,
    ) {
        let user = Point3::default();
        let uav = Point3::new(x, y, z);
        let s = uav_link_stats(&user, &uav, &radio);
        let fspl = free_space_loss(s.distance_m, &radio);
        prop_assert!(s.avg_pathloss >= radio.eta1 * fspl * (1.0 - 1e-12));
        prop_assert!(s.avg_pathloss <= radio.eta2 * fspl * (1.0 + 1e-12));
        prop_assert!((s.p_los + s.p_nlos - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn rate_is_monotone_in_snr(a in 0.0..1e6f64, b in 0.0..1e6f64, n in 1usize..8) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(user_rate(&vec![lo; n], 1.5625e6) <= user_rate(&vec![hi; n], 1.5625e6));
    }

    #[test]
    fn generated_layouts_respect_invariants(count in 1usize..25, seed in any::<u64>()) {
        let pts = generate_users(count, 500.0, 60.0, seed).unwrap();
        prop_assert_eq!(pts.len(), count);
        for (i, p) in pts.iter().enumerate() {
            prop_assert!(p.z == 0.0 && (p.x * p.x + p.y * p.y).sqrt() <= 500.0);
            for q in &pts[i + 1..] {
                prop_assert!(p.horizontal_distance(q) >= 60.0);
            }
        }
        prop_assert_eq!(generate_users(count, 500.0, 60.0, seed).unwrap(), pts);
    }

    #[test]
    fn split_conserves_subcarriers(k in 0.0..50.0f64, l in 2usize..256) {
        let s = split_bandwidth(Kappa(k), l);
        prop_assert_eq!(s.cs_subcarriers + s.uav_subcarriers, l);
        let t = split_bandwidth(Kappa(k + 0.5), l);
        prop_assert!(t.cs_subcarriers >= s.cs_subcarriers);
    }

    #[test]
    fn ris_clusters_are_disjoint(n in 1usize..30, extra in 0u64..5000, seed in any::<u64>()) {
        let users: Vec<usize> = (0..n).map(|i| 2 * i + 1).collect();
        let m = n as u64 + extra;
        let c = cluster_ris(&users, m, seed).unwrap();
        prop_assert_eq!(c.elements_per_cluster, m / n as u64);
        let mut ranges: Vec<_> = users.iter().map(|&u| c.cluster_of(u).unwrap()).collect();
        ranges.sort_by_key(|r| r.start);
        for w in ranges.windows(2) {
            prop_assert!(w[0].end <= w[1].start);
        }
        prop_assert!(ranges.last().unwrap().end <= m);
    }

    #[test]
    fn kmeans_fixed_point_invariants(seed in any::<u64>(), n in 2usize..25, k in 1usize..6) {
        let k = k.min(n);
        let pts: Vec<[f64; 2]> = generate_users(n, 500.0, 0.0, seed)
            .unwrap()
            .iter()
            .map(|p| [p.x, p.y])
            .collect();
        let run = kmeans_run(&pts, k, seed, 200);
        // every cluster non-empty and each centroid is its members' mean
        for j in 0..k {
            let members: Vec<&[f64; 2]> = pts.iter().zip(&run.membership).filter(|(_, &m)| m == j).map(|(p, _)| p).collect();
            prop_assert!(!members.is_empty());
            let mx = members.iter().map(|p| p[0]).sum::<f64>() / members.len() as f64;
            let my = members.iter().map(|p| p[1]).sum::<f64>() / members.len() as f64;
            prop_assert!((mx - run.centroids[j][0]).abs() < 1e-9 && (my - run.centroids[j][1]).abs() < 1e-9);
        }
        // no point is strictly closer to another centroid
        for (p, &m) in pts.iter().zip(&run.membership) {
            let own = (p[0] - run.centroids[m][0]).powi(2) + (p[1] - run.centroids[m][1]).powi(2);
            for c in &run.centroids {
                let d = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
                prop_assert!(own <= d + 1e-9 * own.max(1.0));
            }
        }
        prop_assert!(run.objective <= run.history[0] + 1e-9 * run.history[0].max(1.0));
    }

    #[test]
    fn true_loss_below_upper_bound(seed in any::<u64>(), radius in 0.0..500.0f64, k in 1usize..8, z in 20.0..300.0f64) {
        let mut s = Scenario::reference(seed % 1000).unwrap();
        s.uav_altitude_m = z;
        let zone = partition(&s, radius);
        prop_assume!(!zone.uav_zone.is_empty());
        let k = k.min(zone.uav_zone.len());
        let pts: Vec<Point3> = zone.uav_zone.iter().map(|&u| s.users[u]).collect();
        let d = kmeans_place(&pts, k, seed, 100, z).unwrap().with_user_ids(&zone.uav_zone);
        let truth = true_total_pathloss(&d, &s);
        let bound = pathloss_upper_bound(&d, &s, zone.uav_zone.len()).unwrap();
        prop_assert!(truth <= bound);
    }

    #[test]
    fn built_plans_are_structurally_valid(
        seed in 0u64..500, radius in 0.0..500.0f64, kappa in 0.0..12.0f64, k in 1usize..6, strict in any::<bool>(),
    ) {
        let mut s = Scenario::reference(seed).unwrap();
        s.strict_cross_uav_orthogonality = strict;
        let zone = partition(&s, radius);
        let split = split_bandwidth(Kappa(kappa), s.total_subcarriers);
        let pts: Vec<Point3> = zone.uav_zone.iter().map(|&u| s.users[u]).collect();
        let dep = if pts.is_empty() {
            None
        } else {
            Some(kmeans_place(&pts, k.min(pts.len()), seed, 100, s.uav_altitude_m).unwrap().with_user_ids(&zone.uav_zone))
        };
        if let Ok(plan) = build_plan(&zone, &split, dep.as_ref(), &s, seed) {
            let v = check_structure(&plan, &s, dep.as_ref());
            prop_assert!(v.is_empty(), "{:?}", v);
        }
    }
}
