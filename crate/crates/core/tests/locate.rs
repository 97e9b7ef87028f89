use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use srs_sense::locate::{
    area_bandwidth, average_localization_error, localization_error, localize_ue, mean_shift, mean_shift_update,
    normalize_and_filter, select_antenna, weighted_centroid, LocateParams, Measurement, Vec2, WeightDomain,
};
use srs_sense::seed;

fn kde(points: &[Vec2], w: &[f64], h: Vec2, m: Vec2) -> f64 {
    points
        .iter()
        .zip(w)
        .map(|(p, w)| w * (-0.5 * (((p[0] - m[0]) / h[0]).powi(2) + ((p[1] - m[1]) / h[1]).powi(2))).exp())
        .sum()
}

// brute-force maximizer on a 0.1 m grid around the data
fn grid_max(points: &[Vec2], w: &[f64], h: Vec2) -> Vec2 {
    let lo = [points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min), points.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min)];
    let hi = [points.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max), points.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max)];
    let (nx, ny) = (((hi[0] - lo[0]) / 0.1) as usize + 1, ((hi[1] - lo[1]) / 0.1) as usize + 1);
    let mut best = (f64::NEG_INFINITY, lo);
    for i in 0..=nx {
        for j in 0..=ny {
            let m = [lo[0] + 0.1 * i as f64, lo[1] + 0.1 * j as f64];
            let v = kde(points, w, h, m);
            if v > best.0 {
                best = (v, m);
            }
        }
    }
    best.1
}

fn meas(xy: Vec2, g: Vec<Vec<Option<f64>>>) -> Measurement {
    Measurement { r: 0, uav_xy_m: xy, per_antenna_gamma: g, timestamp_s: 0.0 }
}

#[test]
fn mean_shift_finds_kde_mode() {
    for s in 0..15u64 {
        let mut rng = seed::rng(s, &[5]);
        let c = [rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0)];
        let n = rng.random_range(10..120);
        let nd = Normal::new(0.0, 6.0).unwrap();
        let pts: Vec<Vec2> = (0..n).map(|_| [c[0] + nd.sample(&mut rng), c[1] + nd.sample(&mut rng)]).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.6..1.0)).collect();
        let h = [10.0, 12.0];
        let ms = mean_shift(&pts, &w, h, None, 1e-9, 500).unwrap();
        let g = grid_max(&pts, &w, h);
        assert!(localization_error(ms.xy, g) <= 0.1, "seed {s}: {:?} vs {:?}", ms.xy, g);
    }
}

#[test]
fn antenna_selection_takes_the_best() {
    let m = meas([0.0, 0.0], vec![vec![Some(-20.0), Some(-12.0)], vec![None, None], vec![Some(f64::NAN), Some(-3.0)]]);
    assert_eq!(select_antenna(&m, 0), Some(-12.0));
    assert_eq!(select_antenna(&m, 1), None);
    assert_eq!(select_antenna(&m, 2), Some(-3.0));
    assert_eq!(select_antenna(&m, 7), None);
}

#[test]
fn normalization_and_threshold() {
    let s = [Some(-10.0), None, Some(-13.0), Some(-20.0)];
    let p = normalize_and_filter(&s, 0.4, WeightDomain::Power).unwrap();
    assert_eq!(p.weights[0], 1.0);
    assert_eq!(p.weights[1], 0.0);
    assert!((p.weights[2] - 10f64.powf(-0.3)).abs() < 1e-12);
    assert_eq!(p.valid, vec![0, 2]);
    let a = normalize_and_filter(&s, 0.4, WeightDomain::Amplitude).unwrap();
    assert!((a.weights[2] - 10f64.powf(-0.15)).abs() < 1e-12);
    assert_eq!(a.valid, vec![0, 2]);
    assert!(normalize_and_filter(&[None, None], 0.5, WeightDomain::Power).is_err());
}

#[test]
fn centroid_and_bandwidth() {
    let c = weighted_centroid(&[[0.0, 0.0], [4.0, 2.0]], &[1.0, 3.0]);
    assert_eq!(c, [3.0, 1.5]);
    assert_eq!(area_bandwidth(&[[0.0, 0.0], [100.0, 0.0], [100.0, 60.0], [0.0, 60.0]]), [50.0, 30.0]);
    assert_eq!(average_localization_error(&[1.0, f64::NAN, 3.0]), Some(2.0));
    assert_eq!(average_localization_error(&[]), None);
}

#[test]
fn bad_inputs_rejected() {
    assert!(mean_shift(&[], &[], [1.0, 1.0], None, 1e-6, 10).is_err());
    assert!(mean_shift(&[[0.0, 0.0]], &[1.0], [0.0, 1.0], None, 1e-6, 10).is_err());
    assert!(mean_shift(&[[0.0, 0.0]], &[-1.0], [1.0, 1.0], None, 1e-6, 10).is_err());
}

#[test]
fn grid_flight_localizes_a_ue() {
    let ue = [37.0, -12.0];
    let mut log = Vec::new();
    for i in 0..21 {
        for j in 0..21 {
            let xy = [-100.0 + 10.0 * i as f64, -100.0 + 10.0 * j as f64];
            let d2 = (xy[0] - ue[0]).powi(2) + (xy[1] - ue[1]).powi(2) + 30.0f64.powi(2);
            let g = -10.0 * (d2.log10());
            log.push(meas(xy, vec![vec![Some(g), Some(g - 1.0)]]));
        }
    }
    let e = localize_ue(&log, 0, "A", [100.0, 100.0], &LocateParams::default()).unwrap();
    assert!(e.converged);
    assert!(localization_error(e.m_hat_xy, ue) < 3.0, "{:?}", e.m_hat_xy);
    let empty = vec![meas([0.0, 0.0], vec![vec![None]])];
    assert!(localize_ue(&empty, 0, "A", [1.0, 1.0], &LocateParams::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn converged_point_is_fixed(pts in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0, 0.1f64..1.0), 1..60)) {
        let p: Vec<Vec2> = pts.iter().map(|t| [t.0, t.1]).collect();
        let w: Vec<f64> = pts.iter().map(|t| t.2).collect();
        let h = [20.0, 20.0];
        let r = mean_shift(&p, &w, h, None, 1e-9, 2000).unwrap();
        prop_assume!(r.converged);
        let n = mean_shift_update(&p, &w, h, r.xy);
        prop_assert!(localization_error(n, r.xy) < 1e-6);
        prop_assert_eq!(r.path.len(), r.iterations + 1);
    }

    #[test]
    fn update_stays_in_hull_box(pts in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0, 0.1f64..1.0), 1..40), mx in -500.0f64..500.0, my in -500.0f64..500.0) {
        let p: Vec<Vec2> = pts.iter().map(|t| [t.0, t.1]).collect();
        let w: Vec<f64> = pts.iter().map(|t| t.2).collect();
        let n = mean_shift_update(&p, &w, [3.0, 3.0], [mx, my]);
        prop_assert!(n[0].is_finite() && n[1].is_finite());
        prop_assert!(n[0] >= -50.0 - 1e-9 && n[0] <= 50.0 + 1e-9);
    }
}
