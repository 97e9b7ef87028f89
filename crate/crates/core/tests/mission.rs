use proptest::prelude::*;
use srs_sense::harness::config::ScenarioFile;
use srs_sense::locate::Vec2;
use srs_sense::mission::{
    densify, hex_vertices, inset_polygon, nearest_neighbor_order, plan_hex, plan_hex_from, plan_perimeter, run_mission,
    MissionPlan, REPORT_SCHEMA_VERSION,
};

fn d(a: Vec2, b: Vec2) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn inside(p: Vec2, poly: &[Vec2]) -> bool {
    // even-odd ray cast, boundary counted as inside via a small tolerance
    let n = poly.len();
    let mut c = false;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a[1] > p[1]) != (b[1] > p[1]) && p[0] < (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0] {
            c = !c;
        }
    }
    c || (0..n).any(|i| seg_dist(p, poly[i], poly[(i + 1) % n]) < 1e-6)
}

fn seg_dist(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let t = (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / (ab[0] * ab[0] + ab[1] * ab[1])).clamp(0.0, 1.0);
    d(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

#[test]
fn perimeter_stays_on_the_inset_loop() {
    let area = vec![[0.0, 0.0], [200.0, 0.0], [240.0, 120.0], [30.0, 150.0]];
    let inset = inset_polygon(&area, 20.0).unwrap();
    let path = plan_perimeter(&area, 20.0, 2.0).unwrap();
    assert!(path.iter().all(|&p| inside(p, &area)));
    assert!(path.iter().all(|&p| (0..4).any(|i| seg_dist(p, inset[i], inset[(i + 1) % 4]) < 1e-6)));
    assert!(path.windows(2).all(|w| d(w[0], w[1]) <= 2.0 + 1e-9));
    assert!(d(path[0], *path.last().unwrap()) < 1e-9);
    // every inset edge sits 20 m from its original edge
    for i in 0..4 {
        let mid = [(inset[i][0] + inset[(i + 1) % 4][0]) / 2.0, (inset[i][1] + inset[(i + 1) % 4][1]) / 2.0];
        let m = (0..4).map(|j| seg_dist(mid, area[j], area[(j + 1) % 4])).fold(f64::INFINITY, f64::min);
        assert!((m - 20.0).abs() < 1e-6, "edge {i}: {m}");
    }
}

#[test]
fn inset_too_large_is_a_planning_error() {
    let area = vec![[0.0, 0.0], [30.0, 0.0], [30.0, 30.0], [0.0, 30.0]];
    assert!(inset_polygon(&area, 20.0).is_err());
    let bow = vec![[0.0, 0.0], [10.0, 10.0], [10.0, 0.0], [0.0, 10.0]];
    assert!(MissionPlan { area_polygon: bow, ..MissionPlan::default() }.validate().is_err());
}

#[test]
fn hexagon_geometry() {
    let v = hex_vertices([5.0, -3.0], 15.0);
    assert!(v.iter().all(|&p| (d(p, [5.0, -3.0]) - 15.0).abs() < 1e-9));
    assert!((0..6).all(|i| (d(v[i], v[(i + 1) % 6]) - 15.0).abs() < 1e-9));
    let ring = plan_hex([5.0, -3.0], 15.0, 1.0);
    assert!(ring.windows(2).all(|w| d(w[0], w[1]) <= 1.0 + 1e-9));
    assert_eq!(plan_hex([1.0, 1.0], 0.0, 1.0), vec![[1.0, 1.0]]);
    let entry = plan_hex_from([0.0, 0.0], 15.0, 1.0, [40.0, 0.0]);
    assert!(d(entry[0], [40.0, 0.0]) <= 1.0 + 1e-9);
    assert!(d(*entry.last().unwrap(), [15.0, 0.0]) < 1e-9);
}

#[test]
fn densify_spacing() {
    let p = densify([0.0, 0.0], [10.0, 0.0], 3.0);
    assert_eq!(p.len(), 4);
    assert_eq!(*p.last().unwrap(), [10.0, 0.0]);
}

#[test]
fn rural_mission_report() {
    let f = ScenarioFile::preset("rural").unwrap();
    let (sc, plan) = f.build(3).unwrap();
    let r = run_mission(&sc, &plan, 3).unwrap();
    assert_eq!(r.schema_version, REPORT_SCHEMA_VERSION);
    assert_eq!(r.estimates.len(), sc.ues.len());
    assert!(r.total_time_s > 0.0);
    // phases in order and contiguous
    assert!(r.phases.windows(2).all(|w| (w[0].end_s - w[1].start_s).abs() < 1e-6));
    // consecutive measurements respect the minimum sample spacing
    assert!(r.measurements.windows(2).all(|w| d(w[0].uav_xy_m, w[1].uav_xy_m) >= plan.min_sample_spacing_m - 1e-9));
    for u in &r.estimates {
        if let Some(e) = &u.refined {
            assert!((e.le_m - d(e.m_hat_xy, u.true_xy)).abs() < 1e-9);
        }
    }
    assert!(r.ale_refined_m.unwrap() < 10.0);
    let again = run_mission(&sc, &plan, 3).unwrap();
    assert_eq!(serde_json::to_string(&r).unwrap(), serde_json::to_string(&again).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nn_order_is_a_permutation(pts in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 0..40)) {
        let p: Vec<Vec2> = pts.iter().map(|t| [t.0, t.1]).collect();
        let mut o = nearest_neighbor_order([0.0, 0.0], &p);
        if let Some(&first) = o.first() {
            let best = p.iter().map(|&q| d(q, [0.0, 0.0])).fold(f64::INFINITY, f64::min);
            prop_assert!((d(p[first], [0.0, 0.0]) - best).abs() < 1e-9);
        }
        o.sort_unstable();
        prop_assert_eq!(o, (0..p.len()).collect::<Vec<_>>());
    }

    #[test]
    fn rectangle_inset_shrinks_by_margin(w in 50.0f64..300.0, h in 50.0f64..300.0, m in 0.0f64..20.0) {
        let area = vec![[0.0, 0.0], [w, 0.0], [w, h], [0.0, h]];
        let r = inset_polygon(&area, m).unwrap();
        let xs: Vec<f64> = r.iter().map(|p| p[0]).collect();
        let ys: Vec<f64> = r.iter().map(|p| p[1]).collect();
        let span = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!((span(&xs) - (w - 2.0 * m)).abs() < 1e-9);
        prop_assert!((span(&ys) - (h - 2.0 * m)).abs() < 1e-9);
    }
}
