use dyadic_tents::geometry::*;
use proptest::prelude::*;

fn planar(g: u32) -> Vec<InstanceConfig> {
    vec![
        InstanceConfig::segment(g),
        InstanceConfig::sawtooth(0.5, 4, g),
        InstanceConfig::four_corner(g),
        InstanceConfig::linear_cantor(g),
    ]
}

fn leaves<T: dyadic_tents::Real>(e: &BoundarySet<T>) -> Vec<Cell<T>> {
    (0..e.count(e.depth)).map(|i| e.cell(CubeId::new(e.depth, i))).collect()
}

/// Minimum over every leaf piece.
fn brute_distance(e: &BoundarySet<f64>, x: &Point<f64>, keep: impl Fn(&CubeId) -> bool) -> f64 {
    leaves(e).iter().filter(|c| keep(&c.id)).map(|c| e.shape(c).dist_point(x)).fold(f64::INFINITY, f64::min)
}

fn point_in_domain(e: &BoundarySet<f64>, u: f64, v: f64) -> Point<f64> {
    let lo = e.domain.lower;
    Point::new2(lo[0] + u * e.domain.side, lo[1] + v * e.domain.side)
}

#[test]
fn cube_labels_round_trip() {
    for b in [2usize, 4] {
        for gen in 0..5 {
            let count = (b as u64).pow(gen);
            for index in (0..count).step_by(3) {
                let id = CubeId::new(gen, index);
                assert_eq!(CubeId::parse(&id.label(b), b).unwrap(), id);
                assert_eq!(CubeId::from_path(b, &id.path(b)).unwrap(), id);
            }
        }
    }
    assert_eq!(CubeId::parse("k2:0.1", 4).unwrap(), CubeId::new(2, 1));
    assert!(CubeId::parse("k2:0.4", 4).is_err());
    assert!(CubeId::parse("k3:0.1", 4).is_err());
}

#[test]
fn children_tile_their_parent() {
    for cfg in planar(6) {
        let e: BoundarySet<f64> = make_instance(&cfg).unwrap();
        for gen in 0..4 {
            for i in 0..e.count(gen) {
                let q = CubeId::new(gen, i);
                let kids: Vec<CubeId> = q.children(e.branching).collect();
                assert_eq!(kids.len(), e.branching);
                for k in &kids {
                    assert!(q.contains(e.branching, k));
                    assert_eq!(k.parent(e.branching), Some(q));
                    let (outer, inner) = (e.bbox(&e.cell(q)), e.bbox(&e.cell(*k)));
                    assert!(outer.inflate(1e-12).contains_point(&inner.center()));
                }
                let total: f64 = kids.iter().map(|k| e.measure(k.gen)).sum();
                assert!((total - e.measure(gen)).abs() <= 1e-12 * e.measure(gen));
            }
        }
    }
}

#[test]
fn leaf_diameters_match_shapes() {
    for cfg in planar(6) {
        let e: BoundarySet<f64> = make_instance(&cfg).unwrap();
        let widest = leaves(&e).iter().map(|c| e.shape(c).bbox().diameter()).fold(0.0, f64::max);
        assert!((widest - e.leaf_diameter).abs() <= 1e-12, "{}: {widest} vs {}", cfg.kind.name(), e.leaf_diameter);
    }
}

#[test]
fn distance_consistency_has_no_violations() {
    for cfg in planar(8) {
        let e: BoundarySet<f64> = make_instance(&cfg).unwrap();
        let r = e.distance_consistency(200, 5);
        assert_eq!(r.violations, 0, "{}", cfg.kind.name());
    }
}

#[test]
fn ahlfors_band_is_bounded() {
    for cfg in planar(8) {
        let e: BoundarySet<f64> = make_instance(&cfg).unwrap();
        let r = e.adr_audit(200, 11);
        assert!(r.band.0 > 0.0 && r.constant.is_finite() && r.constant < 20.0, "{}: {:?}", cfg.kind.name(), r.band);
    }
}

#[test]
fn segment_ball_measure_is_chord_length() {
    let e: BoundarySet<f64> = make_instance(&InstanceConfig::segment(6)).unwrap();
    // the segment is [0,1] x {0}
    for (x, y, r) in [(0.5f64, 0.1f64, 0.3f64), (0.0, 0.0, 0.25), (0.9, -0.05, 0.4), (2.0, 0.0, 0.5)] {
        let p = Point::new2(x, y);
        let half = if r > y.abs() { (r * r - y * y).sqrt() } else { 0.0 };
        let chord = ((x + half).min(1.0) - (x - half).max(0.0)).max(0.0);
        assert!((e.ball_measure(&p, r) - chord).abs() < 1e-12, "({x},{y},{r})");
    }
}

#[test]
fn f32_and_f64_distances_agree() {
    for cfg in planar(6) {
        let e64: BoundarySet<f64> = make_instance(&cfg).unwrap();
        let e32: BoundarySet<f32> = make_instance(&cfg).unwrap();
        for k in 0..50 {
            let (u, v) = ((k as f64 * 0.137) % 1.0, (k as f64 * 0.291) % 1.0);
            let p = point_in_domain(&e64, u, v);
            let q = Point::new2(p.0[0] as f32, p.0[1] as f32);
            let (a, b) = (e64.distance(&p), e32.distance(&q) as f64);
            assert!((a - b).abs() <= 1e-5 * (1.0 + a), "{}: {a} vs {b}", cfg.kind.name());
        }
    }
}

#[test]
fn unsupported_instances_are_rejected() {
    let mut cfg = InstanceConfig::four_corner(4);
    cfg.ambient_dim = 3;
    assert!(make_instance::<f64>(&cfg).is_err());
    cfg = InstanceConfig::segment(4);
    cfg.ambient_dim = 5;
    assert!(make_instance::<f64>(&cfg).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distance_matches_leaf_scan(which in 0usize..4, u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let cfg = &planar(6)[which];
        let e: BoundarySet<f64> = make_instance(cfg).unwrap();
        let x = point_in_domain(&e, u, v);
        let fast = e.distance(&x);
        prop_assert!((fast - brute_distance(&e, &x, |_| true)).abs() <= 1e-12);
        let (p, leaf) = e.nearest(&x, Scope::all()).unwrap();
        prop_assert!((p.dist(&x) - fast).abs() <= 1e-12);
        prop_assert!(e.shape(&e.cell(leaf)).dist_point(&p) <= 1e-12);
    }

    #[test]
    fn scoped_distances_match_leaf_scan(which in 0usize..4, u in 0.0f64..1.0, v in 0.0f64..1.0, idx in 0u64..16) {
        let cfg = &planar(6)[which];
        let e: BoundarySet<f64> = make_instance(cfg).unwrap();
        let b = e.branching;
        let q = CubeId::new(2, idx % e.count(2));
        let x = point_in_domain(&e, u, v);
        let inside = e.distance_in(&x, Scope::within(q));
        let outside = e.distance_in(&x, Scope::excluding(q));
        prop_assert!((inside - brute_distance(&e, &x, |l| q.contains(b, l))).abs() <= 1e-12);
        prop_assert!((outside - brute_distance(&e, &x, |l| !q.contains(b, l))).abs() <= 1e-12);
        prop_assert!((inside.min(outside) - e.distance(&x)).abs() <= 1e-12);
    }

    #[test]
    fn farthest_matches_leaf_scan(which in 0usize..4, u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let cfg = &planar(5)[which];
        let e: BoundarySet<f64> = make_instance(cfg).unwrap();
        let x = point_in_domain(&e, u, v);
        let brute = leaves(&e).iter().map(|c| e.shape(c).far_point(&x)).fold(0.0, f64::max);
        prop_assert!((e.farthest(&x, Scope::all()) - brute).abs() <= 1e-12);
    }

    #[test]
    fn within_agrees_with_distance(which in 0usize..4, u in 0.0f64..1.0, v in 0.0f64..1.0, r in 0.0f64..0.5) {
        let cfg = &planar(6)[which];
        let e: BoundarySet<f64> = make_instance(cfg).unwrap();
        let x = point_in_domain(&e, u, v);
        prop_assert_eq!(e.within(&x, Scope::all(), r), e.distance(&x) <= r);
    }
}
