use dyadic_tents::dyadic::*;
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

fn system(cfg: &InstanceConfig) -> DyadicSystem<f64> {
    let e: BoundarySet<f64> = make_instance(cfg).unwrap();
    build_dyadic_system(&e, cfg.depth).unwrap()
}

fn leaf_ids(s: &DyadicSystem<f64>) -> Vec<CubeId> {
    s.generation(s.depth).collect()
}

fn dist_to(s: &DyadicSystem<f64>, x: &Point<f64>, keep: impl Fn(&CubeId) -> bool) -> f64 {
    leaf_ids(s)
        .iter()
        .filter(|l| keep(l))
        .map(|l| s.set.shape(&s.set.cell(*l)).dist_point(x))
        .fold(f64::INFINITY, f64::min)
}

/// Leaf-by-leaf count of representatives within `rho l(Q)` of the other side.
fn brute_thin(s: &DyadicSystem<f64>, q: &CubeId, rho: f64) -> (f64, f64) {
    let b = s.branching();
    let width = rho * s.side(q);
    let (mut inside, mut outside) = (0u64, 0u64);
    for l in leaf_ids(s) {
        let p = s.leaf_point(&l);
        if q.contains(b, &l) {
            if !q.is_root() && dist_to(s, &p, |m| !q.contains(b, m)) <= width {
                inside += 1;
            }
        } else if dist_to(s, &p, |m| q.contains(b, m)) <= width {
            outside += 1;
        }
    }
    let leaf = s.set.measure(s.depth) / s.measure(q);
    (inside as f64 * leaf, outside as f64 * leaf)
}

#[test]
fn every_instance_is_exact() {
    for cfg in planar(8) {
        let r = system(&cfg).exactness_audit();
        assert!(r.holds(), "{}: {r:?}", cfg.kind.name());
    }
    assert!(system(&InstanceConfig::patch3(5)).exactness_audit().holds());
}

#[test]
fn depth_beyond_resolution_is_rejected() {
    let e: BoundarySet<f64> = make_instance(&InstanceConfig::segment(5)).unwrap();
    assert!(build_dyadic_system(&e, 6).is_err());
    assert!(build_dyadic_system(&e, 5).is_ok());
}

#[test]
fn segment_half_has_ratio_one_eighth() {
    let s = system(&InstanceConfig::segment(8));
    let q = s.parse("k1:0").unwrap();
    let r = s.thin_boundary_ratio(&q, 0.125).unwrap();
    assert!((r.interior - 0.125).abs() < 1e-12, "{r:?}");
    assert!((r.exterior - 0.125).abs() < 1e-12, "{r:?}");
    let root = s.thin_boundary_ratio(&s.root(), 0.125).unwrap();
    assert!(root.no_complement && root.interior == 0.0 && root.exterior == 0.0);
    assert!(s.thin_boundary_ratio(&q, 0.0).is_err());
    assert!(s.thin_boundary_ratio(&q, 1.0).is_err());
}

#[test]
fn navigation_and_errors() {
    let s = system(&InstanceConfig::four_corner(4));
    let q = s.parse("k2:0.3").unwrap();
    assert_eq!(s.navigate(&q, Direction::Parent).unwrap(), vec![s.parse("k1:0").unwrap()]);
    assert_eq!(s.navigate(&q, Direction::Children).unwrap().len(), 4);
    assert_eq!(s.navigate(&q, Direction::Peers).unwrap().len(), 16);
    assert!(s.navigate(&s.root(), Direction::Parent).is_err());
    assert!(s.navigate(&CubeId::new(5, 0), Direction::Children).is_err());
    assert!(s.navigate(&CubeId::new(4, 0), Direction::Children).unwrap().is_empty());
    assert!(s.parse("k9:0").is_err());
}

#[test]
fn centers_lie_in_their_cubes() {
    for cfg in planar(5) {
        let s = system(&cfg);
        for k in 0..=s.depth {
            for q in s.generation(k) {
                let x = s.center(&q);
                assert!(dist_to(&s, &x, |l| q.contains(s.branching(), l)) <= 1e-12, "{} {q}", cfg.kind.name());
            }
        }
    }
}

#[test]
fn sandwich_matches_leaf_scan() {
    for cfg in planar(5) {
        let s = system(&cfg);
        let b = s.branching();
        let report = s.ball_sandwich();
        for &(k, inner, outer) in &report.per_generation {
            let l = s.set.side(k);
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for q in s.generation(k) {
                let x = s.center(&q);
                lo = lo.min(dist_to(&s, &x, |m| !q.contains(b, m)) / l);
                let far = leaf_ids(&s)
                    .iter()
                    .filter(|m| q.contains(b, m))
                    .map(|m| s.set.shape(&s.set.cell(*m)).far_point(&x))
                    .fold(0.0, f64::max);
                hi = hi.max(far / l);
            }
            assert!((inner - lo).abs() < 1e-12 && (outer - hi).abs() < 1e-12, "{} k={k}", cfg.kind.name());
        }
    }
}

#[test]
fn packing_norm_matches_direct_sum() {
    let s = system(&InstanceConfig::segment(6));
    let b = s.branching();
    let family: Vec<CubeId> = (1..=4).flat_map(|k| s.generation(k).step_by(2).collect::<Vec<_>>()).collect();
    let mut brute = 0.0f64;
    for k in 0..=s.depth {
        for q0 in s.generation(k) {
            let sum: f64 = family.iter().filter(|q| q0.contains(b, q)).map(|q| s.measure(q)).sum();
            brute = brute.max(sum / s.measure(&q0));
        }
    }
    assert!((s.carleson_packing_norm(&family) - brute).abs() < 1e-12);
}

#[test]
fn fit_recovers_linear_decay_on_segment() {
    let rhos: Vec<f64> = (1..=5).map(|k| 2f64.powi(-k)).collect();
    for g in [6, 8] {
        let fit = system(&InstanceConfig::segment(g)).thin_boundary_fit(&rhos);
        assert!((fit.gamma - 1.0).abs() < 1e-9, "G={g}: {fit:?}");
    }
    // the Cantor sets are separated at every scale, so nothing is thin
    let fit = system(&InstanceConfig::four_corner(6)).thin_boundary_fit(&rhos);
    assert!(fit.vacuous());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn thin_ratio_matches_leaf_scan(which in 0usize..4, gen in 1u32..4, idx in 0u64..64, k in 1i32..5) {
        let s = system(&planar(5)[which]);
        let q = CubeId::new(gen, idx % s.set.count(gen));
        let rho = 2f64.powi(-k);
        let r = s.thin_boundary_ratio(&q, rho).unwrap();
        let (inside, outside) = brute_thin(&s, &q, rho);
        prop_assert!((r.interior - inside).abs() < 1e-12, "interior {} vs {}", r.interior, inside);
        prop_assert!((r.exterior - outside).abs() < 1e-12, "exterior {} vs {}", r.exterior, outside);
    }

    #[test]
    fn leaf_ranges_nest(which in 0usize..4, gen in 0u32..5, idx in 0u64..256) {
        let s = system(&planar(6)[which]);
        let q = CubeId::new(gen, idx % s.set.count(gen));
        let r = s.leaf_range(&q);
        prop_assert_eq!(r.end - r.start, s.set.count(s.depth) / s.set.count(gen));
        for c in s.navigate(&q, Direction::Children).unwrap() {
            let rc = s.leaf_range(&c);
            prop_assert!(rc.start >= r.start && rc.end <= r.end);
        }
        prop_assert_eq!(s.parse(&s.label(&q)).unwrap(), q);
    }
}
