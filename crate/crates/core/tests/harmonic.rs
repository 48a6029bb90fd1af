use dyadic_tents::bmo::*;
use dyadic_tents::dyadic::*;
use dyadic_tents::geometry::*;
use dyadic_tents::harmonic::*;
use dyadic_tents::Error;

fn system(cfg: &InstanceConfig) -> DyadicSystem<f64> {
    let e: BoundarySet<f64> = make_instance(cfg).unwrap();
    build_dyadic_system(&e, cfg.depth).unwrap()
}

#[test]
fn constant_data_is_reproduced_exactly() {
    for cfg in [InstanceConfig::segment(6), InstanceConfig::four_corner(4), InstanceConfig::patch3(4)] {
        let s = system(&cfg);
        let one: BoundaryFunction<f64> = BoundaryFunction::constant(&s, 1.0);
        let c = s.set.hull.center();
        let x = c.offset(s.set.ambient_dim - 1, 0.3);
        let est = wos_estimate(&s, &one, &x, &WosParams::for_system(&s, 500, 4)).unwrap();
        assert_eq!(est.estimate, 1.0, "{}", cfg.kind.name());
        assert_eq!(est.stderr, 0.0);
    }
}

#[test]
fn walks_are_reproducible_per_seed() {
    let s = system(&InstanceConfig::segment(6));
    let x = Point::new2(0.3, 0.2);
    let a = run_walks(&s, &x, &WosParams::for_system(&s, 300, 8)).unwrap();
    let b = run_walks(&s, &x, &WosParams::for_system(&s, 300, 8)).unwrap();
    let c = run_walks(&s, &x, &WosParams::for_system(&s, 300, 9)).unwrap();
    assert_eq!(a.hits, b.hits);
    assert_ne!(a.hits, c.hits);
    assert!(a.hits.iter().flatten().all(|l| l.gen == s.depth));
}

#[test]
fn indicator_estimates_respect_the_maximum_principle() {
    let s = system(&InstanceConfig::sawtooth(0.5, 4, 6));
    let f: BoundaryFunction<f64> = indicator(&s, &CubeId::new(1, 0));
    let points = [Point::new2(0.25, 0.6), Point::new2(0.75, 0.6), Point::new2(0.5, -0.4)];
    let ests: Vec<_> = points.iter().map(|x| wos_estimate(&s, &f, x, &WosParams::for_system(&s, 2000, 1)).unwrap()).collect();
    let report = max_principle_audit(&ests, &f);
    assert!(report.holds() && report.violations == 0);
    // points above the left half see more of it
    assert!(ests[0].estimate > ests[1].estimate);
}

#[test]
fn common_walks_make_linearity_exact() {
    let s = system(&InstanceConfig::segment(6));
    let walks = run_walks(&s, &Point::new2(0.4, 0.25), &WosParams::for_system(&s, 1000, 2)).unwrap();
    let f: BoundaryFunction<f64> = staircase(&s, false);
    let g: BoundaryFunction<f64> = random_leaf_values(&s, 5);
    let r = linearity_audit(&walks, &f, &g, 2.0, -3.0).unwrap();
    assert!((r.combined - r.separate).abs() < 1e-9);
    assert!(r.holds());
}

#[test]
fn invalid_parameters_are_rejected() {
    let s = system(&InstanceConfig::segment(6));
    let x = Point::new2(0.5, 0.5);
    let mut p = WosParams::for_system(&s, 0, 1);
    assert!(matches!(run_walks(&s, &x, &p), Err(Error::InvalidParameter(_))));
    p.walks = 10;
    p.eps_stop = s.set.leaf_diameter;
    assert!(matches!(run_walks(&s, &x, &p), Err(Error::InvalidParameter(_))));
    let on_e = Point::new2(0.5, 0.0);
    assert!(run_walks(&s, &on_e, &WosParams::for_system(&s, 10, 1)).is_err());
    let s3 = system(&InstanceConfig::patch3(4));
    let outside = Point::new3(10.0, 0.5, 0.5);
    assert!(matches!(run_walks(&s3, &outside, &WosParams::for_system(&s3, 10, 1)), Err(Error::Outside)));
}

#[test]
fn estimates_write_one_row_each() {
    let s = system(&InstanceConfig::segment(5));
    let f: BoundaryFunction<f64> = BoundaryFunction::constant(&s, 2.0);
    let ests: Vec<_> = [0.2, 0.4]
        .iter()
        .map(|h| wos_estimate(&s, &f, &Point::new2(0.5, *h), &WosParams::for_system(&s, 50, 3)).unwrap())
        .collect();
    let mut buf = Vec::new();
    write_estimates_csv(&ests, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 3);
}
