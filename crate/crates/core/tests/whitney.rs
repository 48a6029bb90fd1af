use dyadic_tents::geometry::*;
use dyadic_tents::whitney::*;
use dyadic_tents::Error;
use proptest::prelude::*;

fn planar(g: u32) -> Vec<InstanceConfig> {
    vec![
        InstanceConfig::segment(g),
        InstanceConfig::sawtooth(0.5, 4, g),
        InstanceConfig::four_corner(g),
        InstanceConfig::linear_cantor(g),
    ]
}

fn setup(cfg: &InstanceConfig) -> (BoundarySet<f64>, WhitneyDecomposition<f64>) {
    let e: BoundarySet<f64> = make_instance(cfg).unwrap();
    let w = decompose(&e, &e.domain, &WhitneyParams::default()).unwrap();
    (e, w)
}

fn brute_box_distance(e: &BoundarySet<f64>, bx: &Aabb<f64>) -> f64 {
    (0..e.count(e.depth))
        .map(|i| e.shape(&e.cell(CubeId::new(e.depth, i))).dist_box(bx))
        .fold(f64::INFINITY, f64::min)
}

fn open_contains(c: &AxisBox<f64>, x: &Point<f64>) -> bool {
    (0..c.dim()).all(|k| x.0[k] > c.lower[k] && x.0[k] < c.lower[k] + c.side)
}

#[test]
fn cube_distances_match_leaf_scan() {
    for cfg in planar(5) {
        let (e, w) = setup(&cfg);
        for cube in &w.cubes {
            let d = brute_box_distance(&e, &cube.cell.closure());
            assert!((cube.dist - d).abs() < 1e-12, "{} {:?}", cfg.kind.name(), cube.coords);
        }
    }
}

#[test]
fn distance_rule_and_maximality_hold() {
    for cfg in planar(5) {
        let (e, w) = setup(&cfg);
        for cube in &w.cubes {
            assert!(cube.dist >= cube.side(), "{} scale rule", cfg.kind.name());
            if !cube.refined && cube.level > w.coarse_level {
                let pc = cube.coords.map(|v| v >> 1);
                let parent = w.cell(cube.level - 1, &pc);
                assert!(brute_box_distance(&e, &parent.closure()) < parent.side, "{} parent rule", cfg.kind.name());
            }
        }
        let a = w.audit(&e);
        assert_eq!(a.scale_rule_violations + a.parent_rule_violations + a.neighbor_ratio_violations, 0);
    }
}

#[test]
fn cubes_tile_the_domain() {
    for cfg in planar(6) {
        let (e, w) = setup(&cfg);
        let total: f64 = w.cubes.iter().map(|c| c.cell.volume()).sum::<f64>() + w.unresolved_volume;
        assert!((total - e.domain.volume()).abs() <= 1e-12 * e.domain.volume());
        let fa = w.face_audit(&w.faces());
        assert_eq!(fa.tiling_defects, 0, "{}", cfg.kind.name());
    }
    let (e, w) = setup(&InstanceConfig::patch3(4));
    assert_eq!(w.audit(&e).volume_defect, 0.0);
}

#[test]
fn interior_faces_match_pairwise_contacts() {
    let (_, w) = setup(&InstanceConfig::segment(4));
    let faces = w.faces();
    let mut from_faces = 0.0;
    for f in &faces {
        if let (Incident::Cube(_), Incident::Cube(_)) = (f.low, f.high) {
            from_faces += f.area(2);
        }
    }
    let mut brute = 0.0;
    for (i, a) in w.cubes.iter().enumerate() {
        for b in &w.cubes[i + 1..] {
            for axis in 0..2 {
                let other = 1 - axis;
                let (a0, a1) = (a.cell.lower[axis], a.cell.lower[axis] + a.side());
                let (b0, b1) = (b.cell.lower[axis], b.cell.lower[axis] + b.side());
                if a1 == b0 || b1 == a0 {
                    let lo = a.cell.lower[other].max(b.cell.lower[other]);
                    let hi = (a.cell.lower[other] + a.side()).min(b.cell.lower[other] + b.side());
                    brute += (hi - lo).max(0.0);
                }
            }
        }
    }
    assert!((from_faces - brute).abs() < 1e-12, "{from_faces} vs {brute}");
}

#[test]
fn budget_and_floor_are_enforced() {
    let e: BoundarySet<f64> = make_instance(&InstanceConfig::segment(6)).unwrap();
    let tight = WhitneyParams { cube_budget: 10, ..WhitneyParams::default() };
    assert!(matches!(decompose(&e, &e.domain, &tight), Err(Error::BudgetExceeded { .. })));
    let c: BoundarySet<f64> = make_instance(&InstanceConfig::four_corner(4)).unwrap();
    let fine = WhitneyParams { min_side: Some(c.leaf_diameter / 4.0), ..WhitneyParams::default() };
    assert!(decompose(&c, &c.domain, &fine).is_err());
}

#[test]
fn locate_rejects_outside_points() {
    let (e, w) = setup(&InstanceConfig::segment(5));
    let far = Point::new2(e.domain.lower[0] - 1.0, 0.3);
    assert!(matches!(w.locate(&far), Err(Error::Outside)));
    // points on the segment sit in the unresolved shell
    assert!(matches!(w.locate(&Point::new2(0.5, 0.0)), Err(Error::Unresolved)));
}

#[test]
fn csv_has_one_row_per_cube() {
    let (_, w) = setup(&InstanceConfig::segment(4));
    let mut buf = Vec::new();
    w.write_csv(&mut buf, None).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), w.cubes.len() + 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn locate_matches_linear_scan(which in 0usize..4, u in 0.001f64..0.999, v in 0.001f64..0.999) {
        let (e, w) = setup(&planar(5)[which]);
        let x = Point::new2(e.domain.lower[0] + u * e.domain.side, e.domain.lower[1] + v * e.domain.side);
        let hits: Vec<usize> = (0..w.cubes.len()).filter(|&i| open_contains(&w.cubes[i].cell, &x)).collect();
        prop_assert!(hits.len() <= 1);
        match w.locate(&x) {
            Ok(i) => prop_assert_eq!(hits, vec![i]),
            Err(_) => prop_assert!(hits.is_empty()),
        }
    }
}
