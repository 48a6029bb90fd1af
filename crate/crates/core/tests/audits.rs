use std::collections::BTreeSet;

use dyadic_tents::audits::*;
use dyadic_tents::bmo::*;
use dyadic_tents::dyadic::*;
use dyadic_tents::extension::*;
use dyadic_tents::geometry::*;
use dyadic_tents::regions::*;
use dyadic_tents::whitney::*;
use proptest::prelude::*;

struct Setup {
    system: DyadicSystem<f64>,
    whitney: WhitneyDecomposition<f64>,
    params: RegionParams,
    jumps: JumpMeasure<f64>,
}

impl Setup {
    fn new(cfg: InstanceConfig, eta: f64, k: f64) -> Self {
        let e: BoundarySet<f64> = make_instance(&cfg).unwrap();
        let system = build_dyadic_system(&e, cfg.depth).unwrap();
        let whitney = decompose(&system.set, &system.set.domain, &WhitneyParams::default()).unwrap();
        let params = RegionParams::new(eta, k).unwrap();
        let assembly = Regions::new(&system, &whitney, params).assign_restricted_owners(&system.root()).unwrap();
        let f: BoundaryFunction<f64> = staircase(&system, false);
        let stops = garnett_decompose(&system, &f, &system.root()).unwrap().dyadic_part();
        let field = build_extension(&system, &stops, &assembly).unwrap();
        let jumps = field.jump_measure(&whitney.faces(), system.set.ambient_dim, false);
        Setup { system, whitney, params, jumps }
    }

    fn regions(&self) -> Regions<'_, f64> {
        Regions::new(&self.system, &self.whitney, self.params)
    }
}

fn segment() -> Setup {
    Setup::new(InstanceConfig::segment(5), 1.0 / 16.0, 4.0)
}

#[test]
fn box_norm_matches_direct_face_sums() {
    for st in [segment(), Setup::new(InstanceConfig::sawtooth(0.5, 4, 5), 1.0 / 16.0, 16.0)] {
        let r = st.regions();
        let root = st.system.root();
        let mut membership = BoxMembership::new(&r);
        let report = carleson_boxes(&mut membership, &st.jumps, &root, 0, 1.0, 1.0).unwrap();
        let mut brute = 0.0f64;
        for k in 0..=st.system.depth {
            for q in st.system.generation(k) {
                let inside: BTreeSet<usize> = r.carleson_box_by_union(&q).into_iter().collect();
                let mass: f64 = st
                    .jumps
                    .faces
                    .iter()
                    .zip(&st.jumps.weights)
                    .filter(|(f, _)| match (f.low, f.high) {
                        (Incident::Cube(a), Incident::Cube(c)) => inside.contains(&(a as usize)) && inside.contains(&(c as usize)),
                        _ => false,
                    })
                    .map(|(_, w)| w)
                    .sum();
                brute = brute.max(mass / st.system.side(&q));
            }
        }
        assert!((report.max - brute).abs() <= 1e-9 * brute.max(1.0), "{} vs {brute}", report.max);
        assert_eq!(report.family_size, (0..=st.system.depth).map(|k| 2u64.pow(k)).sum::<u64>());
    }
}

#[test]
fn membership_lists_every_box_containing_a_cube() {
    let st = segment();
    let r = st.regions();
    let mut membership = BoxMembership::new(&r);
    let all: Vec<CubeId> = (0..=st.system.depth).flat_map(|k| st.system.generation(k)).collect();
    let boxes: Vec<BTreeSet<usize>> = all.iter().map(|q| r.carleson_box(q).into_iter().collect()).collect();
    for i in (0..st.whitney.cubes.len()).step_by(7) {
        let brute: Vec<CubeId> = all.iter().zip(&boxes).filter(|(_, b)| b.contains(&i)).map(|(q, _)| *q).collect();
        let mut fast = membership.boxes_of(i).to_vec();
        fast.sort_unstable();
        let mut want = brute.clone();
        want.sort_unstable();
        assert_eq!(fast, want, "cube {i}");
        let collections: BTreeSet<CubeId> = membership.collections_of(i).into_iter().collect();
        let direct: BTreeSet<CubeId> = all.iter().filter(|q| r.in_collection(i, q)).copied().collect();
        assert_eq!(collections, direct);
    }
}

#[test]
fn ball_audit_rejects_an_empty_family() {
    let st = segment();
    let domain = st.whitney.root.closure();
    let r = carleson_balls(&st.system, &st.jumps, None, &domain, &st.system.root(), 0, (0.01, 1.0), 1, 1.0, 1.0);
    assert!(r.is_err());
    let ok = carleson_balls(&st.system, &st.jumps, None, &domain, &st.system.root(), 50, (0.01, 1.0), 1, 1.0, 1.0).unwrap();
    assert_eq!(ok.tests.len(), 50);
    assert!(ok.tests.iter().all(|t| t.value <= ok.max));
}

#[test]
fn power_fit_recovers_exact_decay() {
    let depths = [4, 6, 8, 10];
    let values: Vec<f64> = depths.iter().map(|&g| 3.0 * 2f64.powf(-0.5 * g as f64)).collect();
    let (c, gamma) = fit_power_decay(&depths, &values, 2.0);
    assert!((gamma - 0.5).abs() < 1e-12 && (c - 3.0).abs() < 1e-9);
    // zeros carry no information and are skipped
    let (_, g2) = fit_power_decay(&[4, 6, 8], &[1.0, 0.25, 0.0], 2.0);
    assert!((g2 - 1.0).abs() < 1e-12);
}

#[test]
fn drift_is_relative_to_the_finest_value() {
    assert_eq!(depth_drift(&[]), 0.0);
    assert_eq!(depth_drift(&[0.0, 0.0]), 0.0);
    assert!(depth_drift(&[1.0, 0.0]).is_infinite());
    assert!((depth_drift(&[9.0, 11.0, 10.0]) - 0.1).abs() < 1e-12);
}

#[test]
fn random_leaves_stay_under_the_root() {
    let st = segment();
    let q = CubeId::new(2, 1);
    let leaves = random_leaves(&st.system, &q, 40, 3);
    assert_eq!(leaves, random_leaves(&st.system, &q, 40, 3));
    assert!(leaves.iter().all(|l| l.gen == st.system.depth && q.contains(2, l)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn indexed_ball_mass_matches_scan(u in 0.0f64..1.0, v in 0.0f64..1.0, r in 0.01f64..2.0) {
        let st = segment();
        let domain = st.whitney.root.closure();
        let index = FaceIndex::new(&st.jumps.faces, 2, &domain, 16);
        let d = &st.whitney.root;
        let x = Point::new2(d.lower[0] + u * d.side, d.lower[1] + v * d.side);
        let fast = st.jumps.mass_in_ball(&index, &x, r);
        let slow = st.jumps.mass_in_ball_scan(&x, r);
        prop_assert!((fast - slow).abs() <= 1e-12 * slow.max(1.0));
    }
}
