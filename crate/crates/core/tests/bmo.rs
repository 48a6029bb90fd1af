use dyadic_tents::bmo::*;
use dyadic_tents::dyadic::*;
use dyadic_tents::geometry::*;
use dyadic_tents::Coefficient;
use num::rational::BigRational;
use num::{BigInt, Signed, Zero};
use proptest::prelude::*;

type Q = BigRational;

fn system(cfg: &InstanceConfig) -> DyadicSystem<f64> {
    let e: BoundarySet<f64> = make_instance(cfg).unwrap();
    build_dyadic_system(&e, cfg.depth).unwrap()
}

fn rat(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

fn cubes(s: &DyadicSystem<f64>, under: &CubeId) -> Vec<CubeId> {
    let b = s.branching();
    (under.gen..=s.depth).flat_map(|k| s.generation(k)).filter(|c| under.contains(b, c)).collect()
}

/// Leaf values of `q`, read through the leaf labels rather than index ranges.
fn values_in<C: Coefficient>(s: &DyadicSystem<f64>, f: &BoundaryFunction<C>, q: &CubeId) -> Vec<C> {
    let b = s.branching();
    s.generation(s.depth).filter(|l| q.contains(b, l)).map(|l| f.value(&l).clone()).collect()
}

fn mean(v: &[Q]) -> Q {
    v.iter().fold(Q::zero(), |a, x| a + x) / Q::from_count(v.len() as u64)
}

fn brute_norm(s: &DyadicSystem<f64>, f: &BoundaryFunction<Q>) -> Q {
    let mut best = Q::zero();
    for q in cubes(s, &s.root()) {
        let v = values_in(s, f, &q);
        let m = mean(&v);
        let osc = mean(&v.iter().map(|x| (x - &m).abs()).collect::<Vec<_>>());
        if osc > best {
            best = osc;
        }
    }
    best
}

fn exact_random(s: &DyadicSystem<f64>, seed: u64) -> BoundaryFunction<Q> {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    BoundaryFunction::from_fn(s, |_| {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        rat((state >> 33) as i64 % 17 - 8, 1 + ((state >> 20) % 5) as i64)
    })
}

#[test]
fn indicator_of_half_has_norm_one_half() {
    let s = system(&InstanceConfig::segment(6));
    let f: BoundaryFunction<Q> = indicator(&s, &CubeId::new(1, 0));
    let (norm, at) = bmo_norm_dyadic(&f);
    assert_eq!(norm, rat(1, 2));
    assert!(at.is_root());
    let c: BoundaryFunction<Q> = BoundaryFunction::constant(&s, rat(3, 1));
    assert!(bmo_norm_dyadic(&c).0.is_zero());
}

#[test]
fn staircase_decomposition_is_exact() {
    for cfg in [InstanceConfig::segment(8), InstanceConfig::four_corner(5), InstanceConfig::sawtooth(0.5, 4, 7)] {
        let s = system(&cfg);
        let f: BoundaryFunction<Q> = staircase(&s, false);
        let d = garnett_decompose(&s, &f, &s.root()).unwrap();
        assert_eq!(d.reconstruct().values, f.values);
        assert_eq!(d.reconstruction_error(&f), 0.0);
        assert!(!d.is_empty());
        assert!(d.packing_norm() <= 2.0);
        assert!(d.alpha_ratio() <= 1.0);
        assert!(d.remainder_sup() <= d.threshold);
    }
}

#[test]
fn float_and_exact_runs_stop_on_the_same_cubes() {
    let s = system(&InstanceConfig::segment(7));
    for seed in [1, 2, 3] {
        let fe: BoundaryFunction<Q> = random_martingale(&s, 5, seed);
        let ff: BoundaryFunction<f64> = random_martingale(&s, 5, seed);
        let de = garnett_decompose(&s, &fe, &s.root()).unwrap();
        let df = garnett_decompose(&s, &ff, &s.root()).unwrap();
        let exact: Vec<CubeId> = de.cubes.iter().map(|c| c.id).collect();
        let float: Vec<CubeId> = df.cubes.iter().map(|c| c.id).collect();
        assert_eq!(exact, float);
        for (a, b) in de.cubes.iter().zip(&df.cubes) {
            assert_eq!(a.alpha.to_f64_lossy(), b.alpha);
        }
    }
}

#[test]
fn sub_root_decomposition_absorbs_the_average() {
    let s = system(&InstanceConfig::segment(6));
    let f: BoundaryFunction<Q> = staircase(&s, false);
    let q0 = CubeId::new(1, 1);
    let split = theorem12_split(&s, &f, &q0).unwrap();
    assert!(split.decomposition.absorbed && split.decomposition.support_outside_root);
    assert!(split.triangle_holds());
    // f~ carries <f>_{Q0} on Q0 and equals f outside
    let f0 = split.decomposition.f0();
    let sum = split.remainder.zip_with(&f0, |a, b| a + b);
    assert_eq!(sum.values, f.values);
}

#[test]
fn csv_round_trip() {
    let s = system(&InstanceConfig::four_corner(3));
    let f: BoundaryFunction<f64> = random_leaf_values(&s, 9);
    let mut buf = Vec::new();
    f.write_csv(&mut buf).unwrap();
    let g = BoundaryFunction::<f64>::read_csv(&s, buf.as_slice()).unwrap();
    assert_eq!(f.values, g.values);
    let partial = BoundaryFunction::<f64>::read_csv(&s, "leaf,value\nk3:0.0.1,2.5\n".as_bytes()).unwrap();
    assert_eq!(partial.values.iter().sum::<f64>(), 2.5);
    assert_eq!(*partial.value(&CubeId::new(3, 1)), 2.5);
    for bad in ["k2:0.0,1", "k3:0.0.9,1", "k3:0.0.0;1", "k3:0.0.0,x"] {
        assert!(BoundaryFunction::<f64>::read_csv(&s, bad.as_bytes()).is_err(), "{bad}");
    }
}

#[test]
fn test_matrix_has_twelve_functions() {
    let s = system(&InstanceConfig::segment(6));
    let m: Vec<(String, BoundaryFunction<f64>)> = test_matrix(&s);
    assert_eq!(m.len(), 12);
    assert!(m.iter().all(|(_, f)| f.values.len() == 64));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn norm_matches_direct_oscillation(seed in 0u64..1_000, which in 0usize..2) {
        let cfg = [InstanceConfig::segment(5), InstanceConfig::four_corner(3)][which].clone();
        let s = system(&cfg);
        let f = exact_random(&s, seed);
        prop_assert_eq!(bmo_norm_dyadic(&f).0, brute_norm(&s, &f));
    }

    /// Replays the stopping rule cube by cube in exact arithmetic.
    #[test]
    fn stopping_cubes_are_exactly_the_first_large_oscillations(seed in 0u64..1_000, root in 0u64..3) {
        let s = system(&InstanceConfig::segment(6));
        let f = exact_random(&s, seed);
        let q0 = if root == 0 { s.root() } else { CubeId::new(1, root - 1) };
        let d = garnett_decompose(&s, &f, &q0).unwrap();
        prop_assert_eq!(d.reconstruct().values, f.values.clone());
        let b = s.branching();
        let stops: Vec<CubeId> = d.cubes.iter().map(|c| c.id).collect();
        for q in cubes(&s, &q0).into_iter().filter(|q| *q != q0) {
            // the nearest stopping ancestor strictly above q, or q0
            let parent = stops.iter().filter(|p| p.gen < q.gen && p.contains(b, &q)).max_by_key(|p| p.gen).copied().unwrap_or(q0);
            let a = mean(&values_in(&s, &f, &parent));
            let v = values_in(&s, &f, &q);
            let osc = mean(&v.iter().map(|x| (x - &a).abs()).collect::<Vec<_>>());
            // q is examined only when no cube between it and its reference stopped
            let chain_clear = (parent.gen + 1..q.gen).all(|k| {
                let anc = q.ancestor(b, k).unwrap();
                let va = values_in(&s, &f, &anc);
                mean(&va.iter().map(|x| (x - &a).abs()).collect::<Vec<_>>()) <= d.threshold
            });
            if chain_clear {
                prop_assert_eq!(stops.contains(&q), osc > d.threshold, "{}", s.label(&q));
            } else {
                prop_assert!(!stops.contains(&q));
            }
        }
    }
}
