//! Boundary data on leaf cells, dyadic averages and the dyadic BMO norm.

mod garnett;

use std::io::{BufRead, Write};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dyadic::{CubeId, DyadicSystem};
use crate::{Coefficient, Error, Point, Real, Result};

pub use garnett::{garnett_decompose, theorem12_split, GarnettDecomposition, StoppingCube, Theorem12Split};

/// One value per leaf cell (generation `depth`), indexed by leaf index.
///
/// Leaves of a generation carry equal measure, so averages are plain means.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryFunction<C: Coefficient> {
    pub depth: u32,
    pub branching: usize,
    pub values: Vec<C>,
    pub support: Option<CubeId>,
}

/// Leaf-value sums per generation, for `O(1)` averages.
#[derive(Clone, Debug)]
pub struct Averages<C: Coefficient> {
    depth: u32,
    branching: usize,
    sums: Vec<Vec<C>>,
}

impl<C: Coefficient> BoundaryFunction<C> {
    pub fn new<T: Real>(system: &DyadicSystem<T>, values: Vec<C>) -> Result<Self> {
        let n = system.set.count(system.depth) as usize;
        if values.len() != n {
            return Err(Error::InvalidParameter(format!("expected {n} leaf values, got {}", values.len())));
        }
        Ok(BoundaryFunction { depth: system.depth, branching: system.branching(), values, support: None })
    }

    pub fn from_fn<T: Real>(system: &DyadicSystem<T>, mut f: impl FnMut(&CubeId) -> C) -> Self {
        let values = system.generation(system.depth).map(|q| f(&q)).collect();
        BoundaryFunction { depth: system.depth, branching: system.branching(), values, support: None }
    }

    pub fn constant<T: Real>(system: &DyadicSystem<T>, c: C) -> Self {
        Self::from_fn(system, |_| c.clone())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn span(&self, gen: u32) -> usize {
        self.branching.pow(self.depth - gen)
    }

    /// Leaf indices of `q`.
    pub fn leaves(&self, q: &CubeId) -> std::ops::Range<usize> {
        let s = self.span(q.gen);
        q.index as usize * s..(q.index as usize + 1) * s
    }

    pub fn value(&self, leaf: &CubeId) -> &C {
        &self.values[leaf.index as usize]
    }

    /// `<f>_Q`.
    pub fn average(&self, q: &CubeId) -> C {
        let r = self.leaves(q);
        let n = C::from_count(r.len() as u64);
        sum(self.values[r].iter().cloned()) / n
    }

    /// `<|f - a|>_Q`.
    pub fn oscillation_about(&self, q: &CubeId, a: &C) -> C {
        let r = self.leaves(q);
        let n = C::from_count(r.len() as u64);
        sum(self.values[r].iter().map(|v| (v.clone() - a.clone()).abs())) / n
    }

    pub fn sup_norm(&self) -> C {
        self.values.iter().map(|v| v.abs()).fold(C::zero(), max)
    }

    pub fn min_max(&self) -> (C, C) {
        let mut lo = self.values[0].clone();
        let mut hi = self.values[0].clone();
        for v in &self.values {
            if *v < lo {
                lo = v.clone();
            }
            if *v > hi {
                hi = v.clone();
            }
        }
        (lo, hi)
    }

    pub fn averages(&self) -> Averages<C> {
        let b = self.branching;
        let mut sums = vec![Vec::new(); self.depth as usize + 1];
        sums[self.depth as usize] = self.values.clone();
        for k in (0..self.depth as usize).rev() {
            let finer = &sums[k + 1];
            let next: Vec<C> = finer.chunks(b).map(|c| sum(c.iter().cloned())).collect();
            sums[k] = next;
        }
        Averages { depth: self.depth, branching: b, sums }
    }

    /// Whether `f` vanishes on every leaf outside `q`.
    pub fn supported_in(&self, q: &CubeId) -> bool {
        let r = self.leaves(q);
        self.values.iter().enumerate().all(|(i, v)| r.contains(&i) || v.is_zero())
    }

    pub fn map(&self, f: impl Fn(&C) -> C) -> Self {
        BoundaryFunction { values: self.values.iter().map(f).collect(), ..self.clone() }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(&C, &C) -> C) -> Self {
        assert_eq!(self.values.len(), other.values.len());
        BoundaryFunction { values: self.values.iter().zip(&other.values).map(|(a, b)| f(a, b)).collect(), ..self.clone() }
    }

    pub fn to_f64(&self) -> BoundaryFunction<f64> {
        BoundaryFunction {
            depth: self.depth,
            branching: self.branching,
            values: self.values.iter().map(|v| v.to_f64_lossy()).collect(),
            support: self.support,
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "leaf,value")?;
        for (i, v) in self.values.iter().enumerate() {
            let id = CubeId::new(self.depth, i as u64);
            writeln!(out, "{},{:e}", id.label(self.branching), v.to_f64_lossy())?;
        }
        Ok(())
    }

    /// Reads `leaf,value` rows; leaves not listed are zero.
    pub fn read_csv<T: Real, R: BufRead>(system: &DyadicSystem<T>, input: R) -> Result<Self> {
        let mut f = Self::constant(system, C::zero());
        for (n, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::Parse(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || (n == 0 && line.starts_with("leaf")) {
                continue;
            }
            let (id, value) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("line {}: expected `leaf,value`", n + 1)))?;
            let id = system.parse(id.trim())?;
            if id.gen != system.depth {
                return Err(Error::Parse(format!("line {}: {} is not a leaf", n + 1, system.label(&id))));
            }
            let v: f64 = value.trim().parse().map_err(|_| Error::Parse(format!("line {}: bad value", n + 1)))?;
            f.values[id.index as usize] = C::from_f64_lossy(v);
        }
        Ok(f)
    }
}

impl<C: Coefficient> Averages<C> {
    pub fn sum(&self, q: &CubeId) -> &C {
        &self.sums[q.gen as usize][q.index as usize]
    }

    pub fn count(&self, gen: u32) -> u64 {
        self.branching.pow(self.depth - gen) as u64
    }

    pub fn average(&self, q: &CubeId) -> C {
        self.sum(q).clone() / C::from_count(self.count(q.gen))
    }
}

fn sum<C: Coefficient>(it: impl Iterator<Item = C>) -> C {
    it.fold(C::zero(), |a, v| a + v)
}

fn max<C: Coefficient>(a: C, b: C) -> C {
    if b > a {
        b
    } else {
        a
    }
}

/// `<f>_Q`.
pub fn dyadic_average<C: Coefficient>(f: &BoundaryFunction<C>, q: &CubeId) -> C {
    f.average(q)
}

/// `max_Q <|f - <f>_Q|>_Q` over the whole system, with a cube attaining it.
pub fn bmo_norm_dyadic<C: Coefficient>(f: &BoundaryFunction<C>) -> (C, CubeId) {
    let avg = f.averages();
    let mut best = (C::zero(), CubeId::ROOT);
    for k in 0..=f.depth {
        let n = f.branching.pow(k) as u64;
        for i in 0..n {
            let q = CubeId::new(k, i);
            let osc = f.oscillation_about(&q, &avg.average(&q));
            if osc > best.0 {
                best = (osc, q);
            }
        }
    }
    best
}

/// `1_Q`.
pub fn indicator<T: Real, C: Coefficient>(system: &DyadicSystem<T>, q: &CubeId) -> BoundaryFunction<C> {
    let b = system.branching();
    let mut f = BoundaryFunction::from_fn(system, |leaf| if q.contains(b, leaf) { C::one() } else { C::zero() });
    f.support = Some(*q);
    f
}

/// `k` on leaves of the `which`-most generation-`k` cube but not the generation-`k+1`
/// one (`which` = 0 leftmost, 1 rightmost); on the segment `k` on `[2^-k-1, 2^-k)`.
pub fn staircase<T: Real, C: Coefficient>(system: &DyadicSystem<T>, rightmost: bool) -> BoundaryFunction<C> {
    let g = system.depth;
    let b = system.branching() as u64;
    BoundaryFunction::from_fn(system, |leaf| {
        let mut k = 0;
        while k < g {
            let next = k + 1;
            let anc = leaf.index / b.pow(g - next);
            let edge = if rightmost { b.pow(next) - 1 } else { 0 };
            if anc != edge {
                break;
            }
            k = next;
        }
        C::from_count(k as u64)
    })
}

/// `sum_{k=1..levels} s(Q^(k)(x))` with independent signs `s = ±1` per cube, the same
/// function at every resolution deeper than `levels`.
pub fn random_martingale<T: Real, C: Coefficient>(system: &DyadicSystem<T>, levels: u32, seed: u64) -> BoundaryFunction<C> {
    let b = system.branching() as u64;
    let g = system.depth;
    let levels = levels.min(g);
    let sign = |k: u32, idx: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(((k as u64) << 48) | idx);
        rng.random::<bool>()
    };
    let signs: Vec<Vec<bool>> = (1..=levels).map(|k| (0..b.pow(k)).map(|i| sign(k, i)).collect()).collect();
    BoundaryFunction::from_fn(system, |leaf| {
        let mut acc = C::zero();
        for k in 1..=levels {
            let idx = leaf.index / b.pow(g - k);
            if signs[k as usize - 1][idx as usize] {
                acc = acc + C::one();
            } else {
                acc = acc - C::one();
            }
        }
        acc
    })
}

/// `log(1 / max(|x - p|, floor))` at leaf representatives.
pub fn log_distance<T: Real, C: Coefficient>(system: &DyadicSystem<T>, p: &Point<T>, floor: f64) -> BoundaryFunction<C> {
    BoundaryFunction::from_fn(system, |leaf| {
        let d = system.leaf_point(leaf).dist(p).as_f64().max(floor);
        C::from_f64_lossy(-d.ln())
    })
}

/// Uniform random values in `[-1, 1]` per leaf.
pub fn random_leaf_values<T: Real, C: Coefficient>(system: &DyadicSystem<T>, seed: u64) -> BoundaryFunction<C> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    BoundaryFunction::from_fn(system, |_| C::from_f64_lossy(rng.random_range(-1.0..=1.0)))
}

/// The standard twelve-function matrix used by the audits.
pub fn test_matrix<T: Real, C: Coefficient>(system: &DyadicSystem<T>) -> Vec<(String, BoundaryFunction<C>)> {
    let b = system.branching();
    let g = system.depth;
    let at = |k: u32, i: u64| CubeId::new(k.min(g), i.min(system.set.count(k.min(g)) - 1));
    let first = system.leaf_point(&CubeId::new(g, 0));
    let mid = system.center(&CubeId::ROOT);
    let stair: BoundaryFunction<C> = staircase(system, false);
    let mart: BoundaryFunction<C> = random_martingale(system, 3, 11);
    let mut out = vec![
        ("constant".to_string(), BoundaryFunction::constant(system, C::from_count(3))),
        ("indicator-k1:0".to_string(), indicator(system, &at(1, 0))),
        (format!("indicator-{}", at(2, 1).label(b)), indicator(system, &at(2, 1))),
        (format!("indicator-{}", at(3, u64::MAX).label(b)), indicator(system, &at(3, u64::MAX))),
        ("staircase-left".to_string(), stair.clone()),
        ("staircase-right".to_string(), staircase(system, true)),
        ("martingale-3".to_string(), mart.clone()),
        ("martingale-4".to_string(), random_martingale(system, 4, 23)),
        ("martingale-5".to_string(), random_martingale(system, 5, 37)),
        ("log-corner".to_string(), log_distance(system, &first, 1e-3)),
        ("log-centre".to_string(), log_distance(system, &mid, 1e-3)),
    ];
    out.push(("staircase+martingale".to_string(), stair.zip_with(&mart, |a, b| a.clone() + b.clone())));
    out
}
