//! Garnett's stopping-time decomposition of dyadic BMO data.

use std::collections::VecDeque;

use rustc_hash::FxHashMap;

use super::{bmo_norm_dyadic, BoundaryFunction};
use crate::dyadic::{CubeId, DyadicSystem};
use crate::{Coefficient, Error, Real, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct StoppingCube<C: Coefficient> {
    pub id: CubeId,
    /// Stopping level `i >= 1`; the root is level 0.
    pub level: u32,
    /// Index of the level-`i-1` stopping cube, `None` for children of the root.
    pub parent: Option<usize>,
    pub average: C,
    /// `alpha_j = <f>_{Q_j} - <f>_P`.
    pub alpha: C,
}

#[derive(Clone, Debug)]
pub struct GarnettDecomposition<C: Coefficient> {
    pub root: CubeId,
    pub branching: usize,
    /// `||f||_{BMO_D}` over the whole system.
    pub norm: C,
    pub threshold: C,
    pub root_average: C,
    /// Breadth-first by level, lexicographic within a level.
    pub cubes: Vec<StoppingCube<C>>,
    /// `f~` with `f - <f>_{Q0} = f~ + sum alpha_j 1_{Q_j}` on leaves of `Q0`; equal to `f`
    /// outside `Q0`.
    pub remainder: BoundaryFunction<C>,
    /// `Q0` is not the whole set, so `<f>_{Q0}` is to be absorbed into `f~`.
    pub absorbed: bool,
    /// `f` does not vanish outside `Q0`.
    pub support_outside_root: bool,
}

#[derive(Clone, Debug)]
pub struct Theorem12Split<C: Coefficient> {
    pub decomposition: GarnettDecomposition<C>,
    /// `f~`, with `<f>_{Q0}` absorbed when `Q0` is a proper cube.
    pub remainder: BoundaryFunction<C>,
    pub dyadic: Vec<(CubeId, C)>,
    /// `C0`: packing norm of the stopping cubes.
    pub packing: f64,
    pub sup_alpha: C,
    pub bmo_f: C,
    pub bmo_f0: C,
    pub remainder_sup: C,
}

impl<C: Coefficient> GarnettDecomposition<C> {
    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn levels(&self) -> u32 {
        self.cubes.iter().map(|c| c.level).max().unwrap_or(0)
    }

    pub fn dyadic_part(&self) -> Vec<(CubeId, C)> {
        self.cubes.iter().map(|c| (c.id, c.alpha.clone())).collect()
    }

    /// `f0 = sum alpha_j 1_{Q_j}`.
    pub fn f0(&self) -> BoundaryFunction<C> {
        let mut out = self.remainder.map(|_| C::zero());
        for c in &self.cubes {
            for i in out.leaves(&c.id) {
                out.values[i] = out.values[i].clone() + c.alpha.clone();
            }
        }
        out
    }

    /// `<f>_{Q0} + f~ + f0` on leaves of `Q0`, `f~` elsewhere.
    pub fn reconstruct(&self) -> BoundaryFunction<C> {
        let f0 = self.f0();
        let inside = self.remainder.leaves(&self.root);
        let mut out = self.remainder.clone();
        for i in inside {
            out.values[i] = self.root_average.clone() + self.remainder.values[i].clone() + f0.values[i].clone();
        }
        out
    }

    /// Largest `|f - reconstruct()|`, relative to `max(1, sup |f|)`.
    pub fn reconstruction_error(&self, f: &BoundaryFunction<C>) -> f64 {
        let r = self.reconstruct();
        let scale = f.sup_norm().to_f64_lossy().max(1.0);
        r.values
            .iter()
            .zip(&f.values)
            .map(|(a, b)| (a.clone() - b.clone()).abs().to_f64_lossy())
            .fold(0.0, f64::max)
            / scale
    }

    /// `max_Q sum_{Q_j ⊆ Q} sigma(Q_j) / sigma(Q)`, from exact leaf counts.
    pub fn packing_norm(&self) -> f64 {
        let b = self.branching;
        let depth = self.remainder.depth;
        let count = |q: &CubeId| (b as u128).pow(depth - q.gen);
        let mut acc: FxHashMap<CubeId, u128> = FxHashMap::default();
        for c in &self.cubes {
            let m = count(&c.id);
            let mut cur = Some(c.id);
            while let Some(q) = cur {
                *acc.entry(q).or_insert(0) += m;
                cur = q.parent(b);
            }
        }
        acc.iter().map(|(q, s)| *s as f64 / count(q) as f64).fold(0.0, f64::max)
    }

    /// `max_j |alpha_j| / ((sigma(parent)/sigma(Q_j)) 2 ||f||)`; at most 1.
    pub fn alpha_ratio(&self) -> f64 {
        let bound = self.threshold.to_f64_lossy() * self.branching as f64;
        self.cubes.iter().map(|c| c.alpha.abs().to_f64_lossy() / bound).fold(0.0, f64::max)
    }

    /// `sup |f~|` over leaves of `Q0`.
    pub fn remainder_sup(&self) -> C {
        let r = self.remainder.leaves(&self.root);
        self.remainder.values[r].iter().map(|v| v.abs()).fold(C::zero(), |a, v| if v > a { v } else { a })
    }

    /// `Q_min(x)`: the smallest stopping cube (or `Q0`) containing the leaf.
    pub fn minimal_cube(&self, leaf: &CubeId) -> CubeId {
        let b = self.branching;
        self.cubes.iter().rev().find(|c| c.id.contains(b, leaf)).map_or(self.root, |c| c.id)
    }
}

/// Stopping-time decomposition of `f` on `D_{Q0}` with threshold `2 ||f||_{BMO_D}`
/// (strict inequality stops).
pub fn garnett_decompose<T: Real, C: Coefficient>(
    system: &DyadicSystem<T>,
    f: &BoundaryFunction<C>,
    q0: &CubeId,
) -> Result<GarnettDecomposition<C>> {
    system.check(q0)?;
    if f.depth != system.depth || f.branching != system.branching() {
        return Err(Error::InvalidParameter("boundary function resolution does not match the system".into()));
    }
    let b = system.branching();
    let depth = system.depth;
    let (norm, _) = bmo_norm_dyadic(f);
    let threshold = norm.clone() + norm.clone();
    let root_average = f.average(q0);
    let mut cubes: Vec<StoppingCube<C>> = Vec::new();

    if !norm.is_zero() {
        let mut queue: VecDeque<(Option<usize>, CubeId, u32, C)> = VecDeque::new();
        queue.push_back((None, *q0, 0, root_average.clone()));
        while let Some((parent, p, level, a)) = queue.pop_front() {
            let table = OscillationTable::new(f, &p, &a);
            let mut stack: Vec<CubeId> = Vec::new();
            if p.gen < depth {
                stack.extend(p.children(b).collect::<Vec<_>>().into_iter().rev());
            }
            while let Some(q) = stack.pop() {
                let n = C::from_count(table.count(&q));
                if table.sum(&q) > threshold.clone() * n {
                    let average = f.average(&q);
                    let alpha = average.clone() - a.clone();
                    cubes.push(StoppingCube { id: q, level: level + 1, parent, average: average.clone(), alpha });
                    queue.push_back((Some(cubes.len() - 1), q, level + 1, average));
                } else if q.gen < depth {
                    stack.extend(q.children(b).collect::<Vec<_>>().into_iter().rev());
                }
            }
        }
    }

    // cubes are ordered by level, so deeper cubes overwrite shallower ones
    let mut reference = f.map(|_| C::zero());
    for i in f.leaves(q0) {
        reference.values[i] = root_average.clone();
    }
    for c in &cubes {
        for i in f.leaves(&c.id) {
            reference.values[i] = c.average.clone();
        }
    }
    let mut remainder = f.clone();
    for i in f.leaves(q0) {
        remainder.values[i] = f.values[i].clone() - reference.values[i].clone();
    }
    remainder.support = Some(*q0);

    Ok(GarnettDecomposition {
        root: *q0,
        branching: b,
        norm,
        threshold,
        root_average,
        cubes,
        remainder,
        absorbed: !q0.is_root(),
        support_outside_root: !f.supported_in(q0),
    })
}

/// Bottom-up sums of `|f - a|` over the subtree of `p`.
struct OscillationTable<C: Coefficient> {
    top: u32,
    offset: Vec<u64>,
    span: Vec<u64>,
    sums: Vec<Vec<C>>,
}

impl<C: Coefficient> OscillationTable<C> {
    fn new(f: &BoundaryFunction<C>, p: &CubeId, a: &C) -> Self {
        let b = f.branching;
        let leaves = f.leaves(p);
        let mut sums = vec![Vec::new(); (f.depth - p.gen + 1) as usize];
        let last = sums.len() - 1;
        sums[last] = f.values[leaves].iter().map(|v| (v.clone() - a.clone()).abs()).collect();
        for k in (0..last).rev() {
            sums[k] = sums[k + 1].chunks(b).map(|c| c.iter().cloned().fold(C::zero(), |s, v| s + v)).collect();
        }
        let offset = (0..=last as u32).map(|d| p.index * (b as u64).pow(d)).collect();
        let span = (0..=last as u32).map(|d| (b as u64).pow(f.depth - p.gen - d)).collect();
        OscillationTable { top: p.gen, offset, span, sums }
    }

    fn sum(&self, q: &CubeId) -> C {
        let d = (q.gen - self.top) as usize;
        self.sums[d][(q.index - self.offset[d]) as usize].clone()
    }

    fn count(&self, q: &CubeId) -> u64 {
        self.span[(q.gen - self.top) as usize]
    }
}

/// The split `f = f~ + f0` with the three hypotheses on `f0` certified.
pub fn theorem12_split<T: Real, C: Coefficient>(
    system: &DyadicSystem<T>,
    f: &BoundaryFunction<C>,
    q0: &CubeId,
) -> Result<Theorem12Split<C>> {
    let d = garnett_decompose(system, f, q0)?;
    let tol = 1e-12;
    let packing = d.packing_norm();
    if packing > 2.0 + tol {
        return Err(Error::Hypothesis(format!("stopping cubes pack with norm {packing} > 2")));
    }
    if d.alpha_ratio() > 1.0 + tol {
        return Err(Error::Hypothesis(format!("coefficient ratio {} exceeds 1", d.alpha_ratio())));
    }
    let remainder_sup = d.remainder_sup();
    let norm = d.norm.to_f64_lossy();
    if remainder_sup.to_f64_lossy() > 2.0 * norm * (1.0 + tol) {
        return Err(Error::Hypothesis(format!("sup |f~| = {} exceeds 2 ||f||", remainder_sup.to_f64_lossy())));
    }
    let f0 = d.f0();
    let (bmo_f0, _) = bmo_norm_dyadic(&f0);
    let mut remainder = d.remainder.clone();
    if d.absorbed {
        for i in remainder.leaves(q0) {
            remainder.values[i] = remainder.values[i].clone() + d.root_average.clone();
        }
    }
    let sup_alpha = d.cubes.iter().map(|c| c.alpha.abs()).fold(C::zero(), |a, v| if v > a { v } else { a });
    Ok(Theorem12Split {
        remainder,
        dyadic: d.dyadic_part(),
        packing,
        sup_alpha,
        bmo_f: d.norm.clone(),
        bmo_f0,
        remainder_sup,
        decomposition: d,
    })
}

impl<C: Coefficient> Theorem12Split<C> {
    /// `||f0||_BMO <= ||f||_BMO + 2 sup |f~|`.
    pub fn triangle_holds(&self) -> bool {
        let rhs = self.bmo_f.to_f64_lossy() + 2.0 * self.remainder_sup.to_f64_lossy();
        self.bmo_f0.to_f64_lossy() <= rhs * (1.0 + 1e-12)
    }
}
