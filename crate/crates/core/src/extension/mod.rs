//! The dyadic extension `F0 = sum_j alpha_j 1_{t_{Q_j}}`, its jump measure and the
//! mollified field.

mod mollifier;

use serde::{Deserialize, Serialize};

use crate::dyadic::{CubeId, DyadicSystem};
use crate::geometry::{face_ball_measure, Aabb, Point, Scope};
use crate::regions::TentAssembly;
use crate::whitney::{Face, Incident, WhitneyDecomposition};
use crate::{Coefficient, Error, Real, Result};

pub use mollifier::{Bump, GradientAudit, Mollified, MollifierSpec, TvAudit, TvCase};

/// How an evaluation point was resolved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldFlag {
    Owned,
    Unowned,
    Unresolved,
    Outside,
}

#[derive(Clone, Debug)]
pub struct ExtensionField<T: Real> {
    pub root: CubeId,
    pub branching: usize,
    pub depth: u32,
    /// `(Q_j, alpha_j)` in stopping order.
    pub stopping: Vec<(CubeId, T)>,
    /// `S(Q')` per generation, dense over the system (zero outside `D_{Q0}`).
    s: Vec<Vec<T>>,
    /// `F0` on each Whitney cube.
    pub cube_values: Vec<T>,
    pub owners: Vec<Option<CubeId>>,
}

/// `|grad F0|` as weighted faces.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct JumpMeasure<T: Real> {
    pub dim: usize,
    pub faces: Vec<Face<T>>,
    pub jumps: Vec<T>,
    pub weights: Vec<T>,
    pub total: T,
    /// Faces against unresolved cells were counted with the outside value 0.
    pub counts_truncation: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SumDifferenceAudit {
    pub kappa: f64,
    pub pairs: usize,
    pub max_gap: f64,
    /// `max_gap / (C0 ||f||_BMO)`.
    pub normalized: f64,
    pub worst: Option<(String, String)>,
}

/// Builds `S` by one descending sweep and evaluates `F0` on every Whitney cube.
pub fn build_extension<T: Real, C: Coefficient>(
    system: &DyadicSystem<T>,
    dyadic: &[(CubeId, C)],
    assembly: &TentAssembly,
) -> Result<ExtensionField<T>> {
    let b = system.branching();
    let root = assembly.root();
    let mut alpha: Vec<rustc_hash::FxHashMap<u64, T>> = vec![Default::default(); system.depth as usize + 1];
    let mut stopping = Vec::with_capacity(dyadic.len());
    for (q, a) in dyadic {
        system.check(q)?;
        if !root.contains(b, q) || *q == root {
            return Err(Error::NotContained { cube: system.label(q), root: system.label(&root) });
        }
        let a = T::lit(a.to_f64_lossy());
        *alpha[q.gen as usize].entry(q.index).or_insert(T::zero()) += a;
        stopping.push((*q, a));
    }
    let mut s: Vec<Vec<T>> = Vec::with_capacity(system.depth as usize + 1);
    s.push(vec![T::zero()]);
    for k in 1..=system.depth {
        let prev = &s[k as usize - 1];
        let row: Vec<T> = (0..system.set.count(k))
            .map(|i| prev[(i / b as u64) as usize] + alpha[k as usize].get(&i).copied().unwrap_or(T::zero()))
            .collect();
        s.push(row);
    }
    let cube_values = assembly.owners.iter().map(|o| o.map_or(T::zero(), |q| s[q.gen as usize][q.index as usize])).collect();
    Ok(ExtensionField {
        root,
        branching: b,
        depth: system.depth,
        stopping,
        s,
        cube_values,
        owners: assembly.owners.clone(),
    })
}

impl<T: Real> ExtensionField<T> {
    /// `S(Q') = sum_{j: Q_j ⊇ Q'} alpha_j`.
    pub fn s(&self, q: &CubeId) -> T {
        self.s[q.gen as usize][q.index as usize]
    }

    /// Largest number of stopping tents `t_{Q_j}` that share a Whitney cube.
    pub fn tent_overlap(&self) -> usize {
        let stops: rustc_hash::FxHashSet<CubeId> = self.stopping.iter().map(|(q, _)| *q).collect();
        let mut memo: rustc_hash::FxHashMap<CubeId, usize> = Default::default();
        let mut best = 0;
        for q in self.owners.iter().flatten() {
            let mut chain = Vec::new();
            let mut cur = Some(*q);
            let mut base = 0;
            while let Some(c) = cur {
                if let Some(&n) = memo.get(&c) {
                    base = n;
                    break;
                }
                chain.push(c);
                cur = if c == self.root { None } else { c.parent(self.branching) };
            }
            for c in chain.into_iter().rev() {
                base += usize::from(stops.contains(&c));
                memo.insert(c, base);
            }
            best = best.max(base);
        }
        best
    }

    pub fn cube_value(&self, cube: usize) -> T {
        self.cube_values[cube]
    }

    /// `F0(Y)`, with 0 and a flag when `Y` is not in an owned cube.
    pub fn evaluate_f0(&self, w: &WhitneyDecomposition<T>, y: &Point<T>) -> (T, FieldFlag) {
        match w.locate(y) {
            Ok(i) => match self.owners[i] {
                Some(q) => (self.s(&q), FieldFlag::Owned),
                None => (T::zero(), FieldFlag::Unowned),
            },
            Err(Error::Outside) => (T::zero(), FieldFlag::Outside),
            Err(_) => (T::zero(), FieldFlag::Unresolved),
        }
    }

    fn incident_value(&self, x: Incident) -> Option<T> {
        match x {
            Incident::Cube(i) => Some(self.cube_values[i as usize]),
            Incident::Unresolved => Some(T::zero()),
            Incident::Exterior => None,
        }
    }

    /// Faces with a nonzero jump; faces against the unresolved shell only with
    /// `count_truncation`, faces on the domain boundary never.
    pub fn jump_measure(&self, faces: &[Face<T>], dim: usize, count_truncation: bool) -> JumpMeasure<T> {
        let mut out = JumpMeasure { dim, faces: Vec::new(), jumps: Vec::new(), weights: Vec::new(), total: T::zero(), counts_truncation: count_truncation };
        for f in faces {
            if f.touches_unresolved() && !count_truncation {
                continue;
            }
            let (Some(a), Some(b)) = (self.incident_value(f.low), self.incident_value(f.high)) else {
                continue;
            };
            let jump = (a - b).abs();
            if jump > T::zero() {
                let w = f.area(dim) * jump;
                out.faces.push(*f);
                out.jumps.push(jump);
                out.weights.push(w);
                out.total += w;
            }
        }
        out
    }

    /// `max |S(Q) - S(Q')|` over `pairs` (from [`comparable_pairs`] at `kappa`),
    /// normalized by `c0 * norm`.
    pub fn sum_difference_audit(
        &self,
        system: &DyadicSystem<T>,
        pairs: &[(CubeId, CubeId)],
        kappa: f64,
        c0: f64,
        norm: f64,
    ) -> SumDifferenceAudit {
        let mut audit = SumDifferenceAudit { kappa, pairs: pairs.len(), max_gap: 0.0, normalized: 0.0, worst: None };
        for (q, p) in pairs {
            let gap = (self.s(q) - self.s(p)).abs().as_f64();
            if gap > audit.max_gap {
                audit.max_gap = gap;
                audit.worst = Some((system.label(q), system.label(p)));
            }
        }
        audit.normalized = if norm > 0.0 { audit.max_gap / (c0 * norm) } else { 0.0 };
        audit
    }

    /// `|S(Q) - S(Q')|` for one pair, rejecting pairs that are not comparable.
    pub fn sum_difference(&self, system: &DyadicSystem<T>, q: &CubeId, p: &CubeId, kappa: f64) -> Result<T> {
        system.check(q)?;
        system.check(p)?;
        if q.gen != p.gen || !cells_within(system, q, p, T::lit(kappa) * system.side(q)) {
            return Err(Error::Hypothesis(format!(
                "{} and {} are not comparable at kappa = {kappa}",
                system.label(q),
                system.label(p)
            )));
        }
        Ok((self.s(q) - self.s(p)).abs())
    }
}

/// `dist(Q, P) <= r` for pieces of the set.
fn cells_within<T: Real>(system: &DyadicSystem<T>, q: &CubeId, p: &CubeId, r: T) -> bool {
    let set = &system.set;
    let b = set.branching;
    let mut stack = vec![set.cell(*q)];
    while let Some(c) = stack.pop() {
        if !set.within(&set.bbox(&c), Scope::within(*p), r) {
            continue;
        }
        if set.is_exact(&c) {
            if set.within(&set.shape(&c), Scope::within(*p), r) {
                return true;
            }
            continue;
        }
        if c.id.gen < set.depth {
            stack.extend((0..b).map(|k| set.child_cell(&c, k)));
        }
    }
    false
}

/// Distinct same-generation pairs inside `D_root` at distance `<= kappa l`, each once.
pub fn comparable_pairs<T: Real>(system: &DyadicSystem<T>, root: &CubeId, from: u32, kappa: f64) -> Vec<(CubeId, CubeId)> {
    let set = &system.set;
    let b = set.branching;
    let mut out = Vec::new();
    for k in from.max(root.gen)..=system.depth {
        let r = T::lit(kappa) * set.side(k);
        // dual descent over pairs of cells
        let mut stack = vec![(set.cell(*root), set.cell(*root))];
        while let Some((a, c)) = stack.pop() {
            if set.bbox(&a).dist_box(&set.bbox(&c)) > r {
                continue;
            }
            if a.id.gen == k {
                if a.id.index < c.id.index && cells_within(system, &a.id, &c.id, r) {
                    out.push((a.id, c.id));
                }
                continue;
            }
            for i in 0..b {
                let ai = set.child_cell(&a, i);
                for j in 0..b {
                    let cj = set.child_cell(&c, j);
                    if a.id == c.id && j < i {
                        continue;
                    }
                    stack.push((ai, cj));
                }
            }
        }
    }
    out.sort_unstable_by_key(|(a, c)| (a.gen, a.index, c.index));
    out
}

impl<T: Real> JumpMeasure<T> {
    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn len(&self) -> usize {
        self.faces.len()
    }

    /// Mass in a closed axis box, faces clipped exactly.
    pub fn mass_in_box(&self, region: &Aabb<T>) -> T {
        let dim = self.dim;
        let mut total = T::zero();
        for (f, w) in self.faces.iter().zip(&self.weights) {
            let r = f.rect(dim);
            let plane = r.lo[f.axis as usize];
            let a = f.axis as usize;
            if plane < region.lo[a] || plane > region.hi[a] {
                continue;
            }
            let mut frac = T::one();
            for k in 0..dim {
                if k == a {
                    continue;
                }
                let lo = r.lo[k].max(region.lo[k]);
                let hi = r.hi[k].min(region.hi[k]);
                if hi <= lo {
                    frac = T::zero();
                    break;
                }
                frac = frac * (hi - lo) / (r.hi[k] - r.lo[k]);
            }
            total += *w * frac;
        }
        total
    }

    /// Mass in the open box, faces on its boundary excluded.
    pub fn mass_in_open_box(&self, region: &Aabb<T>) -> T {
        let dim = self.dim;
        let mut total = T::zero();
        for (f, w) in self.faces.iter().zip(&self.weights) {
            let r = f.rect(dim);
            let a = f.axis as usize;
            let plane = r.lo[a];
            if plane <= region.lo[a] || plane >= region.hi[a] {
                continue;
            }
            let mut frac = T::one();
            for k in (0..dim).filter(|k| *k != a) {
                let lo = r.lo[k].max(region.lo[k]);
                let hi = r.hi[k].min(region.hi[k]);
                if hi <= lo {
                    frac = T::zero();
                    break;
                }
                frac = frac * (hi - lo) / (r.hi[k] - r.lo[k]);
            }
            total += *w * frac;
        }
        total
    }

    /// Mass of a face subset given by indices.
    pub fn mass_of(&self, idx: impl IntoIterator<Item = usize>) -> T {
        idx.into_iter().map(|i| self.weights[i]).sum()
    }

    /// `mu(B(x, r))` with exact face-ball clipping, by scanning every face.
    pub fn mass_in_ball_scan(&self, x: &Point<T>, r: T) -> T {
        let dim = self.dim;
        let mut total = T::zero();
        for (f, j) in self.faces.iter().zip(&self.jumps) {
            let rect = f.rect(dim);
            if rect.dist_point(x) >= r {
                continue;
            }
            total += *j * face_ball_measure(&rect, f.axis as usize, dim, x, r);
        }
        total
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "axis,x,y,z,side,jump,weight")?;
        for ((f, j), w) in self.faces.iter().zip(&self.jumps).zip(&self.weights) {
            writeln!(out, "{},{},{},{},{},{},{}", f.axis, f.lower[0], f.lower[1], f.lower[2], f.side, j, w)?;
        }
        Ok(())
    }
}
