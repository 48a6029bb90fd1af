//! The dyadic system on a boundary set: navigation, thin-boundary audits and
//! Carleson packing norms.

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::geometry::{BoundarySet, Point, Scope};
pub use crate::geometry::CubeId;
use crate::{Error, Real, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BoundaryCube<T: Real> {
    pub id: CubeId,
    pub side: T,
    pub center: Point<T>,
    pub measure: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Parent,
    Children,
    Peers,
}

#[derive(Clone, Debug)]
pub struct DyadicSystem<T: Real> {
    pub set: BoundarySet<T>,
    pub depth: u32,
}

pub fn build_dyadic_system<T: Real>(set: &BoundarySet<T>, depth: u32) -> Result<DyadicSystem<T>> {
    if depth > set.depth {
        return Err(Error::DepthExceedsResolution { requested: depth, available: set.depth });
    }
    Ok(DyadicSystem { set: set.clone(), depth })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThinBoundary {
    pub interior: f64,
    pub exterior: f64,
    /// Set when `E \ Q` is empty and the interior ratio is 0 by convention.
    pub no_complement: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThinBoundaryFit {
    pub rhos: Vec<f64>,
    /// Largest interior/exterior ratio over eligible cubes, per `rho`.
    pub max_ratio: Vec<f64>,
    pub cubes_used: Vec<usize>,
    pub c1: f64,
    /// Fitted exponent; `+inf` when every ratio vanishes (separated cubes).
    pub gamma: f64,
}

impl ThinBoundaryFit {
    pub fn vacuous(&self) -> bool {
        self.gamma.is_infinite()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SandwichReport {
    /// Per generation: smallest inner and largest outer ball constant.
    pub per_generation: Vec<(u32, f64, f64)>,
    pub inner_spread: f64,
    pub outer_spread: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ExactnessReport {
    pub cubes: u64,
    pub measure_defects: u64,
    pub containment_defects: u64,
    pub overlap_defects: u64,
    pub max_children: usize,
    pub generation_measure_defects: u64,
}

impl ExactnessReport {
    pub fn holds(&self) -> bool {
        self.measure_defects == 0
            && self.containment_defects == 0
            && self.overlap_defects == 0
            && self.generation_measure_defects == 0
    }
}

impl<T: Real> DyadicSystem<T> {
    pub fn branching(&self) -> usize {
        self.set.branching
    }

    pub fn root(&self) -> CubeId {
        CubeId::ROOT
    }

    pub fn side(&self, id: &CubeId) -> T {
        self.set.side(id.gen)
    }

    pub fn measure(&self, id: &CubeId) -> T {
        self.set.measure(id.gen)
    }

    pub fn contains_id(&self, id: &CubeId) -> bool {
        id.gen <= self.depth && id.index < self.set.count(id.gen)
    }

    pub fn check(&self, id: &CubeId) -> Result<()> {
        if self.contains_id(id) {
            Ok(())
        } else {
            Err(Error::NotInHierarchy(id.label(self.branching())))
        }
    }

    pub fn generation(&self, k: u32) -> impl Iterator<Item = CubeId> {
        (0..self.set.count(k)).map(move |i| CubeId::new(k, i))
    }

    /// Leaves (generation `depth`) below `q`, as an index range.
    pub fn leaf_range(&self, q: &CubeId) -> std::ops::Range<u64> {
        let span = self.set.count(self.depth - q.gen);
        q.index * span..(q.index + 1) * span
    }

    pub fn label(&self, id: &CubeId) -> String {
        id.label(self.branching())
    }

    pub fn parse(&self, s: &str) -> Result<CubeId> {
        let id = CubeId::parse(s, self.branching())?;
        self.check(&id)?;
        Ok(id)
    }

    /// `x_Q`: point of the resolved set inside `Q` nearest the centre of `Q`'s box.
    pub fn center(&self, id: &CubeId) -> Point<T> {
        let cell = self.set.cell(*id);
        let c = self.set.bbox(&cell).center();
        match self.set.nearest(&c, Scope::within(*id)) {
            Some((p, _)) => p,
            None => c,
        }
    }

    pub fn cube(&self, id: CubeId) -> Result<BoundaryCube<T>> {
        self.check(&id)?;
        Ok(BoundaryCube { id, side: self.side(&id), center: self.center(&id), measure: self.measure(&id) })
    }

    pub fn navigate(&self, id: &CubeId, direction: Direction) -> Result<Vec<CubeId>> {
        self.check(id)?;
        let b = self.branching();
        match direction {
            Direction::Parent => id.parent(b).map(|p| vec![p]).ok_or(Error::ParentOfRoot),
            Direction::Children => {
                if id.gen >= self.depth {
                    Ok(Vec::new())
                } else {
                    Ok(id.children(b).collect())
                }
            }
            Direction::Peers => Ok(self.generation(id.gen).collect()),
        }
    }

    /// Point of leaf `id` used as its representative.
    pub fn leaf_point(&self, leaf: &CubeId) -> Point<T> {
        let cell = self.set.cell(*leaf);
        let c = self.set.bbox(&cell).center();
        if leaf.gen >= self.set.depth {
            self.set.shape(&cell).nearest(&c)
        } else {
            self.center(leaf)
        }
    }

    pub fn exactness_audit(&self) -> ExactnessReport {
        let e = &self.set;
        let b = self.branching();
        let intrinsic: Vec<usize> = {
            let root = e.bbox(&e.root_cell());
            (0..3).filter(|&k| root.extent(k) > T::zero()).collect()
        };
        let mut report = ExactnessReport { max_children: b, ..Default::default() };
        let mut stack = vec![e.root_cell()];
        while let Some(cell) = stack.pop() {
            report.cubes += 1;
            if cell.id.gen >= self.depth {
                continue;
            }
            let pb = e.bbox(&cell);
            // coordinates of thirds are rounded, so containment allows a few ulps
            let slack = T::epsilon() * T::lit(8.0);
            let kids: Vec<_> = (0..b).map(|c| e.child_cell(&cell, c)).collect();
            let boxes: Vec<_> = kids.iter().map(|k| e.bbox(k)).collect();
            let total: T = kids.iter().map(|k| e.measure(k.id.gen)).sum();
            if total != e.measure(cell.id.gen) {
                report.measure_defects += 1;
            }
            for bx in &boxes {
                if !(0..3).all(|k| bx.lo[k] >= pb.lo[k] - slack && bx.hi[k] <= pb.hi[k] + slack) {
                    report.containment_defects += 1;
                }
            }
            for i in 0..b {
                for j in i + 1..b {
                    let overlap = intrinsic
                        .iter()
                        .map(|&k| boxes[i].hi[k].min(boxes[j].hi[k]) - boxes[i].lo[k].max(boxes[j].lo[k]))
                        .fold(T::one(), |acc, w| if w <= slack { T::zero() } else { acc * w });
                    if overlap > T::zero() {
                        report.overlap_defects += 1;
                    }
                }
            }
            stack.extend(kids);
        }
        for k in 0..=self.depth {
            let total = e.measure(k) * T::lit(e.count(k) as f64);
            if (total - e.total_measure).abs() > e.total_measure * T::epsilon() * T::lit(4.0) {
                report.generation_measure_defects += 1;
            }
        }
        report
    }

    /// Inner constant `dist(x_Q, E \ Q) / l(Q)` and outer constant
    /// `max_{y in Q} |y - x_Q| / l(Q)`, extremes per generation.
    pub fn ball_sandwich(&self) -> SandwichReport {
        let mut per_generation = Vec::new();
        for k in 1..=self.depth {
            let mut inner = f64::INFINITY;
            let mut outer = 0.0f64;
            let l = self.set.side(k);
            for q in self.generation(k) {
                let x = self.center(&q);
                let c_in = self.set.distance_in(&x, Scope::excluding(q)) / l;
                let c_out = self.set.farthest(&x, Scope::within(q)) / l;
                inner = inner.min(c_in.as_f64());
                outer = outer.max(c_out.as_f64());
            }
            per_generation.push((k, inner, outer));
        }
        let spread = |f: &dyn Fn(&(u32, f64, f64)) -> f64| {
            let hi = per_generation.iter().map(f).fold(0.0f64, f64::max);
            let lo = per_generation.iter().map(f).fold(f64::INFINITY, f64::min);
            hi / lo
        };
        let inner_spread = spread(&|t| t.1);
        let outer_spread = spread(&|t| t.2);
        SandwichReport { per_generation, inner_spread, outer_spread }
    }

    /// Thin-boundary ratios of `Q` at relative width `rho`.
    ///
    /// A leaf counts when its representative point lies within `rho * l(Q)` of
    /// `E \ Q` (interior) or of `Q` (exterior); the error is at most one leaf
    /// diameter in the width.
    pub fn thin_boundary_ratio(&self, q: &CubeId, rho: f64) -> Result<ThinBoundary> {
        self.check(q)?;
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::InvalidParameter(format!("rho {rho} outside (0, 1)")));
        }
        let e = &self.set;
        let b = self.branching();
        let width = T::lit(rho) * self.side(q);
        let leaf_mass = e.measure(self.depth);
        let no_complement = q.is_root();
        let mut interior = T::zero();
        if !no_complement {
            let mut stack = vec![e.cell(*q)];
            while let Some(cell) = stack.pop() {
                let bb = e.bbox(&cell);
                if !e.within(&bb, Scope::excluding(*q), width) {
                    continue;
                }
                if cell.id.gen >= self.depth {
                    if e.within(&self.leaf_point(&cell.id), Scope::excluding(*q), width) {
                        interior += leaf_mass;
                    }
                    continue;
                }
                for c in 0..b {
                    stack.push(e.child_cell(&cell, c));
                }
            }
        }
        let mut exterior = T::zero();
        let qbox = e.bbox(&e.cell(*q));
        let mut stack = vec![e.root_cell()];
        while let Some(cell) = stack.pop() {
            if cell.id == *q {
                continue;
            }
            let bb = e.bbox(&cell);
            if bb.dist_box(&qbox) > width {
                continue;
            }
            if cell.id.gen >= self.depth {
                if e.within(&self.leaf_point(&cell.id), Scope::within(*q), width) {
                    exterior += leaf_mass;
                }
                continue;
            }
            for c in 0..b {
                stack.push(e.child_cell(&cell, c));
            }
        }
        let mq = self.measure(q);
        Ok(ThinBoundary { interior: (interior / mq).as_f64(), exterior: (exterior / mq).as_f64(), no_complement })
    }

    /// Fits `ratio <= C1 * rho^gamma` over one family of non-root cubes.
    ///
    /// A cube is resolved at `rho` when a leaf diameter is at most `rho * l(Q)`. The
    /// family is every cube resolved at the smallest `rho` that resolves any, and that
    /// family is used for all larger `rho` too; `rho` values resolving nothing are
    /// skipped (ratio 0, no cubes). Letting the family grow as `rho` grows would mix
    /// coarse cubes with one neighbour (ratio `rho`) and finer ones with two (`2 rho`)
    /// and bias the slope by depth.
    pub fn thin_boundary_fit(&self, rhos: &[f64]) -> ThinBoundaryFit {
        let resolved = |rho: f64, k: u32| self.set.leaf_diameter <= T::lit(rho) * self.set.side(k);
        let finest = rhos
            .iter()
            .filter_map(|&rho| (1..self.depth).filter(|&k| resolved(rho, k)).max().map(|k| (rho, k)))
            .min_by(|a, b| a.0.total_cmp(&b.0));
        let mut max_ratio = Vec::with_capacity(rhos.len());
        let mut cubes_used = Vec::with_capacity(rhos.len());
        for &rho in rhos {
            let mut m = 0.0f64;
            let mut used = 0usize;
            if let Some((rho_min, k_max)) = finest {
                if rho >= rho_min {
                    for k in 1..=k_max {
                        for q in self.generation(k) {
                            let r = self.thin_boundary_ratio(&q, rho).expect("valid cube");
                            m = m.max(r.interior).max(r.exterior);
                            used += 1;
                        }
                    }
                }
            }
            max_ratio.push(m);
            cubes_used.push(used);
        }
        let pts: Vec<(f64, f64)> =
            rhos.iter().zip(&max_ratio).filter(|(_, m)| **m > 0.0).map(|(r, m)| (r.ln(), m.ln())).collect();
        let (c1, gamma) = if pts.is_empty() {
            (0.0, f64::INFINITY)
        } else if pts.len() == 1 {
            (pts[0].1.exp() / pts[0].0.exp(), 1.0)
        } else {
            let n = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
            let gamma = sxy / sxx;
            let c1 = rhos
                .iter()
                .zip(&max_ratio)
                .map(|(r, m)| m / r.powf(gamma))
                .fold(0.0f64, f64::max);
            (c1, gamma)
        };
        ThinBoundaryFit { rhos: rhos.to_vec(), max_ratio, cubes_used, c1, gamma }
    }

    /// `max_{Q0} sum_{Q in family, Q ⊆ Q0} sigma(Q) / sigma(Q0)`.
    pub fn carleson_packing_norm(&self, family: &[CubeId]) -> T {
        let b = self.branching();
        let mut acc: FxHashMap<CubeId, T> = FxHashMap::default();
        for q in family {
            let m = self.measure(q);
            let mut cur = Some(*q);
            while let Some(c) = cur {
                *acc.entry(c).or_insert(T::zero()) += m;
                cur = c.parent(b);
            }
        }
        acc.iter().map(|(q, s)| *s / self.measure(q)).fold(T::zero(), |a, v| a.max(v))
    }

    /// `sum_{Q in family, Q ⊆ Q0} l(Q)^n / l(Q0)^n`.
    pub fn packing_sum_n(&self, family: &[CubeId], q0: &CubeId) -> T {
        let n = self.set.codim_one() as i32;
        let b = self.branching();
        let base = self.side(q0).powi(n);
        family.iter().filter(|q| q0.contains(b, q)).map(|q| self.side(q).powi(n) / base).sum()
    }

    /// `sup_Q l(Q)^d / sigma(Q)` times `sup_Q sigma(Q) / l(Q)^d`, the constant in
    /// `sum l(Q)^n <= packing * chain * l(Q0)^n` when `d <= n`.
    pub fn ahlfors_chain_constant(&self) -> T {
        let d = self.set.dimension;
        let mut up = T::zero();
        let mut down = T::zero();
        for k in 0..=self.depth {
            let ratio = self.set.side(k).powf(d) / self.set.measure(k);
            up = up.max(ratio);
            down = down.max(T::one() / ratio);
        }
        up * down
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_instance, InstanceConfig};

    fn system(cfg: InstanceConfig) -> DyadicSystem<f64> {
        let e = make_instance(&cfg).unwrap();
        let g = e.depth;
        build_dyadic_system(&e, g).unwrap()
    }

    #[test]
    fn generation_sizes() {
        let d = system(InstanceConfig::segment(3));
        let sizes: Vec<usize> = (0..=3).map(|k| d.generation(k).count()).collect();
        assert_eq!(sizes, vec![1, 2, 4, 8]);
        let d = system(InstanceConfig::linear_cantor(3));
        assert!((d.side(&CubeId::new(2, 0)) - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn navigation() {
        let d = system(InstanceConfig::segment(3));
        assert_eq!(d.navigate(&CubeId::ROOT, Direction::Parent), Err(Error::ParentOfRoot));
        let kids = d.navigate(&CubeId::ROOT, Direction::Children).unwrap();
        assert_eq!(kids, vec![CubeId::new(1, 0), CubeId::new(1, 1)]);
        let d = system(InstanceConfig::four_corner(2));
        assert_eq!(d.navigate(&CubeId::new(1, 2), Direction::Children).unwrap().len(), 4);
        assert!(d.navigate(&CubeId::new(5, 0), Direction::Children).is_err());
    }

    #[test]
    fn thin_boundary_examples() {
        let d = system(InstanceConfig::segment(6));
        let r = d.thin_boundary_ratio(&CubeId::new(1, 0), 0.125).unwrap();
        assert_eq!(r.interior, 0.125);
        let r = d.thin_boundary_ratio(&CubeId::ROOT, 0.25).unwrap();
        assert!(r.no_complement);
        assert_eq!(r.interior, 0.0);
        let d = system(InstanceConfig::four_corner(4));
        let r = d.thin_boundary_ratio(&CubeId::new(1, 0), 0.25).unwrap();
        assert_eq!((r.interior, r.exterior), (0.0, 0.0));
    }

    #[test]
    fn packing_examples() {
        let d = system(InstanceConfig::segment(4));
        assert_eq!(d.carleson_packing_norm(&[CubeId::ROOT]), 1.0);
        let family: Vec<CubeId> = (0..=3).flat_map(|k| d.generation(k)).collect();
        assert_eq!(d.carleson_packing_norm(&family), 4.0);
        assert_eq!(d.packing_sum_n(&family, &CubeId::ROOT), 4.0);
        assert_eq!(d.carleson_packing_norm(&[CubeId::new(2, 1)]), 1.0);
        assert_eq!(d.carleson_packing_norm(&[]), 0.0);
    }
}
