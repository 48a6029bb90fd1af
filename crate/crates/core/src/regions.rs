//! Whitney collections, Carleson boxes, tents, cones and first-wins ownership.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::{CubeId, DyadicSystem};
use crate::geometry::{face_ball_measure, Aabb, Point, Scope};
use crate::whitney::{Face, Incident, WhitneyDecomposition};
use crate::{Error, Real, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionParams {
    pub eta: f64,
    pub k: f64,
}

impl Default for RegionParams {
    fn default() -> Self {
        RegionParams { eta: 2f64.powi(-8), k: 64.0 }
    }
}

impl RegionParams {
    pub fn new(eta: f64, k: f64) -> Result<Self> {
        let p = RegionParams { eta, k };
        if !(eta > 0.0 && eta.powf(0.25) < 1.0 && k.sqrt() > 1.0) {
            return Err(Error::InvalidParameter(format!("need eta^(1/4) < 1 < K^(1/2), got eta={eta}, K={k}")));
        }
        Ok(p)
    }

    /// `eta^(1/4)`.
    pub fn lower(&self) -> f64 {
        self.eta.powf(0.25)
    }

    /// `K^(1/2)`.
    pub fn upper(&self) -> f64 {
        self.k.sqrt()
    }
}

/// Cube system, Whitney decomposition and parameters bundled for region queries.
#[derive(Clone, Copy)]
pub struct Regions<'a, T: Real> {
    pub system: &'a DyadicSystem<T>,
    pub whitney: &'a WhitneyDecomposition<T>,
    pub params: RegionParams,
    lo: T,
    hi: T,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TentAssembly {
    /// `Q0` first, then any peers for the extended construction.
    pub roots: Vec<CubeId>,
    /// Owner of each Whitney cube, by cube index.
    pub owners: Vec<Option<CubeId>>,
    pub order: String,
    pub branching: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ConeSample<T: Real> {
    pub x: Point<T>,
    pub leaf: CubeId,
    /// `(generation, cube, representative, delta(representative))`.
    pub members: Vec<(u32, usize, Point<T>, T)>,
    /// `max |Y - x| / delta(Y)` over members.
    pub aperture: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConeContainment {
    pub aperture: f64,
    pub radius: f64,
    pub tested: usize,
    pub contained: usize,
    pub skipped_unresolved: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TentBoundary<T: Real> {
    pub faces: Vec<Face<T>>,
    /// `H^n(∂t_Q ∩ Ω)` over faces between resolved cubes.
    pub area: T,
    /// Area of faces of the tent against unresolved cells or the domain boundary.
    pub truncated_area: T,
}

impl TentAssembly {
    pub fn owner(&self, cube: usize) -> Option<CubeId> {
        self.owners[cube]
    }

    pub fn root(&self) -> CubeId {
        self.roots[0]
    }

    fn covers(&self, q: &CubeId) -> bool {
        self.roots.iter().any(|r| r.contains(self.branching, q))
    }

    /// `t_Q = {I : owner(I) ⊆ Q}` (or `t*_Q` for an extended assembly).
    pub fn tent(&self, q: &CubeId) -> Result<Vec<usize>> {
        if !self.covers(q) {
            return Err(Error::NotContained { cube: q.label(self.branching), root: self.roots[0].label(self.branching) });
        }
        Ok(self.tent_mask(q).iter().enumerate().filter(|(_, m)| **m).map(|(i, _)| i).collect())
    }

    pub fn tent_mask(&self, q: &CubeId) -> Vec<bool> {
        self.owners.iter().map(|o| o.is_some_and(|o| q.contains(self.branching, &o))).collect()
    }

    /// Owned set of `Q` (its restricted region).
    pub fn restricted_region(&self, q: &CubeId) -> Vec<usize> {
        self.owners.iter().enumerate().filter(|(_, o)| **o == Some(*q)).map(|(i, _)| i).collect()
    }

    pub fn owned_count(&self) -> usize {
        self.owners.iter().filter(|o| o.is_some()).count()
    }
}

impl<'a, T: Real> Regions<'a, T> {
    pub fn new(system: &'a DyadicSystem<T>, whitney: &'a WhitneyDecomposition<T>, params: RegionParams) -> Self {
        Regions { system, whitney, params, lo: T::lit(params.lower()), hi: T::lit(params.upper()) }
    }

    fn b(&self) -> usize {
        self.system.branching()
    }

    /// `K^(1/2) l_k`.
    pub fn reach(&self, gen: u32) -> T {
        self.hi * self.system.set.side(gen)
    }

    pub fn cube_box(&self, i: usize) -> Aabb<T> {
        self.whitney.cubes[i].cell.closure()
    }

    /// Generations `k` with `eta^(1/4) l_k <= l(I) <= K^(1/2) l_k`, clipped to the system.
    pub fn generation_range(&self, side: T) -> Option<(u32, u32)> {
        let mut lo = None;
        let mut hi = None;
        for k in 0..=self.system.depth {
            let l = self.system.set.side(k);
            if self.lo * l <= side && side <= self.hi * l {
                lo.get_or_insert(k);
                hi = Some(k);
            }
        }
        Some((lo?, hi?))
    }

    fn scale_ok(&self, i: usize, q: &CubeId) -> bool {
        let side = self.whitney.cubes[i].side();
        let l = self.system.side(q);
        self.lo * l <= side && side <= self.hi * l
    }

    /// `I ∈ W_Q`.
    pub fn in_collection(&self, i: usize, q: &CubeId) -> bool {
        self.scale_ok(i, q) && self.system.set.within(&self.cube_box(i), Scope::within(*q), self.reach(q.gen))
    }

    /// `W_Q`, by pruned descent of the Whitney tree.
    pub fn select_whitney_collection(&self, q: &CubeId) -> Result<Vec<usize>> {
        self.system.check(q)?;
        let reach = self.reach(q.gen);
        if reach < self.whitney.min_side() {
            return Err(Error::MisCalibrated(format!(
                "K^(1/2) l(Q) below the finest Whitney side for {}",
                self.system.label(q)
            )));
        }
        let out = self.collection_unchecked(q);
        if out.is_empty() {
            return Err(Error::MisCalibrated(format!("empty Whitney collection for {}", self.system.label(q))));
        }
        Ok(out)
    }

    fn collection_unchecked(&self, q: &CubeId) -> Vec<usize> {
        let set = &self.system.set;
        let qbox = set.bbox(&set.cell(*q));
        let reach = self.reach(q.gen);
        let min_side = self.lo * self.system.side(q);
        let mut out = Vec::new();
        self.whitney.descend(
            |level, bx| bx.dist_box(&qbox) <= reach && self.whitney.side_at(level) >= min_side,
            |i| {
                if self.in_collection(i, q) {
                    out.push(i);
                }
            },
        );
        out.sort_unstable();
        out
    }

    /// `W_Q` is non-empty; stops at the first member.
    pub fn has_collection(&self, q: &CubeId) -> bool {
        let set = &self.system.set;
        let qbox = set.bbox(&set.cell(*q));
        let reach = self.reach(q.gen);
        let min_side = self.lo * self.system.side(q);
        let found = std::cell::Cell::new(false);
        self.whitney.descend(
            |level, bx| !found.get() && bx.dist_box(&qbox) <= reach && self.whitney.side_at(level) >= min_side,
            |i| found.set(found.get() || self.in_collection(i, q)),
        );
        found.get()
    }

    /// Whether the Whitney scales cover `[eta^(1/4) l(Q), K^(1/2) l(Q)]`.
    pub fn scales_resolved(&self, q: &CubeId) -> bool {
        let l = self.system.side(q);
        self.whitney.min_side() <= self.lo * l && self.whitney.max_side() >= self.hi * l
    }

    /// `I ∈ T_Q`: some `Q' ⊆ Q` has `I ∈ W_Q'`. Since `dist(I, Q)` is the minimum over
    /// the generation-`k` descendants and the reach shrinks with `k`, the coarsest
    /// admissible generation decides.
    pub fn in_box(&self, i: usize, q: &CubeId) -> bool {
        let Some((kmin, kmax)) = self.generation_range(self.whitney.cubes[i].side()) else {
            return false;
        };
        let k = kmin.max(q.gen);
        k <= kmax && self.system.set.within(&self.cube_box(i), Scope::within(*q), self.reach(k))
    }

    /// `I ∈ U_Q'` for some `Q'` outside `D_Q`.
    pub fn in_outside_region(&self, i: usize, q: &CubeId) -> bool {
        let Some((kmin, kmax)) = self.generation_range(self.whitney.cubes[i].side()) else {
            return false;
        };
        let bx = self.cube_box(i);
        let set = &self.system.set;
        if kmin < q.gen && set.within(&bx, Scope::all(), self.reach(kmin)) {
            return true;
        }
        let k = kmin.max(q.gen);
        !q.is_root() && k <= kmax && set.within(&bx, Scope::excluding(*q), self.reach(k))
    }

    /// Candidate cubes that can belong to `T_Q`.
    fn box_candidates(&self, q: &CubeId) -> Vec<usize> {
        let set = &self.system.set;
        let qbox = set.bbox(&set.cell(*q));
        let reach = self.reach(q.gen);
        let min_side = self.lo * self.system.set.side(self.system.depth);
        let mut out = Vec::new();
        self.whitney.descend(|level, bx| bx.dist_box(&qbox) <= reach && self.whitney.side_at(level) >= min_side, |i| out.push(i));
        out.sort_unstable();
        out
    }

    /// `T_Q`.
    pub fn carleson_box(&self, q: &CubeId) -> Vec<usize> {
        self.box_candidates(q).into_iter().filter(|&i| self.in_box(i, q)).collect()
    }

    /// `T_Q` as the literal deduplicated union of `W_Q'` over `Q' ⊆ Q`.
    pub fn carleson_box_by_union(&self, q: &CubeId) -> Vec<usize> {
        let b = self.b();
        let mut all = Vec::new();
        let mut stack = vec![*q];
        while let Some(c) = stack.pop() {
            all.extend(self.collection_unchecked(&c));
            if c.gen < self.system.depth {
                stack.extend(c.children(b));
            }
        }
        all.sort_unstable();
        all.dedup();
        all
    }

    /// `τ_Q = T_Q \ ⋃_{Q' ∉ D_Q} U_Q'` on the resolved shell.
    pub fn restricted_tent(&self, q: &CubeId) -> Vec<usize> {
        self.carleson_box(q).into_iter().filter(|&i| !self.in_outside_region(i, q)).collect()
    }

    /// First `Q ⊆ root` (by generation, then index) whose `W_Q` contains cube `i`.
    pub fn first_owner(&self, i: usize, root: &CubeId) -> Option<CubeId> {
        let (kmin, kmax) = self.generation_range(self.whitney.cubes[i].side())?;
        let k = kmin.max(root.gen);
        if k > kmax {
            return None;
        }
        let set = &self.system.set;
        let bx = self.cube_box(i);
        let reach = self.reach(k);
        if !set.within(&bx, Scope::within(*root), reach) {
            return None;
        }
        let b = self.b();
        let mut stack = vec![set.cell(*root)];
        let mut kids = Vec::with_capacity(b);
        while let Some(cell) = stack.pop() {
            if set.bbox(&cell).dist_box(&bx) > reach {
                continue;
            }
            if cell.id.gen == k {
                if set.within(&bx, Scope::within(cell.id), reach) {
                    return Some(cell.id);
                }
                continue;
            }
            kids.clear();
            kids.extend((0..b).map(|c| set.child_cell(&cell, c)));
            stack.extend(kids.drain(..).rev());
        }
        None
    }

    /// First-wins ownership over `D_Q0`.
    pub fn assign_restricted_owners(&self, root: &CubeId) -> Result<TentAssembly> {
        self.extended_tents(root, &[])
    }

    /// Ownership over `D_Q0 ∪ D_P1 ∪ ...`: a cube goes to the first root, in order,
    /// whose own first-wins ownership claims it, giving `t*_Q'`.
    pub fn extended_tents(&self, root: &CubeId, peers: &[CubeId]) -> Result<TentAssembly> {
        self.system.check(root)?;
        let mut roots = vec![*root];
        for p in peers {
            self.system.check(p)?;
            if p.gen != root.gen || p == root {
                return Err(Error::InvalidParameter(format!("{} is not a peer of the root", self.system.label(p))));
            }
            roots.push(*p);
        }
        let owners: Vec<Option<CubeId>> = (0..self.whitney.len())
            .into_par_iter()
            .map(|i| roots.iter().find_map(|r| self.first_owner(i, r)))
            .collect();
        Ok(TentAssembly {
            roots,
            owners,
            order: "breadth-first by generation, lexicographic child order".into(),
            branching: self.b(),
        })
    }

    /// Same-generation cubes within `radius_factor * l(Q0)` of `Q0`, by index.
    pub fn peers(&self, root: &CubeId, radius_factor: f64) -> Vec<CubeId> {
        let set = &self.system.set;
        let r = T::lit(radius_factor) * self.system.side(root);
        let qbox = set.bbox(&set.cell(*root));
        self.system
            .generation(root.gen)
            .filter(|p| p != root)
            .filter(|p| set.bbox(&set.cell(*p)).dist_box(&qbox) <= r)
            .collect()
    }

    /// Cubes of `U_{Q^(k)(x)}` for generations in `gens`, with cube centres as representatives.
    pub fn cone(&self, leaf: &CubeId, gens: std::ops::RangeInclusive<u32>) -> ConeSample<T> {
        let b = self.b();
        let x = self.system.leaf_point(leaf);
        let mut members = Vec::new();
        let mut aperture = 0.0f64;
        for k in gens {
            let Some(q) = leaf.ancestor(b, k) else { continue };
            for i in self.collection_unchecked(&q) {
                let y = self.whitney.cubes[i].cell.center();
                let d = self.system.set.distance(&y);
                aperture = aperture.max((y.dist(&x) / d).as_f64());
                members.push((k, i, y, d));
            }
        }
        ConeSample { x, leaf: *leaf, members, aperture }
    }

    /// Grid check that `{Y : |Y - x| < m delta(Y)} ∩ B(x, R)` lies in `Γ(x)`.
    pub fn cone_containment(&self, leaf: &CubeId, aperture: f64, radius: f64, grid: usize) -> ConeContainment {
        let b = self.b();
        let x = self.system.leaf_point(leaf);
        let set = &self.system.set;
        let dim = set.ambient_dim;
        let mut report = ConeContainment { aperture, radius, tested: 0, contained: 0, skipped_unresolved: 0 };
        let m = T::lit(aperture);
        let r = T::lit(radius);
        let steps = |i: usize| T::lit(-radius + 2.0 * radius * (i as f64 + 0.5) / grid as f64);
        let nz = if dim == 3 { grid } else { 1 };
        for a in 0..grid {
            for c in 0..grid {
                for z in 0..nz {
                    let mut y = x;
                    y.0[0] += steps(a);
                    y.0[1] += steps(c);
                    if dim == 3 {
                        y.0[2] += steps(z);
                    }
                    if y.dist(&x) >= r {
                        continue;
                    }
                    let d = set.distance(&y);
                    if !(y.dist(&x) < m * d) {
                        continue;
                    }
                    let Ok(i) = self.whitney.locate(&y) else {
                        report.skipped_unresolved += 1;
                        continue;
                    };
                    let side = self.whitney.cubes[i].side();
                    if side < self.lo * set.side(self.system.depth) {
                        // finer than the deepest generation can see
                        report.skipped_unresolved += 1;
                        continue;
                    }
                    report.tested += 1;
                    let Some((kmin, kmax)) = self.generation_range(side) else {
                        continue;
                    };
                    let bx = self.cube_box(i);
                    let hit = (kmin..=kmax).any(|k| {
                        leaf.ancestor(b, k).is_some_and(|q| set.within(&bx, Scope::within(q), self.reach(k)))
                    });
                    if hit {
                        report.contained += 1;
                    }
                }
            }
        }
        report
    }

    /// Faces of `∂t_Q ∩ Ω` (one side in the tent, the other a resolved cube outside it).
    pub fn tent_boundary_faces(&self, assembly: &TentAssembly, faces: &[Face<T>], q: &CubeId) -> Result<TentBoundary<T>> {
        let mask = assembly.tent_mask(q);
        if !assembly.covers(q) {
            return Err(Error::NotContained { cube: self.system.label(q), root: self.system.label(&assembly.root()) });
        }
        Ok(boundary_of_mask(&mask, faces, self.whitney.dim))
    }

    /// Lemma-type sum `Σ_{Q' ⊆ Q, dist(Q', E\Q) <= κ l(Q')} Σ_{I ∈ W_Q'} H^n(∂I) / l(Q)^n`.
    pub fn boundary_collection_sum(&self, q: &CubeId, kappa: f64) -> T {
        if q.is_root() {
            return T::zero();
        }
        let set = &self.system.set;
        let b = self.b();
        let dim = self.whitney.dim;
        let n = dim as i32 - 1;
        let mut total = T::zero();
        let mut stack = vec![set.cell(*q)];
        while let Some(cell) = stack.pop() {
            let kl = T::lit(kappa) * self.system.set.side(cell.id.gen);
            if !set.within(&set.bbox(&cell), Scope::excluding(*q), kl) {
                continue;
            }
            if set.within_cell_excluding(&cell, q, kl) {
                for i in self.collection_unchecked(&cell.id) {
                    total += T::lit(2.0 * dim as f64) * self.whitney.cubes[i].side().powi(n);
                }
            }
            if cell.id.gen < self.system.depth {
                for c in 0..b {
                    stack.push(set.child_cell(&cell, c));
                }
            }
        }
        total / self.system.side(q).powi(n)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Calibration {
    pub params: RegionParams,
    /// `(eta^(1/4), K^(1/2))` exponents of 2 tried, with the verdict.
    pub tried: Vec<(i32, i32, bool)>,
    pub aperture: f64,
}

/// Smallest power-of-two window `[2^-a, 2^b]` (by `a + b`, then `a`) with every
/// resolved `W_Q` non-empty and `Γ(x)` containing the aperture-`m` cone near sampled
/// leaves. Ties go to the larger lower end, which needs the shallower resolution.
pub fn calibrate<T: Real>(
    system: &DyadicSystem<T>,
    whitney: &WhitneyDecomposition<T>,
    aperture: f64,
    leaves: &[CubeId],
    grid: usize,
) -> Result<Calibration> {
    let mut tried = Vec::new();
    for total in 2..=14 {
        for a in 1..total {
            let b = total - a;
            if a > 8 || b > 6 {
                continue;
            }
            let params = RegionParams::new(2f64.powi(-4 * a), 4f64.powi(b))?;
            let r = Regions::new(system, whitney, params);
            let ok = r.collections_nonempty() && r.cones_contain(leaves, aperture, grid);
            tried.push((a, b, ok));
            if ok {
                return Ok(Calibration { params, tried, aperture });
            }
        }
    }
    Err(Error::MisCalibrated("no window up to [2^-8, 2^6] passes".into()))
}

impl<'a, T: Real> Regions<'a, T> {
    /// Every cube whose scales are resolved has a non-empty `W_Q`.
    pub fn collections_nonempty(&self) -> bool {
        (0..=self.system.depth).all(|k| {
            self.system.generation(k).all(|q| !self.scales_resolved(&q) || self.has_collection(&q))
        })
    }

    /// Aperture-`m` cones at `R = diam(E)` lie in `Γ(x)` for the given leaves.
    pub fn cones_contain(&self, leaves: &[CubeId], aperture: f64, grid: usize) -> bool {
        let r = self.system.set.diam.as_f64();
        leaves.iter().all(|l| {
            let c = self.cone_containment(l, aperture, r, grid);
            c.contained == c.tested
        })
    }
}

/// Boundary faces of a cube set given as a membership mask.
pub fn boundary_of_mask<T: Real>(mask: &[bool], faces: &[Face<T>], dim: usize) -> TentBoundary<T> {
    let mut out = Vec::new();
    let mut area = T::zero();
    let mut truncated = T::zero();
    let inside = |x: Incident| x.cube().is_some_and(|i| mask[i]);
    for f in faces {
        let (a, b) = (inside(f.low), inside(f.high));
        if a == b {
            continue;
        }
        if f.is_interior() {
            area += f.area(dim);
            out.push(*f);
        } else {
            truncated += f.area(dim);
        }
    }
    TentBoundary { faces: out, area, truncated_area: truncated }
}

impl<T: Real> TentBoundary<T> {
    /// `H^n(∂t ∩ B(X, R))`.
    pub fn area_in_ball(&self, dim: usize, x: &Point<T>, r: T) -> T {
        self.faces
            .iter()
            .filter(|f| f.rect(dim).dist_point(x) <= r)
            .map(|f| face_ball_measure(&f.rect(dim), f.axis as usize, dim, x, r))
            .sum()
    }
}

impl<T: Real> crate::geometry::BoundarySet<T> {
    /// `dist(cell, E \ Q) <= r` with the cell's exact piece (a union of leaves).
    pub fn within_cell_excluding(&self, cell: &crate::geometry::Cell<T>, q: &CubeId, r: T) -> bool {
        let b = self.branching;
        let mut stack = vec![*cell];
        while let Some(c) = stack.pop() {
            let bb = self.bbox(&c);
            if !self.within(&bb, Scope::excluding(*q), r) {
                continue;
            }
            if self.is_exact(&c) {
                if self.within(&self.shape(&c), Scope::excluding(*q), r) {
                    return true;
                }
                continue;
            }
            if c.id.gen < self.depth {
                for k in 0..b {
                    stack.push(self.child_cell(&c, k));
                }
            }
        }
        false
    }
}
