//! Carleson norms of jump measures, tent-boundary ADR ratios and non-tangential
//! convergence audits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::bmo::BoundaryFunction;
use crate::dyadic::{CubeId, DyadicSystem};
use crate::extension::{ExtensionField, JumpMeasure};
use crate::geometry::{face_ball_measure, Aabb, Point, Scope};
use crate::regions::{boundary_of_mask, Regions, TentAssembly};
use crate::whitney::{Face, Incident};
use crate::{Coefficient, Error, Real, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CarlesonTest {
    pub label: String,
    pub mass: f64,
    pub scale: f64,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CarlesonReport {
    pub family: String,
    /// Number of tests in the family; `tests` may omit those with zero mass.
    pub family_size: u64,
    pub tests: Vec<CarlesonTest>,
    /// Estimated `C_mu`.
    pub max: f64,
    pub argmax: String,
    /// `C_mu / (C0 ||f||_BMO)`, zero for vanishing data.
    pub normalized: f64,
    /// `C_mu` with faces against the unresolved shell counted, minus `C_mu`.
    pub truncation_delta: f64,
}

/// Uniform grid over the domain holding face indices, for ball queries.
pub struct FaceIndex {
    dim: usize,
    lower: [f64; 3],
    cell: f64,
    n: usize,
    buckets: Vec<Vec<u32>>,
}

impl FaceIndex {
    pub fn new<T: Real>(faces: &[Face<T>], dim: usize, domain: &Aabb<T>, per_axis: usize) -> Self {
        let n = per_axis.max(1);
        let lower = domain.lo.map(|v| v.as_f64());
        let cell = (0..dim).map(|a| (domain.hi[a] - domain.lo[a]).as_f64()).fold(0.0, f64::max) / n as f64;
        let mut idx = FaceIndex { dim, lower, cell, n, buckets: vec![Vec::new(); n.pow(dim as u32)] };
        for (i, f) in faces.iter().enumerate() {
            let r = f.rect(dim);
            let (lo, hi) = idx.range(&r.lo.map(|v| v.as_f64()), &r.hi.map(|v| v.as_f64()));
            idx.each_bucket(&lo, &hi, |b, buckets| buckets[b].push(i as u32));
        }
        idx
    }

    fn range(&self, lo: &[f64; 3], hi: &[f64; 3]) -> ([usize; 3], [usize; 3]) {
        let mut a = [0usize; 3];
        let mut b = [0usize; 3];
        for k in 0..self.dim {
            let c = |x: f64| (((x - self.lower[k]) / self.cell).floor().max(0.0) as usize).min(self.n - 1);
            a[k] = c(lo[k]);
            b[k] = c(hi[k]);
        }
        (a, b)
    }

    fn each_bucket(&mut self, lo: &[usize; 3], hi: &[usize; 3], mut f: impl FnMut(usize, &mut Vec<Vec<u32>>)) {
        let n = self.n;
        let zr = if self.dim == 3 { lo[2]..=hi[2] } else { 0..=0 };
        for z in zr {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    f((z * n + y) * n + x, &mut self.buckets);
                }
            }
        }
    }

    /// Faces whose buckets meet the box; may repeat.
    pub fn candidates(&self, lo: &[f64; 3], hi: &[f64; 3], out: &mut Vec<u32>) {
        let (a, b) = self.range(lo, hi);
        let n = self.n;
        let zr = if self.dim == 3 { a[2]..=b[2] } else { 0..=0 };
        for z in zr {
            for y in a[1]..=b[1] {
                for x in a[0]..=b[0] {
                    out.extend_from_slice(&self.buckets[(z * n + y) * n + x]);
                }
            }
        }
    }
}

impl<T: Real> JumpMeasure<T> {
    /// `mu(B(x, r))` through a face index built on the same faces.
    pub fn mass_in_ball(&self, index: &FaceIndex, x: &Point<T>, r: T) -> T {
        let dim = self.dim;
        let xf = x.0.map(|v| v.as_f64());
        let rf = r.as_f64();
        let lo = [0, 1, 2].map(|k| xf[k] - rf);
        let hi = [0, 1, 2].map(|k| xf[k] + rf);
        let mut cand = Vec::new();
        index.candidates(&lo, &hi, &mut cand);
        cand.sort_unstable();
        cand.dedup();
        let mut total = T::zero();
        for i in cand {
            let f = &self.faces[i as usize];
            let rect = f.rect(dim);
            if rect.dist_point(x) >= r {
                continue;
            }
            total += self.jumps[i as usize] * face_ball_measure(&rect, f.axis as usize, dim, x, r);
        }
        total
    }
}

/// Box sets `{Q : I ∈ T_Q}` of Whitney cubes, cached per cube.
///
/// The set is closed under taking parents: it is every `Q` with `gen(Q) <= kmax(I)`
/// and `dist(I, Q) <= R_k`, `k = max(gen(Q), kmin(I))`, so a pruned descent finds it.
pub struct BoxMembership<'r, 'a, T: Real> {
    regions: &'r Regions<'a, T>,
    cache: FxHashMap<u32, Vec<CubeId>>,
    cached: usize,
    /// Cached ids kept before the cache is flushed.
    pub capacity: usize,
}

impl<'r, 'a, T: Real> BoxMembership<'r, 'a, T> {
    pub fn new(regions: &'r Regions<'a, T>) -> Self {
        BoxMembership { regions, cache: FxHashMap::default(), cached: 0, capacity: 1 << 25 }
    }

    /// Drops cached sets, e.g. between measures.
    pub fn clear(&mut self) {
        self.cache = FxHashMap::default();
        self.cached = 0;
    }

    /// Sorted `{Q : I ∈ T_Q}`.
    pub fn boxes_of(&mut self, i: usize) -> &[CubeId] {
        if !self.cache.contains_key(&(i as u32)) {
            let set = box_set(self.regions, i);
            if self.cached + set.len() > self.capacity {
                self.clear();
            }
            self.cached += set.len();
            self.cache.insert(i as u32, set);
        }
        &self.cache[&(i as u32)]
    }

    /// Every `Q'` with `I ∈ W_Q'`.
    pub fn collections_of(&self, i: usize) -> Vec<CubeId> {
        let r = self.regions;
        let Some((kmin, kmax)) = r.generation_range(r.whitney.cubes[i].side()) else {
            return Vec::new();
        };
        box_set(r, i).into_iter().filter(|q| q.gen >= kmin && q.gen <= kmax).collect()
    }
}

fn box_set<T: Real>(r: &Regions<'_, T>, i: usize) -> Vec<CubeId> {
    let set = &r.system.set;
    let b = set.branching;
    let Some((kmin, kmax)) = r.generation_range(r.whitney.cubes[i].side()) else {
        return Vec::new();
    };
    let bx = r.cube_box(i);
    let mut out = Vec::new();
    let mut stack = vec![set.root_cell()];
    while let Some(cell) = stack.pop() {
        let k = cell.id.gen;
        let reach = r.reach(k.max(kmin));
        if set.bbox(&cell).dist_box(&bx) > reach || !set.within(&bx, Scope::within(cell.id), reach) {
            continue;
        }
        out.push(cell.id);
        if k < kmax && k < r.system.depth {
            stack.extend((0..b).map(|c| set.child_cell(&cell, c)));
        }
    }
    out.sort_unstable();
    out
}

fn intersect_sorted(a: &[CubeId], b: &[CubeId], out: &mut Vec<CubeId>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
        }
    }
}

fn normalization(c0: f64, norm: f64) -> f64 {
    c0.max(1.0) * norm
}

/// `max_Q mu(int T_Q) / l(Q)^n` over `Q ⊆ root` of generation at most `depth - margin`.
///
/// A face lies in the open box when both incident cubes are in `T_Q`; a face against
/// the unresolved shell counts when its cube is.
pub fn carleson_boxes<T: Real>(
    membership: &mut BoxMembership<'_, '_, T>,
    jumps: &JumpMeasure<T>,
    root: &CubeId,
    margin: u32,
    c0: f64,
    norm: f64,
) -> Result<CarlesonReport> {
    let system = membership.regions.system;
    let b = system.branching();
    let n = system.set.codim_one() as i32;
    let max_gen = system.depth.saturating_sub(margin);
    let mut mass: FxHashMap<CubeId, (f64, f64)> = FxHashMap::default();
    let (mut common, mut ba) = (Vec::new(), Vec::new());
    for (f, w) in jumps.faces.iter().zip(&jumps.weights) {
        let w = w.as_f64();
        let truncated = f.touches_unresolved();
        match (f.low, f.high) {
            (Incident::Cube(a), Incident::Cube(c)) => {
                ba.clear();
                ba.extend_from_slice(membership.boxes_of(a as usize));
                intersect_sorted(&ba, membership.boxes_of(c as usize), &mut common);
            }
            (Incident::Cube(a), Incident::Unresolved) | (Incident::Unresolved, Incident::Cube(a)) => {
                common.clear();
                common.extend_from_slice(membership.boxes_of(a as usize));
            }
            _ => continue,
        }
        for q in &common {
            let e = mass.entry(*q).or_insert((0.0, 0.0));
            if truncated {
                e.1 += w;
            } else {
                e.0 += w;
            }
        }
    }
    // boxes without mass score zero; only the others are listed
    let mut hit: Vec<(CubeId, f64, f64)> = mass
        .into_iter()
        .filter(|(q, _)| q.gen <= max_gen && root.contains(b, q))
        .map(|(q, (m, t))| (q, m, t))
        .collect();
    hit.sort_unstable_by_key(|h| h.0);
    let family_size: u64 = (root.gen..=max_gen.max(root.gen)).map(|k| (b as u64).pow(k - root.gen)).sum();
    let mut best = (0.0f64, *root);
    let mut best_trunc = 0.0f64;
    let mut tests = Vec::with_capacity(hit.len());
    for (q, m, t) in hit {
        let scale = system.side(&q).as_f64().powi(n);
        let value = m / scale;
        if value > best.0 {
            best = (value, q);
        }
        best_trunc = best_trunc.max((m + t) / scale);
        tests.push(CarlesonTest { label: system.label(&q), mass: m, scale, value });
    }
    let norm_c = normalization(c0, norm);
    Ok(CarlesonReport {
        family: "dyadic-boxes".into(),
        family_size,
        tests,
        max: best.0,
        argmax: system.label(&best.1),
        normalized: if norm_c > 0.0 { best.0 / norm_c } else { 0.0 },
        truncation_delta: best_trunc - best.0,
    })
}

/// `max mu(B(x, r)) / r^n` over `count` balls, `x` a sigma-random leaf point of `root`
/// and `r` log-uniform in `[r_min, r_max]`.
#[allow(clippy::too_many_arguments)]
pub fn carleson_balls<T: Real>(
    system: &DyadicSystem<T>,
    jumps: &JumpMeasure<T>,
    truncation: Option<&JumpMeasure<T>>,
    domain: &Aabb<T>,
    root: &CubeId,
    count: usize,
    radii: (f64, f64),
    seed: u64,
    c0: f64,
    norm: f64,
) -> Result<CarlesonReport> {
    if count == 0 {
        return Err(Error::EmptyFamily);
    }
    let dim = jumps.dim;
    let n = (dim - 1) as i32;
    let per_axis = if dim == 2 { 128 } else { 32 };
    let index = FaceIndex::new(&jumps.faces, dim, domain, per_axis);
    let t_index = truncation.map(|t| FaceIndex::new(&t.faces, dim, domain, per_axis));
    let leaves = system.leaf_range(root);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tests = Vec::with_capacity(count);
    let mut best = (0.0f64, String::new());
    let mut best_t = 0.0f64;
    for _ in 0..count {
        let leaf = CubeId::new(system.depth, rng.random_range(leaves.clone()));
        let x = system.leaf_point(&leaf);
        let r = radii.0 * (radii.1 / radii.0).powf(rng.random::<f64>());
        let m = jumps.mass_in_ball(&index, &x, T::lit(r)).as_f64();
        let scale = r.powi(n);
        let label = format!("{} r={r:.6e}", system.label(&leaf));
        if m / scale > best.0 || best.1.is_empty() {
            best = (m / scale, label.clone());
        }
        if let (Some(t), Some(ti)) = (truncation, &t_index) {
            best_t = best_t.max(t.mass_in_ball(ti, &x, T::lit(r)).as_f64() / scale);
        }
        tests.push(CarlesonTest { label, mass: m, scale, value: m / scale });
    }
    let norm_c = normalization(c0, norm);
    Ok(CarlesonReport {
        family: "balls".into(),
        family_size: count as u64,
        tests,
        max: best.0,
        argmax: best.1,
        normalized: if norm_c > 0.0 { best.0 / norm_c } else { 0.0 },
        truncation_delta: if truncation.is_some() { best_t - best.0 } else { 0.0 },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdrRegime {
    /// `R >= l(Q)`: comparable to the tent's size.
    Large,
    /// `R <= delta(X) / 2`: inside a few Whitney cubes.
    Small,
    Middle,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdrSample {
    pub cube: String,
    pub x: [f64; 3],
    pub r: f64,
    pub delta: f64,
    pub ratio: f64,
    pub regime: AdrRegime,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TentAdrReport {
    pub samples: Vec<AdrSample>,
    pub max_ratio: f64,
    pub max_large: f64,
    pub max_small: f64,
    pub max_middle: f64,
    /// `max_Q H^n(∂t_Q ∩ Ω) / l(Q)^n` over the sampled cubes.
    pub max_total_area: f64,
}

/// `H^n(∂t_Q ∩ Ω ∩ B(X, R)) / R^n` for `per_cube` pairs `(X, R)` on each cube.
pub fn tent_adr_audit<T: Real>(
    regions: &Regions<'_, T>,
    assembly: &TentAssembly,
    faces: &[Face<T>],
    cubes: &[CubeId],
    per_cube: usize,
    seed: u64,
) -> Result<TentAdrReport> {
    let system = regions.system;
    let dim = regions.whitney.dim;
    let n = (dim - 1) as i32;
    let diam = system.set.diam;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = TentAdrReport { samples: Vec::new(), max_ratio: 0.0, max_large: 0.0, max_small: 0.0, max_middle: 0.0, max_total_area: 0.0 };
    for q in cubes {
        let mask = assembly.tent_mask(q);
        let boundary = boundary_of_mask(&mask, faces, dim);
        let l = system.side(q);
        report.max_total_area = report.max_total_area.max((boundary.area / l.powi(n)).as_f64());
        if boundary.faces.is_empty() {
            continue;
        }
        let index = FaceIndex::new(&boundary.faces, dim, &regions.whitney.root.closure(), if dim == 2 { 64 } else { 16 });
        let local = JumpMeasure {
            dim,
            faces: boundary.faces.clone(),
            jumps: vec![T::one(); boundary.faces.len()],
            weights: boundary.faces.iter().map(|f| f.area(dim)).collect(),
            total: boundary.area,
            counts_truncation: false,
        };
        for _ in 0..per_cube {
            let f = &boundary.faces[rng.random_range(0..boundary.faces.len())];
            let x = f.center(dim);
            let delta = system.set.distance(&x);
            let lo = (f.side / T::lit(8.0)).as_f64();
            let hi = (T::lit(2.0) * diam).as_f64();
            let r = lo * (hi / lo).powf(rng.random::<f64>());
            let area = local.mass_in_ball(&index, &x, T::lit(r)).as_f64();
            let ratio = area / r.powi(n);
            let regime = if r >= l.as_f64() {
                AdrRegime::Large
            } else if r <= delta.as_f64() / 2.0 {
                AdrRegime::Small
            } else {
                AdrRegime::Middle
            };
            match regime {
                AdrRegime::Large => report.max_large = report.max_large.max(ratio),
                AdrRegime::Small => report.max_small = report.max_small.max(ratio),
                AdrRegime::Middle => report.max_middle = report.max_middle.max(ratio),
            }
            report.max_ratio = report.max_ratio.max(ratio);
            report.samples.push(AdrSample {
                cube: system.label(q),
                x: x.0.map(|v| v.as_f64()),
                r,
                delta: delta.as_f64(),
                ratio,
                regime,
            });
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointTrace {
    pub leaf: String,
    pub target: f64,
    /// `(generation, delta(Y_k), |F(Y_k) - target|)`.
    pub sequence: Vec<(u32, f64, f64)>,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub tolerance: f64,
    pub floor: f64,
    pub points: Vec<PointTrace>,
    /// Points without a cone representative below `8 * floor`.
    pub excluded: usize,
    pub converged: usize,
    pub fraction: f64,
}

/// Representative of `U_Q` seen from `x`: the cube of `W_Q` nearest `x`.
pub fn cone_representative<T: Real>(regions: &Regions<'_, T>, q: &CubeId, x: &Point<T>) -> Option<(usize, Point<T>)> {
    let mut best: Option<(T, usize)> = None;
    for i in regions.select_whitney_collection(q).ok()? {
        let c = regions.whitney.cubes[i].cell.center();
        let d = c.dist(x);
        if best.is_none_or(|(bd, bi)| d < bd || (d == bd && i < bi)) {
            best = Some((d, i));
        }
    }
    best.map(|(_, i)| (i, regions.whitney.cubes[i].cell.center()))
}

/// Along `Y_k`, one representative of `U_{Q^(k)(x)}` per generation, checks
/// `|F0(Y_k) + offset - target(x)| <= tolerance` from the first `k` with
/// `delta(Y_k) <= 8 * floor` on.
pub fn nt_convergence_audit<T: Real, C: Coefficient>(
    regions: &Regions<'_, T>,
    field: &ExtensionField<T>,
    offset: f64,
    target: &BoundaryFunction<C>,
    leaves: &[CubeId],
    tolerance: f64,
) -> ConvergenceReport {
    let system = regions.system;
    let b = system.branching();
    let floor = regions.whitney.min_side().as_f64();
    let mut report = ConvergenceReport { tolerance, floor, points: Vec::new(), excluded: 0, converged: 0, fraction: 0.0 };
    for leaf in leaves {
        let x = system.leaf_point(leaf);
        let want = target.value(leaf).to_f64_lossy();
        let mut sequence = Vec::new();
        for k in field.root.gen..=system.depth {
            let Some(q) = leaf.ancestor(b, k) else { continue };
            if let Some((i, y)) = cone_representative(regions, &q, &x) {
                let v = field.cube_value(i).as_f64() + offset;
                sequence.push((k, system.set.distance(&y).as_f64(), (v - want).abs()));
            }
        }
        let start = sequence.iter().position(|s| s.1 <= 8.0 * floor);
        let Some(start) = start else {
            report.excluded += 1;
            report.points.push(PointTrace { leaf: system.label(leaf), target: want, sequence, converged: false });
            continue;
        };
        let converged = sequence[start..].iter().all(|s| s.2 <= tolerance);
        if converged {
            report.converged += 1;
        }
        report.points.push(PointTrace { leaf: system.label(leaf), target: want, sequence, converged });
    }
    let counted = leaves.len() - report.excluded;
    report.fraction = if counted > 0 { report.converged as f64 / counted as f64 } else { 0.0 };
    report
}

/// `n` sigma-random leaves of `root` (leaves carry equal measure).
pub fn random_leaves<T: Real>(system: &DyadicSystem<T>, root: &CubeId, n: usize, seed: u64) -> Vec<CubeId> {
    let r = system.leaf_range(root);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| CubeId::new(system.depth, rng.random_range(r.clone()))).collect()
}

/// Least-squares fit of `value = C * base^(-gamma * depth)` over positive values.
/// Returns `(C, gamma)`; `gamma = +inf` when every value is zero.
pub fn fit_power_decay(depths: &[u32], values: &[f64], base: f64) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = depths
        .iter()
        .zip(values)
        .filter(|(_, v)| **v > 0.0)
        .map(|(d, v)| (*d as f64, v.log(base)))
        .collect();
    if pts.is_empty() {
        return (0.0, f64::INFINITY);
    }
    if pts.len() == 1 {
        return (base.powf(pts[0].1), f64::NAN);
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let gamma = -slope;
    // smallest C covering every point
    let c = pts.iter().map(|p| base.powf(p.1 + gamma * p.0)).fold(0.0, f64::max);
    (c, gamma)
}

/// `max |v - v_last| / |v_last|`: spread of a depth sequence around its finest value.
pub fn depth_drift(values: &[f64]) -> f64 {
    let Some(last) = values.last().copied() else { return 0.0 };
    if last == 0.0 {
        return if values.iter().all(|v| *v == 0.0) { 0.0 } else { f64::INFINITY };
    }
    values.iter().map(|v| (v - last).abs() / last.abs()).fold(0.0, f64::max)
}
