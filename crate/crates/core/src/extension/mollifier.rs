//! Product-bump mollification of `F0` at radius `theta * delta(X)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ExtensionField, JumpMeasure};
use crate::dyadic::DyadicSystem;
use crate::geometry::{Aabb, Point};
use crate::whitney::WhitneyDecomposition;
use crate::{Error, Real, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MollifierSpec {
    /// Kernel radius factor, `0 < theta <= 1/2`.
    pub theta: f64,
    /// Intervals of the tabulated bump CDF.
    pub table: usize,
}

impl Default for MollifierSpec {
    fn default() -> Self {
        MollifierSpec { theta: 0.25, table: 2048 }
    }
}

/// `phi(t) = c exp(-1 / (1 - t^2))` on `(-1, 1)` with unit mass, and its CDF.
#[derive(Clone, Debug)]
pub struct Bump {
    step: f64,
    cdf: Vec<f64>,
    density: Vec<f64>,
}

impl Bump {
    pub fn new(intervals: usize) -> Self {
        let n = intervals.max(16);
        let step = 2.0 / n as f64;
        let raw = |t: f64| if t.abs() < 1.0 { (-1.0 / (1.0 - t * t)).exp() } else { 0.0 };
        // 5-point Gauss-Legendre per interval
        let nodes = [0.0, -0.538_469_310_105_683_1, 0.538_469_310_105_683_1, -0.906_179_845_938_664, 0.906_179_845_938_664];
        let weights = [0.568_888_888_888_888_9, 0.478_628_670_499_366_5, 0.478_628_670_499_366_5, 0.236_926_885_056_189_1, 0.236_926_885_056_189_1];
        let mut cdf = vec![0.0; n + 1];
        for i in 0..n {
            let a = -1.0 + i as f64 * step;
            let m = a + step / 2.0;
            let part: f64 = nodes.iter().zip(&weights).map(|(x, w)| w * raw(m + x * step / 2.0)).sum::<f64>() * step / 2.0;
            cdf[i + 1] = cdf[i] + part;
        }
        let mass = cdf[n];
        let cdf: Vec<f64> = cdf.iter().map(|v| v / mass).collect();
        let density = (0..=n).map(|i| raw(-1.0 + i as f64 * step) / mass).collect();
        Bump { step, cdf, density }
    }

    /// `Phi(t) = int_{-1}^t phi`, cubic Hermite between table nodes.
    pub fn cdf(&self, t: f64) -> f64 {
        if t <= -1.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return 1.0;
        }
        let u = (t + 1.0) / self.step;
        let i = (u.floor() as usize).min(self.cdf.len() - 2);
        let s = u - i as f64;
        let (p0, p1) = (self.cdf[i], self.cdf[i + 1]);
        let (m0, m1) = (self.density[i] * self.step, self.density[i + 1] * self.step);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * p0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * p1 + (s3 - s2) * m1
    }
}

/// `F = F0 * kernel`, evaluated exactly per Whitney cube.
#[derive(Clone)]
pub struct Mollified<'a, T: Real> {
    pub field: &'a ExtensionField<T>,
    pub whitney: &'a WhitneyDecomposition<T>,
    pub system: &'a DyadicSystem<T>,
    pub spec: MollifierSpec,
    bump: Bump,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TvCase {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub jump_mass: f64,
    pub mollified: Vec<f64>,
    pub extrapolated: f64,
    pub relative_error: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TvAudit {
    pub thetas: Vec<f64>,
    pub cases: Vec<TvCase>,
    pub max_relative_error: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GradientAudit {
    pub samples: usize,
    pub skipped: usize,
    /// `sup |grad F(X)| delta(X) / norm`.
    pub sup: f64,
    pub norm: f64,
}

impl<'a, T: Real> Mollified<'a, T> {
    pub fn new(field: &'a ExtensionField<T>, whitney: &'a WhitneyDecomposition<T>, system: &'a DyadicSystem<T>, spec: MollifierSpec) -> Result<Self> {
        if !(spec.theta > 0.0 && spec.theta <= 0.5) {
            return Err(Error::InvalidParameter(format!("theta = {} not in (0, 1/2]", spec.theta)));
        }
        Ok(Mollified { field, whitney, system, spec, bump: Bump::new(spec.table) })
    }

    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        Self::new(self.field, self.whitney, self.system, MollifierSpec { theta, ..self.spec })
    }

    /// Half side of the kernel cube, inscribed in `B(X, theta delta(X))`.
    fn half_side(&self, delta: T) -> T {
        T::lit(self.spec.theta) * delta / T::lit(self.whitney.dim as f64).sqrt()
    }

    fn kernel_box(&self, x: &Point<T>, s: T) -> Aabb<T> {
        let dim = self.whitney.dim;
        let mut lo = x.0;
        let mut hi = x.0;
        for k in 0..dim {
            lo[k] -= s;
            hi[k] += s;
        }
        Aabb::new(lo, hi)
    }

    /// `F(X)`.
    pub fn value(&self, x: &Point<T>) -> Result<T> {
        let delta = self.system.set.distance(x);
        let s = self.half_side(delta);
        self.value_at_scale(x, s)
    }

    fn value_at_scale(&self, x: &Point<T>, s: T) -> Result<T> {
        if s <= T::zero() {
            return Err(Error::BallExitsResolved);
        }
        let dim = self.whitney.dim;
        let k = self.kernel_box(x, s);
        let root = self.whitney.root.closure();
        if (0..dim).any(|a| k.lo[a] < root.lo[a] || k.hi[a] > root.hi[a]) || self.whitney.touches_unresolved(&k) {
            return Err(Error::BallExitsResolved);
        }
        let sf = s.as_f64();
        let mut total = T::zero();
        self.whitney.descend(
            |_, bx| bx.intersects(&k),
            |i| {
                let v = self.field.cube_values[i];
                if v == T::zero() {
                    return;
                }
                let c = &self.whitney.cubes[i].cell;
                let mut w = 1.0;
                for a in 0..dim {
                    let lo = ((c.lower[a] - x.0[a]).as_f64()) / sf;
                    let hi = ((c.lower[a] + c.side - x.0[a]).as_f64()) / sf;
                    w *= self.bump.cdf(hi) - self.bump.cdf(lo);
                    if w == 0.0 {
                        return;
                    }
                }
                total += v * T::lit(w);
            },
        );
        Ok(total)
    }

    /// Central differences with step `1e-4 delta(X)`.
    pub fn gradient(&self, x: &Point<T>) -> Result<[T; 3]> {
        let delta = self.system.set.distance(x);
        let h = T::lit(1e-4) * delta;
        let mut g = [T::zero(); 3];
        for a in 0..self.whitney.dim {
            let f1 = self.value(&x.offset(a, h))?;
            let f0 = self.value(&x.offset(a, -h))?;
            g[a] = (f1 - f0) / (h + h);
        }
        Ok(g)
    }

    fn gradient_norm(&self, x: &Point<T>) -> Result<f64> {
        let g = self.gradient(x)?;
        Ok(g.iter().map(|v| v.as_f64().powi(2)).sum::<f64>().sqrt())
    }

    /// Whether `F0` takes a single value on every cube meeting `region`.
    fn constant_on(&self, region: &Aabb<T>) -> bool {
        let mut first: Option<T> = None;
        let constant = std::cell::Cell::new(true);
        self.whitney.descend(
            |_, bx| constant.get() && bx.intersects(region),
            |i| {
                let v = self.field.cube_values[i];
                match first {
                    None => first = Some(v),
                    Some(f) if f != v => constant.set(false),
                    _ => {}
                }
            },
        );
        constant.get()
    }

    /// `int_A |grad F|`, adaptive over Whitney pieces with 3-point Gauss-Legendre cells.
    pub fn total_variation(&self, region: &Aabb<T>) -> Result<f64> {
        let dim = self.whitney.dim;
        let mut pieces = Vec::new();
        self.whitney.descend(
            |_, bx| bx.intersects(region),
            |i| {
                let c = self.whitney.cubes[i].cell.closure();
                let mut lo = c.lo;
                let mut hi = c.hi;
                for a in 0..dim {
                    lo[a] = lo[a].max(region.lo[a]);
                    hi[a] = hi[a].min(region.hi[a]);
                }
                if (0..dim).all(|a| hi[a] > lo[a]) {
                    pieces.push(Aabb::new(lo, hi));
                }
            },
        );
        let mut total = 0.0;
        for p in pieces {
            total += self.integrate_piece(&p, 0)?;
        }
        Ok(total)
    }

    fn integrate_piece(&self, p: &Aabb<T>, depth: u32) -> Result<f64> {
        let dim = self.whitney.dim;
        let center = p.center();
        let half_diag = p.diameter() / T::lit(2.0);
        let delta_c = self.system.set.distance(&center);
        let s_max = self.half_side(delta_c + half_diag);
        if self.constant_on(&p.inflate(s_max)) {
            return Ok(0.0);
        }
        let s_min = self.half_side((delta_c - half_diag).max(T::zero()));
        let widest = (0..dim).map(|a| p.extent(a)).fold(T::zero(), |m, v| m.max(v));
        if widest > s_min / T::lit(2.0) && depth < 24 {
            let mut sum = 0.0;
            for bits in 0..(1usize << dim) {
                let mut lo = p.lo;
                let mut hi = p.hi;
                for a in 0..dim {
                    let mid = (p.lo[a] + p.hi[a]) / T::lit(2.0);
                    if bits >> a & 1 == 1 {
                        lo[a] = mid;
                    } else {
                        hi[a] = mid;
                    }
                }
                sum += self.integrate_piece(&Aabb::new(lo, hi), depth + 1)?;
            }
            return Ok(sum);
        }
        let nodes = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
        let weights = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
        let vol: f64 = (0..dim).map(|a| p.extent(a).as_f64()).product();
        let nz = if dim == 3 { 3 } else { 1 };
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..nz {
                    let t = [nodes[i], nodes[j], if dim == 3 { nodes[k] } else { 0.0 }];
                    let mut x = center;
                    for a in 0..dim {
                        x.0[a] = center.0[a] + T::lit(t[a]) * p.extent(a) / T::lit(2.0);
                    }
                    let w = weights[i] * weights[j] * if dim == 3 { weights[k] } else { 1.0 };
                    acc += w * self.gradient_norm(&x)?;
                }
            }
        }
        let norm = 2f64.powi(dim as i32);
        Ok(acc * vol / norm)
    }

    /// Compares jump-measure mass with `int_A |grad F_theta|` extrapolated to `theta -> 0`
    /// from the two smallest `thetas` (linear in `theta`).
    pub fn tv_audit(&self, jumps: &JumpMeasure<T>, regions: &[Aabb<T>], thetas: &[f64]) -> Result<TvAudit> {
        let mut cases = Vec::new();
        let mut worst = 0.0f64;
        for r in regions {
            let mut vals = Vec::new();
            for &t in thetas {
                vals.push(self.with_theta(t)?.total_variation(r)?);
            }
            let n = vals.len();
            let extrapolated = if n >= 2 {
                let (t1, t2) = (thetas[n - 2], thetas[n - 1]);
                (t1 * vals[n - 1] - t2 * vals[n - 2]) / (t1 - t2)
            } else {
                vals[0]
            };
            let mass = jumps.mass_in_box(r).as_f64();
            let err = if mass > 0.0 { (extrapolated - mass).abs() / mass } else { extrapolated.abs() };
            worst = worst.max(err);
            cases.push(TvCase {
                lo: r.lo.map(|v| v.as_f64()),
                hi: r.hi.map(|v| v.as_f64()),
                jump_mass: mass,
                mollified: vals,
                extrapolated,
                relative_error: err,
            });
        }
        Ok(TvAudit { thetas: thetas.to_vec(), cases, max_relative_error: worst })
    }

    /// `sup |grad F(X)| delta(X) / norm` over random points of the resolved region.
    pub fn gradient_audit(&self, samples: usize, norm: f64, seed: u64) -> GradientAudit {
        let dim = self.whitney.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let root = self.whitney.root;
        let mut audit = GradientAudit { samples: 0, skipped: 0, sup: 0.0, norm };
        let mut attempts = 0;
        while audit.samples < samples && attempts < samples * 20 {
            attempts += 1;
            let mut x = Point::origin();
            for a in 0..dim {
                x.0[a] = root.lower[a] + T::lit(rng.random::<f64>()) * root.side;
            }
            let delta = self.system.set.distance(&x);
            match self.gradient_norm(&x) {
                Ok(g) => {
                    audit.samples += 1;
                    if norm > 0.0 {
                        audit.sup = audit.sup.max(g * delta.as_f64() / norm);
                    }
                }
                Err(_) => audit.skipped += 1,
            }
        }
        audit
    }

    fn grazes(&self, jumps: &JumpMeasure<T>, bx: &Aabb<T>) -> bool {
        let dim = self.whitney.dim;
        let width = 0.25 / (dim as f64).sqrt();
        jumps.faces.iter().any(|f| {
            let r = f.rect(dim);
            let a = f.axis as usize;
            if (0..dim).any(|k| k != a && (r.hi[k] <= bx.lo[k] || r.lo[k] >= bx.hi[k])) {
                return false;
            }
            let margin = T::lit(width) * self.system.set.distance(&r.center());
            (r.lo[a] - bx.lo[a]).abs() <= margin || (r.lo[a] - bx.hi[a]).abs() <= margin
        })
    }

    /// Random boxes of side in `[min, max]` whose kernel neighbourhoods stay resolved.
    ///
    /// With `jumps`, each box contains a jump face centre and no jump face runs parallel
    /// to a box side within a `theta = 1/4` kernel width of it, so that the boundary of
    /// the box carries no mass in the limit.
    pub fn random_regions(&self, count: usize, min: f64, max: f64, seed: u64, jumps: Option<&JumpMeasure<T>>) -> Vec<Aabb<T>> {
        let anchors: Vec<Point<T>> = jumps.map_or(Vec::new(), |j| j.faces.iter().map(|f| f.center(j.dim)).collect());
        let dim = self.whitney.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let root = self.whitney.root.closure();
        let mut out = Vec::new();
        let mut attempts = 0;
        while out.len() < count && attempts < count * 200 {
            attempts += 1;
            let side = min * (max / min).powf(rng.random::<f64>());
            let mut lo = [T::zero(); 3];
            let mut hi = [T::zero(); 3];
            let anchor = if anchors.is_empty() { None } else { Some(anchors[rng.random_range(0..anchors.len())]) };
            for a in 0..dim {
                let l = match anchor {
                    Some(p) => p.0[a].as_f64() - rng.random::<f64>() * side,
                    None => root.lo[a].as_f64() + rng.random::<f64>() * ((root.hi[a] - root.lo[a]).as_f64() - side),
                };
                lo[a] = T::lit(l);
                hi[a] = T::lit(l + side);
            }
            let bx = Aabb::new(lo, hi);
            let gap = self.system.set.box_distance(&bx, crate::geometry::Scope::all());
            if gap < T::lit(6.0) * self.whitney.min_side() {
                continue;
            }
            // kernel cubes reach at most (gap + diam) / 2 past the box
            let inflated = bx.inflate((gap + bx.diameter()) / T::lit(2.0));
            if (0..dim).any(|a| inflated.lo[a] < root.lo[a] || inflated.hi[a] > root.hi[a]) {
                continue;
            }
            if self.whitney.touches_unresolved(&bx) {
                continue;
            }
            if let Some(j) = jumps {
                if self.grazes(j, &bx) {
                    continue;
                }
            }
            out.push(bx);
        }
        out
    }
}
