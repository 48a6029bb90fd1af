//! Walk-on-spheres estimates of the harmonic extension of leaf data.
//!
//! In the plane the walk lives in the full complement of `E`: once it leaves a disk
//! around `E` it is returned to the circle by an exact draw from the exterior
//! harmonic measure (recurrence makes the return certain). In space the walk is
//! kept in the domain box by reflection, which changes the model and is flagged.

use num::complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bmo::BoundaryFunction;
use crate::dyadic::{CubeId, DyadicSystem};
use crate::geometry::{Point, Scope};
use crate::{Coefficient, Error, Real, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct WosParams<T: Real> {
    pub walks: usize,
    pub eps_stop: T,
    pub seed: u64,
    /// Steps after which a walk is censored.
    pub max_steps: u32,
}

impl<T: Real> WosParams<T> {
    /// `eps_stop` at twice the leaf diameter.
    pub fn for_system(system: &DyadicSystem<T>, walks: usize, seed: u64) -> Self {
        WosParams { walks, eps_stop: T::lit(2.0) * system.set.leaf_diameter, seed, max_steps: 100_000 }
    }
}

/// Hit leaves of a batch of walks from one point, reusable as common random numbers.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct WalkSet<T: Real> {
    pub x: Point<T>,
    pub eps_stop: T,
    /// Leaf scored by each walk, `None` when censored.
    pub hits: Vec<Option<CubeId>>,
    pub lengths: Vec<u32>,
    /// The walk was kept in a reflecting box (space only).
    pub reflecting: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct WosEstimate<T: Real> {
    pub x: Point<T>,
    pub walks: usize,
    pub eps_stop: T,
    pub estimate: f64,
    /// Sample standard deviation over `sqrt(walks)`.
    pub stderr: f64,
    pub mean_length: f64,
    pub censored: f64,
    pub reflecting: bool,
}

fn uniform_direction<R: Rng>(rng: &mut R, dim: usize) -> [f64; 3] {
    if dim == 2 {
        let t = rng.random::<f64>() * std::f64::consts::TAU;
        [t.cos(), t.sin(), 0.0]
    } else {
        let z = 2.0 * rng.random::<f64>() - 1.0;
        let t = rng.random::<f64>() * std::f64::consts::TAU;
        let s = (1.0 - z * z).max(0.0).sqrt();
        [s * t.cos(), s * t.sin(), z]
    }
}

/// Exit point on the circle `|y - c| = rho` of planar Brownian motion started at `x`
/// outside it. Inversion in the circle carries the exterior harmonic measure to the
/// interior one from `x*`, which is the image of the uniform law under a disk
/// automorphism.
fn exterior_return<R: Rng>(rng: &mut R, x: [f64; 2], c: [f64; 2], rho: f64) -> [f64; 2] {
    let v = Complex64::new(x[0] - c[0], x[1] - c[1]);
    let z = rho / v.norm_sqr() * v;
    let w = Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU);
    let hit = (w + z) / (Complex64::new(1.0, 0.0) + z.conj() * w);
    let hit = hit / hit.norm();
    [c[0] + rho * hit.re, c[1] + rho * hit.im]
}

fn reflect_into(v: f64, lo: f64, hi: f64) -> f64 {
    let w = hi - lo;
    let mut t = (v - lo).rem_euclid(2.0 * w);
    if t > w {
        t = 2.0 * w - t;
    }
    lo + t
}

struct Walker<'a, T: Real> {
    system: &'a DyadicSystem<T>,
    dim: usize,
    eps: f64,
    center: [f64; 3],
    rho: f64,
    bounds: ([f64; 3], [f64; 3]),
    max_steps: u32,
}

impl<'a, T: Real> Walker<'a, T> {
    fn walk(&self, start: [f64; 3], rng: &mut ChaCha8Rng) -> (Option<CubeId>, u32) {
        let set = &self.system.set;
        let mut p = start;
        for step in 1..=self.max_steps {
            if self.dim == 2 {
                let off = [p[0] - self.center[0], p[1] - self.center[1]];
                if off[0].hypot(off[1]) > self.rho {
                    let q = exterior_return(rng, [p[0], p[1]], [self.center[0], self.center[1]], self.rho);
                    p = [q[0], q[1], 0.0];
                    continue;
                }
            }
            let here = Point([T::lit(p[0]), T::lit(p[1]), T::lit(p[2])]);
            let d = set.distance(&here).as_f64();
            if d < self.eps {
                let Some((_, leaf)) = set.nearest(&here, Scope::all()) else {
                    return (None, step);
                };
                let leaf = leaf.ancestor(set.branching, self.system.depth).unwrap_or(leaf);
                return (Some(leaf), step);
            }
            let u = uniform_direction(rng, self.dim);
            for k in 0..self.dim {
                p[k] += d * u[k];
            }
            if self.dim == 3 {
                for k in 0..3 {
                    p[k] = reflect_into(p[k], self.bounds.0[k], self.bounds.1[k]);
                }
            }
        }
        (None, self.max_steps)
    }
}

/// Runs `params.walks` walks from `x`; walk `i` draws from stream `i` of the seed.
pub fn run_walks<T: Real>(system: &DyadicSystem<T>, x: &Point<T>, params: &WosParams<T>) -> Result<WalkSet<T>> {
    let set = &system.set;
    let dim = set.ambient_dim;
    if params.walks == 0 {
        return Err(Error::InvalidParameter("at least one walk is needed".into()));
    }
    if params.eps_stop < T::lit(2.0) * set.leaf_diameter {
        return Err(Error::InvalidParameter("eps_stop must be at least twice the leaf diameter".into()));
    }
    if dim == 3 && !set.domain.contains(x) {
        return Err(Error::Outside);
    }
    if !(set.distance(x) > T::zero()) {
        return Err(Error::InvalidParameter("the start point lies on E".into()));
    }
    let hull = set.hull;
    let c = hull.center();
    let center = [c.0[0].as_f64(), c.0[1].as_f64(), c.0[2].as_f64()];
    let half = hull.diameter().as_f64() / 2.0;
    let lo = set.domain.lower;
    let bounds = (
        [lo[0].as_f64(), lo[1].as_f64(), lo[2].as_f64()],
        [0, 1, 2].map(|k| if k < dim { set.domain.upper(k).as_f64() } else { 0.0 }),
    );
    let walker = Walker {
        system,
        dim,
        eps: params.eps_stop.as_f64(),
        center,
        // E sits strictly inside
        rho: 1.25 * half + params.eps_stop.as_f64(),
        bounds,
        max_steps: params.max_steps,
    };
    let start = [x.0[0].as_f64(), x.0[1].as_f64(), x.0[2].as_f64()];
    let out: Vec<(Option<CubeId>, u32)> = (0..params.walks)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(i as u64);
            walker.walk(start, &mut rng)
        })
        .collect();
    let (hits, lengths) = out.into_iter().unzip();
    Ok(WalkSet { x: *x, eps_stop: params.eps_stop, hits, lengths, reflecting: dim == 3 })
}

impl<T: Real> WalkSet<T> {
    pub fn censored_fraction(&self) -> f64 {
        self.hits.iter().filter(|h| h.is_none()).count() as f64 / self.hits.len() as f64
    }

    /// Per-walk scores of `f`, censored walks dropped.
    pub fn scores<C: Coefficient>(&self, f: &BoundaryFunction<C>) -> Vec<f64> {
        self.hits.iter().flatten().map(|leaf| f.value(leaf).to_f64_lossy()).collect()
    }

    pub fn estimate<C: Coefficient>(&self, f: &BoundaryFunction<C>) -> Result<WosEstimate<T>> {
        let censored = self.censored_fraction();
        if censored >= 0.01 {
            return Err(Error::Censored(censored));
        }
        let (mean, stderr) = mean_stderr(&self.scores(f));
        Ok(WosEstimate {
            x: self.x,
            walks: self.hits.len(),
            eps_stop: self.eps_stop,
            estimate: mean,
            stderr,
            mean_length: self.lengths.iter().map(|&l| l as f64).sum::<f64>() / self.lengths.len() as f64,
            censored,
            reflecting: self.reflecting,
        })
    }
}

fn mean_stderr(s: &[f64]) -> (f64, f64) {
    let n = s.len() as f64;
    let mean = s.iter().sum::<f64>() / n;
    if s.len() < 2 {
        return (mean, 0.0);
    }
    let var = s.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn wos_estimate<T: Real, C: Coefficient>(
    system: &DyadicSystem<T>,
    f: &BoundaryFunction<C>,
    x: &Point<T>,
    params: &WosParams<T>,
) -> Result<WosEstimate<T>> {
    run_walks(system, x, params)?.estimate(f)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MaxPrincipleReport {
    pub sup_f: f64,
    pub samples: usize,
    pub violations: usize,
    /// `max (|u| - sup|f|) / stderr` over samples with positive error.
    pub worst_excess: f64,
}

impl MaxPrincipleReport {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// `|u(X)| <= sup|f| + 3 stderr` at every estimate.
pub fn max_principle_audit<T: Real, C: Coefficient>(estimates: &[WosEstimate<T>], f: &BoundaryFunction<C>) -> MaxPrincipleReport {
    let sup_f = f.sup_norm().to_f64_lossy();
    let mut report = MaxPrincipleReport { sup_f, samples: estimates.len(), violations: 0, worst_excess: f64::NEG_INFINITY };
    for e in estimates {
        let excess = e.estimate.abs() - sup_f;
        if excess > 3.0 * e.stderr {
            report.violations += 1;
        }
        if e.stderr > 0.0 {
            report.worst_excess = report.worst_excess.max(excess / e.stderr);
        } else if excess > 0.0 {
            report.worst_excess = f64::INFINITY;
        }
    }
    report
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinearityReport {
    pub combined: f64,
    pub separate: f64,
    pub sigma: f64,
}

impl LinearityReport {
    pub fn holds(&self) -> bool {
        (self.combined - self.separate).abs() <= 3.0 * self.sigma + 1e-12 * (1.0 + self.separate.abs())
    }
}

/// Compares the estimate of `a f + b g` with `a u_f + b u_g` on the same walks.
pub fn linearity_audit<T: Real>(
    walks: &WalkSet<T>,
    f: &BoundaryFunction<f64>,
    g: &BoundaryFunction<f64>,
    a: f64,
    b: f64,
) -> Result<LinearityReport> {
    let h = f.zip_with(g, |x, y| a * x + b * y);
    let (ef, eg, eh) = (walks.estimate(f)?, walks.estimate(g)?, walks.estimate(&h)?);
    Ok(LinearityReport { combined: eh.estimate, separate: a * ef.estimate + b * eg.estimate, sigma: eh.stderr })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TraceRow<T: Real> {
    pub height: T,
    pub estimate: WosEstimate<T>,
    pub error: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TraceTable<T: Real> {
    pub leaf: CubeId,
    pub boundary_value: f64,
    pub rows: Vec<TraceRow<T>>,
    /// `|u - f(x)|` never grows by more than 3 combined sigma as `h` decreases.
    pub monotone_trend: bool,
    /// The finest height is within 3 sigma of `f(x)`.
    pub converged: bool,
}

/// `u(x + h nu)` along the inward probe normal at the centre of `leaf`.
pub fn trace_probe<T: Real, C: Coefficient>(
    system: &DyadicSystem<T>,
    f: &BoundaryFunction<C>,
    leaf: &CubeId,
    heights: &[T],
    params: &WosParams<T>,
) -> Result<TraceTable<T>> {
    system.check(leaf)?;
    if heights.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParameter("heights must decrease".into()));
    }
    if heights.iter().any(|&h| h < T::lit(4.0) * params.eps_stop) {
        return Err(Error::InvalidParameter("heights must be at least 4 eps_stop".into()));
    }
    let x = system.leaf_point(leaf);
    let nu = system.set.probe_normal();
    let target = f.value(leaf).to_f64_lossy();
    let mut rows = Vec::with_capacity(heights.len());
    for &h in heights {
        let mut y = x;
        for k in 0..3 {
            y.0[k] += h * nu.0[k];
        }
        let e = wos_estimate(system, f, &y, params)?;
        rows.push(TraceRow { height: h, error: (e.estimate - target).abs(), estimate: e });
    }
    let monotone_trend = rows.windows(2).all(|w| {
        let s = w[0].estimate.stderr.hypot(w[1].estimate.stderr);
        w[1].error <= w[0].error + 3.0 * s
    });
    let converged = rows.last().is_some_and(|r| r.error <= 3.0 * r.estimate.stderr);
    Ok(TraceTable { leaf: *leaf, boundary_value: target, rows, monotone_trend, converged })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeedAgreement {
    pub points: usize,
    pub agreeing: usize,
}

impl SeedAgreement {
    pub fn fraction(&self) -> f64 {
        self.agreeing as f64 / self.points.max(1) as f64
    }
}

/// Two independent seeds agree within 3 combined sigma at how many points.
pub fn seed_agreement<T: Real, C: Coefficient>(
    system: &DyadicSystem<T>,
    f: &BoundaryFunction<C>,
    points: &[Point<T>],
    params: &WosParams<T>,
    other_seed: u64,
) -> Result<SeedAgreement> {
    let other = WosParams { seed: other_seed, ..*params };
    let mut agreeing = 0;
    for x in points {
        let a = wos_estimate(system, f, x, params)?;
        let b = wos_estimate(system, f, x, &other)?;
        if (a.estimate - b.estimate).abs() <= 3.0 * a.stderr.hypot(b.stderr) {
            agreeing += 1;
        }
    }
    Ok(SeedAgreement { points: points.len(), agreeing })
}

/// Writes estimates as `x,y,z,estimate,stderr,walks,censored`.
pub fn write_estimates_csv<T: Real, W: std::io::Write>(estimates: &[WosEstimate<T>], mut w: W) -> std::io::Result<()> {
    writeln!(w, "x,y,z,estimate,stderr,walks,censored")?;
    for e in estimates {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            e.x.0[0], e.x.0[1], e.x.0[2], e.estimate, e.stderr, e.walks, e.censored
        )?;
    }
    Ok(())
}
