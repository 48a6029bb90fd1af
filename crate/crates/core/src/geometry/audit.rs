//! Sampled regularity audits of a boundary set.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::instance::{BoundarySet, CubeId};
use super::primitives::Point;
use super::search::Scope;
use crate::Real;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdrReport {
    pub samples: usize,
    /// Smallest and largest `sigma(B(x,r) ∩ E) / r^d` seen.
    pub band: (f64, f64),
    /// `max(band.1, 1 / band.0)`.
    pub constant: f64,
    pub radius_range: (f64, f64),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorkscrewReport {
    pub samples: usize,
    /// Smallest over samples of the best `c` with `B(X, c r) ⊂ B(x, r) \ E`.
    pub constant: f64,
    pub grid: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistanceConsistency {
    pub samples: usize,
    pub violations: usize,
    pub max_excess: f64,
}

impl<T: Real> BoundarySet<T> {
    /// Random leaf representative (centre of its shape's bounding box projected onto the leaf).
    pub fn random_leaf_point<R: Rng>(&self, rng: &mut R) -> (CubeId, Point<T>) {
        let leaf = CubeId::new(self.depth, rng.random_range(0..self.count(self.depth)));
        let cell = self.cell(leaf);
        let c = self.bbox(&cell).center();
        (leaf, self.shape(&cell).nearest(&c))
    }

    pub fn adr_audit(&self, samples: usize, seed: u64) -> AdrReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r_lo = self.side(self.depth).as_f64();
        let r_hi = self.diam.as_f64();
        let d = self.dimension.as_f64();
        let mut band = (f64::INFINITY, 0.0f64);
        for _ in 0..samples {
            let (_, x) = self.random_leaf_point(&mut rng);
            let r = (r_lo.ln() + rng.random::<f64>() * (r_hi / r_lo).ln()).exp();
            let ratio = self.ball_measure(&x, T::lit(r)).as_f64() / r.powf(d);
            band.0 = band.0.min(ratio);
            band.1 = band.1.max(ratio);
        }
        AdrReport { samples, band, constant: band.1.max(1.0 / band.0), radius_range: (r_lo, r_hi) }
    }

    pub fn corkscrew_audit(&self, samples: usize, seed: u64) -> CorkscrewReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r_lo = self.side(self.depth).as_f64() * 4.0;
        let r_hi = self.diam.as_f64();
        let grid = if self.ambient_dim == 3 { 13 } else { 41 };
        let mut worst = f64::INFINITY;
        for _ in 0..samples {
            let (_, x) = self.random_leaf_point(&mut rng);
            let r = (r_lo.ln() + rng.random::<f64>() * (r_hi / r_lo).ln()).exp();
            let mut best = 0.0f64;
            let steps = |i: usize| -r + 2.0 * r * i as f64 / (grid - 1) as f64;
            let zs = if self.ambient_dim == 3 { grid } else { 1 };
            for i in 0..grid {
                for j in 0..grid {
                    for k in 0..zs {
                        let mut y = x;
                        y.0[0] += T::lit(steps(i));
                        y.0[1] += T::lit(steps(j));
                        if self.ambient_dim == 3 {
                            y.0[2] += T::lit(steps(k));
                        }
                        let room = r - x.dist(&y).as_f64();
                        if room <= best * r {
                            continue;
                        }
                        let c = room.min(self.distance(&y).as_f64()) / r;
                        best = best.max(c);
                    }
                }
            }
            worst = worst.min(best);
        }
        CorkscrewReport { samples, constant: worst, grid }
    }

    /// Checks `dist <= |X - p| <= dist + leaf diameter` for random `X` in the domain box.
    pub fn distance_consistency(&self, samples: usize, seed: u64) -> DistanceConsistency {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bx = self.domain.closure();
        let mut violations = 0;
        let mut max_excess = 0.0f64;
        for _ in 0..samples {
            let mut x = Point::origin();
            for k in 0..self.ambient_dim {
                x.0[k] = bx.lo[k] + T::lit(rng.random::<f64>()) * bx.extent(k);
            }
            let d = self.distance(&x);
            let p = self.nearest(&x, Scope::all()).map(|(p, _)| p).unwrap_or(x);
            let gap = x.dist(&p);
            let excess = (gap - d).as_f64();
            max_excess = max_excess.max(excess);
            if gap < d - T::lit(1e-12) || gap > d + self.leaf_diameter {
                violations += 1;
            }
        }
        DistanceConsistency { samples, violations, max_excess }
    }
}
