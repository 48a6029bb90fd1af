use serde::{Deserialize, Serialize};

use crate::Real;

/// Point of the ambient space. Planar instances keep the third coordinate at zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Point<T: Real>(pub [T; 3]);

impl<T: Real> Point<T> {
    pub fn new2(x: T, y: T) -> Self {
        Point([x, y, T::zero()])
    }

    pub fn new3(x: T, y: T, z: T) -> Self {
        Point([x, y, z])
    }

    pub fn origin() -> Self {
        Point([T::zero(); 3])
    }

    pub fn dist(&self, other: &Point<T>) -> T {
        self.dist2(other).sqrt()
    }

    pub fn dist2(&self, other: &Point<T>) -> T {
        (0..3).map(|k| (self.0[k] - other.0[k]).powi(2)).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn offset(&self, axis: usize, by: T) -> Self {
        let mut p = *self;
        p.0[axis] += by;
        p
    }
}

/// Closed axis-aligned box, possibly degenerate in some axes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Aabb<T: Real> {
    pub lo: [T; 3],
    pub hi: [T; 3],
}

impl<T: Real> Aabb<T> {
    pub fn new(lo: [T; 3], hi: [T; 3]) -> Self {
        Aabb { lo, hi }
    }

    pub fn point(p: &Point<T>) -> Self {
        Aabb { lo: p.0, hi: p.0 }
    }

    pub fn center(&self) -> Point<T> {
        let two = T::lit(2.0);
        Point([0, 1, 2].map(|k| (self.lo[k] + self.hi[k]) / two))
    }

    pub fn extent(&self, axis: usize) -> T {
        self.hi[axis] - self.lo[axis]
    }

    pub fn diameter(&self) -> T {
        (0..3).map(|k| self.extent(k).powi(2)).sum::<T>().sqrt()
    }

    pub fn union(&self, other: &Aabb<T>) -> Aabb<T> {
        Aabb {
            lo: [0, 1, 2].map(|k| self.lo[k].min(other.lo[k])),
            hi: [0, 1, 2].map(|k| self.hi[k].max(other.hi[k])),
        }
    }

    pub fn inflate(&self, r: T) -> Aabb<T> {
        Aabb { lo: self.lo.map(|v| v - r), hi: self.hi.map(|v| v + r) }
    }

    pub fn contains_point(&self, p: &Point<T>) -> bool {
        (0..3).all(|k| self.lo[k] <= p.0[k] && p.0[k] <= self.hi[k])
    }

    pub fn intersects(&self, other: &Aabb<T>) -> bool {
        (0..3).all(|k| self.lo[k] <= other.hi[k] && other.lo[k] <= self.hi[k])
    }

    pub fn dist_point(&self, p: &Point<T>) -> T {
        self.dist2_point(p).sqrt()
    }

    pub fn dist2_point(&self, p: &Point<T>) -> T {
        (0..3)
            .map(|k| {
                let g = (self.lo[k] - p.0[k]).max(p.0[k] - self.hi[k]).max(T::zero());
                g * g
            })
            .sum()
    }

    /// Largest distance from `p` to a point of the box.
    pub fn far_point(&self, p: &Point<T>) -> T {
        (0..3)
            .map(|k| {
                let g = (p.0[k] - self.lo[k]).abs().max((self.hi[k] - p.0[k]).abs());
                g * g
            })
            .sum::<T>()
            .sqrt()
    }

    pub fn dist_box(&self, other: &Aabb<T>) -> T {
        (0..3)
            .map(|k| {
                let g = (self.lo[k] - other.hi[k]).max(other.lo[k] - self.hi[k]).max(T::zero());
                g * g
            })
            .sum::<T>()
            .sqrt()
    }

    pub fn clamp(&self, p: &Point<T>) -> Point<T> {
        Point([0, 1, 2].map(|k| p.0[k].max(self.lo[k]).min(self.hi[k])))
    }

    pub fn volume(&self, dim: usize) -> T {
        (0..dim).map(|k| self.extent(k)).fold(T::one(), |a, b| a * b)
    }
}

/// Half-open cube `(a_1, a_1+h] x ... x (a_m, a_m+h]` in `dim` ambient axes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AxisBox<T: Real> {
    pub lower: [T; 3],
    pub side: T,
    pub dim: u8,
}

impl<T: Real> AxisBox<T> {
    pub fn new(lower: [T; 3], side: T, dim: usize) -> Self {
        let mut lower = lower;
        for v in lower.iter_mut().skip(dim) {
            *v = T::zero();
        }
        AxisBox { lower, side, dim: dim as u8 }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn upper(&self, axis: usize) -> T {
        if axis < self.dim() {
            self.lower[axis] + self.side
        } else {
            T::zero()
        }
    }

    pub fn contains(&self, p: &Point<T>) -> bool {
        (0..self.dim()).all(|k| self.lower[k] < p.0[k] && p.0[k] <= self.lower[k] + self.side)
    }

    pub fn closure(&self) -> Aabb<T> {
        Aabb { lo: self.lower, hi: [0, 1, 2].map(|k| self.upper(k)) }
    }

    pub fn center(&self) -> Point<T> {
        self.closure().center()
    }

    pub fn volume(&self) -> T {
        self.side.powi(self.dim as i32)
    }

    pub fn diameter(&self) -> T {
        self.side * T::lit(self.dim() as f64).sqrt()
    }
}

/// Exact piece of the resolved boundary set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape<T: Real> {
    /// Axis box, degenerate for intervals and planar squares.
    Rect(Aabb<T>),
    /// Slanted segment in the plane `z = 0`.
    Segment(Point<T>, Point<T>),
}

impl<T: Real> Shape<T> {
    pub fn dist_point(&self, p: &Point<T>) -> T {
        p.dist(&self.nearest(p))
    }

    pub fn nearest(&self, p: &Point<T>) -> Point<T> {
        match self {
            Shape::Rect(b) => b.clamp(p),
            Shape::Segment(a, b) => {
                let d: [T; 3] = [0, 1, 2].map(|k| b.0[k] - a.0[k]);
                let len2: T = d.iter().map(|v| *v * *v).sum();
                let t = if len2 > T::zero() {
                    ((0..3).map(|k| (p.0[k] - a.0[k]) * d[k]).sum::<T>() / len2)
                        .max(T::zero())
                        .min(T::one())
                } else {
                    T::zero()
                };
                Point([0, 1, 2].map(|k| a.0[k] + t * d[k]))
            }
        }
    }

    pub fn far_point(&self, p: &Point<T>) -> T {
        match self {
            Shape::Rect(b) => b.far_point(p),
            Shape::Segment(a, b) => p.dist(a).max(p.dist(b)),
        }
    }

    pub fn bbox(&self) -> Aabb<T> {
        match self {
            Shape::Rect(b) => *b,
            Shape::Segment(a, b) => Aabb::point(a).union(&Aabb::point(b)),
        }
    }

    /// Distance from a closed box to the shape.
    pub fn dist_box(&self, bx: &Aabb<T>) -> T {
        match self {
            Shape::Rect(b) => b.dist_box(bx),
            Shape::Segment(a, b) => segment_box_distance(a, b, bx),
        }
    }

    /// Distance between two shapes.
    pub fn dist_shape(&self, other: &Shape<T>) -> T {
        match (self, other) {
            (Shape::Rect(a), s) | (s, Shape::Rect(a)) => s.dist_box(a),
            (Shape::Segment(a, b), Shape::Segment(c, d)) => {
                if planar_segments_cross(a, b, c, d) {
                    return T::zero();
                }
                let s = Shape::Segment(*a, *b);
                let t = Shape::Segment(*c, *d);
                s.dist_point(c).min(s.dist_point(d)).min(t.dist_point(a)).min(t.dist_point(b))
            }
        }
    }
}

fn planar_segments_cross<T: Real>(a: &Point<T>, b: &Point<T>, c: &Point<T>, d: &Point<T>) -> bool {
    let orient = |p: &Point<T>, q: &Point<T>, r: &Point<T>| {
        (q.0[0] - p.0[0]) * (r.0[1] - p.0[1]) - (q.0[1] - p.0[1]) * (r.0[0] - p.0[0])
    };
    let (o1, o2) = (orient(a, b, c), orient(a, b, d));
    let (o3, o4) = (orient(c, d, a), orient(c, d, b));
    o1 * o2 < T::zero() && o3 * o4 < T::zero()
}

/// Distance between a segment in the plane `z = 0` and a closed box.
///
/// The box's z-range must contain 0 for the planar formula; otherwise the
/// vertical gap is combined with the in-plane distance.
pub fn segment_box_distance<T: Real>(a: &Point<T>, b: &Point<T>, bx: &Aabb<T>) -> T {
    let dz = (bx.lo[2] - a.0[2]).max(a.0[2] - bx.hi[2]).max(T::zero());
    let planar = if clip_segment(a, b, bx) {
        T::zero()
    } else {
        let mut best = bx.dist_point(&a.with_z(bx)).min(bx.dist_point(&b.with_z(bx)));
        let seg = Shape::Segment(*a, *b);
        for cx in [bx.lo[0], bx.hi[0]] {
            for cy in [bx.lo[1], bx.hi[1]] {
                let c = Point([cx, cy, a.0[2]]);
                best = best.min(seg.dist_point(&c));
            }
        }
        best
    };
    (planar * planar + dz * dz).sqrt()
}

impl<T: Real> Point<T> {
    fn with_z(&self, bx: &Aabb<T>) -> Point<T> {
        Point([self.0[0], self.0[1], self.0[2].max(bx.lo[2]).min(bx.hi[2])])
    }
}

/// Liang-Barsky test in the xy-plane.
fn clip_segment<T: Real>(a: &Point<T>, b: &Point<T>, bx: &Aabb<T>) -> bool {
    let mut t0 = T::zero();
    let mut t1 = T::one();
    for k in 0..2 {
        let d = b.0[k] - a.0[k];
        let lo = bx.lo[k] - a.0[k];
        let hi = bx.hi[k] - a.0[k];
        if d == T::zero() {
            if lo > T::zero() || hi < T::zero() {
                return false;
            }
            continue;
        }
        let (mut e0, mut e1) = (lo / d, hi / d);
        if e0 > e1 {
            std::mem::swap(&mut e0, &mut e1);
        }
        t0 = t0.max(e0);
        t1 = t1.min(e1);
        if t0 > t1 {
            return false;
        }
    }
    true
}

/// Area of the closed rectangle `[x0,x1] x [y0,y1]` inside the disk of radius `r`
/// centred at the origin, in closed form.
pub fn rect_disk_area<T: Real>(x0: T, x1: T, y0: T, y1: T, r: T) -> T {
    if r <= T::zero() || x1 <= x0 || y1 <= y0 {
        return T::zero();
    }
    let a = x0.max(-r);
    let b = x1.min(r);
    if a >= b {
        return T::zero();
    }
    // integrand h(x) = (min(y1, s) - max(y0, -s))_+ with s = sqrt(r^2 - x^2)
    // is smooth between the points where s crosses |y0| or |y1|.
    let mut cuts = vec![a, b];
    for y in [y0, y1] {
        let ya = y.abs();
        if ya < r {
            let x = (r * r - ya * ya).sqrt();
            for c in [-x, x] {
                if c > a && c < b {
                    cuts.push(c);
                }
            }
        }
    }
    cuts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let mut total = T::zero();
    for w in cuts.windows(2) {
        let (p, q) = (w[0], w[1]);
        if q <= p {
            continue;
        }
        let mid = (p + q) / T::lit(2.0);
        let s = (r * r - mid * mid).max(T::zero()).sqrt();
        let upper_is_circle = s < y1;
        let lower_is_circle = -s > y0;
        if (if upper_is_circle { s } else { y1 }) <= (if lower_is_circle { -s } else { y0 }) {
            continue;
        }
        let upper = if upper_is_circle { circle_primitive(q, r) - circle_primitive(p, r) } else { y1 * (q - p) };
        let lower = if lower_is_circle { -(circle_primitive(q, r) - circle_primitive(p, r)) } else { y0 * (q - p) };
        total = total + upper - lower;
    }
    total.max(T::zero())
}

/// Primitive of `sqrt(r^2 - x^2)`.
fn circle_primitive<T: Real>(x: T, r: T) -> T {
    let x = x.max(-r).min(r);
    let s = (r * r - x * x).max(T::zero()).sqrt();
    (x * s + r * r * (x / r).max(-T::one()).min(T::one()).asin()) / T::lit(2.0)
}

/// Length of the segment `[a, b]` inside the closed ball `B(c, r)`.
pub fn segment_ball_length<T: Real>(a: &Point<T>, b: &Point<T>, c: &Point<T>, r: T) -> T {
    let d: [T; 3] = [0, 1, 2].map(|k| b.0[k] - a.0[k]);
    let len2: T = d.iter().map(|v| *v * *v).sum();
    if len2 <= T::zero() {
        return T::zero();
    }
    let f: [T; 3] = [0, 1, 2].map(|k| a.0[k] - c.0[k]);
    let bq: T = (0..3).map(|k| f[k] * d[k]).sum();
    let cq: T = f.iter().map(|v| *v * *v).sum::<T>() - r * r;
    let disc = bq * bq - len2 * cq;
    if disc <= T::zero() {
        return T::zero();
    }
    let sq = disc.sqrt();
    let t0 = ((-bq - sq) / len2).max(T::zero());
    let t1 = ((-bq + sq) / len2).min(T::one());
    if t1 <= t0 {
        T::zero()
    } else {
        (t1 - t0) * len2.sqrt()
    }
}

/// Measure of an axis face (an `n`-dimensional rectangle) inside a closed ball.
///
/// `face` is degenerate along `axis`; in the plane the face is a segment.
pub fn face_ball_measure<T: Real>(face: &Aabb<T>, axis: usize, dim: usize, c: &Point<T>, r: T) -> T {
    let dn = face.lo[axis] - c.0[axis];
    let rr = r * r - dn * dn;
    if rr <= T::zero() {
        return T::zero();
    }
    let rho = rr.sqrt();
    let others: Vec<usize> = (0..dim).filter(|&k| k != axis).collect();
    match others.len() {
        1 => {
            let k = others[0];
            let lo = (face.lo[k] - c.0[k]).max(-rho);
            let hi = (face.hi[k] - c.0[k]).min(rho);
            (hi - lo).max(T::zero())
        }
        2 => {
            let (k, l) = (others[0], others[1]);
            rect_disk_area(
                face.lo[k] - c.0[k],
                face.hi[k] - c.0[k],
                face.lo[l] - c.0[l],
                face.hi[l] - c.0[l],
                rho,
            )
        }
        _ => T::zero(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rect_disk_full_and_quarter() {
        let pi = std::f64::consts::PI;
        assert!((rect_disk_area(-2.0, 2.0, -2.0, 2.0, 1.0) - pi).abs() < 1e-13);
        assert!((rect_disk_area(0.0, 2.0, 0.0, 2.0, 1.0) - pi / 4.0).abs() < 1e-13);
        assert!((rect_disk_area(-0.5f64, 0.5, -0.5, 0.5, 10.0) - 1.0).abs() < 1e-13);
        assert_eq!(rect_disk_area(2.0, 3.0, 0.0, 1.0, 1.0), 0.0);
    }

    #[test]
    fn rect_disk_against_grid_count() {
        let (x0, x1, y0, y1, r) = (-0.3, 0.9, 0.2, 1.4, 1.0);
        let n = 2000;
        let mut hits = 0usize;
        for i in 0..n {
            for j in 0..n {
                let x = x0 + (x1 - x0) * (i as f64 + 0.5) / n as f64;
                let y = y0 + (y1 - y0) * (j as f64 + 0.5) / n as f64;
                if x * x + y * y <= r * r {
                    hits += 1;
                }
            }
        }
        let grid = hits as f64 / (n * n) as f64 * (x1 - x0) * (y1 - y0);
        assert!((rect_disk_area(x0, x1, y0, y1, r) - grid).abs() < 2e-3);
    }

    #[test]
    fn segment_ball_chord() {
        let a = Point::new2(-2.0, 0.5);
        let b = Point::new2(2.0, 0.5);
        let l = segment_ball_length(&a, &b, &Point::origin(), 1.0);
        assert!((l - 2.0 * 0.75f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn segment_box_cases() {
        let bx = Aabb::new([0.0, 0.0, 0.0], [1.0, 1.0, 0.0]);
        let crossing = segment_box_distance(&Point::new2(-1.0, 0.5), &Point::new2(2.0, 0.5), &bx);
        assert_eq!(crossing, 0.0);
        let above: f64 = segment_box_distance(&Point::new2(-1.0, 2.0), &Point::new2(2.0, 2.0), &bx);
        assert!((above - 1.0).abs() < 1e-15);
        let diag = segment_box_distance(&Point::new2(2.0, 3.0), &Point::new2(3.0, 2.0), &bx);
        assert!((diag - 3.0 / 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn half_open_containment() {
        let b = AxisBox::new([0.0, 0.0, 0.0], 1.0, 2);
        assert!(b.contains(&Point::new2(1.0, 1.0)));
        assert!(!b.contains(&Point::new2(0.0, 0.5)));
    }
}
