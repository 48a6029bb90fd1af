//! Branch-and-bound queries over the cell hierarchy.

use super::instance::{BoundarySet, Cell, CubeId};
use super::primitives::{Aabb, Point, Shape};
use crate::Real;

/// Something whose distance to pieces of the boundary set can be bounded and evaluated.
pub trait DistanceProbe<T: Real> {
    /// Lower bound for the distance to anything inside `bbox`.
    fn bound(&self, bbox: &Aabb<T>) -> T;
    fn exact(&self, shape: &Shape<T>) -> T;
}

impl<T: Real> DistanceProbe<T> for Point<T> {
    fn bound(&self, bbox: &Aabb<T>) -> T {
        bbox.dist_point(self)
    }
    fn exact(&self, shape: &Shape<T>) -> T {
        shape.dist_point(self)
    }
}

impl<T: Real> DistanceProbe<T> for Aabb<T> {
    fn bound(&self, bbox: &Aabb<T>) -> T {
        bbox.dist_box(self)
    }
    fn exact(&self, shape: &Shape<T>) -> T {
        shape.dist_box(self)
    }
}

impl<T: Real> DistanceProbe<T> for Shape<T> {
    fn bound(&self, bbox: &Aabb<T>) -> T {
        bbox.dist_box(&self.bbox())
    }
    fn exact(&self, shape: &Shape<T>) -> T {
        self.dist_shape(shape)
    }
}

/// Which part of the hierarchy a query ranges over.
#[derive(Clone, Copy, Debug, Default)]
pub struct Scope {
    /// Restrict to this subtree (the whole set when `None`).
    pub within: Option<CubeId>,
    /// Skip this subtree.
    pub excluding: Option<CubeId>,
}

impl Scope {
    pub fn all() -> Self {
        Scope::default()
    }

    pub fn within(q: CubeId) -> Self {
        Scope { within: Some(q), excluding: None }
    }

    pub fn excluding(q: CubeId) -> Self {
        Scope { within: None, excluding: Some(q) }
    }
}

/// Result of a nearest-piece search.
#[derive(Clone, Copy, Debug)]
pub struct Nearest<T: Real> {
    pub distance: T,
    pub cell: Cell<T>,
}

impl<T: Real> BoundarySet<T> {
    /// Minimum distance from `probe` to the resolved set within `scope`.
    ///
    /// The search may stop as soon as `stop(best)` holds; the returned value is then an
    /// upper bound that already satisfies `stop`. `None` when the scope is empty.
    pub fn search<P, F>(&self, probe: &P, scope: Scope, stop: F) -> Option<Nearest<T>>
    where
        P: DistanceProbe<T>,
        F: Fn(T) -> bool,
    {
        self.search_capped(probe, scope, T::infinity(), stop)
    }

    /// As [`search`](Self::search), ignoring everything farther than `cap`.
    pub fn search_capped<P, F>(&self, probe: &P, scope: Scope, cap: T, stop: F) -> Option<Nearest<T>>
    where
        P: DistanceProbe<T>,
        F: Fn(T) -> bool,
    {
        let b = self.branching;
        let start = match scope.within {
            Some(q) => self.cell(q),
            None => self.root_cell(),
        };
        let mut best: Option<Nearest<T>> = None;
        let mut best_d = T::infinity();
        let mut stack: Vec<(T, Cell<T>)> = vec![(probe.bound(&self.bbox(&start)), start)];
        let mut kids: Vec<(T, Cell<T>)> = Vec::with_capacity(b);
        while let Some((lb, cell)) = stack.pop() {
            if lb > cap || (lb >= best_d && best.is_some()) {
                continue;
            }
            if let Some(ex) = scope.excluding {
                if ex.contains(b, &cell.id) {
                    continue;
                }
            }
            let blocked = scope.excluding.is_some_and(|ex| cell.id.contains(b, &ex) && ex != cell.id);
            if self.is_exact(&cell) && !blocked {
                let d = probe.exact(&self.shape(&cell));
                if best.is_none() || d < best_d {
                    best_d = d;
                    best = Some(Nearest { distance: d, cell });
                    if stop(d) {
                        return best;
                    }
                }
                continue;
            }
            if cell.id.gen >= self.depth {
                continue;
            }
            kids.clear();
            for c in 0..b {
                let child = self.child_cell(&cell, c);
                kids.push((probe.bound(&self.bbox(&child)), child));
            }
            kids.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap_or(std::cmp::Ordering::Equal));
            for k in kids.drain(..) {
                if k.0 <= cap && (best.is_none() || k.0 < best_d) {
                    stack.push(k);
                }
            }
        }
        best
    }

    /// `dist(X, E_G)`.
    pub fn distance(&self, x: &Point<T>) -> T {
        self.search(x, Scope::all(), |_| false).map_or(T::infinity(), |n| n.distance)
    }

    pub fn distance_in(&self, x: &Point<T>, scope: Scope) -> T {
        self.search(x, scope, |_| false).map_or(T::infinity(), |n| n.distance)
    }

    /// Nearest point of the resolved set together with the leaf cell that holds it.
    pub fn nearest(&self, x: &Point<T>, scope: Scope) -> Option<(Point<T>, CubeId)> {
        let hit = self.search(x, scope, |_| false)?;
        let p = self.shape(&hit.cell).nearest(x);
        Some((p, self.leaf_of(&hit.cell, &p)))
    }

    pub fn nearest_boundary_point(&self, x: &Point<T>) -> Point<T> {
        self.nearest(x, Scope::all()).map(|(p, _)| p).unwrap_or(*x)
    }

    /// Depth-`G` leaf of an exact cell that contains `p`.
    pub fn leaf_of(&self, cell: &Cell<T>, p: &Point<T>) -> CubeId {
        let mut cur = *cell;
        while cur.id.gen < self.depth {
            let mut pick = self.child_cell(&cur, 0);
            let mut best = T::infinity();
            for c in 0..self.branching {
                let child = self.child_cell(&cur, c);
                let d = self.bbox(&child).dist_point(p);
                if d < best {
                    best = d;
                    pick = child;
                }
            }
            cur = pick;
        }
        cur.id
    }

    /// Distance from a closed box to the resolved set within `scope`.
    pub fn box_distance(&self, bx: &Aabb<T>, scope: Scope) -> T {
        self.search(bx, scope, |_| false).map_or(T::infinity(), |n| n.distance)
    }

    /// Whether some piece within `scope` lies at distance `<= r` from `probe`.
    pub fn within<P: DistanceProbe<T>>(&self, probe: &P, scope: Scope, r: T) -> bool {
        self.search_capped(probe, scope, r, |d| d <= r).is_some_and(|n| n.distance <= r)
    }

    /// Whether some piece within `scope` lies at distance `< r` from `probe`.
    pub fn strictly_within<P: DistanceProbe<T>>(&self, probe: &P, scope: Scope, r: T) -> bool {
        self.search_capped(probe, scope, r, |d| d < r).is_some_and(|n| n.distance < r)
    }

    /// Largest distance from `x` to a point of the resolved set within `scope`.
    pub fn farthest(&self, x: &Point<T>, scope: Scope) -> T {
        let start = match scope.within {
            Some(q) => self.cell(q),
            None => self.root_cell(),
        };
        let mut best = T::zero();
        let mut stack = vec![start];
        while let Some(cell) = stack.pop() {
            if self.bbox(&cell).far_point(x) <= best {
                continue;
            }
            if self.is_exact(&cell) {
                best = best.max(self.shape(&cell).far_point(x));
                continue;
            }
            for c in 0..self.branching {
                stack.push(self.child_cell(&cell, c));
            }
        }
        best
    }

    /// `sigma(B(x, r) ∩ E)` at resolution `G`: whole cells inside the ball count fully,
    /// leaves cut by the sphere count by the fraction of their shape inside the ball.
    pub fn ball_measure(&self, x: &Point<T>, r: T) -> T {
        let mut total = T::zero();
        let mut stack = vec![self.root_cell()];
        while let Some(cell) = stack.pop() {
            let bb = self.bbox(&cell);
            if bb.dist_point(x) > r {
                continue;
            }
            let mass = self.measure(cell.id.gen);
            if bb.far_point(x) <= r {
                total += mass;
                continue;
            }
            if cell.id.gen >= self.depth {
                total += mass * self.shape_fraction(&cell, x, r);
                continue;
            }
            for c in 0..self.branching {
                stack.push(self.child_cell(&cell, c));
            }
        }
        total
    }

    fn shape_fraction(&self, cell: &Cell<T>, x: &Point<T>, r: T) -> T {
        match self.shape(cell) {
            Shape::Segment(a, b) => super::primitives::segment_ball_length(&a, &b, x, r) / a.dist(&b),
            Shape::Rect(bb) => {
                let flat: Vec<usize> = (0..3).filter(|&k| bb.extent(k) > T::zero()).collect();
                match flat.len() {
                    1 => {
                        let k = flat[0];
                        let mut a = Point(bb.lo);
                        let mut b = Point(bb.lo);
                        b.0[k] = bb.hi[k];
                        a.0[k] = bb.lo[k];
                        super::primitives::segment_ball_length(&a, &b, x, r) / bb.extent(k)
                    }
                    2 => {
                        let (k, l) = (flat[0], flat[1]);
                        let normal = 3 - k - l;
                        let area = super::primitives::face_ball_measure(&bb, normal, 3, x, r);
                        area / (bb.extent(k) * bb.extent(l))
                    }
                    _ => {
                        if bb.dist_point(x) <= r {
                            T::one()
                        } else {
                            T::zero()
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_instance, InstanceConfig};

    #[test]
    fn segment_distance_examples() {
        let e: BoundarySet<f64> = make_instance(&InstanceConfig::segment(6)).unwrap();
        assert_eq!(e.distance(&Point::new2(0.5, 0.25)), 0.25);
        assert_eq!(e.distance(&Point::new2(1.5, 0.0)), 0.5);
        assert_eq!(e.nearest_boundary_point(&Point::new2(0.3, 0.4)), Point::new2(0.3, 0.0));
        assert_eq!(e.nearest_boundary_point(&Point::new2(-0.2, 0.1)), Point::new2(0.0, 0.0));
    }

    #[test]
    fn excluding_a_subtree() {
        let e: BoundarySet<f64> = make_instance(&InstanceConfig::segment(6)).unwrap();
        let left = CubeId::new(1, 0);
        let d = e.distance_in(&Point::new2(0.25, 0.0), Scope::excluding(left));
        assert!((d - 0.25).abs() < 1e-15);
        let d = e.distance_in(&Point::new2(0.25, 0.0), Scope::within(CubeId::new(1, 1)));
        assert!((d - 0.25).abs() < 1e-15);
    }

    #[test]
    fn ball_measure_on_segment_is_chord() {
        let e: BoundarySet<f64> = make_instance(&InstanceConfig::segment(5)).unwrap();
        let m = e.ball_measure(&Point::new2(0.3, 0.1), 0.2);
        assert!((m - 2.0 * (0.04f64 - 0.01).sqrt()).abs() < 1e-12);
    }
}
