//! Boundary-set instances, distance oracles and self-similar surface measure.

mod audit;
mod instance;
mod primitives;
mod search;

pub use audit::{AdrReport, CorkscrewReport, DistanceConsistency};
pub use instance::{make_instance, BoundarySet, Cell, CubeId, InstanceConfig, InstanceKind};
pub use primitives::{face_ball_measure, rect_disk_area, segment_ball_length, segment_box_distance, Aabb, AxisBox, Point, Shape};
pub use search::{DistanceProbe, Nearest, Scope};

use crate::{Error, Real, Result};

/// `sigma(cell)`; additive over children by construction.
pub fn surface_measure<T: Real>(e: &BoundarySet<T>, cell: &CubeId) -> Result<T> {
    if !e.contains_id(cell) {
        return Err(Error::NotInHierarchy(cell.label(e.branching)));
    }
    Ok(e.measure(cell.gen))
}

pub fn distance<T: Real>(e: &BoundarySet<T>, x: &Point<T>) -> T {
    e.distance(x)
}

pub fn nearest_boundary_point<T: Real>(e: &BoundarySet<T>, x: &Point<T>) -> Point<T> {
    e.nearest_boundary_point(x)
}
