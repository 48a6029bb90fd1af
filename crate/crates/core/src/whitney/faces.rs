use serde::{Deserialize, Serialize};

use super::{child_coords, Node, WhitneyDecomposition};
use crate::geometry::Aabb;
use crate::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Incident {
    Cube(u32),
    Unresolved,
    Exterior,
}

impl Incident {
    pub fn cube(&self) -> Option<usize> {
        match self {
            Incident::Cube(i) => Some(*i as usize),
            _ => None,
        }
    }
}

/// Axis-aligned square (segment in the plane) shared by two cells.
///
/// `low` is the cell on the negative side of the plane `x_axis = lower[axis]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Face<T: Real> {
    pub axis: u8,
    pub lower: [T; 3],
    pub side: T,
    pub low: Incident,
    pub high: Incident,
}

impl<T: Real> Face<T> {
    pub fn area(&self, dim: usize) -> T {
        self.side.powi(dim as i32 - 1)
    }

    pub fn rect(&self, dim: usize) -> Aabb<T> {
        let mut hi = self.lower;
        for k in 0..dim {
            if k != self.axis as usize {
                hi[k] += self.side;
            }
        }
        Aabb::new(self.lower, hi)
    }

    pub fn center(&self, dim: usize) -> crate::geometry::Point<T> {
        self.rect(dim).center()
    }

    /// Both sides are accepted cubes.
    pub fn is_interior(&self) -> bool {
        matches!((self.low, self.high), (Incident::Cube(_), Incident::Cube(_)))
    }

    pub fn touches_unresolved(&self) -> bool {
        self.low == Incident::Unresolved || self.high == Incident::Unresolved
    }

    pub fn other(&self, i: usize) -> Incident {
        if self.low == Incident::Cube(i as u32) {
            self.high
        } else {
            self.low
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct FaceAudit {
    pub faces: usize,
    pub interior: usize,
    pub unresolved: usize,
    pub exterior: usize,
    /// Cube sides whose face areas do not sum to the side area.
    pub tiling_defects: usize,
    pub max_tiling_error: f64,
}

impl<T: Real> WhitneyDecomposition<T> {
    /// Face complex: each adjacency between cells is reported once, split along the
    /// finer grid; faces against unresolved cells or the domain boundary are flagged.
    pub fn faces(&self) -> Vec<Face<T>> {
        let mut out = Vec::new();
        for (i, cube) in self.cubes.iter().enumerate() {
            let (level, c) = (cube.level, cube.coords);
            let n = 1u64 << level;
            let me = Incident::Cube(i as u32);
            for axis in 0..self.dim {
                for dir in [-1i64, 1] {
                    let plane = if dir > 0 { cube.cell.lower[axis] + cube.side() } else { cube.cell.lower[axis] };
                    let v = c[axis] as i64 + dir;
                    let mut full = cube.cell.lower;
                    full[axis] = plane;
                    let emit = |out: &mut Vec<Face<T>>, lower: [T; 3], side: T, other: Incident| {
                        let (low, high) = if dir > 0 { (me, other) } else { (other, me) };
                        out.push(Face { axis: axis as u8, lower, side, low, high });
                    };
                    if v < 0 || v >= n as i64 {
                        emit(&mut out, full, cube.side(), Incident::Exterior);
                        continue;
                    }
                    let mut nc = c;
                    nc[axis] = v as u32;
                    match self.node(level, &nc) {
                        Some(Node::Cube(j)) => {
                            if dir > 0 {
                                emit(&mut out, full, cube.side(), Incident::Cube(j));
                            }
                        }
                        Some(Node::Unresolved) => emit(&mut out, full, cube.side(), Incident::Unresolved),
                        Some(Node::Internal) => {
                            let bit = if dir > 0 { 0 } else { 1 };
                            let mut pieces = Vec::new();
                            self.unresolved_pieces(level, &nc, axis, bit, &mut pieces);
                            for (pl, pc) in pieces {
                                let cell = self.cell(pl, &pc);
                                let mut lower = cell.lower;
                                lower[axis] = plane;
                                emit(&mut out, lower, cell.side, Incident::Unresolved);
                            }
                        }
                        None => {
                            let mut l = level;
                            let mut pc = nc;
                            while l > 0 {
                                l -= 1;
                                for k in 0..self.dim {
                                    pc[k] >>= 1;
                                }
                                if let Some(Node::Cube(j)) = self.node(l, &pc) {
                                    emit(&mut out, full, cube.side(), Incident::Cube(j));
                                    break;
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Unresolved cells of the subtree at `(level, c)` touching its side `bit` along `axis`.
    fn unresolved_pieces(&self, level: u8, c: &[u32; 3], axis: usize, bit: u32, out: &mut Vec<(u8, [u32; 3])>) {
        match self.node(level, c) {
            Some(Node::Unresolved) => out.push((level, *c)),
            Some(Node::Internal) => {
                for bits in 0..1usize << self.dim {
                    let cc = child_coords(c, bits, self.dim);
                    if cc[axis] & 1 == bit {
                        self.unresolved_pieces(level + 1, &cc, axis, bit, out);
                    }
                }
            }
            _ => {}
        }
    }

    /// Checks that every cube side is tiled exactly by faces.
    pub fn face_audit(&self, faces: &[Face<T>]) -> FaceAudit {
        let mut sums = vec![T::zero(); self.cubes.len() * 2 * self.dim];
        let mut audit = FaceAudit { faces: faces.len(), ..Default::default() };
        for f in faces {
            let a = f.area(self.dim);
            let axis = f.axis as usize;
            if let Incident::Cube(i) = f.low {
                sums[(i as usize * self.dim + axis) * 2 + 1] += a;
            }
            if let Incident::Cube(j) = f.high {
                sums[(j as usize * self.dim + axis) * 2] += a;
            }
            match (f.low, f.high) {
                (Incident::Cube(_), Incident::Cube(_)) => audit.interior += 1,
                (Incident::Exterior, _) | (_, Incident::Exterior) => audit.exterior += 1,
                _ => audit.unresolved += 1,
            }
        }
        for (i, cube) in self.cubes.iter().enumerate() {
            let want = cube.side().powi(self.dim as i32 - 1);
            for s in 0..2 * self.dim {
                let err = ((sums[i * 2 * self.dim + s] - want) / want).abs().as_f64();
                audit.max_tiling_error = audit.max_tiling_error.max(err);
                if err > 0.0 {
                    audit.tiling_defects += 1;
                }
            }
        }
        audit
    }
}
