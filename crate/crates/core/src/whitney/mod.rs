//! Half-open Whitney decomposition of the domain box minus the boundary set,
//! with point location and the face complex.

mod faces;

use std::io::{self, Write};

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

pub use faces::{Face, FaceAudit, Incident};

use crate::geometry::{Aabb, AxisBox, BoundarySet, Point, Scope};
use crate::{Error, Real, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Node {
    Cube(u32),
    Internal,
    Unresolved,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct WhitneyCube<T: Real> {
    pub level: u8,
    pub coords: [u32; 3],
    pub cell: AxisBox<T>,
    /// Exact `dist(I, E_G)` for the closed cube.
    pub dist: T,
    /// Created by 2:1 balancing rather than by the distance rule.
    pub refined: bool,
}

impl<T: Real> WhitneyCube<T> {
    pub fn side(&self) -> T {
        self.cell.side
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct WhitneyParams<T: Real> {
    /// Smallest side kept. Defaults to the largest grid side at most `l_G` when the
    /// leaves are pieces of `E`, else the finest grid side at least a leaf diameter.
    pub min_side: Option<T>,
    /// Largest side; defaults to half the domain side.
    pub max_side: Option<T>,
    pub cube_budget: u64,
    /// Split cubes until face neighbours differ by at most a factor 2.
    pub balance: bool,
}

impl<T: Real> Default for WhitneyParams<T> {
    fn default() -> Self {
        WhitneyParams { min_side: None, max_side: None, cube_budget: 8_000_000, balance: true }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct WhitneyDecomposition<T: Real> {
    pub dim: usize,
    pub root: AxisBox<T>,
    /// Coarsest level whose side respects `max_side`.
    pub coarse_level: u8,
    /// Finest level (side `min_side`).
    pub fine_level: u8,
    pub cubes: Vec<WhitneyCube<T>>,
    pub unresolved_cells: u64,
    pub unresolved_volume: T,
    nodes: FxHashMap<u64, Node>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct WhitneyAudit {
    pub cubes: usize,
    pub volume_defect: f64,
    pub scale_rule_violations: usize,
    pub parent_rule_violations: usize,
    pub refined_cubes: usize,
    pub neighbor_ratio_violations: usize,
    pub max_dist_ratio: f64,
    pub unresolved_width: f64,
}

fn key(dim: usize, level: u8, c: &[u32; 3]) -> u64 {
    let l = (level as u64) << 58;
    if dim == 2 {
        l | ((c[0] as u64) << 29) | c[1] as u64
    } else {
        l | ((c[0] as u64) << 38) | ((c[1] as u64) << 19) | c[2] as u64
    }
}

/// Builds the decomposition of `domain \ E` with sides in `[min_side, max_side]`.
fn default_floor<T: Real>(set: &BoundarySet<T>, domain_side: T) -> T {
    if !set.kind.exact_pieces() {
        return set.leaf_diameter;
    }
    let target = set.side(set.depth);
    let mut side = domain_side;
    while side > target {
        side /= T::lit(2.0);
    }
    side
}

pub fn decompose<T: Real>(set: &BoundarySet<T>, domain: &AxisBox<T>, params: &WhitneyParams<T>) -> Result<WhitneyDecomposition<T>> {
    WhitneyDecomposition::build(set, domain, params)
}

impl<T: Real> WhitneyDecomposition<T> {
    pub fn build(set: &BoundarySet<T>, domain: &AxisBox<T>, params: &WhitneyParams<T>) -> Result<Self> {
        let dim = domain.dim();
        let s = domain.side;
        let level_of = |side: T| -> u8 {
            let mut l = 0u8;
            while s / T::lit(2f64.powi(l as i32 + 1)) >= side && l < 60 {
                l += 1;
            }
            l
        };
        let min_side = params.min_side.unwrap_or_else(|| default_floor(set, s));
        // below the leaf diameter a cover of E would be resolved instead of E
        if min_side < set.leaf_diameter && !set.kind.exact_pieces() {
            return Err(Error::InvalidParameter("min_side is below the leaf diameter".into()));
        }
        let fine_level = level_of(min_side);
        let max_side = params.max_side.unwrap_or(s / T::lit(2.0));
        let mut coarse_level = 0u8;
        while s / T::lit(2f64.powi(coarse_level as i32)) > max_side {
            coarse_level += 1;
        }
        let cap = if dim == 2 { 28 } else { 19 };
        if fine_level > cap {
            return Err(Error::InvalidParameter(format!("fine level {fine_level} exceeds lattice capacity {cap}")));
        }
        if coarse_level > fine_level {
            return Err(Error::InvalidParameter("max_side is below min_side".into()));
        }
        let mut w = WhitneyDecomposition {
            dim,
            root: *domain,
            coarse_level,
            fine_level,
            cubes: Vec::new(),
            unresolved_cells: 0,
            unresolved_volume: T::zero(),
            nodes: FxHashMap::default(),
        };
        let mut stack: Vec<(u8, [u32; 3])> = vec![(0, [0; 3])];
        let n_children = 1usize << dim;
        while let Some((level, c)) = stack.pop() {
            let cell = w.cell(level, &c);
            let h = cell.side;
            let node = if level < coarse_level {
                Node::Internal
            } else if !set.strictly_within(&cell.closure(), Scope::all(), h) {
                let dist = set.box_distance(&cell.closure(), Scope::all());
                if w.cubes.len() as u64 >= params.cube_budget {
                    return Err(Error::BudgetExceeded {
                        what: "whitney cube",
                        needed: w.cubes.len() as u64 + 1,
                        limit: params.cube_budget,
                    });
                }
                w.cubes.push(WhitneyCube { level, coords: c, cell, dist, refined: false });
                Node::Cube(w.cubes.len() as u32 - 1)
            } else if level >= fine_level {
                w.unresolved_cells += 1;
                w.unresolved_volume += cell.volume();
                Node::Unresolved
            } else {
                Node::Internal
            };
            w.nodes.insert(key(dim, level, &c), node);
            if node == Node::Internal {
                for bits in (0..n_children).rev() {
                    stack.push((level + 1, child_coords(&c, bits, dim)));
                }
            }
        }
        if params.balance {
            w.balance(set, params.cube_budget)?;
        }
        Ok(w)
    }

    pub fn side_at(&self, level: u8) -> T {
        self.root.side / T::lit(2f64.powi(level as i32))
    }

    pub fn min_side(&self) -> T {
        self.side_at(self.fine_level)
    }

    pub fn max_side(&self) -> T {
        self.side_at(self.coarse_level)
    }

    pub fn cell(&self, level: u8, c: &[u32; 3]) -> AxisBox<T> {
        let h = self.side_at(level);
        let mut lower = self.root.lower;
        for k in 0..self.dim {
            lower[k] += T::lit(c[k] as f64) * h;
        }
        AxisBox::new(lower, h, self.dim)
    }

    pub fn node(&self, level: u8, c: &[u32; 3]) -> Option<Node> {
        self.nodes.get(&key(self.dim, level, c)).copied()
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    /// Index of the cube containing `x`.
    pub fn locate(&self, x: &Point<T>) -> Result<usize> {
        if !self.root.contains(x) {
            return Err(Error::Outside);
        }
        for level in 0..=self.fine_level {
            let h = self.side_at(level);
            let n = 1u64 << level;
            let mut c = [0u32; 3];
            for k in 0..self.dim {
                let t = ((x.0[k] - self.root.lower[k]) / h).ceil().to_f64().unwrap_or(0.0) - 1.0;
                c[k] = t.max(0.0).min((n - 1) as f64) as u32;
            }
            match self.node(level, &c) {
                Some(Node::Cube(i)) => return Ok(i as usize),
                Some(Node::Unresolved) => return Err(Error::Unresolved),
                Some(Node::Internal) => continue,
                None => return Err(Error::Unresolved),
            }
        }
        Err(Error::Unresolved)
    }

    /// Visits cubes of the tree whose ancestors all pass `keep(level, box)`.
    pub fn descend<K, V>(&self, mut keep: K, mut visit: V)
    where
        K: FnMut(u8, &Aabb<T>) -> bool,
        V: FnMut(usize),
    {
        let n_children = 1usize << self.dim;
        let mut stack: Vec<(u8, [u32; 3])> = vec![(0, [0; 3])];
        while let Some((level, c)) = stack.pop() {
            let bx = self.cell(level, &c).closure();
            if !keep(level, &bx) {
                continue;
            }
            match self.node(level, &c) {
                Some(Node::Cube(i)) => visit(i as usize),
                Some(Node::Internal) => {
                    for bits in (0..n_children).rev() {
                        stack.push((level + 1, child_coords(&c, bits, self.dim)));
                    }
                }
                _ => {}
            }
        }
    }

    /// Unresolved cells meeting a closed box.
    pub fn touches_unresolved(&self, region: &Aabb<T>) -> bool {
        let n_children = 1usize << self.dim;
        let mut stack: Vec<(u8, [u32; 3])> = vec![(0, [0; 3])];
        while let Some((level, c)) = stack.pop() {
            let bx = self.cell(level, &c).closure();
            if !bx.intersects(region) {
                continue;
            }
            match self.node(level, &c) {
                Some(Node::Unresolved) => return true,
                Some(Node::Internal) => {
                    for bits in 0..n_children {
                        stack.push((level + 1, child_coords(&c, bits, self.dim)));
                    }
                }
                _ => {}
            }
        }
        false
    }

    fn balance(&mut self, set: &BoundarySet<T>, budget: u64) -> Result<()> {
        let mut alive: Vec<bool> = vec![true; self.cubes.len()];
        let mut work: Vec<usize> = (0..self.cubes.len()).rev().collect();
        let mut queued: Vec<bool> = vec![true; self.cubes.len()];
        let n_children = 1usize << self.dim;
        while let Some(i) = work.pop() {
            queued[i] = false;
            if !alive[i] {
                continue;
            }
            let (level, c) = (self.cubes[i].level, self.cubes[i].coords);
            if !self.needs_split(level, &c) {
                continue;
            }
            alive[i] = false;
            self.nodes.insert(key(self.dim, level, &c), Node::Internal);
            for bits in 0..n_children {
                let cc = child_coords(&c, bits, self.dim);
                let cell = self.cell(level + 1, &cc);
                let dist = set.box_distance(&cell.closure(), Scope::all());
                if self.cubes.len() as u64 >= budget {
                    return Err(Error::BudgetExceeded { what: "whitney cube", needed: self.cubes.len() as u64 + 1, limit: budget });
                }
                self.cubes.push(WhitneyCube { level: level + 1, coords: cc, cell, dist, refined: true });
                let id = self.cubes.len() - 1;
                alive.push(true);
                queued.push(true);
                work.push(id);
                self.nodes.insert(key(self.dim, level + 1, &cc), Node::Cube(id as u32));
            }
            for j in self.face_neighbors(level, &c) {
                if alive[j] && !queued[j] {
                    queued[j] = true;
                    work.push(j);
                }
            }
        }
        let old = std::mem::take(&mut self.cubes);
        let mut kept: Vec<WhitneyCube<T>> = old.into_iter().zip(alive).filter(|(_, a)| *a).map(|(c, _)| c).collect();
        kept.sort_by_key(|a| (a.level, a.coords));
        for (i, cube) in kept.iter().enumerate() {
            self.nodes.insert(key(self.dim, cube.level, &cube.coords), Node::Cube(i as u32));
        }
        self.cubes = kept;
        Ok(())
    }

    /// A face neighbour region holds a cube at least two levels finer.
    fn needs_split(&self, level: u8, c: &[u32; 3]) -> bool {
        let n = 1u64 << level;
        for axis in 0..self.dim {
            for dir in [-1i64, 1] {
                let v = c[axis] as i64 + dir;
                if v < 0 || v >= n as i64 {
                    continue;
                }
                let mut nc = *c;
                nc[axis] = v as u32;
                let bit = if dir > 0 { 0 } else { 1 };
                if self.fine_cube_on_face(level, &nc, axis, bit, level + 2) {
                    return true;
                }
            }
        }
        false
    }

    fn fine_cube_on_face(&self, level: u8, c: &[u32; 3], axis: usize, bit: u32, limit: u8) -> bool {
        match self.node(level, c) {
            Some(Node::Cube(_)) => level >= limit,
            Some(Node::Internal) => (0..1usize << self.dim)
                .map(|bits| child_coords(c, bits, self.dim))
                .filter(|cc| cc[axis] & 1 == bit)
                .any(|cc| self.fine_cube_on_face(level + 1, &cc, axis, bit, limit)),
            _ => false,
        }
    }

    /// Cubes of the same or a coarser level sharing a face with cell `(level, c)`.
    fn face_neighbors(&self, level: u8, c: &[u32; 3]) -> Vec<usize> {
        let mut out = Vec::new();
        let n = 1u64 << level;
        for axis in 0..self.dim {
            for dir in [-1i64, 1] {
                let v = c[axis] as i64 + dir;
                if v < 0 || v >= n as i64 {
                    continue;
                }
                let mut nc = *c;
                nc[axis] = v as u32;
                let mut l = level;
                loop {
                    match self.node(l, &nc) {
                        Some(Node::Cube(j)) => {
                            out.push(j as usize);
                            break;
                        }
                        Some(_) => break,
                        None => {
                            if l == 0 {
                                break;
                            }
                            l -= 1;
                            for k in 0..self.dim {
                                nc[k] >>= 1;
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn audit(&self, set: &BoundarySet<T>) -> WhitneyAudit {
        let mut a = WhitneyAudit { cubes: self.cubes.len(), ..Default::default() };
        let total: T = self.cubes.iter().map(|c| c.cell.volume()).sum::<T>() + self.unresolved_volume;
        a.volume_defect = ((total - self.root.volume()) / self.root.volume()).abs().as_f64();
        for cube in &self.cubes {
            let h = cube.side();
            if cube.dist < h {
                a.scale_rule_violations += 1;
            }
            a.max_dist_ratio = a.max_dist_ratio.max((cube.dist / h).as_f64());
            if cube.refined {
                a.refined_cubes += 1;
                continue;
            }
            if cube.level > self.coarse_level {
                let pc = cube.coords.map(|v| v >> 1);
                let parent = self.cell(cube.level - 1, &pc);
                if !set.strictly_within(&parent.closure(), Scope::all(), parent.side) {
                    a.parent_rule_violations += 1;
                }
            }
        }
        a.unresolved_width = self.min_side().as_f64();
        a.neighbor_ratio_violations = self
            .faces()
            .iter()
            .filter(|f| match (f.low, f.high) {
                (Incident::Cube(i), Incident::Cube(j)) => {
                    let r = (self.cubes[i as usize].side() / self.cubes[j as usize].side()).as_f64();
                    !(r == 0.5 || r == 1.0 || r == 2.0)
                }
                _ => false,
            })
            .count();
        a
    }

    /// CSV with one cube per row: lower corner, side, level, distance, owner label.
    pub fn write_csv<W: Write>(&self, mut out: W, owners: Option<&[String]>) -> io::Result<()> {
        writeln!(out, "id,x,y,z,side,level,dist,owner")?;
        for (i, c) in self.cubes.iter().enumerate() {
            let owner = owners.and_then(|o| o.get(i)).map(String::as_str).unwrap_or("");
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                i, c.cell.lower[0], c.cell.lower[1], c.cell.lower[2], c.side(), c.level, c.dist, owner
            )?;
        }
        Ok(())
    }

    /// Wavefront OBJ mesh: one quad per cube in the plane, six quads per cube in space.
    pub fn write_obj<W: Write>(&self, mut out: W) -> io::Result<()> {
        let mut v = 0usize;
        for c in &self.cubes {
            let b = c.cell.closure();
            if self.dim == 2 {
                for (x, y) in [(b.lo[0], b.lo[1]), (b.hi[0], b.lo[1]), (b.hi[0], b.hi[1]), (b.lo[0], b.hi[1])] {
                    writeln!(out, "v {x} {y} 0")?;
                }
                writeln!(out, "f {} {} {} {}", v + 1, v + 2, v + 3, v + 4)?;
                v += 4;
            } else {
                for k in 0..8 {
                    let p = [0, 1, 2].map(|a| if k >> a & 1 == 1 { b.hi[a] } else { b.lo[a] });
                    writeln!(out, "v {} {} {}", p[0], p[1], p[2])?;
                }
                for f in [[0, 2, 3, 1], [4, 5, 7, 6], [0, 1, 5, 4], [2, 6, 7, 3], [0, 4, 6, 2], [1, 3, 7, 5]] {
                    writeln!(out, "f {} {} {} {}", v + f[0] + 1, v + f[1] + 1, v + f[2] + 1, v + f[3] + 1)?;
                }
                v += 8;
            }
        }
        Ok(())
    }
}

pub(crate) fn child_coords(c: &[u32; 3], bits: usize, dim: usize) -> [u32; 3] {
    let mut out = [0u32; 3];
    for k in 0..dim {
        out[k] = 2 * c[k] + ((bits >> k) & 1) as u32;
    }
    out
}
