use std::fmt;

use serde::{Deserialize, Serialize};

use super::primitives::{Aabb, AxisBox, Point, Shape};
use crate::{Error, Real, Result};

/// Address of a cell in the natural hierarchy: generation plus index within it.
///
/// The index is the child path read as a base-`b` number, so index order is
/// lexicographic path order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CubeId {
    pub gen: u32,
    pub index: u64,
}

impl CubeId {
    pub const ROOT: CubeId = CubeId { gen: 0, index: 0 };

    pub fn new(gen: u32, index: u64) -> Self {
        CubeId { gen, index }
    }

    pub fn is_root(&self) -> bool {
        self.gen == 0
    }

    pub fn parent(&self, b: usize) -> Option<CubeId> {
        (self.gen > 0).then(|| CubeId { gen: self.gen - 1, index: self.index / b as u64 })
    }

    pub fn child(&self, b: usize, c: usize) -> CubeId {
        CubeId { gen: self.gen + 1, index: self.index * b as u64 + c as u64 }
    }

    pub fn children(&self, b: usize) -> impl Iterator<Item = CubeId> + '_ {
        let me = *self;
        (0..b).map(move |c| me.child(b, c))
    }

    /// Ancestor at generation `gen` (itself when equal); `None` when deeper.
    pub fn ancestor(&self, b: usize, gen: u32) -> Option<CubeId> {
        if gen > self.gen {
            return None;
        }
        let shift = (b as u64).pow(self.gen - gen);
        Some(CubeId { gen, index: self.index / shift })
    }

    /// `self ⊇ other` as cells of the hierarchy.
    pub fn contains(&self, b: usize, other: &CubeId) -> bool {
        other.ancestor(b, self.gen) == Some(*self)
    }

    pub fn path(&self, b: usize) -> Vec<usize> {
        let mut digits = Vec::with_capacity(self.gen as usize);
        let mut i = self.index;
        for _ in 0..self.gen {
            digits.push((i % b as u64) as usize);
            i /= b as u64;
        }
        digits.reverse();
        digits
    }

    pub fn from_path(b: usize, path: &[usize]) -> Result<CubeId> {
        let mut id = CubeId::ROOT;
        for &c in path {
            if c >= b {
                return Err(Error::Parse(format!("child index {c} out of range for branching {b}")));
            }
            id = id.child(b, c);
        }
        Ok(id)
    }

    /// `k3:0.2.1` style label.
    pub fn label(&self, b: usize) -> String {
        let path: Vec<String> = self.path(b).iter().map(|c| c.to_string()).collect();
        format!("k{}:{}", self.gen, path.join("."))
    }

    pub fn parse(s: &str, b: usize) -> Result<CubeId> {
        let s = s.trim();
        let rest = s.strip_prefix('k').ok_or_else(|| Error::Parse(s.to_string()))?;
        let (gen, path) = rest.split_once(':').ok_or_else(|| Error::Parse(s.to_string()))?;
        let gen: u32 = gen.parse().map_err(|_| Error::Parse(s.to_string()))?;
        let digits: Vec<usize> = if path.is_empty() {
            Vec::new()
        } else {
            path.split('.')
                .map(|d| d.parse::<usize>().map_err(|_| Error::Parse(s.to_string())))
                .collect::<Result<_>>()?
        };
        if digits.len() != gen as usize {
            return Err(Error::Parse(format!("{s}: path length does not match generation")));
        }
        CubeId::from_path(b, &digits)
    }
}

impl fmt::Display for CubeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "k{}#{}", self.gen, self.index)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum InstanceKind {
    HyperplanePatch,
    /// Sawtooth graph `y = a * dist(x, Z/teeth)` over `[0, 1]`.
    LipschitzGraph { slope: f64, teeth: u32 },
    FourCornerCantor,
    LinearCantor,
}

impl InstanceKind {
    pub fn name(&self) -> &'static str {
        match self {
            InstanceKind::HyperplanePatch => "hyperplane-patch",
            InstanceKind::LipschitzGraph { .. } => "lipschitz-graph",
            InstanceKind::FourCornerCantor => "four-corner-cantor",
            InstanceKind::LinearCantor => "linear-cantor",
        }
    }

    /// Leaf pieces are pieces of `E` itself rather than of a generation-`G` cover.
    pub fn exact_pieces(&self) -> bool {
        matches!(self, InstanceKind::HyperplanePatch | InstanceKind::LipschitzGraph { .. })
    }
}

/// Instance descriptor as read from configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceConfig {
    #[serde(flatten)]
    pub kind: InstanceKind,
    #[serde(default = "default_ambient")]
    pub ambient_dim: usize,
    pub depth: u32,
    #[serde(default = "default_cell_budget")]
    pub cell_budget: u64,
}

fn default_ambient() -> usize {
    2
}

fn default_cell_budget() -> u64 {
    4_000_000
}

impl InstanceConfig {
    pub fn new(kind: InstanceKind, ambient_dim: usize, depth: u32) -> Self {
        InstanceConfig { kind, ambient_dim, depth, cell_budget: default_cell_budget() }
    }

    pub fn segment(depth: u32) -> Self {
        Self::new(InstanceKind::HyperplanePatch, 2, depth)
    }

    pub fn patch3(depth: u32) -> Self {
        Self::new(InstanceKind::HyperplanePatch, 3, depth)
    }

    pub fn sawtooth(slope: f64, teeth: u32, depth: u32) -> Self {
        Self::new(InstanceKind::LipschitzGraph { slope, teeth }, 2, depth)
    }

    pub fn four_corner(depth: u32) -> Self {
        Self::new(InstanceKind::FourCornerCantor, 2, depth)
    }

    pub fn linear_cantor(depth: u32) -> Self {
        Self::new(InstanceKind::LinearCantor, 2, depth)
    }
}

/// A cell of the hierarchy with enough geometry to derive its children.
///
/// `lower` and `size` describe the x-interval (or square) the cell spans.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell<T: Real> {
    pub id: CubeId,
    pub lower: [T; 3],
    pub size: T,
}

/// Concrete ADR boundary set with its natural cell hierarchy.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BoundarySet<T: Real> {
    pub kind: InstanceKind,
    pub ambient_dim: usize,
    pub dimension: T,
    pub ratio: T,
    pub branching: usize,
    pub depth: u32,
    pub diam: T,
    pub total_measure: T,
    pub leaf_diameter: T,
    pub hull: Aabb<T>,
    pub domain: AxisBox<T>,
    slope: T,
    period: T,
}

/// Builds a boundary set from its descriptor.
pub fn make_instance<T: Real>(config: &InstanceConfig) -> Result<BoundarySet<T>> {
    BoundarySet::new(config)
}

impl<T: Real> BoundarySet<T> {
    pub fn new(config: &InstanceConfig) -> Result<Self> {
        let depth = config.depth;
        if depth < 1 {
            return Err(Error::InvalidParameter("depth must be at least 1".into()));
        }
        let dim = config.ambient_dim;
        let zero = T::zero();
        let one = T::one();
        let (branching, ratio, dimension, diam, total, hull, slope, period) = match config.kind {
            InstanceKind::HyperplanePatch => match dim {
                2 => (2, T::lit(0.5), one, one, one, Aabb::new([zero; 3], [one, zero, zero]), zero, zero),
                3 => (
                    4,
                    T::lit(0.5),
                    T::lit(2.0),
                    T::lit(2.0).sqrt(),
                    one,
                    Aabb::new([zero; 3], [one, one, zero]),
                    zero,
                    zero,
                ),
                _ => return Err(Error::UnsupportedInstance(format!("hyperplane-patch in dimension {dim}"))),
            },
            InstanceKind::LipschitzGraph { slope, teeth } => {
                if dim != 2 {
                    return Err(Error::UnsupportedInstance("lipschitz-graph is planar only".into()));
                }
                if !(0.0..=1.0).contains(&slope) {
                    return Err(Error::InvalidParameter(format!("graph slope {slope} outside [0, 1]")));
                }
                if teeth == 0 || !teeth.is_power_of_two() {
                    return Err(Error::InvalidParameter(format!("teeth {teeth} must be a power of two")));
                }
                if 1u64 << depth < 2 * teeth as u64 {
                    return Err(Error::InvalidParameter(format!(
                        "depth {depth} too shallow for {teeth} teeth: leaves must be straight"
                    )));
                }
                let a = T::lit(slope);
                let p = T::lit(1.0 / teeth as f64);
                let peak = a * p / T::lit(2.0);
                let hull = Aabb::new([zero; 3], [one, peak, zero]);
                let diam = sawtooth_diameter(a, teeth);
                (2, T::lit(0.5), one, diam, (one + a * a).sqrt(), hull, a, p)
            }
            InstanceKind::FourCornerCantor => {
                if dim != 2 {
                    return Err(Error::UnsupportedInstance("four-corner-cantor is planar only".into()));
                }
                (4, T::lit(0.25), one, T::lit(2.0).sqrt(), one, Aabb::new([zero; 3], [one, one, zero]), zero, zero)
            }
            InstanceKind::LinearCantor => {
                if dim != 2 {
                    return Err(Error::UnsupportedInstance("linear-cantor is planar only".into()));
                }
                let d = T::lit(2f64.ln() / 3f64.ln());
                (2, T::lit(1.0 / 3.0), d, one, one, Aabb::new([zero; 3], [one, zero, zero]), zero, zero)
            }
        };
        let cells = total_cells(branching as u64, depth);
        if cells > config.cell_budget {
            return Err(Error::BudgetExceeded { what: "cell", needed: cells, limit: config.cell_budget });
        }
        let domain = domain_box(&hull, diam, dim);
        let mut set = BoundarySet {
            kind: config.kind,
            ambient_dim: dim,
            dimension,
            ratio,
            branching,
            depth,
            diam,
            total_measure: total,
            leaf_diameter: zero,
            hull,
            domain,
            slope,
            period,
        };
        let leaf = set.cell(CubeId::new(depth, 0));
        set.leaf_diameter = set.shape(&leaf).bbox().diameter();
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        self.ambient_dim
    }

    /// Boundary dimension `n` of the ambient space `R^{n+1}`.
    pub fn codim_one(&self) -> usize {
        self.ambient_dim - 1
    }

    pub fn side(&self, gen: u32) -> T {
        self.ratio.powi(gen as i32) * self.diam
    }

    pub fn measure(&self, gen: u32) -> T {
        self.total_measure / T::lit(self.branching as f64).powi(gen as i32)
    }

    pub fn count(&self, gen: u32) -> u64 {
        (self.branching as u64).pow(gen)
    }

    pub fn root_cell(&self) -> Cell<T> {
        Cell { id: CubeId::ROOT, lower: [T::zero(); 3], size: T::one() }
    }

    pub fn child_cell(&self, cell: &Cell<T>, c: usize) -> Cell<T> {
        let b = self.branching;
        let id = cell.id.child(b, c);
        let s = cell.size;
        let mut lower = cell.lower;
        let size = match self.kind {
            InstanceKind::HyperplanePatch if self.ambient_dim == 3 => {
                let h = s / T::lit(2.0);
                lower[0] += T::lit((c & 1) as f64) * h;
                lower[1] += T::lit((c >> 1) as f64) * h;
                h
            }
            InstanceKind::HyperplanePatch | InstanceKind::LipschitzGraph { .. } => {
                let h = s / T::lit(2.0);
                lower[0] += T::lit(c as f64) * h;
                h
            }
            InstanceKind::FourCornerCantor => {
                let step = s * T::lit(0.75);
                lower[0] += T::lit((c & 1) as f64) * step;
                lower[1] += T::lit((c >> 1) as f64) * step;
                s / T::lit(4.0)
            }
            InstanceKind::LinearCantor => {
                lower[0] += T::lit(c as f64) * s * T::lit(2.0 / 3.0);
                s / T::lit(3.0)
            }
        };
        Cell { id, lower, size }
    }

    pub fn cell(&self, id: CubeId) -> Cell<T> {
        let mut cell = self.root_cell();
        for c in id.path(self.branching) {
            cell = self.child_cell(&cell, c);
        }
        cell
    }

    pub fn contains_id(&self, id: &CubeId) -> bool {
        id.gen <= self.depth && id.index < self.count(id.gen)
    }

    fn graph_height(&self, x: T) -> T {
        let p = self.period;
        let u = x - (x / p).floor() * p;
        self.slope * u.min(p - u)
    }

    pub fn bbox(&self, cell: &Cell<T>) -> Aabb<T> {
        let zero = T::zero();
        let (x, y, s) = (cell.lower[0], cell.lower[1], cell.size);
        match self.kind {
            InstanceKind::HyperplanePatch if self.ambient_dim == 3 => Aabb::new([x, y, zero], [x + s, y + s, zero]),
            InstanceKind::HyperplanePatch | InstanceKind::LinearCantor => Aabb::new([x, zero, zero], [x + s, zero, zero]),
            InstanceKind::FourCornerCantor => Aabb::new([x, y, zero], [x + s, y + s, zero]),
            InstanceKind::LipschitzGraph { .. } => {
                let (x0, x1) = (x, x + s);
                let half = self.period / T::lit(2.0);
                let mut lo = self.graph_height(x0).min(self.graph_height(x1));
                let mut hi = self.graph_height(x0).max(self.graph_height(x1));
                let mut k = (x0 / half).ceil();
                while k * half < x1 {
                    let h = self.graph_height(k * half);
                    lo = lo.min(h);
                    hi = hi.max(h);
                    k += T::one();
                }
                Aabb::new([x0, lo, zero], [x1, hi, zero])
            }
        }
    }

    /// Whether the part of the resolved set inside `cell` is exactly `shape(cell)`.
    pub fn is_exact(&self, cell: &Cell<T>) -> bool {
        match self.kind {
            InstanceKind::HyperplanePatch => true,
            InstanceKind::LipschitzGraph { .. } => cell.size <= self.period / T::lit(2.0),
            InstanceKind::FourCornerCantor | InstanceKind::LinearCantor => cell.id.gen >= self.depth,
        }
    }

    /// Geometric piece of the set inside an exact cell.
    pub fn shape(&self, cell: &Cell<T>) -> Shape<T> {
        match self.kind {
            InstanceKind::LipschitzGraph { .. } => {
                let (x0, x1) = (cell.lower[0], cell.lower[0] + cell.size);
                Shape::Segment(Point::new2(x0, self.graph_height(x0)), Point::new2(x1, self.graph_height(x1)))
            }
            _ => Shape::Rect(self.bbox(cell)),
        }
    }

    /// Point of the graph above `x`, for instances that are graphs over `[0, 1]`.
    pub fn height_at(&self, x: T) -> T {
        match self.kind {
            InstanceKind::LipschitzGraph { .. } => self.graph_height(x),
            _ => T::zero(),
        }
    }

    /// Inward unit normal used for trace probes (the upper side).
    pub fn probe_normal(&self) -> Point<T> {
        if self.ambient_dim == 3 {
            Point::new3(T::zero(), T::zero(), T::one())
        } else {
            Point::new2(T::zero(), T::one())
        }
    }
}

fn total_cells(b: u64, depth: u32) -> u64 {
    let mut total = 0u64;
    let mut layer = 1u64;
    for _ in 0..=depth {
        total = total.saturating_add(layer);
        layer = layer.saturating_mul(b);
    }
    total
}

fn sawtooth_diameter<T: Real>(a: T, teeth: u32) -> T {
    let p = T::one() / T::lit(teeth as f64);
    let half = p / T::lit(2.0);
    let n = 2 * teeth as usize;
    let pts: Vec<(T, T)> = (0..=n)
        .map(|k| {
            let x = T::lit(k as f64) * half;
            (x, if k % 2 == 1 { a * half } else { T::zero() })
        })
        .collect();
    let mut best = T::zero();
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let d = ((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2)).sqrt();
            best = best.max(d);
        }
    }
    best
}

/// Cube with power-of-two side at least the tight extent plus `diam`, centred on the
/// tight box, so every side keeps a margin of at least `diam / 2`.
fn domain_box<T: Real>(hull: &Aabb<T>, diam: T, dim: usize) -> AxisBox<T> {
    let extent = (0..dim).map(|k| hull.extent(k)).fold(T::zero(), |a, b| a.max(b));
    let need = extent + diam;
    let mut side = T::one();
    while side < need {
        side *= T::lit(2.0);
    }
    while side / T::lit(2.0) >= need {
        side /= T::lit(2.0);
    }
    let c = hull.center();
    let half = side / T::lit(2.0);
    AxisBox::new([c.0[0] - half, c.0[1] - half, c.0[2] - half], side, dim)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_id_labels_round_trip() {
        let id = CubeId::from_path(4, &[0, 2, 1]).unwrap();
        assert_eq!(id.label(4), "k3:0.2.1");
        assert_eq!(CubeId::parse("k3:0.2.1", 4).unwrap(), id);
        assert_eq!(CubeId::parse("k0:", 2).unwrap(), CubeId::ROOT);
        assert!(CubeId::parse("k2:0", 2).is_err());
        assert!(CubeId::parse("k1:5", 4).is_err());
    }

    #[test]
    fn containment_by_index() {
        let q = CubeId::new(2, 3);
        assert!(q.contains(2, &CubeId::new(4, 13)));
        assert!(!q.contains(2, &CubeId::new(4, 11)));
        assert!(CubeId::ROOT.contains(2, &q));
        assert!(!q.contains(2, &CubeId::new(1, 1)));
    }

    #[test]
    fn segment_leaves() {
        let e: BoundarySet<f64> = make_instance(&InstanceConfig::segment(3)).unwrap();
        assert_eq!(e.count(3), 8);
        let leaf = e.cell(CubeId::new(3, 5));
        assert_eq!(e.bbox(&leaf).lo[0], 5.0 / 8.0);
        assert_eq!(e.measure(3), 1.0 / 8.0);
        assert_eq!(e.domain.side, 2.0);
        assert_eq!(e.domain.lower, [-0.5, -1.0, 0.0]);
    }

    #[test]
    fn four_corner_cells() {
        let e: BoundarySet<f64> = make_instance(&InstanceConfig::four_corner(2)).unwrap();
        assert_eq!(e.count(2), 16);
        let c = e.cell(CubeId::from_path(4, &[3, 1]).unwrap());
        assert_eq!(c.lower, [0.75 + 0.1875, 0.75, 0.0]);
        assert_eq!(c.size, 1.0 / 16.0);
        assert_eq!(e.measure(2), 1.0 / 16.0);
        assert_eq!(e.domain.side, 4.0);
    }

    #[test]
    fn linear_cantor_cells() {
        let e: BoundarySet<f64> = make_instance(&InstanceConfig::linear_cantor(2)).unwrap();
        let c = e.cell(CubeId::from_path(2, &[1, 0]).unwrap());
        assert!((c.lower[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((c.size - 1.0 / 9.0).abs() < 1e-15);
        assert_eq!(e.measure(2), 0.25);
        assert!((e.dimension - 2f64.ln() / 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn sawtooth_geometry() {
        let e: BoundarySet<f64> = make_instance(&InstanceConfig::sawtooth(0.5, 4, 4)).unwrap();
        assert!((e.total_measure - 1.25f64.sqrt()).abs() < 1e-15);
        assert_eq!(e.diam, 1.0);
        let root = e.bbox(&e.root_cell());
        assert!((root.hi[1] - 0.0625).abs() < 1e-15);
        assert!(make_instance::<f64>(&InstanceConfig::sawtooth(0.5, 4, 2)).is_err());
        assert!(make_instance::<f64>(&InstanceConfig::sawtooth(1.5, 4, 4)).is_err());
    }

    #[test]
    fn budget_and_dimension_errors() {
        let mut cfg = InstanceConfig::four_corner(12);
        cfg.cell_budget = 1000;
        assert!(matches!(make_instance::<f64>(&cfg), Err(Error::BudgetExceeded { .. })));
        let cfg = InstanceConfig::new(InstanceKind::FourCornerCantor, 3, 2);
        assert!(matches!(make_instance::<f64>(&cfg), Err(Error::UnsupportedInstance(_))));
    }
}
