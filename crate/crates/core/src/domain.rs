//! Uniform cell-centred grids over bounded open sets.
//!
//! A [`GridDomain`] is a lattice of cell centres together with a mask that
//! selects the nodes belonging to the open set. Nodes carry midpoint-rule
//! weights (the cell volume) and zero weight when masked out. Grid functions
//! are extended by zero outside the mask; additionally every masked node whose
//! backward neighbour (along some axis) lies outside the set is pinned to zero.
//! With forward differences this makes the discrete gradient see both the
//! entry and the exit jump of a function, which is the discrete analogue of
//! membership in `W_0^{1,p}`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the ambient space. In one dimension the second coordinate is 0.
pub type Point = [f64; 2];

/// Smallest admissible number of cells per axis.
pub const MIN_RESOLUTION: usize = 4;

/// Geometric description of a bounded open set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Interval { a: f64, b: f64 },
    Rectangle { x: [f64; 2], y: [f64; 2] },
    /// A ball in one or two dimensions; the dimension is `center.len()`.
    Ball { center: Vec<f64>, radius: f64 },
}

impl Shape {
    pub fn interval(a: f64, b: f64) -> Self {
        Shape::Interval { a, b }
    }

    pub fn rectangle(x: [f64; 2], y: [f64; 2]) -> Self {
        Shape::Rectangle { x, y }
    }

    pub fn ball(center: Point, radius: f64, dimension: usize) -> Self {
        Shape::Ball {
            center: center[..dimension.min(2)].to_vec(),
            radius,
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Shape::Interval { .. } => 1,
            Shape::Rectangle { .. } => 2,
            Shape::Ball { center, .. } => center.len(),
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|c| c.is_finite());
        match self {
            Shape::Interval { a, b } => {
                if !finite(&[*a, *b]) || b <= a {
                    return Err(Error::InvalidDomain(format!(
                        "interval ({a}, {b}) must have positive length"
                    )));
                }
            }
            Shape::Rectangle { x, y } => {
                if !finite(x) || !finite(y) || x[1] <= x[0] || y[1] <= y[0] {
                    return Err(Error::InvalidDomain(
                        "rectangle must have positive extents".into(),
                    ));
                }
            }
            Shape::Ball { center, radius } => {
                if center.is_empty() || center.len() > 2 {
                    return Err(Error::InvalidDomain(format!(
                        "ball dimension {} not supported (1 or 2)",
                        center.len()
                    )));
                }
                if !finite(center) || !radius.is_finite() || *radius <= 0.0 {
                    return Err(Error::InvalidDomain(
                        "ball radius must be positive".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    fn center_point(center: &[f64]) -> Point {
        [center[0], center.get(1).copied().unwrap_or(0.0)]
    }

    /// Axis-aligned bounding box as `(lower, upper)`.
    pub fn bounding_box(&self) -> (Point, Point) {
        match self {
            Shape::Interval { a, b } => ([*a, 0.0], [*b, 0.0]),
            Shape::Rectangle { x, y } => ([x[0], y[0]], [x[1], y[1]]),
            Shape::Ball { center, radius } => {
                let c = Self::center_point(center);
                if center.len() == 1 {
                    ([c[0] - radius, 0.0], [c[0] + radius, 0.0])
                } else {
                    ([c[0] - radius, c[1] - radius], [c[0] + radius, c[1] + radius])
                }
            }
        }
    }

    /// Membership of a point in the open set.
    pub fn contains(&self, x: Point) -> bool {
        match self {
            Shape::Interval { a, b } => *a < x[0] && x[0] < *b,
            Shape::Rectangle { x: xr, y: yr } => {
                xr[0] < x[0] && x[0] < xr[1] && yr[0] < x[1] && x[1] < yr[1]
            }
            Shape::Ball { center, radius } => {
                distance(x, Self::center_point(center)) < *radius
            }
        }
    }

    /// Whether the closed ball `B_radius(center)` lies inside the closure of the set.
    pub fn contains_ball(&self, center: Point, radius: f64) -> bool {
        let slack = 1e-12 * (1.0 + radius);
        match self {
            Shape::Interval { a, b } => center[0] - radius >= a - slack && center[0] + radius <= b + slack,
            Shape::Rectangle { x, y } => {
                center[0] - radius >= x[0] - slack
                    && center[0] + radius <= x[1] + slack
                    && center[1] - radius >= y[0] - slack
                    && center[1] + radius <= y[1] + slack
            }
            Shape::Ball { center: c, radius: r } => {
                distance(center, Self::center_point(c)) + radius <= r + slack
            }
        }
    }

    /// Exact Lebesgue measure of the set.
    pub fn measure(&self) -> f64 {
        match self {
            Shape::Interval { a, b } => b - a,
            Shape::Rectangle { x, y } => (x[1] - x[0]) * (y[1] - y[0]),
            Shape::Ball { center, radius } => {
                if center.len() == 1 {
                    2.0 * radius
                } else {
                    std::f64::consts::PI * radius * radius
                }
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        match self {
            Shape::Ball { radius, .. } => 2.0 * radius,
            _ => distance(lo, hi),
        }
    }
}

pub fn distance(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// A discretized bounded open set with midpoint quadrature.
#[derive(Clone, Debug)]
pub struct GridDomain {
    shape: Shape,
    dim: usize,
    cells: [usize; 2],
    spacing: [f64; 2],
    origin: Point,
    mask: Vec<bool>,
    pinned: Vec<bool>,
    weights: Vec<f64>,
}

impl PartialEq for GridDomain {
    fn eq(&self, other: &Self) -> bool {
        self.same_lattice(other) && self.mask == other.mask
    }
}

/// Builds a grid with `resolution` cells per axis over the bounding box of `shape`.
pub fn make_domain(shape: Shape, resolution: usize) -> Result<GridDomain> {
    shape.validate()?;
    if resolution < MIN_RESOLUTION {
        return Err(Error::InvalidDomain(format!(
            "resolution {resolution} below minimum {MIN_RESOLUTION}"
        )));
    }
    let dim = shape.dimension();
    let (lo, hi) = shape.bounding_box();
    let cells = if dim == 1 { [resolution, 1] } else { [resolution, resolution] };
    let spacing = if dim == 1 {
        [(hi[0] - lo[0]) / resolution as f64, 1.0]
    } else {
        [
            (hi[0] - lo[0]) / resolution as f64,
            (hi[1] - lo[1]) / resolution as f64,
        ]
    };
    let mut domain = GridDomain {
        shape,
        dim,
        cells,
        spacing,
        origin: lo,
        mask: Vec::new(),
        pinned: Vec::new(),
        weights: Vec::new(),
    };
    let shape = domain.shape.clone();
    domain.set_mask(|_, x| shape.contains(x))?;
    Ok(domain)
}

impl GridDomain {
    /// Same lattice, mask restricted to the nodes whose cell centre lies in `shape`.
    pub fn restrict(&self, shape: Shape) -> Result<GridDomain> {
        shape.validate()?;
        if shape.dimension() != self.dim {
            return Err(Error::InvalidDomain(format!(
                "sub-shape dimension {} differs from domain dimension {}",
                shape.dimension(),
                self.dim
            )));
        }
        let parent = self.mask.clone();
        let mut domain = GridDomain {
            shape: shape.clone(),
            mask: Vec::new(),
            pinned: Vec::new(),
            weights: Vec::new(),
            ..self.clone()
        };
        domain.set_mask(|i, x| parent[i] && shape.contains(x))?;
        Ok(domain)
    }

    fn set_mask(&mut self, inside: impl Fn(usize, Point) -> bool) -> Result<()> {
        let n = self.len();
        self.mask = (0..n).map(|i| inside(i, self.node(i))).collect();
        if !self.mask.iter().any(|&m| m) {
            return Err(Error::InvalidDomain("no grid node inside the set".into()));
        }
        let cell_volume: f64 = self.spacing[..self.dim].iter().product();
        self.weights = self
            .mask
            .iter()
            .map(|&m| if m { cell_volume } else { 0.0 })
            .collect();
        self.pinned = (0..n)
            .map(|i| {
                self.mask[i]
                    && (0..self.dim).any(|axis| match self.backward(i, axis) {
                        Some(j) => !self.mask[j],
                        None => true,
                    })
            })
            .collect();
        if !(0..n).any(|i| self.is_free(i)) {
            return Err(Error::InvalidDomain(
                "no interior node left after the boundary layer".into(),
            ));
        }
        Ok(())
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    /// Cells per axis of the underlying lattice.
    pub fn cells(&self) -> [usize; 2] {
        self.cells
    }

    pub fn spacing(&self) -> [f64; 2] {
        self.spacing
    }

    /// Smallest spacing over the active axes.
    pub fn min_spacing(&self) -> f64 {
        self.spacing[..self.dim]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn len(&self) -> usize {
        self.cells[0] * self.cells[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn in_mask(&self, i: usize) -> bool {
        self.mask[i]
    }

    /// Nodes whose value is forced to zero (masked-out or boundary layer).
    pub fn is_constrained(&self, i: usize) -> bool {
        !self.mask[i] || self.pinned[i]
    }

    pub fn is_free(&self, i: usize) -> bool {
        self.mask[i] && !self.pinned[i]
    }

    /// Sum of quadrature weights.
    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Coordinates of the cell centre of node `i`.
    pub fn node(&self, i: usize) -> Point {
        let (ix, iy) = (i % self.cells[0], i / self.cells[0]);
        let x = self.origin[0] + (ix as f64 + 0.5) * self.spacing[0];
        if self.dim == 1 {
            [x, 0.0]
        } else {
            [x, self.origin[1] + (iy as f64 + 0.5) * self.spacing[1]]
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.len()).map(|i| self.node(i))
    }

    /// Index of the node one step forward along `axis`, if it is on the lattice.
    pub fn forward(&self, i: usize, axis: usize) -> Option<usize> {
        let (ix, iy) = (i % self.cells[0], i / self.cells[0]);
        match axis {
            0 if ix + 1 < self.cells[0] => Some(i + 1),
            1 if iy + 1 < self.cells[1] => Some(i + self.cells[0]),
            _ => None,
        }
    }

    pub fn backward(&self, i: usize, axis: usize) -> Option<usize> {
        let (ix, iy) = (i % self.cells[0], i / self.cells[0]);
        match axis {
            0 if ix > 0 => Some(i - 1),
            1 if iy > 0 => Some(i - self.cells[0]),
            _ => None,
        }
    }

    /// Index of the node nearest to `x` (over the whole lattice).
    pub fn nearest_node(&self, x: Point) -> usize {
        let idx = |axis: usize| {
            let t = ((x[axis] - self.origin[axis]) / self.spacing[axis] - 0.5).round();
            (t.max(0.0) as usize).min(self.cells[axis] - 1)
        };
        if self.dim == 1 {
            idx(0)
        } else {
            idx(1) * self.cells[0] + idx(0)
        }
    }

    /// Masked nodes whose cell centre lies in the closed ball `B_r(c)`.
    pub fn nodes_in_ball(&self, c: Point, r: f64) -> Vec<usize> {
        let range = |axis: usize| {
            if axis >= self.dim {
                return (0, 0);
            }
            let to_idx = |x: f64| (x - self.origin[axis]) / self.spacing[axis] - 0.5;
            let lo = to_idx(c[axis] - r).ceil().max(0.0) as usize;
            let hi = to_idx(c[axis] + r).floor();
            if hi < 0.0 {
                return (1, 0);
            }
            (lo, (hi as usize).min(self.cells[axis] - 1))
        };
        let (x0, x1) = range(0);
        let (y0, y1) = range(1);
        let mut out = Vec::new();
        for iy in y0..=y1 {
            for ix in x0..=x1 {
                let i = iy * self.cells[0] + ix;
                if self.mask[i] && distance(self.node(i), c) <= r {
                    out.push(i);
                }
            }
        }
        out
    }

    pub fn same_lattice(&self, other: &GridDomain) -> bool {
        self.dim == other.dim
            && self.cells == other.cells
            && self.spacing == other.spacing
            && self.origin == other.origin
    }

    /// Whether `self` is a masked subset of `other` on the same lattice.
    pub fn is_subdomain_of(&self, other: &GridDomain) -> bool {
        self.same_lattice(other)
            && self
                .mask
                .iter()
                .zip(&other.mask)
                .all(|(&inner, &outer)| !inner || outer)
    }
}

/// Midpoint-rule integral `Σ f(node)·weight(node)` over the unmasked nodes.
pub fn integrate(f: &[f64], domain: &GridDomain) -> Result<f64> {
    if f.len() != domain.len() {
        return Err(Error::DomainMismatch);
    }
    let mut sum = 0.0;
    for (i, (&v, &w)) in f.iter().zip(domain.weights()).enumerate() {
        if !domain.in_mask(i) {
            continue;
        }
        if !v.is_finite() {
            return Err(Error::NonFinite { node: i });
        }
        sum += v * w;
    }
    Ok(sum)
}

/// A scalar field on a grid, zero on constrained nodes.
#[derive(Clone, Debug)]
pub struct GridFunction {
    domain: Arc<GridDomain>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(domain: &Arc<GridDomain>) -> Self {
        GridFunction {
            domain: Arc::clone(domain),
            values: vec![0.0; domain.len()],
        }
    }

    /// Samples `f` at every free node; constrained nodes get 0.
    pub fn from_fn(domain: &Arc<GridDomain>, f: impl Fn(Point) -> f64) -> Self {
        let values = (0..domain.len())
            .map(|i| if domain.is_free(i) { f(domain.node(i)) } else { 0.0 })
            .collect();
        GridFunction {
            domain: Arc::clone(domain),
            values,
        }
    }

    /// Wraps raw node values, zeroing the constrained nodes.
    pub fn from_values(domain: &Arc<GridDomain>, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::DomainMismatch);
        }
        for (i, v) in values.iter_mut().enumerate() {
            if domain.is_constrained(i) {
                *v = 0.0;
            }
        }
        Ok(GridFunction {
            domain: Arc::clone(domain),
            values,
        })
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        GridFunction {
            domain: Arc::clone(&self.domain),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(node) => Err(Error::NonFinite { node }),
            None => Ok(()),
        }
    }
}

/// Per-node forward-difference gradient.
#[derive(Clone, Debug)]
pub struct Gradient {
    dim: usize,
    components: Vec<[f64; 2]>,
}

impl Gradient {
    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[[f64; 2]] {
        &self.components
    }

    /// Euclidean length `|∇u|` at every node.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.components
            .iter()
            .map(|g| (g[0] * g[0] + g[1] * g[1]).sqrt())
            .collect()
    }
}

/// Forward differences `(u(x + h e_k) - u(x)) / h` with zero extension.
pub fn gradient(u: &GridFunction) -> Gradient {
    let domain = u.domain();
    Gradient {
        dim: domain.dimension(),
        components: forward_differences(domain, u.values()),
    }
}

pub(crate) fn forward_differences(domain: &GridDomain, values: &[f64]) -> Vec<[f64; 2]> {
    let h = domain.spacing();
    (0..domain.len())
        .map(|i| {
            let mut g = [0.0; 2];
            for (axis, slot) in g.iter_mut().enumerate().take(domain.dimension()) {
                let ahead = domain.forward(i, axis).map_or(0.0, |j| values[j]);
                *slot = (ahead - values[i]) / h[axis];
            }
            g
        })
        .collect()
}

/// Adjoint of [`forward_differences`]: `Dᵀ y` for a per-node vector field `y`.
pub(crate) fn forward_differences_adjoint(domain: &GridDomain, field: &[[f64; 2]]) -> Vec<f64> {
    let h = domain.spacing();
    let mut out = vec![0.0; domain.len()];
    for (i, y) in field.iter().enumerate() {
        for axis in 0..domain.dimension() {
            let c = y[axis] / h[axis];
            out[i] -= c;
            if let Some(j) = domain.forward(i, axis) {
                out[j] += c;
            }
        }
    }
    out
}
