//! Meshes on `[0, 1]` and the nodal / cell-wise function types built on them.
//!
//! All integrals over a cell of products of linear factors are evaluated in
//! closed form, so assembly is exact for the representable coefficient class.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Absolute tolerance under which two node coordinates are considered equal.
pub const NODE_TOL: f64 = 1e-12;

/// A partition `0 = x_0 < x_1 < ... < x_M = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<f64>,
}

impl Mesh {
    /// Wraps an explicit node list after validating it.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::Domain("a mesh needs at least two nodes".into()));
        }
        if nodes[0] != 0.0 || *nodes.last().unwrap() != 1.0 {
            return Err(Error::Domain(format!(
                "mesh endpoints must be exactly 0 and 1, got {} and {}",
                nodes[0],
                nodes.last().unwrap()
            )));
        }
        if let Some(w) = nodes.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::Domain(format!(
                "mesh nodes must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(Self { nodes })
    }

    /// The uniform grid `{k / n_cells}`.
    pub fn uniform(n_cells: usize) -> Self {
        let n = n_cells.max(1);
        let mut nodes: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
        nodes[n] = 1.0;
        Self { nodes }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_cells(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Endpoints of cell `i`.
    pub fn cell(&self, i: usize) -> (f64, f64) {
        (self.nodes[i], self.nodes[i + 1])
    }

    pub fn width(&self, i: usize) -> f64 {
        self.nodes[i + 1] - self.nodes[i]
    }

    pub fn midpoint(&self, i: usize) -> f64 {
        0.5 * (self.nodes[i] + self.nodes[i + 1])
    }

    /// Index of the node within [`NODE_TOL`] of `x`, if any.
    pub fn node_index(&self, x: f64) -> Option<usize> {
        let i = self.nodes.partition_point(|&n| n < x - NODE_TOL);
        (i < self.nodes.len() && (self.nodes[i] - x).abs() <= NODE_TOL).then_some(i)
    }

    /// Cell containing `x`; nodes belong to the cell on their right except `x = 1`.
    pub fn locate(&self, x: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!("point {x} outside [0, 1]")));
        }
        let i = self.nodes.partition_point(|&n| n <= x);
        Ok(i.saturating_sub(1).min(self.n_cells() - 1))
    }
}

/// Union of the uniform grid with `required_nodes`, merged within [`NODE_TOL`].
///
/// Required nodes closer than the tolerance to a grid node collapse onto the
/// grid node; near-duplicates among the required nodes keep the smallest.
pub fn build_mesh(n_cells: usize, required_nodes: &[f64]) -> Result<Mesh> {
    if n_cells == 0 {
        return Err(Error::Domain("n_cells must be at least 1".into()));
    }
    if let Some(&bad) = required_nodes.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::Domain(format!("required node {bad} outside [0, 1]")));
    }
    let grid = Mesh::uniform(n_cells);
    let mut extra: Vec<f64> = required_nodes
        .iter()
        .copied()
        .filter(|&x| grid.node_index(x).is_none())
        .collect();
    extra.sort_by(f64::total_cmp);
    extra.dedup_by(|b, a| (*b - *a).abs() <= NODE_TOL);

    let mut nodes = grid.nodes;
    nodes.extend(extra);
    nodes.sort_by(f64::total_cmp);
    Mesh::from_nodes(nodes)
}

/// Continuous piecewise-linear function given by nodal values.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_nodes() {
            return Err(Error::Precondition(format!(
                "{} nodal values for a mesh with {} nodes",
                values.len(),
                mesh.n_nodes()
            )));
        }
        Ok(Self { mesh, values })
    }

    /// Nodal interpolant of `f`.
    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn(f64) -> f64) -> Self {
        let values = mesh.nodes().iter().map(|&x| f(x)).collect();
        Self { mesh, values }
    }

    pub fn constant(mesh: Arc<Mesh>, c: f64) -> Self {
        let values = vec![c; mesh.n_nodes()];
        Self { mesh, values }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Linear interpolation between the bracketing nodes.
    pub fn evaluate(&self, x: f64) -> Result<f64> {
        let i = self.mesh.locate(x)?;
        let (a, b) = self.mesh.cell(i);
        let s = (x - a) / (b - a);
        Ok((1.0 - s) * self.values[i] + s * self.values[i + 1])
    }

    /// Cell-wise slope.
    pub fn derivative(&self) -> PiecewiseConstant {
        let values = (0..self.mesh.n_cells())
            .map(|i| (self.values[i + 1] - self.values[i]) / self.mesh.width(i))
            .collect();
        PiecewiseConstant {
            mesh: self.mesh.clone(),
            values,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Exact integral over `[0, 1]`.
    pub fn integral(&self) -> f64 {
        (0..self.mesh.n_cells())
            .map(|i| 0.5 * self.mesh.width(i) * (self.values[i] + self.values[i + 1]))
            .sum()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            mesh: self.mesh.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Function constant on each cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstant {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl PiecewiseConstant {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_cells() {
            return Err(Error::Precondition(format!(
                "{} cell values for a mesh with {} cells",
                values.len(),
                mesh.n_cells()
            )));
        }
        Ok(Self { mesh, values })
    }

    /// Samples `f` at cell midpoints.
    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..mesh.n_cells()).map(|i| f(mesh.midpoint(i))).collect();
        Self { mesh, values }
    }

    pub fn constant(mesh: Arc<Mesh>, c: f64) -> Self {
        let values = vec![c; mesh.n_cells()];
        Self { mesh, values }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Value on the cell containing `x` (right cell at interior nodes).
    pub fn evaluate(&self, x: f64) -> Result<f64> {
        Ok(self.values[self.mesh.locate(x)?])
    }

    /// Re-expresses the function on a finer `mesh` containing every breakpoint.
    pub fn on_mesh(&self, mesh: &Arc<Mesh>) -> Result<Self> {
        if let Some(&k) = self.mesh.nodes().iter().find(|&&k| mesh.node_index(k).is_none()) {
            return Err(Error::Precondition(format!("breakpoint {k} is not a mesh node")));
        }
        let values = (0..mesh.n_cells())
            .map(|i| self.evaluate(mesh.midpoint(i)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            mesh: mesh.clone(),
            values,
        })
    }

    /// Composition with `t ↦ 1 - t`.
    pub fn reflect(&self) -> Self {
        let mut nodes: Vec<f64> = self.mesh.nodes().iter().rev().map(|x| 1.0 - x).collect();
        let n = nodes.len();
        nodes[0] = 0.0;
        nodes[n - 1] = 1.0;
        Self {
            mesh: Arc::new(Mesh::from_nodes(nodes).expect("reflected mesh is valid")),
            values: self.values.iter().rev().copied().collect(),
        }
    }
}

/// Piecewise-linear function that may jump at nodes: each cell stores its own
/// left and right trace.
#[derive(Debug, Clone, PartialEq)]
pub struct CellLinear {
    mesh: Arc<Mesh>,
    left: Vec<f64>,
    right: Vec<f64>,
}

impl CellLinear {
    pub fn new(mesh: Arc<Mesh>, left: Vec<f64>, right: Vec<f64>) -> Result<Self> {
        if left.len() != mesh.n_cells() || right.len() != mesh.n_cells() {
            return Err(Error::Precondition("cell trace length mismatch".into()));
        }
        Ok(Self { mesh, left, right })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    /// `(value at left end, value at right end)` of cell `i`.
    pub fn traces(&self, i: usize) -> (f64, f64) {
        (self.left[i], self.right[i])
    }

    /// Value inside cell `i` at `x`.
    pub fn in_cell(&self, i: usize, x: f64) -> f64 {
        let (a, b) = self.mesh.cell(i);
        let s = (x - a) / (b - a);
        (1.0 - s) * self.left[i] + s * self.right[i]
    }

    /// Left-continuous point evaluation.
    pub fn evaluate(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!("point {x} outside [0, 1]")));
        }
        let nodes = self.mesh.nodes();
        let i = nodes.partition_point(|&n| n < x).clamp(1, self.mesh.n_cells()) - 1;
        Ok(self.in_cell(i, x))
    }

    /// Largest jump between adjacent cell traces.
    pub fn max_jump(&self) -> f64 {
        (1..self.mesh.n_cells())
            .map(|i| (self.left[i] - self.right[i - 1]).abs())
            .fold(0.0, f64::max)
    }
}

/// `∫ f g` over a cell of width `h` for linear `f`, `g` given by end values.
pub fn linear_product(h: f64, f: (f64, f64), g: (f64, f64)) -> f64 {
    h / 6.0 * (2.0 * f.0 * g.0 + f.0 * g.1 + f.1 * g.0 + 2.0 * f.1 * g.1)
}

/// `∫ f` over a cell of width `h` for linear `f`.
pub fn linear_integral(h: f64, f: (f64, f64)) -> f64 {
    0.5 * h * (f.0 + f.1)
}
