//! Distributional coefficients: an absolutely continuous part given through a
//! piecewise-linear primitive, plus finitely many point atoms.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meshfun::{linear_integral, CellLinear, Mesh, PiecewiseLinear, NODE_TOL};

/// A point mass `mass * δ(x - location)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

impl Atom {
    pub fn new(location: f64, mass: f64) -> Self {
        Self { location, mass }
    }
}

/// `f = W' + Σ c_j δ_{a_j}` with `W(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedFunction {
    primitive: PiecewiseLinear,
    atoms: Vec<Atom>,
}

impl GeneralizedFunction {
    /// Atoms are sorted by location; coincident locations are rejected.
    pub fn new(primitive: PiecewiseLinear, mut atoms: Vec<Atom>) -> Result<Self> {
        if primitive.values()[0] != 0.0 {
            return Err(Error::Precondition(format!(
                "primitive must vanish at 0, got {}",
                primitive.values()[0]
            )));
        }
        if let Some(a) = atoms.iter().find(|a| !(0.0..=1.0).contains(&a.location)) {
            return Err(Error::Domain(format!("atom at {} outside [0, 1]", a.location)));
        }
        atoms.sort_by(|a, b| a.location.total_cmp(&b.location));
        if atoms.windows(2).any(|w| (w[1].location - w[0].location).abs() <= NODE_TOL) {
            return Err(Error::Precondition("atom locations must be distinct".into()));
        }
        Ok(Self { primitive, atoms })
    }

    pub fn zero() -> Self {
        Self::from_primitive_values(vec![0.0, 1.0], vec![0.0, 0.0]).unwrap()
    }

    /// The Lebesgue measure, `W(t) = t`.
    pub fn lebesgue() -> Self {
        Self::from_primitive_values(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap()
    }

    /// Only atoms, no absolutely continuous part.
    pub fn atoms_only(atoms: Vec<Atom>) -> Result<Self> {
        Self::zero().with_atoms(atoms)
    }

    pub fn from_primitive_values(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let mesh = Arc::new(Mesh::from_nodes(knots)?);
        Self::new(PiecewiseLinear::new(mesh, values)?, Vec::new())
    }

    pub fn with_atoms(self, atoms: Vec<Atom>) -> Result<Self> {
        Self::new(self.primitive, atoms)
    }

    pub fn primitive(&self) -> &PiecewiseLinear {
        &self.primitive
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Knots of the primitive and atom locations; every mesh used with this
    /// coefficient must contain them.
    pub fn required_nodes(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.primitive.mesh().nodes().to_vec();
        v.extend(self.atoms.iter().map(|a| a.location));
        v
    }

    /// Total mass `W(1) + Σ c_j`.
    pub fn total_mass(&self) -> f64 {
        self.primitive.values().last().unwrap() + self.atoms.iter().map(|a| a.mass).sum::<f64>()
    }

    /// Nondecreasing primitive and nonnegative atoms.
    pub fn is_nonnegative(&self) -> bool {
        self.primitive.values().windows(2).all(|w| w[1] >= w[0])
            && self.atoms.iter().all(|a| a.mass >= 0.0)
    }

    /// Re-expresses the primitive on `mesh`; fails if a knot or atom is off-mesh.
    pub fn on_mesh(&self, mesh: &Arc<Mesh>) -> Result<Self> {
        self.check_on_mesh(mesh)?;
        let values = mesh
            .nodes()
            .iter()
            .map(|&x| self.primitive.evaluate(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            primitive: PiecewiseLinear::new(mesh.clone(), values)?,
            atoms: self.atoms.clone(),
        })
    }

    fn check_on_mesh(&self, mesh: &Mesh) -> Result<()> {
        for &k in self.primitive.mesh().nodes() {
            if mesh.node_index(k).is_none() {
                return Err(Error::Precondition(format!("primitive knot {k} is not a mesh node")));
            }
        }
        for a in &self.atoms {
            if mesh.node_index(a.location).is_none() {
                return Err(Error::Precondition(format!(
                    "atom at {} is not a mesh node",
                    a.location
                )));
            }
        }
        Ok(())
    }

    /// Primitive values and atom masses indexed by the nodes of `mesh`.
    pub(crate) fn nodal_data(&self, mesh: &Mesh) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_on_mesh(mesh)?;
        let w = mesh
            .nodes()
            .iter()
            .map(|&x| self.primitive.evaluate(x))
            .collect::<Result<Vec<_>>>()?;
        let mut masses = vec![0.0; mesh.n_nodes()];
        for a in &self.atoms {
            masses[mesh.node_index(a.location).unwrap()] += a.mass;
        }
        Ok((w, masses))
    }

    /// `∫ y df`, computed exactly for nodal `y` on a mesh carrying this coefficient.
    pub fn pair_with(&self, y: &PiecewiseLinear) -> Result<f64> {
        let mesh = y.mesh();
        let (w, masses) = self.nodal_data(mesh)?;
        let v = y.values();
        let ac: f64 = (0..mesh.n_cells())
            .map(|i| {
                let h = mesh.width(i);
                (w[i + 1] - w[i]) / h * linear_integral(h, (v[i], v[i + 1]))
            })
            .sum();
        let point: f64 = masses.iter().zip(v).map(|(c, y)| c * y).sum();
        Ok(ac + point)
    }

    /// Pushes the distribution forward under `t ↦ 1 - t`.
    pub fn reflect(&self) -> Self {
        let mesh = self.primitive.mesh();
        let nodes: Vec<f64> = mesh.nodes().iter().rev().map(|x| 1.0 - x).collect();
        let total = *self.primitive.values().last().unwrap();
        let values: Vec<f64> = self.primitive.values().iter().rev().map(|w| total - w).collect();
        let reflected = Mesh::from_nodes(fix_endpoints(nodes)).expect("reflected mesh is valid");
        let mut values = values;
        values[0] = 0.0;
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom::new(1.0 - a.location, a.mass))
            .collect();
        Self::new(
            PiecewiseLinear::new(Arc::new(reflected), values).unwrap(),
            atoms,
        )
        .expect("reflection preserves validity")
    }
}

fn fix_endpoints(mut nodes: Vec<f64>) -> Vec<f64> {
    let n = nodes.len();
    nodes[0] = 0.0;
    nodes[n - 1] = 1.0;
    nodes
}

/// The function `ω` and number `ω₁` with
/// `∫ (q - ξ r) y = -∫ ω y' + ω₁ y(1)` for every `y ∈ W₂¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedPrimitive {
    pub omega: CellLinear,
    pub omega1: f64,
    pub xi: f64,
}

/// Builds `ω = W_q - ξ W_r + Σ_{a_j ≤ t} (c_q,j - ξ c_r,j)` cell by cell.
///
/// An interior atom makes `ω` jump at its node; the traces of the cells on
/// either side store the two one-sided values.
pub fn shifted_primitive(
    q: &GeneralizedFunction,
    r: &GeneralizedFunction,
    xi: f64,
    mesh: &Arc<Mesh>,
) -> Result<ShiftedPrimitive> {
    let (wq, mq) = q.nodal_data(mesh)?;
    let (wr, mr) = r.nodal_data(mesh)?;
    let w: Vec<f64> = wq.iter().zip(&wr).map(|(a, b)| a - xi * b).collect();
    let mass: Vec<f64> = mq.iter().zip(&mr).map(|(a, b)| a - xi * b).collect();

    let n = mesh.n_cells();
    let mut left = Vec::with_capacity(n);
    let mut right = Vec::with_capacity(n);
    let mut acc = 0.0;
    for i in 0..n {
        acc += mass[i];
        left.push(w[i] + acc);
        right.push(w[i + 1] + acc);
    }
    let omega1 = w[n] + acc + mass[n];
    Ok(ShiftedPrimitive {
        omega: CellLinear::new(mesh.clone(), left, right)?,
        omega1,
        xi,
    })
}

impl ShiftedPrimitive {
    /// `-∫ ω y' + ω₁ y(1)` for nodal `y` on the same mesh.
    pub fn pair_with(&self, y: &PiecewiseLinear) -> f64 {
        let mesh = self.omega.mesh();
        let v = y.values();
        let bulk: f64 = (0..mesh.n_cells())
            .map(|i| {
                let h = mesh.width(i);
                let slope = (v[i + 1] - v[i]) / h;
                slope * linear_integral(h, self.omega.traces(i))
            })
            .sum();
        -bulk + self.omega1 * v[mesh.n_cells()]
    }
}

/// True iff every cell carries positive `r`-measure: the primitive strictly
/// increases across it, or an atom of positive mass sits in its closure.
pub fn validate_weight(r: &GeneralizedFunction, mesh: &Mesh) -> bool {
    (0..mesh.n_cells()).all(|i| {
        let (a, b) = mesh.cell(i);
        let rises = match (r.primitive.evaluate(a), r.primitive.evaluate(b)) {
            (Ok(wa), Ok(wb)) => wb > wa,
            _ => false,
        };
        rises
            || r
                .atoms
                .iter()
                .any(|at| at.mass > 0.0 && at.location >= a - NODE_TOL && at.location <= b + NODE_TOL)
    })
}
