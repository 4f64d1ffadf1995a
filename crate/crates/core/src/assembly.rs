//! Boundary conditions and finite-element assembly of the quadratic form
//! `∫ p|y'|² + ∫ (q - λ r)|y|² + <V y^, y^>` on continuous P1 elements.

use std::ops::Range;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coefficients::{shifted_primitive, Atom, GeneralizedFunction};
use crate::error::{Error, Result};
use crate::meshfun::{build_mesh, Mesh, PiecewiseConstant, PiecewiseLinear};
use crate::tridiag::SymTridiagonal;

const UNIMODULAR_TOL: f64 = 1e-12;
const ARG_TOL: f64 = 1e-14;

/// Canonical boundary-condition families for a diagonal `U`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum BcKind {
    /// `y(0) = y(1) = 0`
    DirichletDirichlet,
    /// `y^[1](0) = y(1) = 0`
    NeumannDirichlet,
    /// `y(0) = y^[1](1) = 0`
    DirichletNeumann,
    /// `y^[1](0) = y^[1](1) = 0`, possibly with boundary terms from `V`.
    NeumannNeumann,
    /// `y^[1](0) = y^[1](1) + c y(1) = 0` with `c > 0`.
    RobinRight { c: f64 },
}

impl BcKind {
    pub fn dirichlet_left(self) -> bool {
        matches!(self, Self::DirichletDirichlet | Self::DirichletNeumann)
    }

    pub fn dirichlet_right(self) -> bool {
        matches!(self, Self::DirichletDirichlet | Self::NeumannDirichlet)
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::DirichletDirichlet => "dirichlet-dirichlet",
            Self::NeumannDirichlet => "neumann-dirichlet",
            Self::DirichletNeumann => "dirichlet-neumann",
            Self::NeumannNeumann => "neumann-neumann",
            Self::RobinRight { .. } => "robin-right",
        }
    }
}

/// Diagonal unitary `U`, the derived boundary matrix `V`, and the kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySpec {
    u: [Complex64; 2],
    v: [f64; 2],
    kind: BcKind,
}

fn is_one(u: Complex64) -> bool {
    u.arg().abs() <= ARG_TOL
}

fn entry_v(u: Complex64) -> f64 {
    if is_one(u) {
        return 0.0;
    }
    let half = 0.5 * u.arg();
    let c = half.cos();
    if c.abs() <= ARG_TOL {
        0.0
    } else {
        -c / half.sin()
    }
}

/// `V_kk = -cot(arg U_kk / 2)` for `U_kk ≠ 1`, else `0`; `arg ∈ (-π, π]`.
pub fn boundary_matrix(u: [Complex64; 2]) -> Result<[f64; 2]> {
    for (k, z) in u.iter().enumerate() {
        if (z.norm() - 1.0).abs() > UNIMODULAR_TOL {
            return Err(Error::Domain(format!(
                "U[{k}{k}] = {z} is not unimodular (|U| = {})",
                z.norm()
            )));
        }
    }
    Ok([entry_v(u[0]), entry_v(u[1])])
}

fn classify(u: [Complex64; 2], v: [f64; 2]) -> BcKind {
    match (is_one(u[0]), is_one(u[1])) {
        (true, true) => BcKind::DirichletDirichlet,
        (false, true) => BcKind::NeumannDirichlet,
        (true, false) => BcKind::DirichletNeumann,
        (false, false) if v[0] == 0.0 && v[1] > 0.0 => BcKind::RobinRight { c: v[1] },
        (false, false) => BcKind::NeumannNeumann,
    }
}

impl BoundarySpec {
    pub fn from_unitary(u: [Complex64; 2]) -> Result<Self> {
        let v = boundary_matrix(u)?;
        Ok(Self { u, v, kind: classify(u, v) })
    }

    /// `U_kk = exp(iπ θ_k)`, `θ_k ∈ (-1, 1]`.
    pub fn from_angles(theta: [f64; 2]) -> Result<Self> {
        if let Some(t) = theta.iter().find(|t| !(**t > -1.0 && **t <= 1.0)) {
            return Err(Error::Domain(format!("angle {t} (in units of π) outside (-1, 1]")));
        }
        let u = theta.map(|t| {
            if t == 0.0 {
                Complex64::new(1.0, 0.0)
            } else if t == 1.0 {
                Complex64::new(-1.0, 0.0)
            } else {
                Complex64::from_polar(1.0, std::f64::consts::PI * t)
            }
        });
        let v = theta.map(|t| {
            if t == 0.0 || t == 1.0 {
                0.0
            } else if t == 0.5 {
                -1.0
            } else if t == -0.5 {
                1.0
            } else {
                -1.0 / (0.5 * std::f64::consts::PI * t).tan()
            }
        });
        Ok(Self { u, v, kind: classify(u, v) })
    }

    /// One of the four `V = 0` kinds.
    pub fn canonical(kind: BcKind) -> Result<Self> {
        let one = Complex64::new(1.0, 0.0);
        let minus = Complex64::new(-1.0, 0.0);
        let u = match kind {
            BcKind::DirichletDirichlet => [one, one],
            BcKind::NeumannDirichlet => [minus, one],
            BcKind::DirichletNeumann => [one, minus],
            BcKind::NeumannNeumann => [minus, minus],
            BcKind::RobinRight { c } => return Self::robin_right(c),
        };
        Ok(Self { u, v: [0.0, 0.0], kind })
    }

    /// Natural left end, `y^[1](1) + c y(1) = 0` on the right; requires `c > 0`.
    pub fn robin_right(c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::Domain(format!("Robin constant must be positive, got {c}")));
        }
        // -cot(a/2) = c  with  a/2 = -atan(1/c)
        let arg = -2.0 * (1.0 / c).atan();
        Ok(Self {
            u: [Complex64::new(-1.0, 0.0), Complex64::from_polar(1.0, arg)],
            v: [0.0, c],
            kind: BcKind::RobinRight { c },
        })
    }

    pub fn u(&self) -> [Complex64; 2] {
        self.u
    }

    pub fn v(&self) -> [f64; 2] {
        self.v
    }

    pub fn kind(&self) -> BcKind {
        self.kind
    }

    /// Endpoints exchanged, as under `t ↦ 1 - t`.
    pub fn swapped(&self) -> Self {
        let u = [self.u[1], self.u[0]];
        let v = [self.v[1], self.v[0]];
        Self { u, v, kind: classify(u, v) }
    }
}

/// Splits `U` into a `V = 0` canonical kind plus the endpoint atoms that
/// carry the boundary terms of the form.
pub fn canonicalize_bc(u: [Complex64; 2]) -> Result<(BoundarySpec, Vec<Atom>)> {
    canonicalize_spec(&BoundarySpec::from_unitary(u)?)
}

pub(crate) fn canonicalize_spec(spec: &BoundarySpec) -> Result<(BoundarySpec, Vec<Atom>)> {
    let kind = match (is_one(spec.u[0]), is_one(spec.u[1])) {
        (true, true) => BcKind::DirichletDirichlet,
        (false, true) => BcKind::NeumannDirichlet,
        (true, false) => BcKind::DirichletNeumann,
        (false, false) => BcKind::NeumannNeumann,
    };
    let atoms = [(0.0, spec.v[0]), (1.0, spec.v[1])]
        .into_iter()
        .filter(|&(_, m)| m != 0.0)
        .map(|(x, m)| Atom::new(x, m))
        .collect();
    Ok((BoundarySpec::canonical(kind)?, atoms))
}

/// Coefficients and boundary data, independent of any mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub p: PiecewiseConstant,
    pub q: GeneralizedFunction,
    pub r: GeneralizedFunction,
    pub bc: BoundarySpec,
}

impl Problem {
    /// `p ≡ 1`, `q = 0`, `r` Lebesgue.
    pub fn constant(bc: BoundarySpec) -> Self {
        Self {
            p: PiecewiseConstant::constant(Arc::new(Mesh::uniform(1)), 1.0),
            q: GeneralizedFunction::zero(),
            r: GeneralizedFunction::lebesgue(),
            bc,
        }
    }

    pub fn required_nodes(&self) -> Vec<f64> {
        let mut v = self.p.mesh().nodes().to_vec();
        v.extend(self.q.required_nodes());
        v.extend(self.r.required_nodes());
        v
    }

    /// Uniform grid refined by every coefficient breakpoint and atom.
    pub fn mesh(&self, n_cells: usize) -> Result<Arc<Mesh>> {
        Ok(Arc::new(build_mesh(n_cells, &self.required_nodes())?))
    }

    pub fn assemble(&self, mesh: &Arc<Mesh>) -> Result<DiscretePencil> {
        assemble(&self.p, &self.q, &self.r, &self.bc, mesh)
    }

    /// Boundary terms moved into endpoint atoms of `q`; the result has `V = 0`.
    pub fn canonicalize(&self) -> Result<Self> {
        let (bc, extra) = canonicalize_spec(&self.bc)?;
        let mut atoms = self.q.atoms().to_vec();
        for a in extra {
            match atoms.iter_mut().find(|b| b.location == a.location) {
                Some(b) => b.mass += a.mass,
                None => atoms.push(a),
            }
        }
        Ok(Self {
            p: self.p.clone(),
            q: self.q.clone().with_atoms(atoms)?,
            r: self.r.clone(),
            bc,
        })
    }

    pub fn reflect(&self) -> Self {
        reflect(self)
    }
}

/// `t ↦ 1 - t`: coefficients reflected about ½, endpoints swapped.
pub fn reflect(problem: &Problem) -> Problem {
    Problem {
        p: problem.p.reflect(),
        q: problem.q.reflect(),
        r: problem.r.reflect(),
        bc: problem.bc.swapped(),
    }
}

/// `A(λ) = A_p + B_q - λ M_r` on the P1 space with Dirichlet nodes removed.
#[derive(Debug, Clone)]
pub struct DiscretePencil {
    mesh: Arc<Mesh>,
    bc: BoundarySpec,
    stiffness: SymTridiagonal,
    potential: SymTridiagonal,
    mass: SymTridiagonal,
    dofs: Range<usize>,
}

impl DiscretePencil {
    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn bc(&self) -> &BoundarySpec {
        &self.bc
    }

    /// Node indices that are unknowns.
    pub fn dofs(&self) -> Range<usize> {
        self.dofs.clone()
    }

    pub fn n_dofs(&self) -> usize {
        self.dofs.len()
    }

    pub fn a_p(&self) -> SymTridiagonal {
        self.stiffness.slice(self.dofs.start, self.dofs.end)
    }

    pub fn b_q(&self) -> SymTridiagonal {
        self.potential.slice(self.dofs.start, self.dofs.end)
    }

    pub fn m_r(&self) -> SymTridiagonal {
        self.mass.slice(self.dofs.start, self.dofs.end)
    }

    /// Unreduced matrices over all mesh nodes.
    pub fn full_a_p(&self) -> &SymTridiagonal {
        &self.stiffness
    }

    pub fn full_b_q(&self) -> &SymTridiagonal {
        &self.potential
    }

    pub fn full_m_r(&self) -> &SymTridiagonal {
        &self.mass
    }

    /// `A_p + B_q` on the dofs.
    pub fn operator_at_zero(&self) -> SymTridiagonal {
        self.a_p().axpy(1.0, &self.b_q())
    }

    /// `A(λ)` on the dofs.
    pub fn operator(&self, lambda: f64) -> SymTridiagonal {
        self.operator_at_zero().axpy(-lambda, &self.m_r())
    }

    /// Dof values of a nodal function.
    pub fn restrict(&self, y: &PiecewiseLinear) -> Vec<f64> {
        y.values()[self.dofs.clone()].to_vec()
    }

    /// Zero-extends dof values to a nodal function.
    pub fn extend(&self, u: &[f64]) -> PiecewiseLinear {
        let mut values = vec![0.0; self.mesh.n_nodes()];
        values[self.dofs.clone()].copy_from_slice(u);
        PiecewiseLinear::new(self.mesh.clone(), values).expect("dof vector length")
    }

    /// `M_r y` restricted to dof rows, for `y` given at every node.
    pub fn weigh(&self, y: &PiecewiseLinear) -> Vec<f64> {
        let full = self.mass.matvec(y.values());
        full[self.dofs.clone()].to_vec()
    }

    /// `uᵀ M_r u` on dof vectors.
    pub fn weight_norm_sq(&self, u: &[f64]) -> f64 {
        self.m_r().bilinear(u, u)
    }
}

/// `∫ f φ_i φ_j` through the primitive representation:
/// `-∫ ω (φ_i φ_j)' + ω₁ φ_i(1) φ_j(1)`.
pub fn assemble_measure_via_primitive(
    f: &GeneralizedFunction,
    mesh: &Arc<Mesh>,
) -> Result<SymTridiagonal> {
    let sp = shifted_primitive(f, &GeneralizedFunction::zero(), 0.0, mesh)?;
    let n = mesh.n_nodes();
    let mut m = SymTridiagonal::zeros(n);
    for i in 0..mesh.n_cells() {
        let (wl, wr) = sp.omega.traces(i);
        m.add(i, i, (2.0 * wl + wr) / 3.0);
        m.add(i + 1, i + 1, -(wl + 2.0 * wr) / 3.0);
        m.add(i, i + 1, (wr - wl) / 6.0);
    }
    m.add(n - 1, n - 1, sp.omega1);
    Ok(m)
}

/// `∫ f φ_i φ_j` from the cell densities of the primitive plus point
/// evaluations at the atoms.
pub fn assemble_measure_direct(f: &GeneralizedFunction, mesh: &Arc<Mesh>) -> Result<SymTridiagonal> {
    let (w, masses) = f.nodal_data(mesh)?;
    let mut m = SymTridiagonal::zeros(mesh.n_nodes());
    for i in 0..mesh.n_cells() {
        let dw = w[i + 1] - w[i];
        m.add(i, i, dw / 3.0);
        m.add(i + 1, i + 1, dw / 3.0);
        m.add(i, i + 1, dw / 6.0);
    }
    for (k, c) in masses.into_iter().enumerate() {
        m.add(k, k, c);
    }
    Ok(m)
}

/// Assembles the pencil. `B_q` goes through the primitive of `q` and also
/// carries the `V` terms; `M_r` is assembled directly.
pub fn assemble(
    p: &PiecewiseConstant,
    q: &GeneralizedFunction,
    r: &GeneralizedFunction,
    bc: &BoundarySpec,
    mesh: &Arc<Mesh>,
) -> Result<DiscretePencil> {
    let p = p.on_mesh(mesh)?;
    if !(p.min() > 0.0) {
        return Err(Error::Domain(format!("p must be positive, min is {}", p.min())));
    }
    let n = mesh.n_nodes();
    let mut stiffness = SymTridiagonal::zeros(n);
    for (i, &pc) in p.values().iter().enumerate() {
        let k = pc / mesh.width(i);
        stiffness.add(i, i, k);
        stiffness.add(i + 1, i + 1, k);
        stiffness.add(i, i + 1, -k);
    }
    let mut potential = assemble_measure_via_primitive(q, mesh)?;
    potential.add(0, 0, bc.v()[0]);
    potential.add(n - 1, n - 1, bc.v()[1]);
    let mass = assemble_measure_direct(r, mesh)?;

    let kind = bc.kind();
    let lo = usize::from(kind.dirichlet_left());
    let hi = n - usize::from(kind.dirichlet_right());
    if lo >= hi {
        return Err(Error::Domain("mesh has no free nodes".into()));
    }
    Ok(DiscretePencil {
        mesh: mesh.clone(),
        bc: *bc,
        stiffness,
        potential,
        mass,
        dofs: lo..hi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const I: Complex64 = Complex64::new(0.0, 1.0);
    const ONE: Complex64 = Complex64::new(1.0, 0.0);
    const MINUS: Complex64 = Complex64::new(-1.0, 0.0);

    #[test]
    fn boundary_matrix_examples() {
        assert_eq!(boundary_matrix([ONE, ONE]).unwrap(), [0.0, 0.0]);
        assert_eq!(boundary_matrix([MINUS, MINUS]).unwrap(), [0.0, 0.0]);
        let v = boundary_matrix([I, ONE]).unwrap();
        assert!((v[0] + 1.0).abs() < 1e-15);
        assert_eq!(v[1], 0.0);
        assert!(boundary_matrix([Complex64::new(2.0, 0.0), ONE]).is_err());
    }

    #[test]
    fn angles_agree_with_complex_entries() {
        for t in [0.5, -0.5, 0.25, -0.8, 0.9] {
            let a = BoundarySpec::from_angles([t, 1.0]).unwrap();
            let b = BoundarySpec::from_unitary([
                Complex64::from_polar(1.0, std::f64::consts::PI * t),
                MINUS,
            ])
            .unwrap();
            assert!((a.v()[0] - b.v()[0]).abs() < 1e-12, "{t}");
        }
        assert!(BoundarySpec::from_angles([1.5, 0.0]).is_err());
    }

    #[test]
    fn canonicalization_examples() {
        let (s, atoms) = canonicalize_bc([ONE, ONE]).unwrap();
        assert_eq!(s.kind(), BcKind::DirichletDirichlet);
        assert!(atoms.is_empty());

        let (s, atoms) = canonicalize_bc([MINUS, ONE]).unwrap();
        assert_eq!(s.kind(), BcKind::NeumannDirichlet);
        assert!(atoms.is_empty());

        let (s, atoms) = canonicalize_bc([ONE, I]).unwrap();
        assert_eq!(s.kind(), BcKind::DirichletNeumann);
        assert_eq!(atoms.len(), 1);
        assert_eq!(atoms[0].location, 1.0);
        assert!((atoms[0].mass + 1.0).abs() < 1e-15);
    }

    #[test]
    fn robin_spec_is_consistent() {
        let s = BoundarySpec::robin_right(2.5).unwrap();
        let v = boundary_matrix(s.u()).unwrap();
        assert!((v[1] - 2.5).abs() < 1e-12);
        assert_eq!(s.kind(), BcKind::RobinRight { c: 2.5 });
        assert!(BoundarySpec::robin_right(0.0).is_err());
        assert!(BoundarySpec::robin_right(-1.0).is_err());
    }

    #[test]
    fn reflection_examples() {
        let q = GeneralizedFunction::atoms_only(vec![Atom::new(0.25, 1.0)]).unwrap();
        let prob = Problem {
            q,
            ..Problem::constant(BoundarySpec::canonical(BcKind::DirichletNeumann).unwrap())
        };
        let refl = reflect(&prob);
        assert_eq!(refl.q.atoms(), &[Atom::new(0.75, 1.0)]);
        assert_eq!(refl.bc.kind(), BcKind::NeumannDirichlet);
        assert_eq!(reflect(&refl), prob);

        let sym = Problem {
            q: GeneralizedFunction::atoms_only(vec![Atom::new(0.5, 3.0)]).unwrap(),
            ..Problem::constant(BoundarySpec::canonical(BcKind::DirichletDirichlet).unwrap())
        };
        assert_eq!(reflect(&sym), sym);

        let robin = Problem::constant(BoundarySpec::robin_right(1.5).unwrap());
        assert_eq!(reflect(&reflect(&robin)), robin);
    }

    #[test]
    fn textbook_stiffness_and_mass() {
        let n = 10;
        let h = 1.0 / n as f64;
        let mesh = Arc::new(Mesh::uniform(n));
        let prob = Problem::constant(BoundarySpec::canonical(BcKind::DirichletDirichlet).unwrap());
        let d = prob.assemble(&mesh).unwrap();
        assert_eq!(d.n_dofs(), n - 1);
        let a = d.a_p();
        let m = d.m_r();
        for i in 0..n - 1 {
            assert!((a.diag[i] - 2.0 / h).abs() < 1e-10);
            assert!((m.diag[i] - 2.0 * h / 3.0).abs() < 1e-14);
        }
        for i in 0..n - 2 {
            assert!((a.off[i] + 1.0 / h).abs() < 1e-10);
            assert!((m.off[i] - h / 6.0).abs() < 1e-14);
        }
        assert!(d.b_q().max_abs() < 1e-15);
    }

    #[test]
    fn interior_atom_gives_single_entry() {
        let mesh = Arc::new(Mesh::uniform(8));
        let q = GeneralizedFunction::atoms_only(vec![Atom::new(0.375, 2.5)]).unwrap();
        let b = assemble_measure_via_primitive(&q, &mesh).unwrap();
        for i in 0..mesh.n_nodes() {
            for j in 0..mesh.n_nodes() {
                let want = if i == 3 && j == 3 { 2.5 } else { 0.0 };
                assert!((b.get(i, j) - want).abs() < 1e-15, "({i},{j})");
            }
        }
    }

    #[test]
    fn rejects_nonpositive_p_and_off_mesh_atoms() {
        let mesh = Arc::new(Mesh::uniform(4));
        let mut prob = Problem::constant(BoundarySpec::canonical(BcKind::NeumannNeumann).unwrap());
        prob.p = PiecewiseConstant::constant(Arc::new(Mesh::uniform(1)), 0.0);
        assert!(matches!(prob.assemble(&mesh), Err(Error::Domain(_))));
        let mut prob = Problem::constant(BoundarySpec::canonical(BcKind::NeumannNeumann).unwrap());
        prob.q = GeneralizedFunction::atoms_only(vec![Atom::new(0.3, 1.0)]).unwrap();
        assert!(matches!(prob.assemble(&mesh), Err(Error::Precondition(_))));
    }

    #[test]
    fn boundary_terms_match_endpoint_atoms() {
        let spec = BoundarySpec::from_angles([0.3, -0.6]).unwrap();
        let prob = Problem {
            q: GeneralizedFunction::atoms_only(vec![Atom::new(1.0, 0.7)]).unwrap(),
            ..Problem::constant(spec)
        };
        let canon = prob.canonicalize().unwrap();
        assert_eq!(canon.bc.v(), [0.0, 0.0]);
        let mesh = prob.mesh(16).unwrap();
        let a = prob.assemble(&mesh).unwrap().operator(3.0);
        let b = canon.assemble(&mesh).unwrap().operator(3.0);
        for i in 0..a.dim() {
            assert!((a.diag[i] - b.diag[i]).abs() < 1e-12);
        }
        assert_eq!(a.off, b.off);
    }

    fn arb_problem() -> impl Strategy<Value = Problem> {
        (
            prop::collection::vec(0.5f64..2.0, 4),
            prop::collection::vec((1usize..20, -5.0f64..5.0), 0..4),
            prop::collection::vec((0usize..21, 0.0f64..3.0), 0..3),
            prop::collection::vec(-2.0f64..2.0, 4),
            0usize..4,
        )
            .prop_map(|(p, qa, ra, qw, kind)| {
                let dedup = |v: Vec<(usize, f64)>| {
                    let m: std::collections::BTreeMap<usize, f64> = v.into_iter().collect();
                    m.into_iter().map(|(k, c)| Atom::new(k as f64 / 20.0, c)).collect::<Vec<_>>()
                };
                let mut wq = vec![0.0];
                wq.extend(qw.iter().scan(0.0, |s, d| {
                    *s += d;
                    Some(*s)
                }));
                let knots: Vec<f64> = (0..=4).map(|k| k as f64 / 4.0).collect();
                let q = GeneralizedFunction::from_primitive_values(knots.clone(), wq)
                    .unwrap()
                    .with_atoms(dedup(qa))
                    .unwrap();
                let r = GeneralizedFunction::lebesgue().with_atoms(dedup(ra)).unwrap();
                let kind = [
                    BcKind::DirichletDirichlet,
                    BcKind::NeumannDirichlet,
                    BcKind::DirichletNeumann,
                    BcKind::NeumannNeumann,
                ][kind];
                Problem {
                    p: PiecewiseConstant::new(Arc::new(Mesh::from_nodes(knots).unwrap()), p).unwrap(),
                    q,
                    r,
                    bc: BoundarySpec::canonical(kind).unwrap(),
                }
            })
    }

    /// Closed-form evaluation of the form on a nodal function, independent of
    /// the matrix assembly.
    fn form(prob: &Problem, y: &PiecewiseLinear, lambda: f64) -> f64 {
        let mesh = y.mesh();
        let v = y.values();
        let p = prob.p.on_mesh(mesh).unwrap();
        let mut s = 0.0;
        for i in 0..mesh.n_cells() {
            let h = mesh.width(i);
            let d = (v[i + 1] - v[i]) / h;
            s += p.values()[i] * d * d * h;
        }
        let square = |f: &GeneralizedFunction| {
            let w: Vec<f64> = mesh.nodes().iter().map(|&x| f.primitive().evaluate(x).unwrap()).collect();
            let mut acc = 0.0;
            for i in 0..mesh.n_cells() {
                let (a, b) = (v[i], v[i + 1]);
                acc += (w[i + 1] - w[i]) * (a * a + a * b + b * b) / 3.0;
            }
            for at in f.atoms() {
                let y = y.evaluate(at.location).unwrap();
                acc += at.mass * y * y;
            }
            acc
        };
        s += square(&prob.q) - lambda * square(&prob.r);
        let n = v.len() - 1;
        s + prob.bc.v()[0] * v[0] * v[0] + prob.bc.v()[1] * v[n] * v[n]
    }

    proptest! {
        #[test]
        fn matrix_form_matches_quadrature(prob in arb_problem(), lambda in -20.0f64..20.0,
                                          ys in prop::collection::vec(-1.0f64..1.0, 41)) {
            let mesh = prob.mesh(40).unwrap();
            let d = prob.assemble(&mesh).unwrap();
            let mut vals: Vec<f64> = (0..mesh.n_nodes()).map(|i| ys[i % ys.len()]).collect();
            let n = vals.len() - 1;
            if prob.bc.kind().dirichlet_left() { vals[0] = 0.0; }
            if prob.bc.kind().dirichlet_right() { vals[n] = 0.0; }
            let y = PiecewiseLinear::new(mesh.clone(), vals).unwrap();
            let u = d.restrict(&y);
            let got = d.operator(lambda).bilinear(&u, &u);
            let want = form(&prob, &y, lambda);
            prop_assert!((got - want).abs() <= 1e-12 * (1.0 + want.abs()) * 100.0, "{} vs {}", got, want);
        }

        #[test]
        fn two_measure_routes_agree(prob in arb_problem()) {
            let mesh = prob.mesh(30).unwrap();
            for f in [&prob.q, &prob.r] {
                let a = assemble_measure_via_primitive(f, &mesh).unwrap();
                let b = assemble_measure_direct(f, &mesh).unwrap();
                for i in 0..a.dim() {
                    prop_assert!((a.diag[i] - b.diag[i]).abs() < 1e-12);
                }
                for i in 0..a.off.len() {
                    prop_assert!((a.off[i] - b.off[i]).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn elimination_commutes_with_assembly(prob in arb_problem()) {
            let mesh = prob.mesh(25).unwrap();
            let d = prob.assemble(&mesh).unwrap();
            let full = d.full_a_p().axpy(1.0, d.full_b_q()).axpy(-2.0, d.full_m_r());
            let reduced = d.operator(2.0);
            let r = d.dofs();
            prop_assert_eq!(reduced.clone(), full.slice(r.start, r.end));
            prop_assert!(reduced.dim() == d.n_dofs());
        }

        #[test]
        fn weight_is_positive_definite(prob in arb_problem()) {
            let mesh = prob.mesh(25).unwrap();
            let d = prob.assemble(&mesh).unwrap();
            prop_assert!(crate::coefficients::validate_weight(&prob.r, &mesh));
            prop_assert!(d.m_r().check_positive_definite("M_r").is_ok());
        }
    }
}
