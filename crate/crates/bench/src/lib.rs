//! Fixtures shared by the benchmarks.

use sturmosc::{Atom, BcKind, BoundarySpec, GeneralizedFunction, Mesh, PiecewiseConstant, Problem};
use std::sync::Arc;

/// `p = r = 1`, `q = 0`, Dirichlet ends.
pub fn constant_dirichlet() -> Problem {
    Problem::constant(BoundarySpec::canonical(BcKind::DirichletDirichlet).unwrap())
}

/// Layered `p`, two potential atoms and a weight atom, natural ends.
pub fn layered_neumann() -> Problem {
    let p_mesh = Arc::new(Mesh::from_nodes(vec![0.0, 0.3, 0.7, 1.0]).unwrap());
    Problem {
        p: PiecewiseConstant::new(p_mesh, vec![0.5, 2.0, 1.0]).unwrap(),
        q: GeneralizedFunction::atoms_only(vec![Atom::new(0.25, -3.0), Atom::new(0.8, 4.0)]).unwrap(),
        r: GeneralizedFunction::lebesgue()
            .with_atoms(vec![Atom::new(0.6, 0.5)])
            .unwrap(),
        bc: BoundarySpec::canonical(BcKind::NeumannNeumann).unwrap(),
    }
}
