//! Spectral analysis of Sturm–Liouville pencils
//! `-(p y')' + (q - λ r) y = 0` whose coefficients `q` and `r` are
//! distributions: an L₂ primitive plus point atoms.
//!
//! The crate covers
//!
//! - P1 finite-element assembly of the pencil for diagonal unitary boundary
//!   data, including reduction to the four canonical kinds,
//! - eigenvalues by Sturm-sequence bisection and eigenvectors by inverse
//!   iteration,
//! - the change of variables that removes the potential `q`,
//! - oscillation analytics: sign changes, pseudo-zeros, zero components,
//!   the resolvent `R` and the Chebyshev-system checks on eigenfunction
//!   combinations.

pub mod assembly;
pub mod coefficients;
pub mod eigensolver;
pub mod error;
pub mod meshfun;
pub mod oscillation;
pub mod transform;
pub mod tridiag;

pub use assembly::{assemble, BcKind, BoundarySpec, DiscretePencil, Problem};
pub use coefficients::{shifted_primitive, validate_weight, Atom, GeneralizedFunction, ShiftedPrimitive};
pub use eigensolver::{eigenpairs, eigenvalues, find_shift, EigenPair, SolverOptions};
pub use error::{Error, Result};
pub use meshfun::{build_mesh, CellLinear, Mesh, PiecewiseConstant, PiecewiseLinear};


pub use transform::{eliminate_potential, FundamentalPair, IdentityCheck, TauMap, TransformedProblem};
pub use oscillation::{
    analyze, chebyshev_check, pseudo_zeros, regularity_probe, resolvent_apply, sign_changes, zero_components,
    OscillationReport,
};
