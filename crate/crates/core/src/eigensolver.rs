//! Lowest eigenpairs of the tridiagonal pencil `(A_p + B_q) u = λ M_r u`
//! by spectrum slicing and inverse iteration.

use crate::assembly::DiscretePencil;
use crate::error::{Error, Result};
use crate::meshfun::PiecewiseLinear;
use crate::tridiag::Inertia;

/// Pivots below this fraction of the largest entry count as zero.
pub const PIVOT_ZERO_TOL: f64 = 1e-14;
/// Default residual tolerance for inverse iteration.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Default relative bisection width.
pub const DEFAULT_BRACKET: f64 = 1e-12;

const MAX_INVERSE_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    /// 1-based position in the increasing spectrum.
    pub index: usize,
    pub lambda: f64,
    /// `M_r`-normalized, first clearly nonzero nodal value positive.
    pub vector: PiecewiseLinear,
    /// Final scaled residual of inverse iteration.
    pub residual: f64,
}

/// Solver tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Residual tolerance for eigenvectors.
    pub tol: f64,
    /// Bisection stops once the bracket is narrower than `bracket * max(1, |λ|)`.
    pub bracket: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            bracket: DEFAULT_BRACKET,
        }
    }
}

/// Inertia of `A(λ)`; `n_minus` is the number of eigenvalues below `λ`.
pub fn inertia(disc: &DiscretePencil, lambda: f64) -> Inertia {
    disc.operator(lambda).inertia(PIVOT_ZERO_TOL)
}

fn count_below(disc: &DiscretePencil, lambda: f64) -> usize {
    inertia(disc, lambda).n_minus
}

/// Brackets `[lo, hi]` with `count(lo) < k ≤ count(hi)` for `k = 1..=count`.
pub fn eigenvalue_brackets(
    disc: &DiscretePencil,
    count: usize,
    bracket: f64,
) -> Result<Vec<(f64, f64)>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if count > disc.n_dofs() {
        return Err(Error::Precondition(format!(
            "requested {count} eigenvalues from {} unknowns",
            disc.n_dofs()
        )));
    }
    disc.m_r().check_positive_definite("weight matrix M_r")?;

    let mut lo = -1.0;
    while count_below(disc, lo) > 0 {
        lo *= 2.0;
        if !lo.is_finite() {
            return Err(Error::Internal("no lower spectral bound".into()));
        }
    }
    let mut hi = 1.0;
    while count_below(disc, hi) < count {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Internal("no upper spectral bound".into()));
        }
    }

    let mut out = Vec::with_capacity(count);
    let mut floor = lo;
    for k in 1..=count {
        let (mut a, mut b) = (floor, hi);
        while b - a > bracket * a.abs().max(b.abs()).max(1.0) {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if count_below(disc, mid) >= k {
                b = mid;
            } else {
                a = mid;
            }
        }
        out.push((a, b));
        floor = a;
    }
    Ok(out)
}

/// Lowest `count` eigenvalues, ascending; each is the midpoint of its bracket.
pub fn eigenvalues(disc: &DiscretePencil, count: usize, opts: SolverOptions) -> Result<Vec<f64>> {
    Ok(eigenvalue_brackets(disc, count, opts.bracket)?
        .into_iter()
        .map(|(a, b)| 0.5 * (a + b))
        .collect())
}

fn normalize(disc: &DiscretePencil, u: &mut [f64]) {
    let nrm = disc.weight_norm_sq(u).sqrt();
    u.iter_mut().for_each(|v| *v /= nrm);
}

fn fix_sign(u: &mut [f64]) {
    let sup = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if let Some(&first) = u.iter().find(|v| v.abs() > 1e-8 * sup) {
        if first < 0.0 {
            u.iter_mut().for_each(|v| *v = -*v);
        }
    }
}

/// `‖(K - λM) u‖ / (‖K‖ + |λ| ‖M‖) ‖u‖` with infinity-norm matrix scales.
fn scaled_residual(disc: &DiscretePencil, lambda: f64, u: &[f64]) -> f64 {
    let k = disc.operator_at_zero();
    let m = disc.m_r();
    let r = disc.operator(lambda).matvec(u);
    let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let un = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    rn / ((k.norm_inf() + lambda.abs() * m.norm_inf()) * un)
}

/// Inverse iteration on `A(λ + δ)` from the nodal values of `x(1 - x)`.
pub fn eigenfunction_with_shift(
    disc: &DiscretePencil,
    lambda: f64,
    delta: f64,
    tol: f64,
) -> Result<(Vec<f64>, f64)> {
    let shifted = disc.operator(lambda + delta);
    let nodes = disc.mesh().nodes();
    let mut u: Vec<f64> = disc.dofs().map(|i| nodes[i] * (1.0 - nodes[i])).collect();
    if u.iter().all(|v| *v == 0.0) {
        u.iter_mut().for_each(|v| *v = 1.0);
    }
    normalize(disc, &mut u);
    let mut residual = f64::INFINITY;
    for it in 1..=MAX_INVERSE_ITERATIONS {
        let rhs = disc.m_r().matvec(&u);
        let mut next = shifted.solve(&rhs);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NoConvergence { iterations: it, residual });
        }
        normalize(disc, &mut next);
        u = next;
        residual = scaled_residual(disc, lambda, &u);
        if residual <= tol {
            fix_sign(&mut u);
            return Ok((u, residual));
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_INVERSE_ITERATIONS,
        residual,
    })
}

/// Eigenpair for an eigenvalue isolated by [`eigenvalue_brackets`].
pub fn eigenfunction(
    disc: &DiscretePencil,
    index: usize,
    bracket: (f64, f64),
    tol: f64,
) -> Result<EigenPair> {
    let lambda = 0.5 * (bracket.0 + bracket.1);
    let delta = 0.5 * (bracket.1 - bracket.0);
    let (u, residual) = eigenfunction_with_shift(disc, lambda, delta, tol)?;
    Ok(EigenPair {
        index,
        lambda,
        vector: disc.extend(&u),
        residual,
    })
}

/// The lowest `count` eigenpairs.
pub fn eigenpairs(disc: &DiscretePencil, count: usize, opts: SolverOptions) -> Result<Vec<EigenPair>> {
    eigenvalue_brackets(disc, count, opts.bracket)?
        .into_iter()
        .enumerate()
        .map(|(k, br)| eigenfunction(disc, k + 1, br, opts.tol))
        .collect()
}

/// `ξ = λ₁ - 1`, verified to make `A(ξ)` positive definite.
pub fn find_shift(disc: &DiscretePencil) -> Result<f64> {
    let lambda1 = eigenvalues(disc, 1, SolverOptions::default())?[0];
    let xi = lambda1 - 1.0;
    let inr = inertia(disc, xi);
    if inr.n_minus != 0 || inr.n_zero != 0 {
        return Err(Error::Internal(format!(
            "A(ξ) not positive definite at ξ = {xi}: {inr:?}"
        )));
    }
    Ok(xi)
}

/// `uᵀ(A_p + B_q)u / uᵀ M_r u` for a nodal vector.
pub fn rayleigh_quotient(disc: &DiscretePencil, y: &PiecewiseLinear) -> f64 {
    let u = disc.restrict(y);
    disc.operator_at_zero().bilinear(&u, &u) / disc.weight_norm_sq(&u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{BcKind, BoundarySpec, Problem};
    use crate::coefficients::{Atom, GeneralizedFunction};
    use std::f64::consts::PI;

    fn constant(kind: BcKind, cells: usize) -> DiscretePencil {
        let prob = Problem::constant(BoundarySpec::canonical(kind).unwrap());
        prob.assemble(&prob.mesh(cells).unwrap()).unwrap()
    }

    #[test]
    fn inertia_examples_dirichlet() {
        let d = constant(BcKind::DirichletDirichlet, 200);
        assert_eq!(inertia(&d, 0.0).n_minus, 0);
        assert_eq!(inertia(&d, 50.0).n_minus, 2);
    }

    #[test]
    fn inertia_examples_neumann() {
        let d = constant(BcKind::NeumannNeumann, 200);
        assert_eq!(inertia(&d, -1.0).n_minus, 0);
        assert_eq!(inertia(&d, 0.5).n_minus, 1);
    }

    #[test]
    fn constant_dirichlet_spectrum() {
        let d = constant(BcKind::DirichletDirichlet, 2000);
        let ev = eigenvalues(&d, 5, SolverOptions::default()).unwrap();
        for (k, l) in ev.iter().enumerate() {
            let exact = ((k + 1) as f64 * PI).powi(2);
            assert!((l - exact).abs() / exact < 1e-3, "{k}: {l}");
        }
        assert!(ev.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn delta_at_node_of_second_mode() {
        let prob = Problem {
            q: GeneralizedFunction::atoms_only(vec![Atom::new(0.5, 10.0)]).unwrap(),
            ..Problem::constant(BoundarySpec::canonical(BcKind::DirichletDirichlet).unwrap())
        };
        let d = prob.assemble(&prob.mesh(2000).unwrap()).unwrap();
        let ev = eigenvalues(&d, 2, SolverOptions::default()).unwrap();
        assert!((ev[1] - 4.0 * PI * PI).abs() / (4.0 * PI * PI) < 1e-3);
        assert!(ev[0] > PI * PI);
    }

    #[test]
    fn neumann_ground_state_is_constant() {
        let d = constant(BcKind::NeumannNeumann, 100);
        let pairs = eigenpairs(&d, 1, SolverOptions::default()).unwrap();
        assert!(pairs[0].lambda.abs() < 1e-10);
        let v = pairs[0].vector.values();
        assert!(v.iter().all(|x| (x - 1.0).abs() < 1e-8), "{:?}", &v[..3]);
    }

    #[test]
    fn dirichlet_ground_state_is_sine() {
        let d = constant(BcKind::DirichletDirichlet, 2000);
        let pairs = eigenpairs(&d, 3, SolverOptions::default()).unwrap();
        let y1 = &pairs[0].vector;
        let err = y1
            .mesh()
            .nodes()
            .iter()
            .zip(y1.values())
            .map(|(x, v)| (v - 2f64.sqrt() * (PI * x).sin()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-3, "{err}");
        let interior = &pairs[2].vector.values()[1..2000];
        let changes = interior.windows(2).filter(|w| w[0] * w[1] < 0.0).count();
        assert_eq!(changes, 2);
    }

    #[test]
    fn rayleigh_and_count_consistency() {
        let prob = Problem {
            q: GeneralizedFunction::atoms_only(vec![Atom::new(0.3, -4.0), Atom::new(0.8, 2.0)]).unwrap(),
            ..Problem::constant(BoundarySpec::canonical(BcKind::NeumannDirichlet).unwrap())
        };
        let d = prob.assemble(&prob.mesh(500).unwrap()).unwrap();
        let brackets = eigenvalue_brackets(&d, 5, DEFAULT_BRACKET).unwrap();
        for (k, &(lo, hi)) in brackets.iter().enumerate() {
            let pair = eigenfunction(&d, k + 1, (lo, hi), DEFAULT_TOL).unwrap();
            let rq = rayleigh_quotient(&d, &pair.vector);
            assert!((rq - pair.lambda).abs() < 1e-8 * pair.lambda.abs().max(1.0));
            let eps = 1e-6 * pair.lambda.abs().max(1.0);
            assert_eq!(
                inertia(&d, pair.lambda + eps).n_minus - inertia(&d, pair.lambda - eps).n_minus,
                1
            );
            assert!((d.weight_norm_sq(&d.restrict(&pair.vector)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn refinement_converges_monotonically() {
        let mut prev = f64::INFINITY;
        let mut last = None;
        for cells in [50, 100, 200, 400] {
            let l = eigenvalues(&constant(BcKind::DirichletDirichlet, cells), 3, SolverOptions::default())
                .unwrap()[2];
            if let Some(p) = last {
                let diff: f64 = l - p;
                assert!(diff.abs() < prev);
                prev = diff.abs();
            }
            last = Some(l);
        }
    }

    #[test]
    fn shift_examples() {
        let xi = find_shift(&constant(BcKind::DirichletDirichlet, 2000)).unwrap();
        assert!((xi - (PI * PI - 1.0)).abs() < 1e-3);
        let xi = find_shift(&constant(BcKind::NeumannNeumann, 200)).unwrap();
        assert!((xi + 1.0).abs() < 1e-9);

        let prob = Problem {
            q: GeneralizedFunction::atoms_only(vec![Atom::new(0.5, -50.0)]).unwrap(),
            ..Problem::constant(BoundarySpec::canonical(BcKind::DirichletDirichlet).unwrap())
        };
        let d = prob.assemble(&prob.mesh(1000).unwrap()).unwrap();
        let l1 = eigenvalues(&d, 1, SolverOptions::default()).unwrap()[0];
        assert!(l1 < 0.0);
        let xi = find_shift(&d).unwrap();
        assert!(xi < l1);
        assert!(d.operator(xi).check_positive_definite("A(xi)").is_ok());
    }

    #[test]
    fn too_many_eigenvalues_is_an_error() {
        let d = constant(BcKind::DirichletDirichlet, 4);
        assert!(matches!(
            eigenvalues(&d, 4, SolverOptions::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn singular_weight_is_rejected() {
        let prob = Problem {
            r: GeneralizedFunction::atoms_only(vec![Atom::new(0.5, 1.0)]).unwrap(),
            ..Problem::constant(BoundarySpec::canonical(BcKind::DirichletDirichlet).unwrap())
        };
        let d = prob.assemble(&prob.mesh(8).unwrap()).unwrap();
        assert!(matches!(
            eigenvalues(&d, 1, SolverOptions::default()),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }
}
