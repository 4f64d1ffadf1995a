//! Elimination of the potential.
//!
//! For a shift `ξ` below the spectrum, the linear system
//!
//! ```text
//! Y' = [ ω/p   1/p ] Y
//!      [-ω²/p -ω/p ]
//! ```
//!
//! has a solution with `Y₁ > 0`. With `τ(t) = ∫₀ᵗ dx / Y₁²` and
//! `S y = (y / Y₁) ∘ τ⁻¹`, the pencil turns into one with no potential:
//! `p̂ = p ∘ τ⁻¹`, `r̂ = τ_# (Y₁² r)`, and for two natural ends a Robin
//! constant `Y₂(1)/Y₁(1) + ω₁` on the right.

use std::sync::Arc;

use crate::assembly::{assemble, BcKind, BoundarySpec, DiscretePencil, Problem};
use crate::coefficients::{shifted_primitive, Atom, GeneralizedFunction, ShiftedPrimitive};
use crate::eigensolver::{self, find_shift, SolverOptions};
use crate::error::{Error, Result};
use crate::meshfun::{Mesh, PiecewiseConstant, PiecewiseLinear};

/// Runge–Kutta substeps per mesh cell.
pub const DEFAULT_SUBSTEPS: usize = 8;
/// Free constant of the two-sided Dirichlet construction.
pub const DEFAULT_C_INIT: f64 = 1.0;
/// `min Y₁` below this is reported as ill-conditioned.
pub const ILL_CONDITIONED_Y1: f64 = 1e-6;

/// Solution `Y = (Y₁, Y₂)` of the fundamental system, normalized so that
/// `∫ dx / Y₁² = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalPair {
    pub y1: PiecewiseLinear,
    /// Quasi-derivative `p Y₁' - ω Y₁`.
    pub y2: PiecewiseLinear,
    pub xi: f64,
    pub c_init: f64,
    substeps: usize,
    fine_y1: Vec<f64>,
    fine_y2: Vec<f64>,
    /// `Y₁'` at the substep points, one-sided at jump nodes (from the left cell).
    fine_dy1: Vec<f64>,
    /// `∫ dx / Y₁²` over each cell.
    inv_sq: Vec<f64>,
}

impl FundamentalPair {
    pub fn mesh(&self) -> &Arc<Mesh> {
        self.y1.mesh()
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    pub fn min_y1(&self) -> f64 {
        self.fine_y1.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn ill_conditioned(&self) -> bool {
        self.min_y1() < ILL_CONDITIONED_Y1
    }

    /// `(Y₁, Y₂)` at the substep points of cell `i`.
    pub fn cell_samples(&self, i: usize) -> (&[f64], &[f64]) {
        let s = self.substeps;
        (
            &self.fine_y1[i * s..=(i + 1) * s],
            &self.fine_y2[i * s..=(i + 1) * s],
        )
    }

    /// Integral over cell `i` of `g(x, Y₁, Y₁')`, given with its `x`-derivative
    /// `dg(x, Y₁, Y₁')`, by the two-point Hermite rule on each substep.
    fn cell_integral(
        &self,
        i: usize,
        g: impl Fn(f64, f64) -> f64,
        dg: impl Fn(f64, f64, f64) -> f64,
    ) -> f64 {
        let (x0, _) = self.mesh().cell(i);
        let k = self.mesh().width(i) / self.substeps as f64;
        let s = self.substeps;
        let y = &self.fine_y1[i * s..=(i + 1) * s];
        let dy = &self.fine_dy1[i * (s + 1)..(i + 1) * (s + 1)];
        (0..s)
            .map(|j| {
                let (xa, xb) = (x0 + j as f64 * k, x0 + (j + 1) as f64 * k);
                let (ga, gb) = (g(xa, y[j]), g(xb, y[j + 1]));
                let (da, db) = (dg(xa, y[j], dy[j]), dg(xb, y[j + 1], dy[j + 1]));
                0.5 * k * (ga + gb) + k * k / 12.0 * (da - db)
            })
            .sum()
    }

    /// `∫_cell 1/Y₁²`.
    pub fn cell_inv_sq(&self, i: usize) -> f64 {
        self.inv_sq[i]
    }

    /// `∫_cell Y₁²`.
    fn cell_sq(&self, i: usize) -> f64 {
        self.cell_integral(i, |_, v| v * v, |_, v, d| 2.0 * v * d)
    }
}

struct CellField {
    p: f64,
    x0: f64,
    h: f64,
    wl: f64,
    wr: f64,
}

impl CellField {
    fn omega(&self, x: f64) -> f64 {
        let s = (x - self.x0) / self.h;
        (1.0 - s) * self.wl + s * self.wr
    }

    fn rhs(&self, x: f64, y: [f64; 2]) -> [f64; 2] {
        let w = self.omega(x);
        let d1 = (w * y[0] + y[1]) / self.p;
        [d1, -w * d1]
    }

    fn rk4(&self, x: f64, y: [f64; 2], step: f64) -> [f64; 2] {
        let add = |y: [f64; 2], k: [f64; 2], c: f64| [y[0] + c * k[0], y[1] + c * k[1]];
        let k1 = self.rhs(x, y);
        let k2 = self.rhs(x + 0.5 * step, add(y, k1, 0.5 * step));
        let k3 = self.rhs(x + 0.5 * step, add(y, k2, 0.5 * step));
        let k4 = self.rhs(x + step, add(y, k3, step));
        [
            y[0] + step / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + step / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ]
    }
}

fn fields(p: &PiecewiseConstant, omega: &ShiftedPrimitive) -> Result<Vec<CellField>> {
    let mesh = omega.omega.mesh();
    let p = p.on_mesh(mesh)?;
    Ok((0..mesh.n_cells())
        .map(|i| {
            let (wl, wr) = omega.omega.traces(i);
            CellField {
                p: p.values()[i],
                x0: mesh.cell(i).0,
                h: mesh.width(i),
                wl,
                wr,
            }
        })
        .collect())
}

/// Forward sweep from `Y(0) = start`; with `positive`, fails once `Y₁ ≤ 0`.
fn sweep_forward(
    cells: &[CellField],
    start: [f64; 2],
    substeps: usize,
    positive: bool,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut y1 = Vec::with_capacity(cells.len() * substeps + 1);
    let mut y2 = Vec::with_capacity(cells.len() * substeps + 1);
    let mut y = start;
    y1.push(y[0]);
    y2.push(y[1]);
    for c in cells {
        let k = c.h / substeps as f64;
        for j in 0..substeps {
            let x = c.x0 + j as f64 * k;
            y = c.rk4(x, y, k);
            if positive && !(y[0] > 0.0) {
                return Err(Error::ConjugatePoint { at: x + k, value: y[0] });
            }
            y1.push(y[0]);
            y2.push(y[1]);
        }
    }
    Ok((y1, y2))
}

/// Backward sweep from `Z(1) = (0, -1)`; returns `Z(0)`.
fn sweep_backward(cells: &[CellField], substeps: usize) -> Result<[f64; 2]> {
    let mut z = [0.0, -1.0];
    for c in cells.iter().rev() {
        let k = c.h / substeps as f64;
        for j in (0..substeps).rev() {
            let x = c.x0 + (j + 1) as f64 * k;
            z = c.rk4(x, z, -k);
            if !(z[0] > 0.0) {
                return Err(Error::ConjugatePoint { at: x - k, value: z[0] });
            }
        }
    }
    Ok(z)
}

/// Integrates the fundamental system with [`DEFAULT_SUBSTEPS`].
pub fn solve_fundamental(
    p: &PiecewiseConstant,
    omega: &ShiftedPrimitive,
    kind: BcKind,
    c_init: f64,
) -> Result<FundamentalPair> {
    solve_fundamental_with(p, omega, kind, c_init, DEFAULT_SUBSTEPS)
}

/// Natural left end: start from `Y(0) = (1, 0)`. Two Dirichlet ends: run
/// backward from `Z(1) = (0, -1)`, then forward from `(Z₁(0), Z₂(0) + C)`.
/// The result is rescaled so that `∫ dx / Y₁² = 1`.
pub fn solve_fundamental_with(
    p: &PiecewiseConstant,
    omega: &ShiftedPrimitive,
    kind: BcKind,
    c_init: f64,
    substeps: usize,
) -> Result<FundamentalPair> {
    if substeps < 2 || !substeps.is_multiple_of(2) {
        return Err(Error::Precondition(format!("substeps must be even and ≥ 2, got {substeps}")));
    }
    let cells = fields(p, omega)?;
    let start = match kind {
        BcKind::NeumannDirichlet | BcKind::NeumannNeumann => [1.0, 0.0],
        BcKind::DirichletDirichlet => {
            if !(c_init > 0.0) {
                return Err(Error::Precondition(format!("C must be positive, got {c_init}")));
            }
            let z0 = sweep_backward(&cells, substeps)?;
            [z0[0], z0[1] + c_init]
        }
        other => {
            return Err(Error::Precondition(format!(
                "fundamental system needs a canonical kind with natural or Dirichlet left end, got {}",
                other.label()
            )))
        }
    };
    let (y1, y2) = sweep_forward(&cells, start, substeps, true)?;
    // Companion with Wronskian W = Y₁(0): (Z₁/Y₁)' = W / (p Y₁²) gives the
    // cell integrals of 1/Y₁² to integrator accuracy.
    let (z1, _) = sweep_forward(&cells, [0.0, 1.0], substeps, false)?;
    let wronskian = start[0];
    let inv_sq: Vec<f64> = cells
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let (a, b) = (i * substeps, (i + 1) * substeps);
            c.p / wronskian * (z1[b] / y1[b] - z1[a] / y1[a])
        })
        .collect();
    let dy1 = cells
        .iter()
        .enumerate()
        .flat_map(|(i, c)| {
            let k = c.h / substeps as f64;
            (0..=substeps).map(move |j| (i, j, c, k))
        })
        .map(|(i, j, c, k)| {
            let m = i * substeps + j;
            c.rhs(c.x0 + j as f64 * k, [y1[m], y2[m]])[0]
        })
        .collect();

    let nodal = |f: &[f64]| -> Vec<f64> { f.iter().step_by(substeps).copied().collect() };
    let mesh = omega.omega.mesh().clone();
    let mut pair = FundamentalPair {
        y1: PiecewiseLinear::new(mesh.clone(), nodal(&y1))?,
        y2: PiecewiseLinear::new(mesh.clone(), nodal(&y2))?,
        xi: omega.xi,
        c_init,
        substeps,
        fine_y1: y1,
        fine_y2: y2,
        fine_dy1: dy1,
        inv_sq,
    };
    let scale = pair.inv_sq.iter().sum::<f64>().sqrt();
    pair.inv_sq.iter_mut().for_each(|v| *v /= scale * scale);
    pair.y1 = pair.y1.map(|v| v * scale);
    pair.y2 = pair.y2.map(|v| v * scale);
    for v in pair.fine_y1.iter_mut().chain(&mut pair.fine_y2).chain(&mut pair.fine_dy1) {
        *v *= scale;
    }
    Ok(pair)
}

/// Result of checking `∫ p Y₁' φ' + ∫ (q - ξ r) Y₁ φ = [Y₂(1) + ω₁ Y₁(1)] φ(1)`
/// on every basis function of the admissible space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck {
    pub max_residual: f64,
    /// `Y₂(1)/Y₁(1) + ω₁`, reported for two natural ends.
    pub robin_constant: Option<f64>,
}

/// Evaluates both sides of the identity on each hat function.
pub fn verify_identity(
    pair: &FundamentalPair,
    p: &PiecewiseConstant,
    q: &GeneralizedFunction,
    r: &GeneralizedFunction,
    omega1: f64,
    kind: BcKind,
) -> Result<IdentityCheck> {
    let mesh = pair.mesh().clone();
    let p = p.on_mesh(&mesh)?;
    let xi = pair.xi;
    let (wq, mq) = q.nodal_data(&mesh)?;
    let (wr, mr) = r.nodal_data(&mesh)?;
    let y1 = pair.y1.values();
    let n = mesh.n_cells();

    // ∫_cell Y₁ φ for the left and right hats of each cell.
    let hat_moments: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let (a, b) = mesh.cell(i);
            let h = b - a;
            (
                pair.cell_integral(i, |x, v| v * (b - x) / h, |x, v, d| (d * (b - x) - v) / h),
                pair.cell_integral(i, |x, v| v * (x - a) / h, |x, v, d| (d * (x - a) + v) / h),
            )
        })
        .collect();

    let boundary = pair.y2.values()[n] + omega1 * y1[n];
    let lo = usize::from(kind.dirichlet_left());
    let hi = mesh.n_nodes() - usize::from(kind.dirichlet_right());
    let mut worst = 0.0f64;
    for j in lo..hi {
        let mut lhs = (mq[j] - xi * mr[j]) * y1[j];
        if j > 0 {
            let i = j - 1;
            let h = mesh.width(i);
            let density = (wq[i + 1] - wq[i] - xi * (wr[i + 1] - wr[i])) / h;
            lhs += p.values()[i] * (y1[j] - y1[i]) / h + density * hat_moments[i].1;
        }
        if j < n {
            let i = j;
            let h = mesh.width(i);
            let density = (wq[i + 1] - wq[i] - xi * (wr[i + 1] - wr[i])) / h;
            lhs += -p.values()[i] * (y1[j + 1] - y1[j]) / h + density * hat_moments[i].0;
        }
        let rhs = if j == n { boundary } else { 0.0 };
        worst = worst.max((lhs - rhs).abs());
    }
    let robin_constant = matches!(kind, BcKind::NeumannNeumann)
        .then(|| pair.y2.values()[n] / y1[n] + omega1);
    Ok(IdentityCheck {
        max_residual: worst,
        robin_constant,
    })
}

/// Monotone map `τ(t) = ∫₀ᵗ dx / Y₁²` stored at the mesh nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct TauMap {
    domain: Arc<Mesh>,
    image: Arc<Mesh>,
}

impl TauMap {
    pub fn domain(&self) -> &Arc<Mesh> {
        &self.domain
    }

    /// The mesh `τ(mesh)`.
    pub fn image(&self) -> &Arc<Mesh> {
        &self.image
    }

    pub fn nodal_values(&self) -> &[f64] {
        self.image.nodes()
    }

    /// Piecewise-linear interpolation of `τ`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        let i = self.domain.locate(t)?;
        let (a, b) = self.domain.cell(i);
        let s = (t - a) / (b - a);
        let (ta, tb) = self.image.cell(i);
        Ok((1.0 - s) * ta + s * tb)
    }

    /// `τ⁻¹` by monotone search over the nodal values.
    pub fn inverse(&self, s: f64) -> Result<f64> {
        let i = self.image.locate(s)?;
        let (ta, tb) = self.image.cell(i);
        let w = (s - ta) / (tb - ta);
        let (a, b) = self.domain.cell(i);
        Ok((1.0 - w) * a + w * b)
    }
}

/// Cumulative Simpson integral of `1 / Y₁²`, renormalized to end at 1.
pub fn build_tau(pair: &FundamentalPair) -> Result<TauMap> {
    let mesh = pair.mesh().clone();
    let mut nodes = Vec::with_capacity(mesh.n_nodes());
    let mut acc = 0.0;
    nodes.push(0.0);
    for i in 0..mesh.n_cells() {
        acc += pair.cell_inv_sq(i);
        nodes.push(acc);
    }
    if (acc - 1.0).abs() > 1e-8 {
        return Err(Error::Internal(format!(
            "τ(1) = {acc} before renormalization; Y is not normalized"
        )));
    }
    nodes.iter_mut().for_each(|v| *v /= acc);
    let last = nodes.len() - 1;
    nodes[last] = 1.0;
    let image = Mesh::from_nodes(nodes)
        .map_err(|e| Error::Internal(format!("τ is not strictly increasing: {e}")))?;
    Ok(TauMap {
        domain: mesh,
        image: Arc::new(image),
    })
}

/// `p̂ = p ∘ τ⁻¹` and `r̂ = τ_#(Y₁² r)` on the image mesh.
pub fn pushforward(
    p: &PiecewiseConstant,
    r: &GeneralizedFunction,
    pair: &FundamentalPair,
    tau: &TauMap,
) -> Result<(PiecewiseConstant, GeneralizedFunction, Arc<Mesh>)> {
    let mesh = pair.mesh();
    let image = tau.image().clone();
    let p_hat = PiecewiseConstant::new(image.clone(), p.on_mesh(mesh)?.values().to_vec())?;

    let (w, masses) = r.nodal_data(mesh)?;
    let mut primitive = Vec::with_capacity(mesh.n_nodes());
    let mut acc = 0.0;
    primitive.push(0.0);
    for i in 0..mesh.n_cells() {
        let density = (w[i + 1] - w[i]) / mesh.width(i);
        if density != 0.0 {
            acc += density * pair.cell_sq(i);
        }
        primitive.push(acc);
    }
    let y1 = pair.y1.values();
    let atoms = masses
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != 0.0)
        .map(|(k, &c)| Atom::new(image.nodes()[k], y1[k] * y1[k] * c))
        .collect();
    let r_hat = GeneralizedFunction::new(PiecewiseLinear::new(image.clone(), primitive)?, atoms)?;
    Ok((p_hat, r_hat, image))
}

/// Boundary condition of the transformed pencil.
///
/// For two natural ends the boundary term of the form is `C |y(1)|²` with
/// `C = Y₂(1)/Y₁(1) + ω₁`; since `y(1) = Y₁(1) ŷ(1)`, the Robin constant
/// seen by `ŷ` is `Y₁(1)² C`.
pub fn transformed_bc(pair: &FundamentalPair, omega1: f64, kind: BcKind) -> Result<BoundarySpec> {
    match kind {
        BcKind::DirichletDirichlet | BcKind::NeumannDirichlet => BoundarySpec::canonical(kind),
        BcKind::NeumannNeumann => {
            let n = pair.y1.values().len() - 1;
            let (y1, y2) = (pair.y1.values()[n], pair.y2.values()[n]);
            let c = y2 / y1 + omega1;
            if !(c > 0.0) {
                return Err(Error::NonPositiveRobin(c));
            }
            BoundarySpec::robin_right(y1 * y1 * c)
        }
        other => Err(Error::Precondition(format!(
            "no transformed condition for kind {}",
            other.label()
        ))),
    }
}

/// `S y = (y / Y₁) ∘ τ⁻¹`: nodal values `y(x_i)/Y₁(x_i)` placed at `τ(x_i)`.
pub fn apply_s(y: &PiecewiseLinear, pair: &FundamentalPair, tau: &TauMap) -> Result<PiecewiseLinear> {
    if y.values().len() != pair.y1.values().len() {
        return Err(Error::Precondition("function and Y₁ live on different meshes".into()));
    }
    let values = y
        .values()
        .iter()
        .zip(pair.y1.values())
        .map(|(a, b)| a / b)
        .collect();
    PiecewiseLinear::new(tau.image().clone(), values)
}

/// The full elimination pipeline for one problem and mesh size.
#[derive(Debug, Clone)]
pub struct TransformedProblem {
    /// Canonical (`V = 0`) form of the input, reflected if its kind was
    /// Dirichlet–Neumann.
    pub source: Problem,
    pub reflected: bool,
    pub mesh: Arc<Mesh>,
    pub xi: f64,
    pub omega: ShiftedPrimitive,
    pub pair: FundamentalPair,
    pub tau: TauMap,
    pub identity: IdentityCheck,
    /// `p̂`, `q̂ = 0`, `r̂` and the transformed boundary condition.
    pub target: Problem,
}

impl TransformedProblem {
    pub fn source_pencil(&self) -> Result<DiscretePencil> {
        self.source.assemble(&self.mesh)
    }

    /// The potential-free pencil on `τ(mesh)`.
    pub fn target_pencil(&self) -> Result<DiscretePencil> {
        let t = &self.target;
        assemble(&t.p, &t.q, &t.r, &t.bc, self.tau.image())
    }

    /// Eigenvalues of the target pencil in the original spectral
    /// parameter: `λ = μ + ξ`.
    pub fn eigenvalues(&self, count: usize, opts: SolverOptions) -> Result<Vec<f64>> {
        Ok(eigensolver::eigenvalues(&self.target_pencil()?, count, opts)?
            .into_iter()
            .map(|mu| mu + self.xi)
            .collect())
    }

    pub fn apply_s(&self, y: &PiecewiseLinear) -> Result<PiecewiseLinear> {
        apply_s(y, &self.pair, &self.tau)
    }
}

/// Canonicalizes, reflects a Dirichlet–Neumann problem, picks `ξ = λ₁ - 1`
/// and builds the potential-free pencil.
pub fn eliminate_potential(problem: &Problem, n_cells: usize) -> Result<TransformedProblem> {
    let mut source = problem.canonicalize()?;
    let reflected = source.bc.kind() == BcKind::DirichletNeumann;
    if reflected {
        source = source.reflect();
    }
    let kind = source.bc.kind();
    let mesh = source.mesh(n_cells)?;
    let xi = find_shift(&source.assemble(&mesh)?)?;
    let omega = shifted_primitive(&source.q, &source.r, xi, &mesh)?;
    let pair = solve_fundamental(&source.p, &omega, kind, DEFAULT_C_INIT)?;
    let identity = verify_identity(&pair, &source.p, &source.q, &source.r, omega.omega1, kind)?;
    let tau = build_tau(&pair)?;
    let (p_hat, r_hat, _) = pushforward(&source.p, &source.r, &pair, &tau)?;
    let bc = transformed_bc(&pair, omega.omega1, kind)?;
    Ok(TransformedProblem {
        source,
        reflected,
        mesh,
        xi,
        omega,
        pair,
        tau,
        identity,
        target: Problem {
            p: p_hat,
            q: GeneralizedFunction::zero(),
            r: r_hat,
            bc,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshfun::CellLinear;
    use std::f64::consts::PI;

    fn constant_omega(mesh: &Arc<Mesh>, c: f64) -> ShiftedPrimitive {
        let n = mesh.n_cells();
        ShiftedPrimitive {
            omega: CellLinear::new(mesh.clone(), vec![c; n], vec![c; n]).unwrap(),
            omega1: c,
            xi: 0.0,
        }
    }

    fn unit_p() -> PiecewiseConstant {
        PiecewiseConstant::constant(Arc::new(Mesh::uniform(1)), 1.0)
    }

    #[test]
    fn zero_omega_gives_constant_pair() {
        let mesh = Arc::new(Mesh::uniform(10));
        let pair = solve_fundamental(&unit_p(), &constant_omega(&mesh, 0.0), BcKind::NeumannNeumann, 1.0)
            .unwrap();
        assert!(pair.y1.values().iter().all(|v| (v - 1.0).abs() < 1e-14));
        assert!(pair.y2.values().iter().all(|v| v.abs() < 1e-14));
        let tau = build_tau(&pair).unwrap();
        for (a, b) in tau.nodal_values().iter().zip(mesh.nodes()) {
            assert!((a - b).abs() < 1e-14);
        }
        let id = verify_identity(
            &pair,
            &unit_p(),
            &GeneralizedFunction::zero(),
            &GeneralizedFunction::lebesgue(),
            0.0,
            BcKind::NeumannNeumann,
        )
        .unwrap();
        assert!(id.max_residual < 1e-12);
    }

    /// `Y₁ = k(1 + ct)`, `Y₂ = -k c² t` with `k = (1 + c)^{-1/2}`.
    #[test]
    fn constant_omega_closed_form() {
        let c = 0.7;
        let mesh = Arc::new(Mesh::uniform(50));
        let pair = solve_fundamental(&unit_p(), &constant_omega(&mesh, c), BcKind::NeumannNeumann, 1.0)
            .unwrap();
        let k = (1.0 + c).powf(-0.5);
        for (i, &x) in mesh.nodes().iter().enumerate() {
            assert!((pair.y1.values()[i] - k * (1.0 + c * x)).abs() < 1e-12);
            assert!((pair.y2.values()[i] + k * c * c * x).abs() < 1e-12);
        }
        // Y₂' = -ω Y₁'
        let d1 = pair.y1.derivative();
        let d2 = pair.y2.derivative();
        for i in 0..mesh.n_cells() {
            assert!((d2.values()[i] + c * d1.values()[i]).abs() < 1e-10);
        }
        let tau = build_tau(&pair).unwrap();
        for (i, &x) in mesh.nodes().iter().enumerate() {
            let want = x / (k * k * (1.0 + c * x));
            assert!((tau.nodal_values()[i] - want).abs() < 1e-10);
        }
        // C = c/(1+c) and Y₁(1)² = k²(1+c)², so the scaled constant is c.
        let bc = transformed_bc(&pair, c, BcKind::NeumannNeumann).unwrap();
        assert!((bc.v()[1] - c).abs() < 1e-12);
        assert_eq!(bc.kind(), BcKind::RobinRight { c: bc.v()[1] });
    }

    #[test]
    fn constant_omega_identity_residual() {
        // ω ≡ c comes from q - ξ r = c δ₀
        let c = 0.7;
        let mesh = Arc::new(Mesh::uniform(40));
        let q = GeneralizedFunction::atoms_only(vec![Atom::new(0.0, c)]).unwrap();
        let r = GeneralizedFunction::lebesgue();
        let omega = shifted_primitive(&q, &r, 0.0, &mesh).unwrap();
        assert_eq!(omega, constant_omega(&mesh, c));
        let pair = solve_fundamental(&unit_p(), &omega, BcKind::NeumannNeumann, 1.0).unwrap();
        let id = verify_identity(&pair, &unit_p(), &q, &r, omega.omega1, BcKind::NeumannNeumann).unwrap();
        assert!(id.max_residual < 1e-10, "{}", id.max_residual);
        assert!((id.robin_constant.unwrap() - c / (1.0 + c)).abs() < 1e-12);
    }

    #[test]
    fn dirichlet_pair_self_converges() {
        let prob = Problem::constant(BoundarySpec::canonical(BcKind::DirichletDirichlet).unwrap());
        let mesh = prob.mesh(200).unwrap();
        let xi = PI * PI - 1.0;
        let omega = shifted_primitive(&prob.q, &prob.r, xi, &mesh).unwrap();
        let coarse = solve_fundamental_with(&prob.p, &omega, BcKind::DirichletDirichlet, 1.0, 8).unwrap();
        let fine = solve_fundamental_with(&prob.p, &omega, BcKind::DirichletDirichlet, 1.0, 80).unwrap();
        let diff = coarse
            .y1
            .values()
            .iter()
            .zip(fine.y1.values())
            .chain(coarse.y2.values().iter().zip(fine.y2.values()))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-8, "{diff}");
        assert!(coarse.min_y1() > 0.0);
        assert!(!coarse.ill_conditioned());
    }

    #[test]
    fn quasi_derivative_structure() {
        let prob = Problem {
            q: GeneralizedFunction::atoms_only(vec![Atom::new(0.5, 3.0)]).unwrap(),
            ..Problem::constant(BoundarySpec::canonical(BcKind::NeumannNeumann).unwrap())
        };
        let mesh = prob.mesh(100).unwrap();
        let omega = shifted_primitive(&prob.q, &prob.r, -2.0, &mesh).unwrap();
        let pair = solve_fundamental(&prob.p, &omega, BcKind::NeumannNeumann, 1.0).unwrap();
        let s = pair.substeps();
        for i in 0..mesh.n_cells() {
            let (y1, y2) = pair.cell_samples(i);
            let k = mesh.width(i) / s as f64;
            let mid = s / 2;
            let x = mesh.cell(i).0 + mid as f64 * k;
            let dy1 = (8.0 * (y1[mid + 1] - y1[mid - 1]) - (y1[mid + 2] - y1[mid - 2])) / (12.0 * k);
            let resid = y2[mid] - (dy1 - omega.omega.in_cell(i, x) * y1[mid]);
            assert!(resid.abs() < 1e-9, "cell {i}: {resid}");
        }
        assert!(pair.y2.values()[0] == 0.0);
    }

    #[test]
    fn pushforward_examples() {
        let mesh = Arc::new(Mesh::uniform(20));
        let pair = solve_fundamental(&unit_p(), &constant_omega(&mesh, 0.0), BcKind::NeumannNeumann, 1.0)
            .unwrap();
        let tau = build_tau(&pair).unwrap();
        let r = GeneralizedFunction::lebesgue()
            .with_atoms(vec![Atom::new(0.5, 2.0)])
            .unwrap();
        let (p_hat, r_hat, image) = pushforward(&unit_p(), &r, &pair, &tau).unwrap();
        assert!(p_hat.values().iter().all(|&v| v == 1.0));
        assert_eq!(r_hat.atoms().len(), 1);
        assert!((r_hat.atoms()[0].mass - 2.0).abs() < 1e-13);
        for (a, b) in image.nodes().iter().zip(mesh.nodes()) {
            assert!((a - b).abs() < 1e-14);
        }

        // Scaled atom: Y₁(½)² multiplies the mass.
        let c = 1.0;
        let pair = solve_fundamental(&unit_p(), &constant_omega(&mesh, c), BcKind::NeumannNeumann, 1.0)
            .unwrap();
        let tau = build_tau(&pair).unwrap();
        let delta = GeneralizedFunction::atoms_only(vec![Atom::new(0.5, 1.0)]).unwrap();
        let (_, r_hat, _) = pushforward(&unit_p(), &delta, &pair, &tau).unwrap();
        let y_half = pair.y1.evaluate(0.5).unwrap();
        assert!((r_hat.atoms()[0].mass - y_half * y_half).abs() < 1e-14);
        assert!((r_hat.atoms()[0].location - tau.eval(0.5).unwrap()).abs() < 1e-14);

        // Mass with weight: ∫ dr̂ = ∫ Y₁² dt, closed form k²((1+c)³ - 1) / (3c).
        let (_, r_hat, _) = pushforward(&unit_p(), &GeneralizedFunction::lebesgue(), &pair, &tau).unwrap();
        let k2 = 1.0 / (1.0 + c);
        let want = k2 * ((1.0 + c).powi(3) - 1.0) / (3.0 * c);
        assert!((r_hat.total_mass() - want).abs() < 1e-12);
    }

    #[test]
    fn tau_inverse_round_trips() {
        let mesh = Arc::new(Mesh::uniform(30));
        let pair = solve_fundamental(&unit_p(), &constant_omega(&mesh, 2.0), BcKind::NeumannNeumann, 1.0)
            .unwrap();
        let tau = build_tau(&pair).unwrap();
        assert!(tau.nodal_values().windows(2).all(|w| w[1] > w[0]));
        for t in [0.0, 0.1, 0.33, 0.5, 0.999, 1.0] {
            let s = tau.eval(t).unwrap();
            assert!((tau.inverse(s).unwrap() - t).abs() < 1e-12);
        }
    }

    #[test]
    fn s_examples() {
        let mesh = Arc::new(Mesh::uniform(10));
        let pair = solve_fundamental(&unit_p(), &constant_omega(&mesh, 0.0), BcKind::NeumannNeumann, 1.0)
            .unwrap();
        let tau = build_tau(&pair).unwrap();
        let y = PiecewiseLinear::from_fn(mesh.clone(), |x| x * x);
        let sy = apply_s(&y, &pair, &tau).unwrap();
        for (a, b) in sy.values().iter().zip(y.values()) {
            assert!((a - b).abs() < 1e-14);
        }

        let pair = solve_fundamental(&unit_p(), &constant_omega(&mesh, 1.5), BcKind::NeumannNeumann, 1.0)
            .unwrap();
        let tau = build_tau(&pair).unwrap();
        let sy = apply_s(&pair.y1, &pair, &tau).unwrap();
        assert!(sy.values().iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn unsupported_kind_is_rejected() {
        let mesh = Arc::new(Mesh::uniform(10));
        let err = solve_fundamental(&unit_p(), &constant_omega(&mesh, 0.0), BcKind::DirichletNeumann, 1.0);
        assert!(matches!(err, Err(Error::Precondition(_))));
        let err = solve_fundamental(&unit_p(), &constant_omega(&mesh, 0.0), BcKind::DirichletDirichlet, 0.0);
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn shift_above_ground_state_hits_conjugate_point() {
        let prob = Problem::constant(BoundarySpec::canonical(BcKind::NeumannDirichlet).unwrap());
        let mesh = prob.mesh(200).unwrap();
        // λ₁ = π²/4 here; ξ = 30 lies well above it.
        let omega = shifted_primitive(&prob.q, &prob.r, 30.0, &mesh).unwrap();
        let err = solve_fundamental(&prob.p, &omega, BcKind::NeumannDirichlet, 1.0);
        assert!(matches!(err, Err(Error::ConjugatePoint { .. })));
    }

    #[test]
    fn neumann_constant_problem_transforms_with_positive_constant() {
        let prob = Problem::constant(BoundarySpec::canonical(BcKind::NeumannNeumann).unwrap());
        let t = eliminate_potential(&prob, 400).unwrap();
        assert!((t.xi + 1.0).abs() < 1e-9);
        // Y₁ = k cosh t, so C = tanh 1.
        let c = t.identity.robin_constant.unwrap();
        assert!((c - 1f64.tanh()).abs() < 1e-10);
        let y1 = t.pair.y1.values()[400];
        assert_eq!(t.target.bc.kind(), BcKind::RobinRight { c: y1 * y1 * c });
        assert!(t.identity.max_residual < 1e-9);
        let ev = t.eigenvalues(4, SolverOptions::default()).unwrap();
        let orig = eigensolver::eigenvalues(&t.source_pencil().unwrap(), 4, SolverOptions::default()).unwrap();
        assert!(ev[0].abs() < 1e-6, "{ev:?}");
        for (a, b) in ev.iter().zip(&orig).skip(1) {
            assert!((a - b).abs() / b.abs() < 1e-3);
        }
    }

    #[test]
    fn dirichlet_neumann_is_reflected() {
        let prob = Problem {
            q: GeneralizedFunction::atoms_only(vec![Atom::new(0.25, 2.0)]).unwrap(),
            ..Problem::constant(BoundarySpec::canonical(BcKind::DirichletNeumann).unwrap())
        };
        let t = eliminate_potential(&prob, 400).unwrap();
        assert!(t.reflected);
        assert_eq!(t.source.bc.kind(), BcKind::NeumannDirichlet);
        assert_eq!(t.source.q.atoms()[0].location, 0.75);
    }
}

