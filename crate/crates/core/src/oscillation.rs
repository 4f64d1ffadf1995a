//! Oscillation analytics on piecewise-linear functions: sign changes,
//! pseudo-zeros and zero components, plus the resolvent `R` and the checks
//! built on it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::assembly::DiscretePencil;
use crate::eigensolver::EigenPair;
use crate::error::{Error, Result};
use crate::meshfun::PiecewiseLinear;

/// Relative zero tolerance: values with `|f| ≤ ZTOL_REL · sup|f|` count as zero.
pub const ZTOL_REL: f64 = 1e-8;
/// Default pseudo-zero scales, relative to `sup|f|`.
pub const EPS_GRID_REL: [f64; 3] = [1e-1, 1e-2, 1e-3];

pub fn default_ztol(f: &PiecewiseLinear) -> f64 {
    ZTOL_REL * f.sup_norm()
}

/// Per-trial generator: the stream index is the trial number.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// `n` independent standard-normal draws.
pub fn normal_vector(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Sign changes with the default tolerance.
pub fn sign_changes(f: &PiecewiseLinear) -> usize {
    sign_changes_with(f, default_ztol(f))
}

/// Number of strict alternations in the nodal signs, values with
/// `|f| ≤ ztol` dropped. Endpoint values are kept: points just inside
/// `(0, 1)` carry the sign of a nonzero endpoint value.
pub fn sign_changes_with(f: &PiecewiseLinear, ztol: f64) -> usize {
    let mut last = 0.0f64;
    let mut count = 0;
    for &v in f.values() {
        if v.abs() <= ztol {
            continue;
        }
        if last != 0.0 && last.signum() != v.signum() {
            count += 1;
        }
        last = v;
    }
    count
}

/// Greedy pseudo-zero scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoZeroScan {
    pub count: usize,
    /// Smallest, over the runs used by the count, of the best distance
    /// `||f| - ε|` inside the run. Any `g` with `sup|f - g| < margin` has at
    /// least `count` pseudo-zeros at the same `ε`. Infinite when `count = 0`.
    pub margin: f64,
}

pub fn pseudo_zeros(f: &PiecewiseLinear, eps: f64) -> usize {
    pseudo_zero_scan(f, eps).count
}

/// Maximal `n` with points `x₁ < … < x_{n+1}` in `(0, 1)`, `|f(x_k)| > ε`,
/// and a point with `|f| < ε` between each consecutive pair.
///
/// `|f|` is monotone between consecutive samples (nodes and interior zero
/// crossings), so the open sets `{|f| > ε}` and `{|f| < ε}` are visited in
/// the order of the sample labels. Collapsing equal labels gives alternating
/// runs `H L H L …`. Every witness family picks its highs from distinct `H`
/// runs separated by `L` runs, so it can be shifted left onto the first
/// point of each run the greedy scan takes; the count of completed
/// `H → L → H` transitions is therefore maximal.
pub fn pseudo_zero_scan(f: &PiecewiseLinear, eps: f64) -> PseudoZeroScan {
    // (is_high, best margin) per run
    let mut runs: Vec<(bool, f64)> = Vec::new();
    let mut push = |a: f64| {
        let high = if a > eps {
            true
        } else if a < eps {
            false
        } else {
            return;
        };
        let m = (a - eps).abs();
        match runs.last_mut() {
            Some((h, best)) if *h == high => *best = best.max(m),
            Some(_) => runs.push((high, m)),
            None if high => runs.push((high, m)),
            None => {}
        }
    };
    let v = f.values();
    push(v[0].abs());
    for w in v.windows(2) {
        if w[0] * w[1] < 0.0 {
            push(0.0);
        }
        push(w[1].abs());
    }
    let count = runs.len().saturating_sub(1) / 2;
    let margin = if count == 0 {
        f64::INFINITY
    } else {
        runs[..2 * count + 1]
            .iter()
            .map(|r| r.1)
            .fold(f64::INFINITY, f64::min)
    };
    PseudoZeroScan { count, margin }
}

/// Pseudo-zeros with `ε` free: the largest count over all `ε > 0`. The count
/// only changes when `ε` crosses a nodal value of `|f|`, so midpoints between
/// consecutive distinct values (and half the smallest) cover every case.
pub fn max_pseudo_zeros(f: &PiecewiseLinear) -> usize {
    let mut levels: Vec<f64> = f.values().iter().map(|v| v.abs()).filter(|&a| a > 0.0).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let Some(&lowest) = levels.first() else {
        return 0;
    };
    std::iter::once(0.5 * lowest)
        .chain(levels.windows(2).map(|w| 0.5 * (w[0] + w[1])))
        .map(|e| pseudo_zeros(f, e))
        .max()
        .unwrap_or(0)
}

/// Connected components of `{x : |f(x)| ≤ ztol}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroComponents {
    /// Components not containing 0 or 1, as closed intervals.
    pub interior: Vec<(f64, f64)>,
    pub touches_left: bool,
    pub touches_right: bool,
}

impl ZeroComponents {
    pub fn interior_count(&self) -> usize {
        self.interior.len()
    }

    /// Midpoints of the interior components.
    pub fn locations(&self) -> Vec<f64> {
        self.interior.iter().map(|(a, b)| 0.5 * (a + b)).collect()
    }
}

pub fn zero_components(f: &PiecewiseLinear, ztol: f64) -> ZeroComponents {
    let mesh = f.mesh();
    let v = f.values();
    let mut comps: Vec<(f64, f64)> = Vec::new();
    for i in 0..mesh.n_cells() {
        let (xa, xb) = mesh.cell(i);
        let (fa, fb) = (v[i], v[i + 1]);
        let slope = fb - fa;
        let (lo, hi) = if slope == 0.0 {
            if fa.abs() <= ztol {
                (0.0, 1.0)
            } else {
                continue;
            }
        } else {
            let s1 = (-ztol - fa) / slope;
            let s2 = (ztol - fa) / slope;
            (s1.min(s2).max(0.0), s1.max(s2).min(1.0))
        };
        if lo > hi {
            continue;
        }
        let at = |s: f64| {
            if s == 0.0 {
                xa
            } else if s == 1.0 {
                xb
            } else {
                xa + s * (xb - xa)
            }
        };
        let (a, b) = (at(lo), at(hi));
        match comps.last_mut() {
            Some(last) if last.1 >= a => last.1 = last.1.max(b),
            _ => comps.push((a, b)),
        }
    }
    let touches_left = comps.first().is_some_and(|c| c.0 == 0.0);
    let touches_right = comps.last().is_some_and(|c| c.1 == 1.0);
    let interior = comps
        .into_iter()
        .filter(|c| c.0 != 0.0 && c.1 != 1.0)
        .collect();
    ZeroComponents {
        interior,
        touches_left,
        touches_right,
    }
}

/// True when exactly one entry of `lower` lies strictly between each pair of
/// consecutive entries of `upper`, and none lies outside them.
pub fn interlaces(lower: &[f64], upper: &[f64]) -> bool {
    if lower.len() + 1 != upper.len() {
        return false;
    }
    upper
        .windows(2)
        .zip(lower)
        .all(|(w, &z)| w[0] < z && z < w[1])
}

/// Two consecutive nodal values at or below `ztol`: `f` vanishes on a cell.
pub fn vanishes_on_cell(f: &PiecewiseLinear, ztol: f64) -> bool {
    f.values()
        .windows(2)
        .any(|w| w[0].abs() <= ztol && w[1].abs() <= ztol)
}

/// Counts for one function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationReport {
    pub sign_changes: usize,
    /// `(ε, pseudo_zeros(f, ε))` in the order of `epsilons_used`.
    pub pseudo_zeros: Vec<(f64, usize)>,
    pub zero_components_interior: usize,
    pub touches_left: bool,
    pub touches_right: bool,
    pub epsilons_used: Vec<f64>,
    pub ztol: f64,
}

/// Builds the report with `ε = rel · sup|f|` for each relative scale and the
/// default zero tolerance.
pub fn analyze(f: &PiecewiseLinear, eps_rel: &[f64]) -> OscillationReport {
    let sup = f.sup_norm();
    let ztol = ZTOL_REL * sup;
    let epsilons_used: Vec<f64> = eps_rel.iter().map(|r| r * sup).collect();
    let zc = zero_components(f, ztol);
    OscillationReport {
        sign_changes: sign_changes_with(f, ztol),
        pseudo_zeros: epsilons_used.iter().map(|&e| (e, pseudo_zeros(f, e))).collect(),
        zero_components_interior: zc.interior_count(),
        touches_left: zc.touches_left,
        touches_right: zc.touches_right,
        epsilons_used,
        ztol,
    }
}

/// `u = R y`, the solution of `A(0) u = M_r y`, so that `R yₙ = yₙ / λₙ`.
pub fn resolvent_apply(disc: &DiscretePencil, y: &PiecewiseLinear) -> Result<PiecewiseLinear> {
    let a0 = disc.operator_at_zero();
    a0.check_positive_definite("A(0)")?;
    let u = a0.solve(&disc.weigh(y));
    Ok(disc.extend(&u))
}

/// One failing trial of the regularity probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub trial: u64,
    /// 1 for `R y`, 2 for `R² y`.
    pub power: u32,
    pub eps: f64,
    pub pseudo_zeros: usize,
    pub sign_changes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub trials: u64,
    pub seed: u64,
    pub eps_rel: Vec<f64>,
    /// Trials where `R y` violates the bound for some `ε`.
    pub violations: u64,
    /// Same for `R² y`.
    pub violations_squared: u64,
    pub worst: Option<Violation>,
}

impl RegularityReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.violations_squared == 0
    }
}

/// Standard-normal dof vector, redrawn while all values are zero to
/// tolerance.
pub fn random_dof_function(disc: &DiscretePencil, rng: &mut impl Rng) -> PiecewiseLinear {
    loop {
        let u = normal_vector(rng, disc.n_dofs());
        let sup = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if u.iter().any(|v| v.abs() > ZTOL_REL * sup) && sup > 0.0 {
            return disc.extend(&u);
        }
    }
}

/// Checks `pseudo_zeros(Rᵏ y, ε) ≤ sign_changes(y)` for `k = 1, 2` on
/// seeded random `y`, with `ε = rel · sup|Rᵏ y|`.
pub fn regularity_probe(
    disc: &DiscretePencil,
    trials: u64,
    seed: u64,
    eps_rel: &[f64],
) -> Result<RegularityReport> {
    disc.operator_at_zero().check_positive_definite("A(0)")?;
    let mut report = RegularityReport {
        trials,
        seed,
        eps_rel: eps_rel.to_vec(),
        violations: 0,
        violations_squared: 0,
        worst: None,
    };
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial);
        let y = random_dof_function(disc, &mut rng);
        let sc = sign_changes(&y);
        let mut u = y;
        for power in 1..=2u32 {
            u = resolvent_apply(disc, &u)?;
            let sup = u.sup_norm();
            let bad = eps_rel
                .iter()
                .map(|r| (r * sup, pseudo_zeros(&u, r * sup)))
                .filter(|&(_, pz)| pz > sc)
                .max_by_key(|&(_, pz)| pz);
            if let Some((eps, pz)) = bad {
                if power == 1 {
                    report.violations += 1;
                } else {
                    report.violations_squared += 1;
                }
                let excess = pz - sc;
                if report
                    .worst
                    .as_ref()
                    .is_none_or(|w| w.pseudo_zeros - w.sign_changes < excess)
                {
                    report.worst = Some(Violation {
                        trial,
                        power,
                        eps,
                        pseudo_zeros: pz,
                        sign_changes: sc,
                    });
                }
            }
        }
    }
    Ok(report)
}

/// Steps needed for `(λₙ/λₙ₊₁)^m ≤ target`.
pub fn predicted_steps(lambda_n: f64, lambda_next: f64, target: f64) -> Result<usize> {
    let ratio = lambda_n / lambda_next;
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Precondition(format!(
            "need 0 < λₙ < λₙ₊₁, got {lambda_n} and {lambda_next}"
        )));
    }
    Ok((target.ln() / ratio.ln()).ceil() as usize)
}

/// Iterates `u ← λₙ R u`, normalizing each iterate in the `M_r` norm.
/// Returns all iterates, the start included.
///
/// Rounding feeds every lower eigendirection, which then grows like
/// `(λₙ/λₖ)^m`. For `n > 1` pass the computed lower eigenpairs in `deflate`;
/// their `M_r` projections are removed at each step.
pub fn power_iteration(
    disc: &DiscretePencil,
    y0: &PiecewiseLinear,
    lambda_n: f64,
    steps: usize,
    deflate: &[EigenPair],
) -> Result<Vec<PiecewiseLinear>> {
    let lower: Vec<(Vec<f64>, Vec<f64>)> = deflate
        .iter()
        .map(|p| (disc.restrict(&p.vector), disc.weigh(&p.vector)))
        .collect();
    let normalize = |y: PiecewiseLinear| -> Result<PiecewiseLinear> {
        let mut u = disc.restrict(&y);
        for (v, mv) in &lower {
            let c: f64 = u.iter().zip(mv).map(|(a, b)| a * b).sum();
            u.iter_mut().zip(v).for_each(|(a, b)| *a -= c * b);
        }
        let y = disc.extend(&u);
        let n = disc.weight_norm_sq(&u).sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::Stagnation { step: 0, change: n });
        }
        Ok(y.map(|v| v / n))
    };
    let mut iterates = vec![normalize(y0.clone())?];
    let mut first_change = None;
    for step in 1..=steps {
        let prev = iterates.last().unwrap();
        let next = normalize(resolvent_apply(disc, prev)?.map(|v| lambda_n * v))
            .map_err(|_| Error::Stagnation { step, change: f64::NAN })?;
        let d: Vec<f64> = disc
            .restrict(&next)
            .iter()
            .zip(disc.restrict(prev))
            .map(|(a, b)| a - b)
            .collect();
        let change = disc.weight_norm_sq(&d).sqrt();
        let first = *first_change.get_or_insert(change);
        if step == steps && step > 1 && change > 1e-8 && change >= first {
            return Err(Error::Stagnation { step, change });
        }
        iterates.push(next);
    }
    Ok(iterates)
}

/// `min(‖u - y‖, ‖u + y‖)` in the `M_r` norm.
pub fn weight_distance_up_to_sign(disc: &DiscretePencil, u: &PiecewiseLinear, y: &PiecewiseLinear) -> f64 {
    let (a, b) = (disc.restrict(u), disc.restrict(y));
    let dist = |s: f64| {
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - s * y).collect();
        disc.weight_norm_sq(&d).sqrt()
    };
    dist(1.0).min(dist(-1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevOutcome {
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub alpha: Vec<f64>,
    pub sign_changes: usize,
    pub interior_zeros: usize,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

impl ChebyshevOutcome {
    pub fn passed(&self) -> bool {
        self.lower_ok && self.upper_ok
    }
}

/// Forms `y = Σ_{k=n}^{N} αₖ yₖ` from `pairs` (index `k` at position
/// `k - 1`) and checks `sign_changes(y) ≥ n - 1` and at most `N - 1`
/// interior zero components.
pub fn chebyshev_check(pairs: &[EigenPair], alpha: &[f64], n: usize, big_n: usize) -> Result<ChebyshevOutcome> {
    if n == 0 || n > big_n || big_n > pairs.len() {
        return Err(Error::Precondition(format!(
            "need 1 ≤ n ≤ N ≤ {}, got n = {n}, N = {big_n}",
            pairs.len()
        )));
    }
    if alpha.len() != big_n - n + 1 {
        return Err(Error::Precondition(format!(
            "expected {} coefficients, got {}",
            big_n - n + 1,
            alpha.len()
        )));
    }
    if alpha.iter().all(|&a| a == 0.0) {
        return Err(Error::Precondition("all coefficients are zero".into()));
    }
    let mesh = pairs[0].vector.mesh().clone();
    let mut values = vec![0.0; mesh.n_nodes()];
    for (a, pair) in alpha.iter().zip(&pairs[n - 1..big_n]) {
        for (v, y) in values.iter_mut().zip(pair.vector.values()) {
            *v += a * y;
        }
    }
    let y = PiecewiseLinear::new(mesh, values)?;
    let ztol = default_ztol(&y);
    let sc = sign_changes_with(&y, ztol);
    let zc = zero_components(&y, ztol).interior_count();
    Ok(ChebyshevOutcome {
        n,
        big_n,
        alpha: alpha.to_vec(),
        sign_changes: sc,
        interior_zeros: zc,
        lower_ok: sc + 1 >= n,
        upper_ok: zc < big_n,
    })
}
