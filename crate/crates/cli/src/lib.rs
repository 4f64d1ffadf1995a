//! Batch front end for `sturmosc`: reads a TOML problem, runs one analysis,
//! writes CSV and JSON reports.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use sturmosc::eigensolver::{eigenpairs, EigenPair};
use sturmosc::oscillation::{
    analyze, chebyshev_check, interlaces, normal_vector, regularity_probe, trial_rng, vanishes_on_cell, zero_components,
    ChebyshevOutcome, OscillationReport, RegularityReport,
};
use sturmosc::transform::{eliminate_potential, TransformedProblem};
use sturmosc::DiscretePencil;

pub mod config;

pub use config::ProblemConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] sturmosc::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) | Self::Io(_) => 2,
            Self::Numerical(_) => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Solve,
    Transform,
    Oscillate,
    Chebyshev,
    Regularity,
    All,
}

/// Sup-norm and relative tolerances asserted by `transform`.
pub const INVARIANCE_REL_TOL: f64 = 1e-3;
pub const IDENTITY_TOL: f64 = 1e-6;
pub const EIGENFUNCTION_MAP_TOL: f64 = 1e-3;

/// Runs `command` and writes its reports into `out`. `Ok(false)` means a
/// checked property failed.
pub fn run(command: Command, cfg: &ProblemConfig, out: &Path) -> Result<bool, CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    match command {
        Command::Solve => solve(cfg, out),
        Command::Transform => transform(cfg, out),
        Command::Oscillate => oscillate(cfg, out),
        Command::Chebyshev => chebyshev(cfg, out),
        Command::Regularity => regularity(cfg, out),
        Command::All => {
            let mut ok = true;
            for c in [
                Command::Solve,
                Command::Transform,
                Command::Oscillate,
                Command::Chebyshev,
                Command::Regularity,
            ] {
                ok &= run(c, cfg, out)?;
            }
            Ok(ok)
        }
    }
}

fn write(out: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = out.join(name);
    fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_json(out: &Path, name: &str, value: &impl Serialize) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    write(out, name, &s)
}

fn source_pairs(cfg: &ProblemConfig) -> Result<(DiscretePencil, Vec<EigenPair>), CliError> {
    let prob = cfg.problem()?;
    let disc = prob.assemble(&prob.mesh(cfg.mesh_cells)?)?;
    let pairs = eigenpairs(&disc, cfg.solver.count, cfg.solver_options())?;
    Ok((disc, pairs))
}

fn solve(cfg: &ProblemConfig, out: &Path) -> Result<bool, CliError> {
    let (disc, pairs) = source_pairs(cfg)?;
    let mut ev = String::from("index,lambda\n");
    for p in &pairs {
        writeln!(ev, "{},{:.16e}", p.index, p.lambda).unwrap();
    }
    write(out, "eigenvalues.csv", &ev)?;

    let mut ef = String::from("node");
    for p in &pairs {
        write!(ef, ",y{}", p.index).unwrap();
    }
    ef.push('\n');
    for (i, x) in disc.mesh().nodes().iter().enumerate() {
        write!(ef, "{x:.16e}").unwrap();
        for p in &pairs {
            write!(ef, ",{:.16e}", p.vector.values()[i]).unwrap();
        }
        ef.push('\n');
    }
    write(out, "eigenfunctions.csv", &ef)?;
    println!(
        "solve: {} eigenvalues, lambda_1 = {:.10}, max residual {:.2e}",
        pairs.len(),
        pairs[0].lambda,
        pairs.iter().map(|p| p.residual).fold(0.0, f64::max)
    );
    Ok(true)
}

#[derive(Debug, Serialize)]
struct TransformJson {
    kind: &'static str,
    reflected: bool,
    xi: f64,
    /// `Y₂(1)/Y₁(1) + ω₁` for two natural ends.
    robin_constant: Option<f64>,
    /// Robin constant of the transformed pencil, `Y₁(1)²` times the above.
    transformed_robin_constant: Option<f64>,
    identity_residual: f64,
    min_y1: f64,
    ill_conditioned: bool,
    eigenvalues: Vec<f64>,
    transformed_eigenvalues: Vec<f64>,
    spectral_invariance_rel: Vec<f64>,
    spectral_invariance_max_rel: f64,
    eigenfunction_map_sup: Vec<f64>,
    eigenfunction_map_max_sup: f64,
    tau_nodes: Vec<f64>,
    passed: bool,
}

/// `sup |S yₙ - ŷₙ|` up to sign, with `S yₙ` renormalized in the `M_r̂` norm.
fn eigenfunction_map_errors(t: &TransformedProblem, source: &[EigenPair], target: &[EigenPair]) -> Result<Vec<f64>, CliError> {
    let hat = t.target_pencil()?;
    source
        .iter()
        .zip(target)
        .map(|(y, yh)| {
            let sy = t.apply_s(&y.vector)?;
            let n = hat.weight_norm_sq(&hat.restrict(&sy)).sqrt();
            let dist = |s: f64| {
                sy.values()
                    .iter()
                    .zip(yh.vector.values())
                    .map(|(a, b)| (a / n - s * b).abs())
                    .fold(0.0, f64::max)
            };
            Ok(dist(1.0).min(dist(-1.0)))
        })
        .collect()
}

fn transform(cfg: &ProblemConfig, out: &Path) -> Result<bool, CliError> {
    let t = eliminate_potential(&cfg.problem()?, cfg.mesh_cells)?;
    let opts = cfg.solver_options();
    let source = eigenpairs(&t.source_pencil()?, cfg.solver.count, opts)?;
    let target = eigenpairs(&t.target_pencil()?, cfg.solver.count, opts)?;
    let eigenvalues: Vec<f64> = source.iter().map(|p| p.lambda).collect();
    let transformed: Vec<f64> = target.iter().map(|p| p.lambda + t.xi).collect();
    let rel: Vec<f64> = eigenvalues
        .iter()
        .zip(&transformed)
        .map(|(a, b)| (a - b).abs() / a.abs().max(f64::MIN_POSITIVE))
        .collect();
    let max_rel = rel.iter().copied().fold(0.0, f64::max);
    let map = eigenfunction_map_errors(&t, &source, &target)?;
    let max_map = map.iter().copied().fold(0.0, f64::max);
    let robin_ok = t.identity.robin_constant.is_none_or(|c| c > 0.0);
    let passed = max_rel <= INVARIANCE_REL_TOL
        && t.identity.max_residual <= IDENTITY_TOL
        && max_map <= EIGENFUNCTION_MAP_TOL
        && robin_ok;
    let report = TransformJson {
        kind: t.source.bc.kind().label(),
        reflected: t.reflected,
        xi: t.xi,
        robin_constant: t.identity.robin_constant,
        transformed_robin_constant: t.identity.robin_constant.map(|_| t.target.bc.v()[1]),
        identity_residual: t.identity.max_residual,
        min_y1: t.pair.min_y1(),
        ill_conditioned: t.pair.ill_conditioned(),
        eigenvalues,
        transformed_eigenvalues: transformed,
        spectral_invariance_rel: rel,
        spectral_invariance_max_rel: max_rel,
        eigenfunction_map_sup: map,
        eigenfunction_map_max_sup: max_map,
        tau_nodes: t.tau.nodal_values().to_vec(),
        passed,
    };
    write_json(out, "transform.json", &report)?;
    println!(
        "transform: xi = {:.6}, invariance {:.2e}, identity residual {:.2e}, map {:.2e}: {}",
        t.xi,
        max_rel,
        t.identity.max_residual,
        max_map,
        verdict(passed)
    );
    if report.ill_conditioned {
        println!("transform: warning: min Y1 = {:.3e} is below 1e-6", report.min_y1);
    }
    Ok(passed)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

#[derive(Debug, Serialize)]
struct EigenOscillation {
    index: usize,
    lambda: f64,
    counts: OscillationReport,
    expected: usize,
    counts_ok: bool,
    vanishes_on_cell: bool,
    /// Zeros of this eigenfunction interlace with those of the next one.
    interlaces_next: Option<bool>,
}

#[derive(Debug, Serialize)]
struct OscillationJson {
    kind: &'static str,
    eigenfunctions: Vec<EigenOscillation>,
    passed: bool,
}

fn oscillate(cfg: &ProblemConfig, out: &Path) -> Result<bool, CliError> {
    let (disc, pairs) = source_pairs(cfg)?;
    let zeros: Vec<Vec<f64>> = pairs
        .iter()
        .map(|p| zero_components(&p.vector, sturmosc::oscillation::default_ztol(&p.vector)).locations())
        .collect();
    let eigenfunctions: Vec<EigenOscillation> = pairs
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let counts = analyze(&p.vector, &cfg.analysis.eps_grid);
            let expected = p.index - 1;
            EigenOscillation {
                index: p.index,
                lambda: p.lambda,
                counts_ok: counts.sign_changes == expected && counts.zero_components_interior == expected,
                vanishes_on_cell: vanishes_on_cell(&p.vector, counts.ztol),
                interlaces_next: zeros.get(k + 1).map(|next| interlaces(&zeros[k], next)),
                expected,
                counts,
            }
        })
        .collect();
    let passed = eigenfunctions
        .iter()
        .all(|e| e.counts_ok && !e.vanishes_on_cell && e.interlaces_next != Some(false));
    let fails = eigenfunctions.iter().filter(|e| !e.counts_ok).count();
    write_json(
        out,
        "oscillation.json",
        &OscillationJson {
            kind: disc.bc().kind().label(),
            eigenfunctions,
            passed,
        },
    )?;
    println!("oscillate: {} eigenfunctions, {fails} count failures: {}", pairs.len(), verdict(passed));
    Ok(passed)
}

#[derive(Debug, Serialize)]
struct ChebyshevTrial {
    trial: u64,
    #[serde(flatten)]
    outcome: ChebyshevOutcome,
    verdict: &'static str,
}

#[derive(Debug, Serialize)]
struct ChebyshevJson {
    seed: u64,
    trials_per_pair: u64,
    max_n: usize,
    failures: usize,
    trials: Vec<ChebyshevTrial>,
    passed: bool,
}

fn chebyshev(cfg: &ProblemConfig, out: &Path) -> Result<bool, CliError> {
    let (_, pairs) = source_pairs(cfg)?;
    let max_n = cfg.analysis.chebyshev_n;
    let mut trials = Vec::new();
    let mut stream = 0u64;
    for big_n in 1..=max_n {
        for n in 1..=big_n {
            for trial in 0..cfg.analysis.trials {
                let mut rng = trial_rng(cfg.analysis.seed, stream);
                stream += 1;
                let alpha = normal_vector(&mut rng, big_n - n + 1);
                let outcome = chebyshev_check(&pairs, &alpha, n, big_n)?;
                trials.push(ChebyshevTrial {
                    trial,
                    verdict: verdict(outcome.passed()),
                    outcome,
                });
            }
        }
    }
    let failures = trials.iter().filter(|t| !t.outcome.passed()).count();
    let report = ChebyshevJson {
        seed: cfg.analysis.seed,
        trials_per_pair: cfg.analysis.trials,
        max_n,
        failures,
        passed: failures == 0,
        trials,
    };
    write_json(out, "chebyshev.json", &report)?;
    println!("chebyshev: {} trials, {failures} failures: {}", report.trials.len(), verdict(report.passed));
    Ok(report.passed)
}

#[derive(Debug, Serialize)]
struct RegularityJson {
    /// The probe runs on the potential-free transformed pencil.
    pencil: &'static str,
    xi: f64,
    #[serde(flatten)]
    report: RegularityReport,
    passed: bool,
}

fn regularity(cfg: &ProblemConfig, out: &Path) -> Result<bool, CliError> {
    let t = eliminate_potential(&cfg.problem()?, cfg.mesh_cells)?;
    let report = regularity_probe(&t.target_pencil()?, cfg.analysis.trials, cfg.analysis.seed, &cfg.analysis.eps_grid)?;
    let passed = report.passed();
    println!(
        "regularity: {} trials, {} violations for R, {} for R^2: {}",
        report.trials,
        report.violations,
        report.violations_squared,
        verdict(passed)
    );
    write_json(
        out,
        "regularity.json",
        &RegularityJson {
            pencil: "transformed",
            xi: t.xi,
            report,
            passed,
        },
    )?;
    Ok(passed)
}
