//! TOML problem description.

use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;
use sturmosc::{Atom, BcKind, BoundarySpec, GeneralizedFunction, Mesh, PiecewiseConstant, Problem, SolverOptions};

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub mesh_cells: usize,
    #[serde(default)]
    pub p: PConfig,
    #[serde(default)]
    pub q: MeasureConfig,
    #[serde(default = "MeasureConfig::lebesgue")]
    pub r: MeasureConfig,
    pub bc: BcConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

/// `p` as a list of cells tiling `[0, 1]`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PConfig {
    pub cells: Vec<PCell>,
}

impl Default for PConfig {
    fn default() -> Self {
        Self {
            cells: vec![PCell { from: 0.0, to: 1.0, value: 1.0 }],
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PCell {
    pub from: f64,
    pub to: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    /// Nodal values of the primitive `W` with `W(0) = 0`; absent means `W ≡ 0`.
    pub primitive: Option<PrimitiveConfig>,
    #[serde(default)]
    pub atoms: Vec<AtomConfig>,
}

impl MeasureConfig {
    fn lebesgue() -> Self {
        Self {
            primitive: Some(PrimitiveConfig {
                knots: vec![0.0, 1.0],
                values: vec![0.0, 1.0],
            }),
            atoms: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrimitiveConfig {
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    pub at: f64,
    pub mass: f64,
}

/// Exactly one of `kind`, `angles` (entries of `U` as multiples of π) or
/// `robin_c`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcConfig {
    pub kind: Option<String>,
    pub angles: Option<[f64; 2]>,
    pub robin_c: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_count() -> usize {
    8
}

fn default_tol() -> f64 {
    sturmosc::eigensolver::DEFAULT_TOL
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            count: default_count(),
            tol: default_tol(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Pseudo-zero scales relative to `sup|f|`.
    #[serde(default = "default_eps_grid")]
    pub eps_grid: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    /// Largest `N` in the Chebyshev checks.
    #[serde(default = "default_chebyshev_n")]
    pub chebyshev_n: usize,
}

fn default_eps_grid() -> Vec<f64> {
    sturmosc::oscillation::EPS_GRID_REL.to_vec()
}

fn default_trials() -> u64 {
    100
}

fn default_chebyshev_n() -> usize {
    4
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            eps_grid: default_eps_grid(),
            trials: default_trials(),
            seed: 0,
            chebyshev_n: default_chebyshev_n(),
        }
    }
}

impl ProblemConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Checks everything that can be checked before any computation.
    fn check(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.mesh_cells == 0 {
            return bad("mesh_cells: must be positive".into());
        }
        if self.solver.count == 0 {
            return bad("solver.count: must be positive".into());
        }
        if !(self.solver.tol > 0.0) {
            return bad(format!("solver.tol: must be positive, got {}", self.solver.tol));
        }
        if self.analysis.eps_grid.is_empty() || self.analysis.eps_grid.iter().any(|e| !(*e > 0.0)) {
            return bad("analysis.eps_grid: needs positive entries".into());
        }
        if self.analysis.chebyshev_n == 0 || self.analysis.chebyshev_n > self.solver.count {
            return bad(format!(
                "analysis.chebyshev_n: must lie in 1..={} (solver.count)",
                self.solver.count
            ));
        }
        self.problem()?;
        Ok(())
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.solver.tol,
            ..SolverOptions::default()
        }
    }

    pub fn problem(&self) -> Result<Problem, CliError> {
        Ok(Problem {
            p: self.p.build()?,
            q: self.q.build("q")?,
            r: self.r.build("r")?,
            bc: self.bc.build()?,
        })
    }
}

impl PConfig {
    fn build(&self) -> Result<PiecewiseConstant, CliError> {
        let err = |m: String| CliError::Config(format!("p.cells: {m}"));
        let first = self.cells.first().ok_or_else(|| err("empty".into()))?;
        let mut nodes = vec![first.from];
        for (k, c) in self.cells.iter().enumerate() {
            if c.from != *nodes.last().unwrap() {
                return Err(err(format!("cell {k} starts at {} but the previous one ends at {}", c.from, nodes.last().unwrap())));
            }
            if !(c.value > 0.0) {
                return Err(err(format!("cell {k}: value must be positive, got {}", c.value)));
            }
            nodes.push(c.to);
        }
        let mesh = Mesh::from_nodes(nodes).map_err(|e| err(e.to_string()))?;
        PiecewiseConstant::new(Arc::new(mesh), self.cells.iter().map(|c| c.value).collect())
            .map_err(|e| err(e.to_string()))
    }
}

impl MeasureConfig {
    fn build(&self, name: &str) -> Result<GeneralizedFunction, CliError> {
        let err = |m: String| CliError::Config(format!("{name}: {m}"));
        let base = match &self.primitive {
            Some(p) => GeneralizedFunction::from_primitive_values(p.knots.clone(), p.values.clone())
                .map_err(|e| err(format!("primitive: {e}")))?,
            None => GeneralizedFunction::zero(),
        };
        let atoms = self.atoms.iter().map(|a| Atom::new(a.at, a.mass)).collect();
        base.with_atoms(atoms).map_err(|e| err(format!("atoms: {e}")))
    }
}

impl BcConfig {
    fn build(&self) -> Result<BoundarySpec, CliError> {
        let err = |m: String| CliError::Config(format!("bc: {m}"));
        let spec = match (&self.kind, self.angles, self.robin_c) {
            (Some(k), None, None) => {
                let kind = match k.as_str() {
                    "dirichlet-dirichlet" => BcKind::DirichletDirichlet,
                    "neumann-dirichlet" => BcKind::NeumannDirichlet,
                    "dirichlet-neumann" => BcKind::DirichletNeumann,
                    "neumann-neumann" => BcKind::NeumannNeumann,
                    other => {
                        return Err(err(format!(
                            "unknown kind {other:?}; expected dirichlet-dirichlet, neumann-dirichlet, \
                             dirichlet-neumann or neumann-neumann"
                        )))
                    }
                };
                BoundarySpec::canonical(kind)
            }
            (None, Some(theta), None) => BoundarySpec::from_angles(theta),
            (None, None, Some(c)) => BoundarySpec::robin_right(c),
            _ => return Err(err("give exactly one of kind, angles, robin_c".into())),
        };
        spec.map_err(|e| err(e.to_string()))
    }
}
