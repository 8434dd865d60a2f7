//! Experiment configuration files.
//!
//! Configs are TOML documents:
//!
//! ```toml
//! [factor]
//! kind = "hyperbolic"        # euclidean | sphere | hyperbolic | custom
//! radius = 2.5               # lambda = ... for euclidean, table = "psi.txt" for custom
//!
//! [ring.outer]
//! cos = [1.5, 0.0, 0.3]      # or: constant = 2.0, or: samples = [...]
//! [ring.inner]
//! cos = [0.5, 0.1]
//!
//! [solver]
//! q = 3.0
//! grid = "64x128"            # angular x radial nodes
//!
//! [rhs]
//! kind = "power"             # F(x, s, v) = coefficient * |x|^radius_power * s^s_power
//! s_power = 1.0
//!
//! [analysis]
//! levels = [0.25, 0.5, 0.75]
//!
//! [sweep]
//! q = [2.5, 3.0, 4.0]
//! factors = [{ kind = "euclidean" }, { kind = "sphere", radius = 1.0 }]
//! grids = ["32x64", "64x128"]
//! ```
//!
//! Every section except `[factor]` and `[ring]` is optional. Relative paths are
//! resolved against the directory holding the config file.

use crate::analysis::ConditionSamples;
use crate::domains::{RadialFunction, StarshapedRing};
use crate::error::{Error, Result};
use crate::geometry::RadialConformalFactor;
use crate::solver::{RhsSpec, SolverConfig, DIMENSION};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Samples used for Fourier-specified boundaries unless `resolution` is set.
pub const DEFAULT_FOURIER_RESOLUTION: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FactorSpec {
    Euclidean {
        #[serde(default = "one")]
        lambda: f64,
    },
    Sphere {
        #[serde(default = "one")]
        radius: f64,
    },
    Hyperbolic {
        #[serde(default = "one")]
        radius: f64,
    },
    Custom {
        table: PathBuf,
    },
}

fn one() -> f64 {
    1.0
}

impl FactorSpec {
    pub fn build(&self, base: &Path) -> Result<RadialConformalFactor> {
        match self {
            FactorSpec::Euclidean { lambda } => RadialConformalFactor::euclidean(*lambda),
            FactorSpec::Sphere { radius } => RadialConformalFactor::sphere(*radius),
            FactorSpec::Hyperbolic { radius } => RadialConformalFactor::hyperbolic(*radius),
            FactorSpec::Custom { table } => {
                let path = base.join(table);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::Config(format!("cannot read factor table {}: {e}", path.display())))?;
                RadialConformalFactor::custom_from_text(&text)
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialSpec {
    pub constant: Option<f64>,
    pub cos: Option<Vec<f64>>,
    pub sin: Option<Vec<f64>>,
    pub samples: Option<Vec<f64>>,
    pub resolution: Option<usize>,
}

impl RadialSpec {
    pub fn build(&self, name: &str) -> Result<RadialFunction> {
        let fourier = self.cos.is_some() || self.sin.is_some();
        let given = [self.constant.is_some(), fourier, self.samples.is_some()];
        if given.iter().filter(|&&g| g).count() != 1 {
            return Err(Error::Config(format!(
                "ring.{name}: give exactly one of `constant`, `cos`/`sin`, or `samples`"
            )));
        }
        if self.resolution.is_some() && !fourier {
            return Err(Error::Config(format!("ring.{name}: `resolution` only applies to Fourier boundaries")));
        }
        let built = if let Some(r) = self.constant {
            RadialFunction::constant(r)
        } else if let Some(samples) = &self.samples {
            if samples.len() < 4 {
                return Err(Error::Config(format!("ring.{name}: need at least 4 samples")));
            }
            RadialFunction::from_samples(samples.clone())
        } else {
            let resolution = self.resolution.unwrap_or(DEFAULT_FOURIER_RESOLUTION);
            if resolution < 4 {
                return Err(Error::Config(format!("ring.{name}: resolution must be at least 4")));
            }
            RadialFunction::from_fourier(
                self.cos.as_deref().unwrap_or(&[]),
                self.sin.as_deref().unwrap_or(&[]),
                resolution,
            )
        };
        built.map_err(|e| Error::Config(format!("ring.{name}: {e}")))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingSpec {
    pub outer: RadialSpec,
    pub inner: RadialSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub q: f64,
    pub grid: String,
    pub epsilon: f64,
    pub picard_tol: f64,
    pub max_picard: usize,
    pub linear_tol: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            q: d.q,
            grid: "64x128".into(),
            epsilon: d.epsilon,
            picard_tol: d.picard_tol,
            max_picard: d.max_picard,
            linear_tol: d.linear_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum RhsSection {
    Zero,
    /// `F(x, s, v) = coefficient·|x|^radius_power·s^s_power`.
    Power {
        #[serde(default = "one")]
        coefficient: f64,
        #[serde(default)]
        radius_power: f64,
        #[serde(default)]
        s_power: f64,
    },
}

impl Default for RhsSection {
    fn default() -> Self {
        RhsSection::Zero
    }
}

impl RhsSection {
    pub fn build(&self) -> Result<RhsSpec> {
        match *self {
            RhsSection::Zero => Ok(RhsSpec::zero()),
            RhsSection::Power { coefficient, radius_power, s_power } => {
                if !(coefficient >= 0.0 && coefficient.is_finite()) {
                    return Err(Error::Config(format!("rhs.coefficient must be non-negative, got {coefficient}")));
                }
                if !(s_power >= 0.0) {
                    return Err(Error::Config(format!(
                        "rhs.s_power must be non-negative so that F is non-decreasing in s, got {s_power}"
                    )));
                }
                if !radius_power.is_finite() {
                    return Err(Error::Config("rhs.radius_power must be finite".into()));
                }
                Ok(RhsSpec::power_law(coefficient, radius_power, s_power))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    /// Verdict tolerance; derived from the refinement error when absent.
    pub tol: Option<f64>,
    pub levels: Vec<f64>,
    /// `[x, tau, s, v]` sample counts of the structural condition check.
    pub condition_samples: [usize; 4],
    /// Margin tolerance of check-condition.
    pub condition_tol: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        let c = ConditionSamples::default();
        Self {
            tol: None,
            levels: (1..=9).map(|l| l as f64 / 10.0).collect(),
            condition_samples: [c.x_count, c.tau_count, c.s_count, c.v_count],
            condition_tol: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Diagnostic {
    None,
    /// Replace the solved field by `1 − |x − bump_center|²` before analysis.
    Bump,
    /// Dirichlet value 1 on both boundaries.
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Recorded in every output; all sampling in the pipelines is deterministic.
    pub seed: u64,
    pub diagnostic: Diagnostic,
    pub bump_center: [f64; 2],
}

impl Default for RunSection {
    fn default() -> Self {
        Self { seed: 0, diagnostic: Diagnostic::None, bump_center: [0.3, 0.0] }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub q: Option<Vec<f64>>,
    pub factors: Option<Vec<FactorSpec>>,
    pub grids: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    pub n: usize,
    pub resolution: usize,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self { n: DIMENSION, resolution: 101 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub factor: FactorSpec,
    pub ring: RingSpec,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub rhs: RhsSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub run: RunSection,
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub oracle: OracleSection,
    /// Directory relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Parses `"MxK"` into `(m, k)`.
pub fn parse_grid(text: &str) -> Result<(usize, usize)> {
    let bad = || Error::Config(format!("grid must look like MxK (e.g. 64x128), got {text:?}"));
    let (m, k) = text.trim().split_once(['x', 'X', '×']).ok_or_else(bad)?;
    let m: usize = m.trim().parse().map_err(|_| bad())?;
    let k: usize = k.trim().parse().map_err(|_| bad())?;
    if m < 8 || k < 3 {
        return Err(Error::Config(format!("grid needs m >= 8 and k >= 3, got {m}x{k}")));
    }
    Ok((m, k))
}

/// Everything a single solve needs, built and validated.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub ring: StarshapedRing,
    pub grid: (usize, usize),
    pub solver: SolverConfig,
    pub rhs: RhsSpec,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((Self::from_toml(&text, base)?, text))
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        let mut cfg = SolverConfig {
            q: s.q,
            epsilon: s.epsilon,
            picard_tol: s.picard_tol,
            max_picard: s.max_picard,
            linear_tol: s.linear_tol,
            ..SolverConfig::default()
        };
        if self.run.diagnostic == Diagnostic::Constant {
            cfg.boundary = (1.0, 1.0);
        }
        cfg
    }

    pub fn condition_samples(&self) -> ConditionSamples {
        let [x_count, tau_count, s_count, v_count] = self.analysis.condition_samples;
        ConditionSamples { x_count, tau_count, s_count, v_count }
    }

    /// Builds the experiment with `factor` replacing the configured one.
    pub fn experiment_with(&self, factor: &FactorSpec, q: f64, grid: &str) -> Result<Experiment> {
        let factor = factor.build(&self.base_dir)?;
        let outer = self.ring.outer.build("outer")?;
        let inner = self.ring.inner.build("inner")?;
        let ring = StarshapedRing::new(outer, inner, factor)?;
        let solver = SolverConfig { q, ..self.solver_config() };
        solver.validate()?;
        let grid = parse_grid(grid)?;
        let rhs = self.rhs.build()?;
        Ok(Experiment { ring, grid, solver, rhs })
    }

    /// Validates every section and builds the configured experiment.
    pub fn experiment(&self) -> Result<Experiment> {
        if let Some(tol) = self.analysis.tol {
            if !(tol >= 0.0 && tol.is_finite()) {
                return Err(Error::Config(format!("analysis.tol must be non-negative, got {tol}")));
            }
        }
        if let Some(l) = self.analysis.levels.iter().find(|&&l| !(l > 0.0 && l < 1.0)) {
            return Err(Error::Config(format!("analysis.levels must lie in (0, 1), got {l}")));
        }
        if self.analysis.condition_samples.iter().any(|&c| c < 2) {
            return Err(Error::Config("analysis.condition_samples entries must be >= 2".into()));
        }
        if self.oracle.n < 2 || self.oracle.resolution < 2 {
            return Err(Error::Config("oracle.n and oracle.resolution must be >= 2".into()));
        }
        self.experiment_with(&self.factor, self.solver.q, &self.solver.grid)
    }
}
