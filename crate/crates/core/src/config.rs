//! Run configuration, read from TOML.
//!
//! ```toml
//! schema_version = 1
//! subcommand = "solve"
//! seed = 42
//!
//! [kernel]
//! n = 1
//! s = 0.5
//! p = 1.5
//!
//! [domain]
//! shape = "interval"
//! lo = -1.0
//! hi = 1.0
//!
//! [grid]
//! h = 0.03125
//! collar_width = 2.0
//!
//! [exterior]
//! model = "halfspace"
//! negative = -1.0
//! positive = 1.0
//!
//! [tolerance]
//! solver_tol = 1e-10
//!
//! [output]
//! json = "solve.json"
//! csv = "solution.csv"
//! ```
//!
//! Blocks not needed by the chosen subcommand may be omitted; unknown keys
//! are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::function_space::{AnalyticFunction, DomainSpec, FarField, GridFunction};
use crate::kernels::{KernelSpec, Profile, SamplePlan};
use crate::viscosity::TestFamily;
use crate::weak_solver::Method;
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Writes to `<path>.tmp` and renames into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    CheckKernel,
    LemmaSuite,
    PvEval,
    ThresholdScan,
    Solve,
    Residual,
    ViscosityCheck,
    ScanEquivalence,
    Compare,
    DoublingDiagnostic,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::CheckKernel => "check-kernel",
            Subcommand::LemmaSuite => "lemma-suite",
            Subcommand::PvEval => "pv-eval",
            Subcommand::ThresholdScan => "threshold-scan",
            Subcommand::Solve => "solve",
            Subcommand::Residual => "residual",
            Subcommand::ViscosityCheck => "viscosity-check",
            Subcommand::ScanEquivalence => "scan-equivalence",
            Subcommand::Compare => "compare",
            Subcommand::DoublingDiagnostic => "doubling-diagnostic",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelBlock {
    pub n: usize,
    pub s: f64,
    pub p: f64,
    #[serde(default = "one")]
    pub lambda: f64,
    /// Cosine coefficients of the angular factor; absent means `|z|^{-n-sp}`.
    #[serde(default)]
    pub angular_coeffs: Option<Vec<f64>>,
}

fn one() -> f64 {
    1.0
}

impl KernelBlock {
    pub fn spec(&self) -> Result<KernelSpec> {
        let profile = match &self.angular_coeffs {
            None => Profile::Power,
            Some(c) => Profile::Perturbed { angular_coeffs: c.clone() },
        };
        KernelSpec::new(self.n, self.s, self.p, self.lambda, profile)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub h: f64,
    #[serde(default = "two")]
    pub collar_width: f64,
}

fn two() -> f64 {
    2.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceBlock {
    #[serde(default = "pv_tol")]
    pub pv_tol: f64,
    #[serde(default = "solver_tol")]
    pub solver_tol: f64,
    #[serde(default = "viscosity_tol")]
    pub viscosity_tol: f64,
    /// Comparison slack and weak classification tolerance.
    #[serde(default = "comparison_tol")]
    pub comparison_tol: f64,
}

fn pv_tol() -> f64 {
    1e-8
}
fn solver_tol() -> f64 {
    1e-10
}
fn viscosity_tol() -> f64 {
    1e-6
}
fn comparison_tol() -> f64 {
    1e-8
}

impl Default for ToleranceBlock {
    fn default() -> Self {
        ToleranceBlock { pv_tol: pv_tol(), solver_tol: solver_tol(), viscosity_tol: viscosity_tol(), comparison_tol: comparison_tol() }
    }
}

/// Artifact paths; unset ones default to `<subcommand>.json` and
/// `<subcommand>.csv` in the working directory.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub json: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

/// Lattice functions read from disk (CSV plus JSON header).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputBlock {
    pub u: Option<PathBuf>,
    pub v: Option<PathBuf>,
}

/// Closed-form function, for `pv-eval` and `viscosity-check`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionBlock {
    Constant { value: f64 },
    Affine { offset: f64, slope: Vec<f64> },
    /// `c0 + g·(x - x0) + ½ (x - x0)ᵀ H (x - x0)`.
    Quadratic { center: Vec<f64>, c0: f64, gradient: Vec<f64>, hessian: Vec<Vec<f64>> },
    /// `c |x - x0|^β + shift`.
    RadialPower { center: Vec<f64>, c: f64, beta: f64, #[serde(default)] shift: f64 },
    /// `amplitude · min(|x|², 1)`.
    CappedSquare {
        #[serde(default = "one")]
        amplitude: f64,
    },
    Bump { center: Vec<f64>, radius: f64, height: f64 },
}

fn pad(v: &[f64], n: usize, what: &str) -> Result<[f64; 2]> {
    if v.len() != n {
        return Err(Error::InvalidParameter(format!("{what} needs {n} components, got {}", v.len())));
    }
    let mut out = [0.0; 2];
    out[..n].copy_from_slice(v);
    Ok(out)
}

impl FunctionBlock {
    pub fn build(&self, n: usize) -> Result<AnalyticFunction> {
        match self {
            FunctionBlock::Constant { value } => AnalyticFunction::constant(n, *value),
            FunctionBlock::Affine { offset, slope } => AnalyticFunction::affine(n, *offset, pad(slope, n, "slope")?),
            FunctionBlock::Quadratic { center, c0, gradient, hessian } => {
                if hessian.len() != n {
                    return Err(Error::InvalidParameter(format!("hessian needs {n} rows")));
                }
                let mut hess = [[0.0; 2]; 2];
                for (i, row) in hessian.iter().enumerate() {
                    hess[i] = pad(row, n, "hessian row")?;
                }
                AnalyticFunction::quadratic(n, pad(center, n, "center")?, *c0, pad(gradient, n, "gradient")?, hess)
            }
            FunctionBlock::RadialPower { center, c, beta, shift } => {
                AnalyticFunction::radial_power(n, pad(center, n, "center")?, *c, *beta)?.scale_shift(1.0, *shift)
            }
            FunctionBlock::CappedSquare { amplitude } => AnalyticFunction::capped_square(n)?.scale_shift(*amplitude, 0.0),
            FunctionBlock::Bump { center, radius, height } => AnalyticFunction::bump(n, pad(center, n, "center")?, *radius, *height),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaBlock {
    #[serde(default = "lemma_samples")]
    pub samples: usize,
    #[serde(default = "oracle_samples")]
    pub oracle_samples: usize,
}

fn lemma_samples() -> usize {
    100_000
}
fn oracle_samples() -> usize {
    10_000
}

impl Default for LemmaBlock {
    fn default() -> Self {
        LemmaBlock { samples: lemma_samples(), oracle_samples: oracle_samples() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanBlock {
    #[serde(default = "default_s")]
    pub s: Vec<f64>,
    #[serde(default = "default_p")]
    pub p: Vec<f64>,
}

fn default_s() -> Vec<f64> {
    vec![0.3, 0.5, 0.7]
}

/// `p = 1.05, 1.10, …, 2.50`.
fn default_p() -> Vec<f64> {
    (1..=30).map(|k| 1.0 + 0.05 * k as f64).collect()
}

impl Default for ScanBlock {
    fn default() -> Self {
        ScanBlock { s: default_s(), p: default_p() }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    #[serde(default)]
    pub method: Method,
    pub max_iterations: Option<usize>,
}

/// Test function for `viscosity-check`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestBlock {
    pub function: FunctionBlock,
    pub x0: Vec<f64>,
    pub r: f64,
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoublingBlock {
    /// Defaults to 2 above the critical exponent and `sp/(p-1) + 1/2` below.
    pub q: Option<f64>,
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
}

fn default_eps() -> Vec<f64> {
    (0..8).map(|k| 0.5f64.powi(k)).collect()
}

impl Default for DoublingBlock {
    fn default() -> Self {
        DoublingBlock { q: None, eps: default_eps() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub subcommand: Option<Subcommand>,
    #[serde(default)]
    pub seed: u64,
    pub kernel: Option<KernelBlock>,
    pub domain: Option<DomainSpec>,
    pub grid: Option<GridBlock>,
    pub exterior: Option<FarField>,
    #[serde(default)]
    pub tolerance: ToleranceBlock,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default)]
    pub input: InputBlock,
    /// Closed-form `u` for `pv-eval` and `viscosity-check`.
    pub function: Option<FunctionBlock>,
    /// Evaluation points for `pv-eval`.
    pub points: Option<Vec<Vec<f64>>>,
    pub sample_plan: Option<SamplePlan>,
    #[serde(default)]
    pub lemma: LemmaBlock,
    #[serde(default)]
    pub scan: ScanBlock,
    #[serde(default)]
    pub solver: SolverBlock,
    pub test: Option<TestBlock>,
    pub family: Option<TestFamily>,
    #[serde(default)]
    pub doubling: DoublingBlock,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Format(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", cfg.schema_version)));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Checks that every block the subcommand reads is present.
    pub fn validate(&self, cmd: Subcommand) -> Result<()> {
        if let Some(own) = self.subcommand {
            if own != cmd {
                return Err(Error::Format(format!("config is for `{}`, not `{}`", own.name(), cmd.name())));
            }
        }
        let need = |ok: bool, field: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Format(format!("`{}` needs the `{field}` block", cmd.name())))
            }
        };
        let inline_problem = self.domain.is_some() && self.grid.is_some() && self.exterior.is_some();
        match cmd {
            Subcommand::LemmaSuite => Ok(()),
            Subcommand::CheckKernel | Subcommand::ThresholdScan => need(self.kernel.is_some(), "kernel"),
            Subcommand::PvEval => {
                need(self.kernel.is_some(), "kernel")?;
                need(self.points.is_some(), "points")?;
                need(self.function.is_some() || self.input.u.is_some(), "function")
            }
            Subcommand::Solve => {
                need(self.kernel.is_some(), "kernel")?;
                need(self.domain.is_some(), "domain")?;
                need(self.grid.is_some(), "grid")?;
                need(self.exterior.is_some(), "exterior")
            }
            Subcommand::Residual => {
                need(self.kernel.is_some(), "kernel")?;
                need(self.input.u.is_some(), "input.u")
            }
            Subcommand::ViscosityCheck => {
                need(self.kernel.is_some(), "kernel")?;
                need(self.test.is_some(), "test")?;
                need(self.function.is_some() || self.input.u.is_some(), "function")
            }
            Subcommand::ScanEquivalence => {
                need(self.kernel.is_some(), "kernel")?;
                need(self.input.u.is_some() || inline_problem, "input.u")
            }
            Subcommand::Compare | Subcommand::DoublingDiagnostic => {
                need(self.kernel.is_some(), "kernel")?;
                need(self.input.u.is_some(), "input.u")?;
                need(self.input.v.is_some(), "input.v")
            }
        }
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec> {
        self.kernel.as_ref().ok_or_else(|| Error::Format("missing `kernel` block".into()))?.spec()
    }

    /// Lattice datum built from `domain`, `grid` and `exterior`: collar nodes
    /// take the far-field values, interior nodes start at zero.
    pub fn exterior_data(&self) -> Result<GridFunction> {
        let (Some(domain), Some(grid), Some(far)) = (&self.domain, &self.grid, self.exterior) else {
            return Err(Error::Format("missing `domain`, `grid` or `exterior` block".into()));
        };
        let d = domain.clone();
        GridFunction::new(domain.clone(), grid.h, grid.collar_width, far, move |x| if d.contains(x) { 0.0 } else { far.value(x) })
    }

    pub fn json_path(&self, cmd: Subcommand) -> PathBuf {
        self.output.json.clone().unwrap_or_else(|| PathBuf::from(format!("{}.json", cmd.name())))
    }

    pub fn csv_path(&self, cmd: Subcommand) -> PathBuf {
        self.output.csv.clone().unwrap_or_else(|| PathBuf::from(format!("{}.csv", cmd.name())))
    }
}
