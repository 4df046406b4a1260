use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use robpoly_core::{Adversary, Distribution, RecoveryConfig, Variant};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum VariantName {
    #[default]
    Plain,
    L1,
    Fp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum LowerBoundKind {
    #[default]
    Uniform,
    Linear,
}

/// Every knob a command can read. Loaded from `--config`, then overridden
/// by flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    pub degree: Option<usize>,
    pub dim: Option<usize>,
    pub eps: f64,
    pub eta: f64,
    pub sigma: f64,
    pub rho: f64,
    pub delta: f64,
    pub dist: Distribution,
    pub bits: Option<u32>,
    pub variant: VariantName,
    pub adversary: Adversary,
    pub seed: u64,
    pub trials: usize,
    pub m: Option<usize>,
    pub c_grid: f64,
    pub max_iters: usize,
    pub strict_empty: bool,
    pub samples: Option<usize>,
    pub samples_grid: Vec<usize>,
    pub rho_grid: Vec<f64>,
    pub dists: Vec<Distribution>,
    pub kind: LowerBoundKind,
    pub c: Option<f64>,
    pub input: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: String::new(),
            degree: None,
            dim: None,
            eps: 0.5,
            eta: 0.01,
            sigma: 0.1,
            rho: 0.0,
            delta: 0.1,
            dist: Distribution::Chebyshev,
            bits: None,
            variant: VariantName::Plain,
            adversary: Adversary::default(),
            seed: 0,
            trials: 20,
            m: None,
            c_grid: 2.0,
            max_iters: 200,
            strict_empty: false,
            samples: None,
            samples_grid: Vec::new(),
            rho_grid: Vec::new(),
            dists: Vec::new(),
            kind: LowerBoundKind::Uniform,
            c: None,
            input: None,
            truth: None,
            out: None,
        }
    }
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Default, Clone)]
pub struct CommonArgs {
    /// JSON file with defaults for any of the options below
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Individual degree d
    #[arg(long, short = 'd', global = true)]
    pub degree: Option<usize>,
    /// Dimension n
    #[arg(long, short = 'n', global = true)]
    pub dim: Option<usize>,
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    #[arg(long, global = true)]
    pub eta: Option<f64>,
    /// Inlier noise bound
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    /// Outlier probability
    #[arg(long, global = true)]
    pub rho: Option<f64>,
    /// Failure probability used for default sample sizes
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Sampling distribution: uniform or chebyshev
    #[arg(long, global = true)]
    pub dist: Option<String>,
    /// Bits of precision for the fp variant
    #[arg(long, global = true)]
    pub bits: Option<u32>,
    #[arg(long, value_enum, global = true)]
    pub variant: Option<VariantName>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Cells per axis, overriding the derived grid size
    #[arg(long, global = true)]
    pub m: Option<usize>,
    #[arg(long, short = 'o', global = true)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::input(format!("cannot read config {}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::input(format!("config {}: {e}", p.display())))
            }
        }
    }

    pub fn apply(&mut self, a: &CommonArgs) -> Result<(), CliError> {
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = a.$field.clone() {
                    self.$field = v;
                }
            )*};
        }
        macro_rules! set_opt {
            ($($field:ident),*) => {$(
                if a.$field.is_some() {
                    self.$field = a.$field.clone();
                }
            )*};
        }
        set!(eps, eta, sigma, rho, delta, variant, seed, trials);
        set_opt!(degree, dim, bits, m, out);
        if let Some(d) = &a.dist {
            self.dist = d.parse().map_err(CliError::from)?;
        }
        Ok(())
    }

    pub fn degree(&self) -> Result<usize, CliError> {
        self.degree.ok_or_else(|| CliError::input("--degree is required"))
    }

    pub fn dim(&self) -> Result<usize, CliError> {
        match self.dim {
            Some(0) => Err(CliError::input("--dim must be positive")),
            Some(n) => Ok(n),
            None => Err(CliError::input("--dim is required")),
        }
    }

    pub fn check_ranges(&self) -> Result<(), CliError> {
        let bad = |name: &str, why: &str| Err(CliError::input(format!("{name}: {why}")));
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad("sigma", "must be a finite non-negative number");
        }
        if !(0.0..0.5).contains(&self.rho) {
            return bad("rho", "must lie in [0, 1/2)");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta", "must lie in (0, 1)");
        }
        if self.rho_grid.iter().any(|r| !(0.0..0.5).contains(r)) {
            return bad("rho_grid", "every value must lie in [0, 1/2)");
        }
        Ok(())
    }

    pub fn recovery(&self, n: usize) -> Result<RecoveryConfig, CliError> {
        let mut cfg = RecoveryConfig::new(self.degree()?, n);
        cfg.eps = self.eps;
        cfg.eta = self.eta;
        cfg.rho = self.rho;
        cfg.sigma = Some(self.sigma);
        cfg.m_override = self.m;
        cfg.c_grid = self.c_grid;
        cfg.max_iters = self.max_iters;
        cfg.strict_empty = self.strict_empty;
        cfg.variant = match self.variant {
            VariantName::Plain => Variant::Plain,
            VariantName::L1 => Variant::WithL1,
            VariantName::Fp => Variant::FinitePrecision {
                bits: self.bits.ok_or_else(|| CliError::input("--variant fp needs --bits"))?,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
