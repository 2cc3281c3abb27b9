//! Config sections shared by the subcommands.
//!
//! Every section is both a TOML table and a group of flags: the key `name`
//! in any section is the flag `--name` (underscores become dashes), except
//! `kernel.type`, which is `--kernel`. Unknown keys are rejected. Flags
//! override values read from `--config`.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use vcir::estimate::EstimatorKind;
use vcir::experiments::{ExperimentConfig, LlnFunction};
use vcir::kernels::{KernelSpec, MeshRule};
use vcir::simulate::EulerWeights;
use vcir::volterra::ModelParams;

use crate::CliError;

pub const FILE_HELP: &str = "Config file: each heading above is a TOML table named in snake_case \
(run, kernel, model, grid, monte_carlo, simulate, transform, estimate, lln, independence, partition). Keys are the flag names with '-' replaced by '_'; --kernel is \
kernel.type, e.g. kernel = { type = \"fractional\", alpha = 0.8 }. Unknown keys are rejected.";

/// Copies every `Some` field of `$top` over `$base`.
macro_rules! overlay {
    ($ty:ident { $($f:ident),* $(,)? }) => {
        impl Overlay for $ty {
            fn overlay(&mut self, top: Self) {
                $( if top.$f.is_some() { self.$f = top.$f; } )*
            }
        }
    };
}

pub trait Overlay {
    fn overlay(&mut self, top: Self);
}

pub fn require<T>(v: Option<T>, key: &str) -> Result<T, CliError> {
    v.ok_or_else(|| {
        CliError::Config(format!(
            "{key}: missing; pass --{} or set it in the config",
            key.replace('_', "-")
        ))
    })
}

/// Reads `path` as a strict TOML document.
pub fn read_file<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("config: {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("config: {}: {}", path.display(), e.message())))
}

/// `[run]`: seed, parallelism and output.
#[derive(Args, Deserialize, Clone, Debug, Default)]
#[serde(deny_unknown_fields)]
#[command(next_help_heading = "Run")]
pub struct RunArgs {
    /// TOML config file; flags override its values.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Base RNG seed; path i uses seed + i [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads [default: all cores].
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory for CSV files [default: .].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Suppress the summary line.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub quiet: Option<bool>,
}
overlay!(RunArgs {
    seed,
    threads,
    out,
    quiet
});

impl RunArgs {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out_dir(&self) -> Result<PathBuf, CliError> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&dir).map_err(|e| CliError::Config(format!("out: {}: {e}", dir.display())))?;
        Ok(dir)
    }
}

/// `[kernel]`: `type = "fractional" | "exponential" | "log"` and its
/// parameters.
#[derive(Args, Deserialize, Clone, Debug, Default)]
#[serde(deny_unknown_fields)]
#[command(next_help_heading = "Kernel")]
pub struct KernelArgs {
    /// Kernel family: fractional, exponential or log [default: fractional].
    #[arg(long = "kernel")]
    #[serde(rename = "type")]
    pub kind: Option<String>,
    /// Fractional order in (1/2, 1] [default: 0.95].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Exponential-sum weights, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub c: Option<Vec<f64>>,
    /// Exponential-sum rates, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub lambda: Option<Vec<f64>>,
    /// Regularity exponent of the log kernel, in (0, 1/2) [default: 0.25].
    #[arg(long)]
    pub gamma: Option<f64>,
}
overlay!(KernelArgs {
    kind,
    alpha,
    c,
    lambda,
    gamma
});

impl KernelArgs {
    pub fn build(&self) -> Result<KernelSpec, CliError> {
        let spec = match self.kind.as_deref().unwrap_or("fractional") {
            "fractional" => KernelSpec::fractional(self.alpha.unwrap_or(0.95)),
            "exponential" => {
                KernelSpec::exponential_sum(require(self.c.clone(), "c")?, require(self.lambda.clone(), "lambda")?)
            }
            "log" => KernelSpec::log(self.gamma.unwrap_or(0.25)),
            other => return Err(CliError::Config(format!("kernel: unknown type '{other}'"))),
        };
        Ok(spec?)
    }
}

/// `[model]`: initial value, drift and volatility.
#[derive(Args, Deserialize, Clone, Debug, Default)]
#[serde(deny_unknown_fields)]
#[command(next_help_heading = "Model")]
pub struct ModelArgs {
    /// Initial value [default: 1].
    #[arg(long)]
    pub x0: Option<f64>,
    /// Drift level, >= 0 [default: 1.2].
    #[arg(long)]
    pub b: Option<f64>,
    /// Mean reversion, < 0 [default: -1].
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    /// Volatility, >= 0 [default: 0.6].
    #[arg(long)]
    pub sigma: Option<f64>,
}
overlay!(ModelArgs { x0, b, beta, sigma });

impl ModelArgs {
    pub fn build(&self) -> Result<ModelParams, CliError> {
        Ok(ModelParams::new(
            self.x0.unwrap_or(1.0),
            self.b.unwrap_or(1.2),
            self.beta.unwrap_or(-1.0),
            self.sigma.unwrap_or(0.6),
        )?)
    }
}

/// `[grid]`: horizon, simulation and observation steps.
#[derive(Args, Deserialize, Clone, Debug, Default)]
#[serde(deny_unknown_fields)]
#[command(next_help_heading = "Grid")]
pub struct GridArgs {
    /// Time horizon T [default: 10].
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Simulation or solver step [default: dt_obs / factor, else 0.01].
    #[arg(long)]
    pub dt: Option<f64>,
    /// Observation step of P_n [default: dt * factor].
    #[arg(long)]
    pub dt_obs: Option<f64>,
    /// Refinement m/n of the Z partition [default: 1].
    #[arg(long)]
    pub factor: Option<usize>,
    /// Euler kernel weights: point or cell-exact [default: point].
    #[arg(long)]
    pub weights: Option<String>,
}
overlay!(GridArgs {
    horizon,
    dt,
    dt_obs,
    factor,
    weights
});

impl GridArgs {
    pub fn horizon(&self) -> f64 {
        self.horizon.unwrap_or(10.0)
    }

    pub fn factor(&self) -> usize {
        self.factor.unwrap_or(1)
    }

    /// `(dt, dt_obs)` with the missing one derived from the other.
    pub fn steps(&self) -> (f64, f64) {
        let f = self.factor() as f64;
        match (self.dt, self.dt_obs) {
            (Some(d), Some(o)) => (d, o),
            (Some(d), None) => (d, d * f),
            (None, Some(o)) => (o / f, o),
            (None, None) => (0.01, 0.01 * f),
        }
    }

    pub fn weights(&self) -> Result<EulerWeights, CliError> {
        match self.weights.as_deref().unwrap_or("point") {
            "point" => Ok(EulerWeights::Point),
            "cell-exact" => Ok(EulerWeights::CellExact),
            other => Err(CliError::Config(format!(
                "weights: expected point or cell-exact, got '{other}'"
            ))),
        }
    }
}

pub fn parse_estimators(names: &Option<Vec<String>>) -> Result<Vec<EstimatorKind>, CliError> {
    match names {
        None => Ok(EstimatorKind::ALL.to_vec()),
        Some(v) => v
            .iter()
            .map(|s| {
                EstimatorKind::parse(s).ok_or_else(|| CliError::Config(format!("estimators: unknown estimator '{s}'")))
            })
            .collect(),
    }
}

/// `[monte_carlo]`: path count and estimator selection.
#[derive(Args, Deserialize, Clone, Debug, Default)]
#[serde(deny_unknown_fields)]
#[command(next_help_heading = "Monte Carlo")]
pub struct MonteCarloArgs {
    /// Number of simulated paths [default: 200].
    #[arg(long)]
    pub paths: Option<usize>,
    /// Estimators: mle, mom, mle_b_given_beta, mle_beta_given_b [default: all].
    #[arg(long, value_delimiter = ',')]
    pub estimators: Option<Vec<String>>,
}
overlay!(MonteCarloArgs { paths, estimators });

pub fn experiment(
    run: &RunArgs,
    kernel: &KernelArgs,
    model: &ModelArgs,
    grid: &GridArgs,
    mc: &MonteCarloArgs,
) -> Result<ExperimentConfig, CliError> {
    let (dt, dt_obs) = grid.steps();
    let mut cfg = ExperimentConfig::new(
        kernel.build()?,
        model.build()?,
        grid.horizon(),
        dt_obs,
        grid.factor(),
        mc.paths.unwrap_or(200),
        run.seed(),
    )?;
    cfg.sim_step = dt;
    cfg.estimators = parse_estimators(&mc.estimators)?;
    cfg.weights = grid.weights()?;
    cfg.validate()?;
    Ok(cfg)
}

/// `[simulate]`.
#[derive(Args, Deserialize, Clone, Debug, Default)]
#[serde(deny_unknown_fields)]
#[command(next_help_heading = "Simulate")]
pub struct SimulateArgs {
    /// Also write Z on the simulation grid to z.csv.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub with_z: Option<bool>,
}
overlay!(SimulateArgs { with_z });

/// `[transform]`: weights and times of the Laplace functional.
#[derive(Args, Deserialize, Clone, Debug, Default)]
#[serde(deny_unknown_fields)]
#[command(next_help_heading = "Transform")]
pub struct TransformArgs {
    /// Weights u_k >= 0, comma separated [default: 1].
    #[arg(long, value_delimiter = ',')]
    pub u: Option<Vec<f64>>,
    /// Times t_k, comma separated and increasing [default: 1].
    #[arg(long, value_delimiter = ',')]
    pub t: Option<Vec<f64>>,
    /// Evaluate the limit law instead of finite-dimensional marginals.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub stationary: Option<bool>,
}
overlay!(TransformArgs { u, t, stationary });

impl TransformArgs {
    pub fn u(&self) -> Vec<f64> {
        self.u.clone().unwrap_or_else(|| vec![1.0])
    }

    pub fn t(&self) -> Vec<f64> {
        self.t.clone().unwrap_or_else(|| vec![1.0])
    }
}

/// `[estimate]`.
#[derive(Args, Deserialize, Clone, Debug, Default)]
#[serde(deny_unknown_fields)]
#[command(next_help_heading = "Estimate")]
pub struct EstimateArgs {
    /// Path CSV with columns t,X on an equidistant grid starting at 0.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Estimators: mle, mom, mle_b_given_beta, mle_beta_given_b [default: all].
    #[arg(long, value_delimiter = ',')]
    pub estimators: Option<Vec<String>>,
}
overlay!(EstimateArgs { input, estimators });

/// `[lln]`.
#[derive(Args, Deserialize, Clone, Debug, Default)]
#[serde(deny_unknown_fields)]
#[command(next_help_heading = "Lln")]
pub struct LlnArgs {
    /// Averaged function: identity, square or reciprocal [default: identity].
    #[arg(long)]
    pub function: Option<String>,
}
overlay!(LlnArgs { function });

impl LlnArgs {
    pub fn function(&self) -> Result<LlnFunction, CliError> {
        let name = self.function.as_deref().unwrap_or("identity");
        LlnFunction::parse(name).ok_or_else(|| CliError::Config(format!("function: unknown function '{name}'")))
    }
}

/// `[independence]`.
#[derive(Args, Deserialize, Clone, Debug, Default)]
#[serde(deny_unknown_fields)]
#[command(next_help_heading = "Independence")]
pub struct IndependenceArgs {
    /// Weight at time L [default: 1].
    #[arg(long)]
    pub u1: Option<f64>,
    /// Weight at time 2L [default: 1].
    #[arg(long)]
    pub u2: Option<f64>,
    /// Lags L, comma separated [default: 5,10,20,40].
    #[arg(long, value_delimiter = ',')]
    pub lags: Option<Vec<f64>>,
}
overlay!(IndependenceArgs { u1, u2, lags });

/// `[partition]`.
#[derive(Args, Deserialize, Clone, Debug, Default)]
#[serde(deny_unknown_fields)]
#[command(next_help_heading = "Partition")]
pub struct PartitionArgs {
    /// Mesh rule: power (|P_n| = n^-eta) or log (|P_n| = ln n / n) [default: power].
    #[arg(long)]
    pub mesh: Option<String>,
    /// Exponent of the power mesh rule [default: 0.7].
    #[arg(long)]
    pub eta: Option<f64>,
    /// m(n) = ceil(m_factor * n^m_exponent) [default: 1].
    #[arg(long)]
    pub m_factor: Option<f64>,
    /// Growth exponent of m(n) [default: 1].
    #[arg(long)]
    pub m_exponent: Option<f64>,
    /// Largest n evaluated [default: 10000].
    #[arg(long)]
    pub n_max: Option<usize>,
}
overlay!(PartitionArgs {
    mesh,
    eta,
    m_factor,
    m_exponent,
    n_max
});

impl PartitionArgs {
    pub fn mesh_rule(&self) -> Result<MeshRule, CliError> {
        match self.mesh.as_deref().unwrap_or("power") {
            "power" => Ok(MeshRule::PowerLaw {
                eta: self.eta.unwrap_or(0.5),
            }),
            "log" => Ok(MeshRule::LogOverN),
            other => Err(CliError::Config(format!("mesh: expected power or log, got '{other}'"))),
        }
    }
}
