//! Flat JSON experiment configs. Every key is required unless noted and
//! unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::ValueEnum;
use cylstokes_core::disk::OperatorKind;
use cylstokes_core::eigenfields::EigenfieldFamily;
use cylstokes_core::SpectralGrid;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    #[value(name = "resolvent-sweep-2d")]
    #[serde(rename = "resolvent-sweep-2d")]
    ResolventSweep2d,
    #[value(name = "resolvent-sweep-3d")]
    #[serde(rename = "resolvent-sweep-3d")]
    ResolventSweep3d,
    HelmholtzCheck,
    SemigroupDecay,
    Holder,
    FracPower,
    Embedding,
    Picard,
    Regularity,
    Regression,
}

impl CommandName {
    pub fn as_str(self) -> &'static str {
        match self {
            CommandName::ResolventSweep2d => "resolvent-sweep-2d",
            CommandName::ResolventSweep3d => "resolvent-sweep-3d",
            CommandName::HelmholtzCheck => "helmholtz-check",
            CommandName::SemigroupDecay => "semigroup-decay",
            CommandName::Holder => "holder",
            CommandName::FracPower => "frac-power",
            CommandName::Embedding => "embedding",
            CommandName::Picard => "picard",
            CommandName::Regularity => "regularity",
            CommandName::Regression => "regression",
        }
    }
}

/// Keys shared by every experiment config.
pub trait Common {
    fn command(&self) -> Option<CommandName>;
    fn seed_mut(&mut self) -> &mut u64;
    fn output_dir_mut(&mut self) -> &mut Option<PathBuf>;
    fn output_dir(&self) -> Option<&Path>;
}

macro_rules! experiment_config {
    ($(#[$doc:meta])* $name:ident { $($(#[$fm:meta])* $field:ident : $ty:ty),* $(,)? }) => {
        $(#[$doc])*
        #[derive(Clone, Debug, Serialize, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct $name {
            /// Optional; must name the command being run when present.
            #[serde(default, skip_serializing_if = "Option::is_none")]
            pub command: Option<CommandName>,
            pub seed: u64,
            /// Optional; `--out` takes precedence.
            #[serde(default, skip_serializing_if = "Option::is_none")]
            pub output_dir: Option<PathBuf>,
            pub n_r: usize,
            pub n_theta: usize,
            pub n_z: usize,
            pub period_l: f64,
            $($(#[$fm])* pub $field: $ty),*
        }

        impl $name {
            pub fn grid(&self) -> Result<Arc<SpectralGrid>, CliError> {
                Ok(Arc::new(SpectralGrid::new(self.n_r, self.n_theta, self.n_z, self.period_l)?))
            }
        }

        impl Common for $name {
            fn command(&self) -> Option<CommandName> {
                self.command
            }
            fn seed_mut(&mut self) -> &mut u64 {
                &mut self.seed
            }
            fn output_dir_mut(&mut self) -> &mut Option<PathBuf> {
                &mut self.output_dir
            }
            fn output_dir(&self) -> Option<&Path> {
                self.output_dir.as_deref()
            }
        }
    };
}

experiment_config!(Sweep2dConfig {
    operators: Vec<OperatorKind>,
    m_values: Vec<i64>,
    theta: f64,
    p: f64,
    /// `[lo, hi]`: radii from `10^lo` to `10^hi`.
    lambda_decades: [f64; 2],
    radii_per_decade: usize,
    /// Angles sampled at every radius.
    angles_per_decade: usize,
    trials: usize,
    radial_terms: usize,
    residual_tolerance: f64,
});

experiment_config!(Sweep3dConfig {
    theta: f64,
    p: f64,
    lambda_decades: [f64; 2],
    radii_per_decade: usize,
    angles_per_decade: usize,
    trials: usize,
    kernel_free: bool,
    symbol_samples: usize,
    residual_tolerance: f64,
});

experiment_config!(HelmholtzConfig {
    samples: usize,
    /// Resolvent points `[re, im]` for the commutator.
    lambdas: Vec<[f64; 2]>,
    tolerance: f64,
    commutator_tolerance: f64,
});

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayData {
    /// `|grad^k e^{-tA} f|_q` for rough solenoidal `f`.
    Rough,
    /// `|e^{-tA} P div F|_q` for a rough tensor `F`.
    Pdiv,
}

experiment_config!(DecayConfig {
    lambda0: f64,
    data: DecayData,
    s_exp: f64,
    fraction: f64,
    order: usize,
    p: f64,
    q: f64,
    t_min: f64,
    t_max: f64,
    t_points: usize,
    window_lo: f64,
    window_hi: f64,
    exponent_tolerance: f64,
    min_decades: f64,
    law_tolerance: f64,
});

experiment_config!(HolderConfig {
    lambda0: f64,
    s_exp: f64,
    fraction: f64,
    t: f64,
    alpha: f64,
    p: f64,
    rho_min: f64,
    rho_max: f64,
    rho_points: usize,
    ratio_limit: f64,
});

experiment_config!(FracPowerConfig {
    lambda0: f64,
    alpha: f64,
    samples: usize,
    s_values: Vec<f64>,
    oracle_tolerance: f64,
    composition_tolerance: f64,
    imaginary_tolerance: f64,
});

experiment_config!(EmbeddingConfig {
    lambda0: f64,
    samples: usize,
    p: f64,
    tolerance: f64,
    oracle_tolerance: f64,
});

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialData {
    Zero,
    /// `amplitude * e / max|e|` for the eigenfield `(family, m, k, n)`.
    Eigenfield,
    /// First field of a container file at `u0_path`.
    File,
}

experiment_config!(PicardExperiment {
    lambda0: f64,
    u0: InitialData,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    family: Option<EigenfieldFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    m: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    u0_path: Option<PathBuf>,
    t_final: f64,
    n_time: usize,
    start_levels: usize,
    max_iters: usize,
    tol: f64,
    q: f64,
    shifted: bool,
    holder_mu: f64,
    s_norm: f64,
    t_min: f64,
    energy_tolerance: f64,
    audit_slack: f64,
    divergence_tolerance: f64,
});

experiment_config!(RegularityConfig {
    lambda: f64,
    cases: usize,
    orders: Vec<usize>,
    p: f64,
    recovery_tolerance: f64,
    consistency_tolerance: f64,
});

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<CommandName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Relative paths resolve against the directory of this config file.
    pub baseline_dir: PathBuf,
    /// Experiment config to re-run.
    pub config: PathBuf,
    /// Command of the re-run experiment.
    pub experiment: CommandName,
    /// Relative tolerance for metrics without an entry in `tolerances`.
    pub default_tolerance: f64,
    /// Per-metric relative tolerances keyed by CSV column or JSON key.
    pub tolerances: BTreeMap<String, f64>,
}

pub fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("malformed config {}: {e}", path.display())))
}

/// Parse an experiment config and apply the `--seed` / `--out` overrides.
pub fn load<T: DeserializeOwned + Common>(
    path: &Path,
    expected: CommandName,
    seed: Option<u64>,
    out: Option<&Path>,
) -> Result<T, CliError> {
    let mut cfg: T = read_config(path)?;
    check_command(cfg.command(), expected, path)?;
    if let Some(s) = seed {
        *cfg.seed_mut() = s;
    }
    if let Some(o) = out {
        *cfg.output_dir_mut() = Some(o.to_path_buf());
    }
    Ok(cfg)
}

pub fn check_command(found: Option<CommandName>, expected: CommandName, path: &Path) -> Result<(), CliError> {
    match found {
        Some(c) if c != expected => Err(CliError::Usage(format!(
            "config {} is for command {}, not {}",
            path.display(),
            c.as_str(),
            expected.as_str()
        ))),
        _ => Ok(()),
    }
}
