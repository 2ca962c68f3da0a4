//! Run configuration. Precedence, lowest to highest: built-in defaults, the
//! `--config` JSON file, command-line flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use qgeom_core::model::{ModelSpec, BUILTIN_MODELS, DEFAULT_FD_STEP};
use qgeom_core::{DerivativeScheme, DiracModel, FdOptions, ProbeSettings, TailHandling};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::args::{Command, Flags, MethodArg, SchemeArg};
use crate::error::CliError;

pub const METRIC_TOL_ANALYTIC: f64 = 1e-10;
pub const METRIC_TOL_FD: f64 = 1e-6;
pub const DET_IDENTITY_TOL: f64 = 1e-8;
pub const RIEMANN_TOL: f64 = 1e-3;
pub const SCALAR_TOL: f64 = 1e-3;
pub const EINSTEIN_TOL: f64 = 1e-4;
pub const EULER_TOL: f64 = 1e-3;
/// Hypersphere checks sample only points with `cond(g)` at most this.
pub const GENERIC_CONDITION: f64 = 100.0;
pub const DEFAULT_EPSILON: f64 = 1e-3;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<ModelSpec>,
    pub grid: Option<usize>,
    pub scheme: Option<SchemeConfig>,
    pub method: Option<MethodArg>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    /// Explicit momenta; replaces random sampling.
    pub points: Option<Vec<Vec<f64>>>,
    pub sweep: Option<SweepConfig>,
    pub drive: Option<DriveConfig>,
    pub curvature: Option<CurvatureConfig>,
    pub perturb_metric: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub kind: SchemeArg,
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub m_values: Vec<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    pub epsilon: Option<f64>,
    pub broadening_fraction: Option<f64>,
    pub window_lo_fraction: Option<f64>,
    pub window_hi_fraction: Option<f64>,
    pub samples_per_width: Option<f64>,
    pub tail: Option<TailConfig>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailConfig {
    Truncate,
    AnalyticCorrection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvatureConfig {
    pub step: Option<f64>,
    pub richardson: Option<bool>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Tolerances {
    pub metric: f64,
    pub det_identity: f64,
    pub riemann: f64,
    pub scalar: f64,
    pub einstein: f64,
    pub euler: f64,
    pub generic_condition: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DriveSettings {
    pub epsilon: f64,
    pub probe: ProbeSettings,
}

/// Fully resolved settings. Everything that can change a number is in here
/// and therefore in the config hash; the output directory is not.
#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub command: &'static str,
    pub model: ModelSpec,
    pub n_half_dim: usize,
    pub grid: usize,
    pub scheme: DerivativeScheme,
    pub method: MethodArg,
    pub seed: u64,
    pub samples: usize,
    pub points: Option<Vec<Vec<f64>>>,
    pub m_values: Option<Vec<f64>>,
    pub drive: Option<DriveSettings>,
    pub curvature: FdOptions,
    pub perturb_metric: f64,
    /// Grid sums are reduced in a fixed order, so the thread count does not
    /// change any number and is left out of the hash.
    #[serde(skip)]
    pub threads: usize,
    pub tolerances: Tolerances,
    #[serde(skip)]
    pub out: PathBuf,
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::Config(format!(
            "{name} must be a positive number, got {v}"
        )))
    }
}

fn resolve_model(cfg: Option<ModelSpec>, flags: &Flags) -> Result<ModelSpec, CliError> {
    let mut spec = match (&flags.model, cfg) {
        (Some(name), _) => ModelSpec::Builtin {
            name: name.clone(),
            params: BTreeMap::new(),
        },
        (None, Some(spec)) => spec,
        (None, None) => {
            return Err(CliError::Config(format!(
                "no model given; use --model ({}) or a config file",
                BUILTIN_MODELS.join(", ")
            )))
        }
    };
    if let Some(m) = flags.m {
        match &mut spec {
            ModelSpec::Builtin { params, .. } => {
                params.insert("m".into(), m);
            }
            ModelSpec::Fourier(_) => {
                return Err(CliError::Config(
                    "--m applies to built-in models only".into(),
                ))
            }
        }
    }
    Ok(spec)
}

fn resolve_scheme(cfg: Option<SchemeConfig>, flags: &Flags) -> Result<DerivativeScheme, CliError> {
    let kind = flags
        .scheme
        .or(cfg.as_ref().map(|s| s.kind))
        .unwrap_or(SchemeArg::Analytic);
    let step = flags
        .fd_step
        .or(cfg.and_then(|s| s.step))
        .unwrap_or(DEFAULT_FD_STEP);
    let step = positive("fd step", step)?;
    Ok(match kind {
        SchemeArg::Analytic => DerivativeScheme::Analytic,
        SchemeArg::Fd => DerivativeScheme::CentralFdHat { step },
        SchemeArg::FdProjector => DerivativeScheme::CentralFdProjector { step },
    })
}

fn default_samples(command: Command) -> usize {
    match command {
        Command::Metric | Command::IdentityCheck => 100,
        Command::Geometry => 20,
        Command::Spectroscopy => 10,
        Command::Chern | Command::Sweep => 0,
    }
}

fn default_m_values(name: &str) -> Vec<f64> {
    match name {
        "qwz2d" => vec![-3.0, -1.0, 1.0, 3.0],
        _ => vec![-5.0, -3.0, -1.0, 1.0, 3.0, 5.0],
    }
}

/// Merge config file and flags and validate everything that can be checked
/// without computing: model, dimensions, grid, drive and point lists.
pub fn resolve(command: Command, flags: &Flags) -> Result<Settings, CliError> {
    let cfg = match &flags.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let model_spec = resolve_model(cfg.model, flags)?;
    let model = model_spec.build()?;
    let n = model.n_half_dim();
    let scheme = resolve_scheme(cfg.scheme, flags)?;
    if scheme == DerivativeScheme::Analytic && !model.has_jacobian() {
        return Err(CliError::Config(
            "analytic scheme requested but the model has no Jacobian".into(),
        ));
    }

    let grid = flags
        .grid
        .or(cfg.grid)
        .unwrap_or(if n == 1 { 200 } else { 16 });
    if grid < 2 {
        return Err(CliError::Config(format!(
            "grid must be at least 2, got {grid}"
        )));
    }

    let points = match &flags.k {
        Some(k) => Some(vec![k.clone()]),
        None => cfg.points,
    };
    if let Some(points) = &points {
        if points.is_empty() {
            return Err(CliError::Config("empty point list".into()));
        }
        if let Some(bad) = points.iter().find(|p| p.len() != 2 * n) {
            return Err(CliError::Config(format!(
                "momentum {bad:?} has {} components, the model needs {}",
                bad.len(),
                2 * n
            )));
        }
    }

    let m_values = if command == Command::Sweep {
        let name = match &model_spec {
            ModelSpec::Builtin { name, .. } => name.clone(),
            ModelSpec::Fourier(_) => {
                return Err(CliError::Config(
                    "sweep needs a built-in model family".into(),
                ))
            }
        };
        let values = flags
            .m_values
            .clone()
            .or(cfg.sweep.map(|s| s.m_values))
            .unwrap_or_else(|| default_m_values(&name));
        if values.is_empty() || values.iter().any(|m| !m.is_finite()) {
            return Err(CliError::Config(
                "m values must be a non-empty list of numbers".into(),
            ));
        }
        Some(values)
    } else {
        None
    };

    let drive = if command == Command::Spectroscopy {
        let d = cfg.drive.unwrap_or_default();
        let base = ProbeSettings::default();
        let probe = ProbeSettings {
            broadening_fraction: positive(
                "broadening_fraction",
                d.broadening_fraction.unwrap_or(base.broadening_fraction),
            )?,
            window_lo_fraction: d.window_lo_fraction.unwrap_or(base.window_lo_fraction),
            window_hi_fraction: d.window_hi_fraction.unwrap_or(base.window_hi_fraction),
            samples_per_width: positive(
                "samples_per_width",
                d.samples_per_width.unwrap_or(base.samples_per_width),
            )?,
            tail: match d.tail {
                Some(TailConfig::Truncate) => TailHandling::Truncate,
                Some(TailConfig::AnalyticCorrection) | None => base.tail,
            },
        };
        let epsilon = positive(
            "epsilon",
            flags.epsilon.or(d.epsilon).unwrap_or(DEFAULT_EPSILON),
        )?;
        Some(DriveSettings { epsilon, probe })
    } else {
        None
    };

    let curv = cfg.curvature.unwrap_or_default();
    let curvature = FdOptions {
        step: positive(
            "curvature step",
            curv.step.unwrap_or(FdOptions::default().step),
        )?,
        richardson: curv.richardson.unwrap_or(true),
    };

    let perturb_metric = positive(
        "perturb_metric",
        flags.perturb_metric.or(cfg.perturb_metric).unwrap_or(1.0),
    )?;
    let threads = flags
        .threads
        .or(cfg.threads)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if threads == 0 {
        return Err(CliError::Config("threads must be at least 1".into()));
    }
    let samples = flags
        .samples
        .or(cfg.samples)
        .unwrap_or_else(|| default_samples(command));
    if samples == 0 && points.is_none() && default_samples(command) > 0 {
        return Err(CliError::Config("samples must be at least 1".into()));
    }

    let fd = !matches!(scheme, DerivativeScheme::Analytic);
    Ok(Settings {
        command: command.name(),
        model: model_spec,
        n_half_dim: n,
        grid,
        scheme,
        method: flags.method.or(cfg.method).unwrap_or(MethodArg::All),
        seed: flags.seed.or(cfg.seed).unwrap_or(0),
        samples,
        points,
        m_values,
        drive,
        curvature,
        perturb_metric,
        threads,
        tolerances: Tolerances {
            metric: if fd {
                METRIC_TOL_FD
            } else {
                METRIC_TOL_ANALYTIC
            },
            det_identity: DET_IDENTITY_TOL,
            riemann: RIEMANN_TOL,
            scalar: SCALAR_TOL,
            einstein: EINSTEIN_TOL,
            euler: EULER_TOL,
            generic_condition: GENERIC_CONDITION,
        },
        out: flags
            .out
            .clone()
            .or(cfg.out)
            .unwrap_or_else(|| PathBuf::from(".")),
    })
}

impl Settings {
    /// Hex SHA-256 of the canonical JSON form of the settings.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("settings serialize");
        hex::encode(Sha256::digest(json))
    }
}
