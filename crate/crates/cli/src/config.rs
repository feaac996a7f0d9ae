//! Run configuration: an optional JSON/TOML file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use qlle::graph::Threshold;
use qlle::oos::LandmarkSelection;
use qlle::retrieval::{FeatureFormat, Method, QlleParams, SweepConfig};
use qlle::{ElmConfig, NmConfig, QlleConfig};
use serde::Deserialize;

use crate::CliError;

/// Target dimension as given in a config file: `20`, `[5, 10]` or `"10:100:10"`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum DimSpec {
    One(usize),
    List(Vec<usize>),
    Text(String),
}

impl DimSpec {
    pub fn resolve(&self) -> Result<Vec<usize>, CliError> {
        match self {
            DimSpec::One(d) => Ok(vec![*d]),
            DimSpec::List(v) => Ok(v.clone()),
            DimSpec::Text(s) => parse_dims(s),
        }
    }
}

/// Parses `d`, `a,b,c` or the inclusive range `start:stop:step`.
pub fn parse_dims(text: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Usage(format!("invalid dimension list '{text}'"));
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    let dims = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let (start, stop, step) = match parts.as_slice() {
            [a, b] => (num(a)?, num(b)?, 1),
            [a, b, s] => (num(a)?, num(b)?, num(s)?),
            _ => return Err(bad()),
        };
        if step == 0 || start > stop {
            return Err(bad());
        }
        (start..=stop).step_by(step).collect()
    } else {
        text.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if dims.is_empty() || dims.contains(&0) {
        return Err(bad());
    }
    Ok(dims)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EtaMode {
    Absolute,
    Quantile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    Random,
    Kmeans,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    Csv,
    F32bin,
}

/// Every experiment knob. All fields are optional so a file and the flags can
/// each supply a subset.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub format: Option<DataFormat>,
    pub method: Option<String>,
    pub methods: Option<Vec<String>>,
    pub d: Option<DimSpec>,
    pub k: Option<usize>,
    pub eta: Option<f64>,
    pub eta_mode: Option<EtaMode>,
    pub min_k: Option<usize>,
    pub reg: Option<f64>,
    pub invert_curvature: Option<bool>,
    pub landmarks: Option<usize>,
    pub hidden: Option<usize>,
    pub ridge: Option<f64>,
    pub seed: Option<u64>,
    pub selection: Option<Selection>,
    pub kmeans_iters: Option<usize>,
    pub returns: Option<usize>,
    pub out: Option<PathBuf>,
    pub no_timing: Option<bool>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        let is_toml = path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        if is_toml {
            toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
        } else {
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
        }
    }

    /// Fields set in `flags` win over fields set here.
    pub fn overlay(self, flags: RunConfig) -> RunConfig {
        RunConfig {
            data: flags.data.or(self.data),
            format: flags.format.or(self.format),
            method: flags.method.or(self.method),
            methods: flags.methods.or(self.methods),
            d: flags.d.or(self.d),
            k: flags.k.or(self.k),
            eta: flags.eta.or(self.eta),
            eta_mode: flags.eta_mode.or(self.eta_mode),
            min_k: flags.min_k.or(self.min_k),
            reg: flags.reg.or(self.reg),
            invert_curvature: flags.invert_curvature.or(self.invert_curvature),
            landmarks: flags.landmarks.or(self.landmarks),
            hidden: flags.hidden.or(self.hidden),
            ridge: flags.ridge.or(self.ridge),
            seed: flags.seed.or(self.seed),
            selection: flags.selection.or(self.selection),
            kmeans_iters: flags.kmeans_iters.or(self.kmeans_iters),
            returns: flags.returns.or(self.returns),
            out: flags.out.or(self.out),
            no_timing: flags.no_timing.or(self.no_timing),
        }
    }

    pub fn data_path(&self) -> Result<&Path, CliError> {
        self.data.as_deref().ok_or_else(|| CliError::Usage("missing --data".into()))
    }

    pub fn out_path(&self) -> Result<&Path, CliError> {
        self.out.as_deref().ok_or_else(|| CliError::Usage("missing --out".into()))
    }

    pub fn data_format(&self) -> Result<FeatureFormat, CliError> {
        Ok(match self.format {
            Some(DataFormat::Csv) => FeatureFormat::Csv,
            Some(DataFormat::F32bin) => FeatureFormat::F32Bin,
            None => FeatureFormat::from_path(self.data_path()?),
        })
    }

    pub fn dims(&self) -> Result<Vec<usize>, CliError> {
        self.d.as_ref().ok_or_else(|| CliError::Usage("missing --d".into()))?.resolve()
    }

    pub fn threshold(&self) -> Result<Threshold, CliError> {
        let t = match (self.eta_mode.unwrap_or(EtaMode::Quantile), self.eta) {
            (EtaMode::Quantile, None) => Threshold::default(),
            (EtaMode::Quantile, Some(q)) => Threshold::Quantile(q),
            (EtaMode::Absolute, Some(v)) => Threshold::Absolute(v),
            (EtaMode::Absolute, None) => {
                return Err(CliError::Usage("--eta-mode absolute needs --eta".into()))
            }
        };
        t.validate().map_err(usage)?;
        Ok(t)
    }

    pub fn qlle_params(&self) -> Result<QlleParams, CliError> {
        let defaults = QlleParams::default();
        Ok(QlleParams {
            k: self.k.unwrap_or(defaults.k),
            eta: self.threshold()?,
            min_k: self.min_k,
            reg: self.reg.unwrap_or(defaults.reg),
            invert_curvature: self.invert_curvature.unwrap_or(false),
        })
    }

    pub fn qlle_config(&self, d: usize) -> Result<QlleConfig, CliError> {
        let cfg = self.qlle_params()?.for_dim(d);
        cfg.validate().map_err(usage)?;
        Ok(cfg)
    }

    pub fn nm_config(&self) -> Result<NmConfig, CliError> {
        let landmarks = self.landmarks.unwrap_or(300);
        let hidden = self.hidden.unwrap_or(1000);
        let ridge = self.ridge.unwrap_or(0.0);
        if landmarks == 0 || hidden == 0 {
            return Err(CliError::Usage("--landmarks and --hidden must be positive".into()));
        }
        if !ridge.is_finite() || ridge < 0.0 {
            return Err(CliError::Usage(format!("--ridge must be >= 0, got {ridge}")));
        }
        let selection = match self.selection.unwrap_or(Selection::Random) {
            Selection::Random => LandmarkSelection::Random,
            Selection::Kmeans => LandmarkSelection::KMeans {
                iters: self.kmeans_iters.unwrap_or(50),
            },
        };
        Ok(NmConfig {
            landmarks,
            elm: ElmConfig::new(hidden, self.seed.unwrap_or(0)).with_ridge(ridge),
            selection,
        })
    }

    pub fn sweep_config(&self) -> Result<SweepConfig, CliError> {
        let qlle = self.qlle_params()?;
        qlle.eta.validate().map_err(usage)?;
        if !qlle.reg.is_finite() || qlle.reg < 0.0 {
            return Err(CliError::Usage(format!("--reg must be >= 0, got {}", qlle.reg)));
        }
        let returns = self.returns.unwrap_or(20);
        if returns == 0 {
            return Err(CliError::Usage("--returns must be positive".into()));
        }
        Ok(SweepConfig {
            qlle,
            nm: self.nm_config()?,
            returns,
            record_timing: !self.no_timing.unwrap_or(false),
        })
    }

    pub fn single_method(&self) -> Result<Method, CliError> {
        self.method.as_deref().unwrap_or("nm_qlle").parse().map_err(usage)
    }

    pub fn method_list(&self) -> Result<Vec<Method>, CliError> {
        let names = match (&self.methods, &self.method) {
            (Some(list), _) => list.clone(),
            (None, Some(m)) => vec![m.clone()],
            (None, None) => vec!["nm_qlle".into(), "pca".into(), "original".into()],
        };
        let methods: Vec<Method> = names.iter().map(|m| m.parse().map_err(usage)).collect::<Result<_, _>>()?;
        if methods.is_empty() {
            return Err(CliError::Usage("no methods given".into()));
        }
        Ok(methods)
    }
}

fn usage(e: qlle::Error) -> CliError {
    CliError::Usage(e.to_string())
}

/// Flags shared by `fit` and `sweep`. Unset flags fall back to `--config`.
#[derive(Debug, Args)]
pub struct RunFlags {
    /// JSON or TOML file with any of the options below; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Labeled feature file (.csv or QLEB binary).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Override format detection by extension.
    #[arg(long, value_enum)]
    pub format: Option<DataFormat>,
    /// Target dimension: `20`, `5,10,20` or `10:100:10`.
    #[arg(long)]
    pub d: Option<String>,
    /// Initial neighbor count.
    #[arg(long)]
    pub k: Option<usize>,
    /// Pruning threshold; a quantile in [0, 1] unless `--eta-mode absolute`.
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long, value_enum)]
    pub eta_mode: Option<EtaMode>,
    /// Neighbors never pruned (default d+1).
    #[arg(long)]
    pub min_k: Option<usize>,
    /// Weight regularization relative to the local Gram trace.
    #[arg(long)]
    pub reg: Option<f64>,
    /// Weight the embedding objective by 1/c instead of c.
    #[arg(long)]
    pub invert_curvature: bool,
    #[arg(long)]
    pub landmarks: Option<usize>,
    /// ELM hidden nodes.
    #[arg(long)]
    pub hidden: Option<usize>,
    /// ELM ridge; 0 uses the pseudo-inverse.
    #[arg(long)]
    pub ridge: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub selection: Option<Selection>,
    #[arg(long)]
    pub kmeans_iters: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunFlags {
    /// Reads `--config` if given and lays the flags over it.
    pub fn resolve(self, extra: RunConfig) -> Result<RunConfig, CliError> {
        let base = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let flags = RunConfig {
            data: self.data,
            format: self.format,
            d: self.d.map(DimSpec::Text),
            k: self.k,
            eta: self.eta,
            eta_mode: self.eta_mode,
            min_k: self.min_k,
            reg: self.reg,
            invert_curvature: self.invert_curvature.then_some(true),
            landmarks: self.landmarks,
            hidden: self.hidden,
            ridge: self.ridge,
            seed: self.seed,
            selection: self.selection,
            kmeans_iters: self.kmeans_iters,
            out: self.out,
            ..extra
        };
        Ok(base.overlay(flags))
    }
}
