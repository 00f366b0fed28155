use std::path::{Path, PathBuf};

use clap::Args;
use peakload_core::{Error, FitConfig, Formulation, Method, QuantileGrid, Result, Thresholds};
use serde::Deserialize;

/// Optional TOML config; every key mirrors a flag.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub gamma_th: Option<f64>,
    pub eps_th: Option<f64>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub kind: Option<String>,
    pub formulations: Option<Vec<String>>,
    pub method: Option<String>,
    pub grid: Option<String>,
    pub k: Option<usize>,
    pub expected_len: Option<usize>,
    pub leading_window: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::InvalidArgument(format!("config {}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML file with defaults for any flag
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub gamma_th: Option<f64>,
    #[arg(long)]
    pub eps_th: Option<f64>,
    /// Worker threads (default 1)
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// profiles or records (default records)
    #[arg(long)]
    pub kind: Option<String>,
    /// Expected profile length; defaults to the most common length
    #[arg(long)]
    pub expected_len: Option<usize>,
    #[arg(long)]
    pub leading_window: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// Repeatable; defaults to every formulation
    #[arg(long = "formulation")]
    pub formulations: Vec<String>,
    /// mqr, mle or both
    #[arg(long)]
    pub method: Option<String>,
    /// Quantile grid lo:step:hi
    #[arg(long)]
    pub grid: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    Profiles,
    Records,
}

/// Flags resolved against the config file and defaults.
#[derive(Debug, Clone)]
pub struct Settings {
    pub seed: u64,
    pub thresholds: Thresholds,
    pub out: Option<PathBuf>,
    pub kind: InputKind,
    pub formulations: Vec<Formulation>,
    pub methods: Vec<Method>,
    pub grid: QuantileGrid,
    pub k: usize,
    pub expected_len: Option<usize>,
    pub leading_window: Option<usize>,
}

/// Worker count: flag, then config file, then 1.
pub fn resolve_jobs(common: &CommonArgs) -> Result<usize> {
    let from_config = match &common.config {
        Some(p) => ConfigFile::load(p)?.jobs,
        None => None,
    };
    match common.jobs.or(from_config).unwrap_or(1) {
        0 => Err(Error::InvalidArgument("--jobs must be at least 1".into())),
        n => Ok(n),
    }
}

impl Settings {
    pub fn resolve(
        common: &CommonArgs,
        input: Option<&InputArgs>,
        model: Option<&ModelArgs>,
        k: Option<usize>,
    ) -> Result<Self> {
        let cfg = match &common.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let kind = match input.and_then(|i| i.kind.clone()).or(cfg.kind) {
            None => InputKind::Records,
            Some(s) => match s.as_str() {
                "profiles" => InputKind::Profiles,
                "records" => InputKind::Records,
                other => return Err(Error::InvalidArgument(format!("unknown input kind '{other}'"))),
            },
        };
        let names = match model.map(|m| m.formulations.clone()).filter(|v| !v.is_empty()) {
            Some(v) => Some(v),
            None => cfg.formulations,
        };
        let mut formulations = match names {
            None => Formulation::ALL.to_vec(),
            Some(v) => v.iter().map(|s| s.parse()).collect::<Result<Vec<Formulation>>>()?,
        };
        let mut seen = Vec::new();
        formulations.retain(|f| {
            let fresh = !seen.contains(f);
            seen.push(*f);
            fresh
        });
        let methods = match model.and_then(|m| m.method.clone()).or(cfg.method).as_deref() {
            None | Some("both") => vec![Method::Mqr, Method::Mle],
            Some(s) => vec![s.parse()?],
        };
        let grid = match model.and_then(|m| m.grid.clone()).or(cfg.grid) {
            None => QuantileGrid::default(),
            Some(s) => QuantileGrid::parse(&s)?,
        };
        let defaults = Thresholds::default();
        let thresholds = Thresholds {
            gamma_th: common.gamma_th.or(cfg.gamma_th).unwrap_or(defaults.gamma_th),
            eps_th: common.eps_th.or(cfg.eps_th).unwrap_or(defaults.eps_th),
        };
        if !(thresholds.gamma_th > 0.0 && thresholds.eps_th > 0.0) {
            return Err(Error::InvalidArgument("thresholds must be positive".into()));
        }
        Ok(Settings {
            seed: common.seed.or(cfg.seed).unwrap_or(0),
            thresholds,
            out: common.out.clone().or(cfg.out),
            kind,
            formulations,
            methods,
            grid,
            k: k.or(cfg.k).unwrap_or(5),
            expected_len: input.and_then(|i| i.expected_len).or(cfg.expected_len),
            leading_window: input.and_then(|i| i.leading_window).or(cfg.leading_window),
        })
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            thresholds: self.thresholds,
            ..FitConfig::default()
        }
    }
}
