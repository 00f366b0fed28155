use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use peakload_core::experiments::{
    dense_taus, export_beta_curves, export_quantile_curves, format_p, log_spaced, log_uniform_energies,
    run_cv, synth_profiles, synth_records,
};
use peakload_core::inference::{fisher_std_gamma, likelihood_ratio_test};
use peakload_core::profiles::{
    filter_profiles, ingest_csv, modal_length, read_records_csv, reduce_profile, write_profiles_csv,
    write_records_csv, LEADING_WINDOW,
};
use peakload_core::seed::derive_seed;
use peakload_core::{
    BaseDistribution, CustomerRecord, CvOptions, Error, FilterReport, FittedModel, Method, Result,
    SynthConfig, SynthMode,
};
use serde_json::json;

use crate::settings::{CommonArgs, InputArgs, InputKind, ModelArgs, Settings};

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub input: InputArgs,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Number of folds
    #[arg(long)]
    pub k: Option<usize>,
    /// Skip the likelihood ratio test and Fisher Std(gamma)
    #[arg(long)]
    pub no_lrt: bool,
}

#[derive(Debug, Args)]
pub struct LrtArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub input: InputArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// gumbel, exponential, uniform or pareto(shape)
    #[arg(long, default_value = "exponential")]
    pub base: String,
    /// Number of customers
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    /// Peak slots per customer (K)
    #[arg(long, default_value_t = 50)]
    pub slots: usize,
    #[arg(long, default_value_t = 0.05)]
    pub theta0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub theta1: f64,
    #[arg(long, default_value_t = 1e2)]
    pub energy_min: f64,
    #[arg(long, default_value_t = 1e6)]
    pub energy_max: f64,
    /// Emit profiles of this length instead of records
    #[arg(long)]
    pub profile_length: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Log-spaced energies lo:hi:count
    #[arg(long, default_value = "1e2:1e6:41")]
    pub energies: String,
    /// Comma-separated quantile levels for the quantile curves
    #[arg(long, default_value = "0.1,0.25,0.5,0.75,0.9")]
    pub taus: String,
    /// Dense levels lo:hi:count for the beta curves
    #[arg(long, default_value = "0.01:0.99:99")]
    pub beta_taus: String,
}

/// Main artifact goes to stdout; with `--out`, also to `dir/name`.
fn emit(settings: &Settings, name: &str, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = &settings.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(name), bytes)?;
    }
    let mut stdout = std::io::stdout().lock();
    stdout.write_all(bytes)?;
    stdout.flush()?;
    Ok(())
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut f = BufWriter::new(File::create(dir.join(name))?);
    f.write_all(bytes)?;
    f.flush()?;
    Ok(())
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::InvalidArgument(format!("cannot open {}: {e}", path.display())))
}

/// Reads, filters and reduces a profile file.
fn load_profiles(path: &Path, settings: &Settings) -> Result<(Vec<CustomerRecord>, FilterReport)> {
    let profiles = ingest_csv(open(path)?)?;
    let Some(expected) = settings.expected_len.or_else(|| modal_length(&profiles)) else {
        return Ok((Vec::new(), FilterReport::default()));
    };
    let window = settings.leading_window.unwrap_or(LEADING_WINDOW.min(expected));
    let (kept, report) = filter_profiles(profiles, expected, window)?;
    let records = kept.iter().map(reduce_profile).collect::<Result<_>>()?;
    Ok((records, report))
}

fn load_records(input: &InputArgs, settings: &Settings) -> Result<Vec<CustomerRecord>> {
    match settings.kind {
        InputKind::Records => read_records_csv(open(&input.input)?),
        InputKind::Profiles => Ok(load_profiles(&input.input, settings)?.0),
    }
}

pub fn ingest(args: &IngestArgs) -> Result<()> {
    let settings = Settings::resolve(&args.common, Some(&args.input), None, None)?;
    let (records, report) = load_profiles(&args.input.input, &settings)?;
    let dir = settings.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let mut csv = Vec::new();
    write_records_csv(&mut csv, &records)?;
    write_file(&dir, "records.csv", &csv)?;
    let report = to_json(&report)?;
    write_file(&dir, "filter_report.json", &report)?;
    std::io::stdout().write_all(&report)?;
    Ok(())
}

pub fn fit(args: &FitArgs) -> Result<()> {
    let settings = Settings::resolve(&args.common, Some(&args.input), Some(&args.model), None)?;
    let records = load_records(&args.input, &settings)?;
    let config = settings.fit_config();
    let mut fits = Vec::new();
    for &method in &settings.methods {
        for &formulation in &settings.formulations {
            if method == Method::Mle && formulation == peakload_core::Formulation::C4 {
                continue;
            }
            let seed = derive_seed(settings.seed, &[method as u64, formulation as u64]);
            fits.push(FittedModel::fit(method, formulation, &records, &settings.grid, seed, &config)?);
        }
    }
    let out = json!({
        "seed": settings.seed,
        "n_records": records.len(),
        "thresholds": settings.thresholds,
        "fits": fits,
    });
    emit(&settings, "fit.json", &to_json(&out)?)
}

pub fn cv(args: &CvArgs) -> Result<()> {
    let settings = Settings::resolve(&args.common, Some(&args.input), Some(&args.model), args.k)?;
    let records = load_records(&args.input, &settings)?;
    let opts = CvOptions {
        k: settings.k,
        seed: settings.seed,
        grid: settings.grid.clone(),
        fit: settings.fit_config(),
        lrt: !args.no_lrt,
    };
    let report = run_cv(&records, &settings.formulations, &settings.methods, &opts)?;
    if let Some(dir) = &settings.out {
        write_file(dir, "cv_report.json", &to_json(&report)?)?;
    }
    emit(&settings, "cv_table.txt", report.to_table().as_bytes())
}

pub fn lrt(args: &LrtArgs) -> Result<()> {
    let settings = Settings::resolve(&args.common, Some(&args.input), None, None)?;
    let records = load_records(&args.input, &settings)?;
    let outcome = likelihood_ratio_test(&records, settings.seed, &settings.fit_config())?;
    let fisher = fisher_std_gamma(&records, &outcome.frechet, &settings.thresholds);
    let out = json!({
        "lrt": outcome.result,
        "p_value_sci": format_p(outcome.result.p_value),
        "gamma": outcome.frechet.canonical.gamma,
        "fisher": fisher.as_ref().ok(),
        "fisher_error": fisher.as_ref().err().map(|e| e.to_string()),
        "gumbel": outcome.gumbel,
        "frechet": outcome.frechet,
    });
    emit(&settings, "lrt.json", &to_json(&out)?)
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let settings = Settings::resolve(&args.common, None, None, None)?;
    let base: BaseDistribution = args.base.parse()?;
    let config = SynthConfig {
        theta0: args.theta0,
        theta1: args.theta1,
        k: args.slots,
        base,
        energies: log_uniform_energies(
            args.n,
            args.energy_min,
            args.energy_max,
            derive_seed(settings.seed, &[u64::MAX]),
        )?,
        seed: settings.seed,
        mode: match args.profile_length {
            Some(length) => SynthMode::Profiles { length },
            None => SynthMode::Records,
        },
    };
    let mut buf = Vec::new();
    match config.mode {
        SynthMode::Records => {
            write_records_csv(&mut buf, &synth_records(&config)?)?;
            emit(&settings, "records.csv", &buf)
        }
        SynthMode::Profiles { .. } => {
            write_profiles_csv(&mut buf, &synth_profiles(&config)?)?;
            emit(&settings, "profiles.csv", &buf)
        }
    }
}

fn parse_triplet(spec: &str, what: &str) -> Result<(f64, f64, usize)> {
    let bad = || Error::InvalidArgument(format!("{what} must be lo:hi:count, got '{spec}'"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo = parts[0].trim().parse().map_err(|_| bad())?;
    let hi = parts[1].trim().parse().map_err(|_| bad())?;
    let n = parts[2].trim().parse().map_err(|_| bad())?;
    Ok((lo, hi, n))
}

pub fn curves(args: &CurvesArgs) -> Result<()> {
    let settings = Settings::resolve(&args.common, Some(&args.input), Some(&args.model), None)?;
    let records = load_records(&args.input, &settings)?;
    let (lo, hi, n) = parse_triplet(&args.energies, "--energies")?;
    let energies = log_spaced(lo, hi, n)?;
    let taus = args
        .taus
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad tau '{t}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    let (blo, bhi, bn) = parse_triplet(&args.beta_taus, "--beta-taus")?;
    let beta_taus = dense_taus(blo, bhi, bn)?;
    let config = settings.fit_config();
    let dir = settings.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let mut fits = Vec::new();
    for &method in &settings.methods {
        for &formulation in &settings.formulations {
            if method == Method::Mle && formulation == peakload_core::Formulation::C4 {
                continue;
            }
            let seed = derive_seed(settings.seed, &[method as u64, formulation as u64]);
            let fit = FittedModel::fit(method, formulation, &records, &settings.grid, seed, &config)?;
            let mut buf = Vec::new();
            export_quantile_curves(&mut buf, &fit, &energies, &taus, &settings.thresholds)?;
            write_file(&dir, &format!("quantile_{method}_{formulation}.csv"), &buf)?;
            fits.push(fit);
        }
    }
    let mut buf = Vec::new();
    export_beta_curves(&mut buf, &fits, &beta_taus, &settings.thresholds)?;
    write_file(&dir, "beta_curves.csv", &buf)?;
    let mut files: Vec<String> = fits
        .iter()
        .map(|f| format!("quantile_{}_{}.csv", f.method(), f.formulation()))
        .collect();
    files.push("beta_curves.csv".into());
    std::io::stdout().write_all(&to_json(&json!({ "files": files }))?)?;
    Ok(())
}
