//! Synthetic data, k-fold cross-validation, report tables and curve export.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gumbel, Pareto};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evd::{beta_tau, fgumbel_kernel_taylor, fgumbel_qf_taylor, peak_qf, CanonicalParams};
use crate::inference::{fisher_std_gamma, likelihood_ratio_test};
use crate::mle::{anll, feasibility_margin, fit_mle, MleFit};
use crate::model::{FitConfig, Formulation, Thresholds};
use crate::mqr::{apl, fit_mqr, MqrFit, QuantileGrid};
use crate::profiles::{CustomerRecord, LoadProfile};
use crate::seed::{derive_seed, rng_from};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseDistribution {
    Gumbel,
    Exponential,
    /// Pareto with unit scale, shifted by −1 so the support starts at 0.
    Pareto { shape: f64 },
    Uniform,
}

impl BaseDistribution {
    fn validate(&self) -> Result<()> {
        match *self {
            BaseDistribution::Pareto { shape } if !(shape > 0.0 && shape.is_finite()) => Err(
                Error::InvalidArgument(format!("pareto shape must be positive, got {shape}")),
            ),
            _ => Ok(()),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            BaseDistribution::Gumbel => Gumbel::new(0.0, 1.0).unwrap().sample(rng),
            BaseDistribution::Exponential => Exp1.sample(rng),
            BaseDistribution::Pareto { shape } => Pareto::new(1.0, shape).unwrap().sample(rng) - 1.0,
            BaseDistribution::Uniform => rng.random::<f64>(),
        }
    }
}

impl fmt::Display for BaseDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseDistribution::Gumbel => f.write_str("gumbel"),
            BaseDistribution::Exponential => f.write_str("exponential"),
            BaseDistribution::Pareto { shape } => write!(f, "pareto({shape})"),
            BaseDistribution::Uniform => f.write_str("uniform"),
        }
    }
}

/// Accepts `gumbel`, `exponential`, `uniform`, `pareto(2)` or `pareto:2`.
impl FromStr for BaseDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let base = match s.as_str() {
            "gumbel" => BaseDistribution::Gumbel,
            "exponential" | "exp" => BaseDistribution::Exponential,
            "uniform" => BaseDistribution::Uniform,
            other => {
                let shape = other
                    .strip_prefix("pareto(")
                    .and_then(|r| r.strip_suffix(')'))
                    .or_else(|| other.strip_prefix("pareto:"))
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown base distribution '{other}'")))?;
                let shape = shape
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad pareto shape '{shape}'")))?;
                BaseDistribution::Pareto { shape }
            }
        };
        base.validate()?;
        Ok(base)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SynthMode {
    Records,
    /// Profiles of `length` readings; peak slots occupy the last `k`
    /// indices and the rest is a constant baseline.
    Profiles { length: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub theta0: f64,
    pub theta1: f64,
    pub k: usize,
    pub base: BaseDistribution,
    pub energies: Vec<f64>,
    pub seed: u64,
    pub mode: SynthMode,
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if !(self.theta0 > 0.0 && self.theta1 > 0.0) {
            return Err(Error::InvalidArgument("theta0 and theta1 must be positive".into()));
        }
        if self.k == 0 {
            return Err(Error::InvalidArgument("K must be at least 1".into()));
        }
        if let Some(&e) = self.energies.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(Error::NonPositiveEnergy(e));
        }
        if let SynthMode::Profiles { length } = self.mode {
            if length < self.k {
                return Err(Error::InvalidArgument(format!(
                    "profile length {length} is shorter than K = {}",
                    self.k
                )));
            }
        }
        self.base.validate()
    }

    /// Peak-slot values `X_k = θ₀E + θ₁√E·F_k` of customer `i`.
    fn slots(&self, i: usize) -> Vec<f64> {
        let e = self.energies[i];
        let mut rng = rng_from(derive_seed(self.seed, &[i as u64]));
        (0..self.k)
            .map(|_| self.theta0 * e + self.theta1 * e.sqrt() * self.base.sample(&mut rng))
            .collect()
    }
}

fn customer_id(i: usize) -> String {
    format!("c{i:06}")
}

pub fn synth_records(config: &SynthConfig) -> Result<Vec<CustomerRecord>> {
    config.validate()?;
    Ok((0..config.energies.len())
        .into_par_iter()
        .map(|i| {
            let peak = config.slots(i).into_iter().fold(f64::NEG_INFINITY, f64::max);
            CustomerRecord::new(customer_id(i), config.energies[i], peak)
        })
        .collect())
}

/// Places `slots` at the last indices and fills the rest with a constant
/// baseline so the readings sum to `energy`.
pub fn build_profile(
    id: impl Into<String>,
    slots: &[f64],
    length: usize,
    energy: f64,
) -> Result<LoadProfile> {
    let k = slots.len();
    if length < k {
        return Err(Error::InvalidArgument("profile shorter than slot count".into()));
    }
    let filler = length - k;
    let mut readings = if filler == 0 {
        Vec::with_capacity(length)
    } else {
        let baseline = (energy - slots.iter().sum::<f64>()) / filler as f64;
        if baseline < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "peak slots exceed the energy {energy}; baseline would be {baseline}"
            )));
        }
        vec![baseline; filler]
    };
    readings.extend_from_slice(slots);
    LoadProfile::new(id, 1, readings)
}

pub fn synth_profiles(config: &SynthConfig) -> Result<Vec<LoadProfile>> {
    config.validate()?;
    let SynthMode::Profiles { length } = config.mode else {
        return Err(Error::InvalidArgument("config is not in profiles mode".into()));
    };
    (0..config.energies.len())
        .into_par_iter()
        .map(|i| build_profile(customer_id(i), &config.slots(i), length, config.energies[i]))
        .collect()
}

/// `n` energies log-uniform on `[lo, hi]`.
pub fn log_uniform_energies(n: usize, lo: f64, hi: f64, seed: u64) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo) {
        return Err(Error::InvalidArgument(format!("bad energy range [{lo}, {hi}]")));
    }
    let mut rng = rng_from(seed);
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n).map(|_| (a + (b - a) * rng.random::<f64>()).exp()).collect())
}

/// `n ≥ 2` log-spaced points from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || n < 2 {
        return Err(Error::InvalidArgument("need 0 < lo < hi and n >= 2".into()));
    }
    let (a, b) = (lo.log10(), hi.log10());
    Ok((0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)
            }
        })
        .collect())
}

/// Noiseless records on the Gumbel quantile surface: customer `i` sits
/// exactly at its own level `τ_i`, with levels stratified over (0, 1) and
/// energies log-uniform on [1e2, 1e6].
pub fn gumbel_surface_records(n: usize, params: &CanonicalParams, seed: u64) -> Result<Vec<CustomerRecord>> {
    let energies = log_uniform_energies(n, 1e2, 1e6, derive_seed(seed, &[0]))?;
    let mut taus: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
    taus.shuffle(&mut rng_from(derive_seed(seed, &[1])));
    energies
        .iter()
        .zip(&taus)
        .enumerate()
        .map(|(i, (&e, &t))| Ok(CustomerRecord::new(customer_id(i), e, peak_qf(t, e, params)?)))
        .collect()
}

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Seeded shuffle, then a near-equal partition; each fold is sorted.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be at least 2, got {k}")));
    }
    if n < k {
        return Err(Error::TooFewRecords { needed: k, got: n });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_from(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut fold = idx[start..start + size].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += size;
    }
    Ok(folds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mqr,
    Mle,
}

impl Method {
    pub fn metric(self) -> &'static str {
        match self {
            Method::Mqr => "APL",
            Method::Mle => "ANLL",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Mqr => "mqr",
            Method::Mle => "mle",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mqr" => Ok(Method::Mqr),
            "mle" => Ok(Method::Mle),
            other => Err(Error::InvalidArgument(format!("unknown method '{other}'"))),
        }
    }
}

/// A fitted model from either method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum FittedModel {
    Mqr(MqrFit),
    Mle(MleFit),
}

impl FittedModel {
    pub fn fit(
        method: Method,
        formulation: Formulation,
        records: &[CustomerRecord],
        grid: &QuantileGrid,
        seed: u64,
        config: &FitConfig,
    ) -> Result<Self> {
        match method {
            Method::Mqr => Ok(FittedModel::Mqr(fit_mqr(formulation, records, grid, seed, config)?)),
            Method::Mle => Ok(FittedModel::Mle(fit_mle(formulation, records, seed, config)?)),
        }
    }

    pub fn formulation(&self) -> Formulation {
        match self {
            FittedModel::Mqr(f) => f.formulation,
            FittedModel::Mle(f) => f.formulation,
        }
    }

    pub fn method(&self) -> Method {
        match self {
            FittedModel::Mqr(_) => Method::Mqr,
            FittedModel::Mle(_) => Method::Mle,
        }
    }

    pub fn label(&self) -> String {
        format!("{}:{}", self.method(), self.formulation())
    }

    pub fn gamma(&self) -> Option<f64> {
        match self {
            FittedModel::Mqr(f) => f.gamma(),
            FittedModel::Mle(f) => f.gamma(),
        }
    }

    pub fn train_metric(&self) -> f64 {
        match self {
            FittedModel::Mqr(f) => f.train_apl,
            FittedModel::Mle(f) => f.train_anll,
        }
    }

    pub fn predict(&self, tau: f64, energy: f64, thresholds: &Thresholds) -> Result<f64> {
        match self {
            FittedModel::Mqr(f) => f.predict(tau, energy, thresholds),
            FittedModel::Mle(f) if f.formulation == Formulation::FuzzyGumbel => {
                fgumbel_qf_taylor(tau, energy, &f.canonical, thresholds.gamma_th)
            }
            FittedModel::Mle(f) => peak_qf(tau, energy, &f.canonical),
        }
    }

    pub fn beta(&self, tau: f64, thresholds: &Thresholds) -> Result<f64> {
        match self {
            FittedModel::Mqr(f) => f.beta(tau, thresholds),
            FittedModel::Mle(f) if f.formulation == Formulation::FuzzyGumbel => {
                crate::evd::check_tau(tau)?;
                let p = &f.canonical;
                Ok(p.scale_a * fgumbel_kernel_taylor(tau, p.gamma) + p.loc_b)
            }
            FittedModel::Mle(f) => beta_tau(tau, &f.canonical),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub k: usize,
    pub seed: u64,
    pub grid: QuantileGrid,
    pub fit: FitConfig,
    /// Also run the LRT and Fisher Std(γ̂) on the full record set.
    pub lrt: bool,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self {
            k: 5,
            seed: 0,
            grid: QuantileGrid::default(),
            fit: FitConfig::default(),
            lrt: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub train: f64,
    pub test: f64,
    pub gamma: Option<f64>,
    /// Test records outside the support of the fitted Fréchet / r-Weibull.
    pub infeasible_test_records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvEntry {
    pub formulation: Formulation,
    pub method: Method,
    pub mean_train: f64,
    /// `+inf` (serialized as null) when any fold had infeasible test records.
    pub mean_test: f64,
    pub mean_gamma: Option<f64>,
    /// Observed-Fisher Std(γ̂) of the full-data Fréchet MLE.
    pub std_gamma: Option<f64>,
    pub folds: Vec<FoldResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrtSummary {
    pub ell0: f64,
    pub ell1: f64,
    pub lambda: f64,
    pub p_value: f64,
    pub gamma: f64,
    pub std_gamma: Option<f64>,
    /// Why Std(γ̂) is missing, if it is.
    pub fisher_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub seed: u64,
    pub n_records: usize,
    pub entries: Vec<CvEntry>,
    pub lrt: Option<LrtSummary>,
}

fn fold_job(
    method: Method,
    formulation: Formulation,
    train: &[CustomerRecord],
    test: &[CustomerRecord],
    seed: u64,
    opts: &CvOptions,
) -> Result<FoldResult> {
    let th = opts.fit.thresholds;
    let model = FittedModel::fit(method, formulation, train, &opts.grid, seed, &opts.fit)?;
    let (test_metric, infeasible) = match &model {
        FittedModel::Mqr(f) => (apl(formulation, &f.w, test, &f.grid, &th)?, 0),
        FittedModel::Mle(f) => match anll(formulation, &f.w, test, &th) {
            Ok(v) => (v, 0),
            Err(Error::InfeasibleRecord { .. }) => {
                let bad = test
                    .iter()
                    .filter(|r| feasibility_margin(&f.w, std::slice::from_ref(*r)) <= 0.0)
                    .count();
                (f64::INFINITY, bad)
            }
            Err(e) => return Err(e),
        },
    };
    Ok(FoldResult {
        train: model.train_metric(),
        test: test_metric,
        gamma: model.gamma(),
        infeasible_test_records: infeasible,
    })
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

/// k-fold cross-validation of every (method, formulation) pair. C4 is
/// skipped under MLE since it has no likelihood.
pub fn run_cv(
    records: &[CustomerRecord],
    formulations: &[Formulation],
    methods: &[Method],
    opts: &CvOptions,
) -> Result<CvReport> {
    let folds = kfold_split(records.len(), opts.k, derive_seed(opts.seed, &[u64::MAX]))?;
    let mut pairs: Vec<(Method, Formulation)> = Vec::new();
    for &m in methods {
        for &f in formulations {
            if !(m == Method::Mle && f == Formulation::C4) && !pairs.contains(&(m, f)) {
                pairs.push((m, f));
            }
        }
    }
    let splits: Vec<(Vec<CustomerRecord>, Vec<CustomerRecord>)> = folds
        .iter()
        .enumerate()
        .map(|(fi, fold)| {
            let test = fold.iter().map(|&i| records[i].clone()).collect();
            let train = folds
                .iter()
                .enumerate()
                .filter(|(fj, _)| *fj != fi)
                .flat_map(|(_, f)| f.iter().map(|&i| records[i].clone()))
                .collect();
            (train, test)
        })
        .collect();
    let jobs: Vec<(usize, usize)> = (0..pairs.len())
        .flat_map(|p| (0..folds.len()).map(move |f| (p, f)))
        .collect();
    let results: Vec<FoldResult> = jobs
        .par_iter()
        .map(|&(p, f)| {
            let (m, form) = pairs[p];
            let seed = derive_seed(opts.seed, &[m as u64, form as u64, f as u64]);
            fold_job(m, form, &splits[f].0, &splits[f].1, seed, opts)
        })
        .collect::<Result<_>>()?;

    let lrt = if opts.lrt {
        let out = likelihood_ratio_test(records, derive_seed(opts.seed, &[u64::MAX - 1]), &opts.fit)?;
        let fisher = fisher_std_gamma(records, &out.frechet, &opts.fit.thresholds);
        Some(LrtSummary {
            ell0: out.result.ell0,
            ell1: out.result.ell1,
            lambda: out.result.lambda,
            p_value: out.result.p_value,
            gamma: out.frechet.canonical.gamma,
            std_gamma: fisher.as_ref().ok().map(|f| f.std_gamma),
            fisher_error: fisher.err().map(|e| e.to_string()),
        })
    } else {
        None
    };

    let entries = pairs
        .iter()
        .enumerate()
        .map(|(p, &(method, formulation))| {
            let folds: Vec<FoldResult> = results[p * splits.len()..(p + 1) * splits.len()].to_vec();
            let mean_gamma = formulation
                .has_gamma()
                .then(|| mean(folds.iter().filter_map(|r| r.gamma)));
            let std_gamma = (method == Method::Mle && formulation == Formulation::Frechet)
                .then(|| lrt.as_ref().and_then(|l| l.std_gamma))
                .flatten();
            CvEntry {
                formulation,
                method,
                mean_train: mean(folds.iter().map(|r| r.train)),
                mean_test: mean(folds.iter().map(|r| r.test)),
                mean_gamma,
                std_gamma,
                folds,
            }
        })
        .collect();
    Ok(CvReport {
        k: opts.k,
        seed: opts.seed,
        n_records: records.len(),
        entries,
        lrt,
    })
}

/// Formats with `digits` significant digits, switching to exponent form
/// for very large or small magnitudes.
pub fn format_sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..7).contains(&mag) {
        let decimals = (digits as i32 - 1 - mag).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.prec$e}", prec = digits - 1)
    }
}

/// p-values in scientific notation with 3 significant digits.
pub fn format_p(p: f64) -> String {
    format!("{p:.2e}")
}

impl CvReport {
    /// Column headings of the table for one method.
    pub fn columns(&self, method: Method) -> Vec<String> {
        let mut cols = Vec::new();
        for e in self.entries.iter().filter(|e| e.method == method) {
            let l = e.formulation.label();
            cols.push(format!("{l} Tr"));
            cols.push(format!("{l} Te"));
            if e.formulation.has_gamma() {
                cols.push(format!("{l} gamma"));
            }
            if e.std_gamma.is_some() {
                cols.push(format!("{l} Std(gamma)"));
            }
        }
        cols
    }

    fn row(&self, method: Method) -> Vec<String> {
        let mut row = Vec::new();
        for e in self.entries.iter().filter(|e| e.method == method) {
            row.push(format_sig(e.mean_train, 6));
            row.push(format_sig(e.mean_test, 6));
            if let Some(g) = e.mean_gamma {
                row.push(format_sig(g, 6));
            }
            if let Some(s) = e.std_gamma {
                row.push(format_sig(s, 6));
            }
        }
        row
    }

    /// Aligned text with one block per method: Tr/Te columns per formulation,
    /// then gamma columns, then the LRT line.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        for method in [Method::Mqr, Method::Mle] {
            let cols = self.columns(method);
            if cols.is_empty() {
                continue;
            }
            let row = self.row(method);
            let widths: Vec<usize> = cols.iter().zip(&row).map(|(c, v)| c.len().max(v.len())).collect();
            out.push_str(&format!(
                "{} ({}-fold {}, n = {})\n",
                method.metric(),
                self.k,
                method.to_string().to_uppercase(),
                self.n_records
            ));
            let line = |cells: &[String]| {
                cells
                    .iter()
                    .zip(&widths)
                    .map(|(c, w)| format!("{c:>w$}"))
                    .collect::<Vec<_>>()
                    .join("  ")
            };
            out.push_str(&line(&cols));
            out.push('\n');
            out.push_str(&line(&row));
            out.push_str("\n\n");
        }
        if let Some(l) = &self.lrt {
            out.push_str(&format!(
                "LRT Gumbel vs Frechet: lambda = {}, p = {}, gamma = {}, Std(gamma) = {}\n",
                format_sig(l.lambda, 6),
                format_p(l.p_value),
                format_sig(l.gamma, 6),
                l.std_gamma.map_or_else(|| "n/a".to_string(), |s| format_sig(s, 6)),
            ));
        }
        out
    }
}

/// Writes `tau,energy,predicted_peak` rows, grouped by τ.
pub fn export_quantile_curves<W: Write>(
    writer: W,
    fit: &FittedModel,
    energies: &[f64],
    taus: &[f64],
    thresholds: &Thresholds,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["tau", "energy", "predicted_peak"])?;
    for &t in taus {
        for &e in energies {
            let q = fit.predict(t, e, thresholds)?;
            w.write_record([t.to_string(), e.to_string(), q.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `tau,beta,source` rows: C4 fits at their grid levels, parametric
/// fits over `taus`.
pub fn export_beta_curves<W: Write>(
    writer: W,
    fits: &[FittedModel],
    taus: &[f64],
    thresholds: &Thresholds,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["tau", "beta", "source"])?;
    for fit in fits {
        let levels: &[f64] = match fit {
            FittedModel::Mqr(f) if f.formulation == Formulation::C4 => f.grid.levels(),
            _ => taus,
        };
        let label = fit.label();
        for &t in levels {
            let b = fit.beta(t, thresholds)?;
            w.write_record([t.to_string(), b.to_string(), label.clone()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Evenly spaced levels strictly inside (lo, hi) endpoints inclusive.
pub fn dense_taus(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(0.0 < lo && lo < hi && hi < 1.0) || n < 2 {
        return Err(Error::InvalidArgument("need 0 < lo < hi < 1 and n >= 2".into()));
    }
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}
