//! Multiple quantile regression of peak load on energy consumption.
//!
//! Every formulation predicts quantiles of the form `α·E + β_τ·√E`:
//!
//! | formulation | w                                    |
//! |-------------|--------------------------------------|
//! | C4          | `(α, β_τ₁, …, β_τₘ)`, β non-decreasing |
//! | Gumbel      | `(θ₀, A, B)`                          |
//! | f-Gumbel    | `(θ₀, A, B, γ)`, `|γ| ≤ γ_th`          |
//! | Fréchet     | `(θ₀, A/γ, B − A/γ, γ)`, `γ ≥ γ_th`     |
//! | r-Weibull   | `(θ₀, A/γ, B − A/γ, γ)`, `γ ≤ −γ_th`    |
//!
//! with `A = θ₁a_K`, `B = θ₁b_K`. The objective is the average pinball loss
//! (APL) over customers and grid levels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evd::{beta_tau, check_tau, fgumbel_kernel_taylor, CanonicalParams};
use crate::model::{moment_start, validate_records, FitConfig, Formulation, Thresholds};
use crate::optim::{multistart_minimize, perturbed_starts, Bounds, OptimResult};
use crate::profiles::CustomerRecord;

/// Strictly increasing quantile levels in (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct QuantileGrid(Vec<f64>);

impl QuantileGrid {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Empty("quantile grid"));
        }
        for &t in &levels {
            check_tau(t)?;
        }
        if levels.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument(
                "quantile levels must be strictly increasing".into(),
            ));
        }
        Ok(Self(levels))
    }

    /// Levels `lo, lo+step, …, hi`, rounded to 12 decimals.
    pub fn range(lo: f64, step: f64, hi: f64) -> Result<Self> {
        if !(step > 0.0) || !(hi >= lo) {
            return Err(Error::InvalidArgument(format!(
                "bad grid {lo}:{step}:{hi}"
            )));
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        Self::new(
            (0..n)
                .map(|i| ((lo + i as f64 * step) * 1e12).round() / 1e12)
                .collect(),
        )
    }

    /// Parses `lo:step:hi`.
    pub fn parse(spec: &str) -> Result<Self> {
        let parts: Vec<f64> = spec
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidArgument(format!("bad grid spec '{spec}'")))?;
        match parts.as_slice() {
            [lo, step, hi] => Self::range(*lo, *step, *hi),
            _ => Err(Error::InvalidArgument(format!(
                "grid spec '{spec}' is not lo:step:hi"
            ))),
        }
    }

    pub fn levels(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn position(&self, tau: f64) -> Option<usize> {
        self.0.iter().position(|&t| (t - tau).abs() <= 1e-9)
    }
}

impl Default for QuantileGrid {
    /// `{0.10, 0.11, …, 0.90}`.
    fn default() -> Self {
        Self((10..=90).map(|i| i as f64 / 100.0).collect())
    }
}

impl TryFrom<Vec<f64>> for QuantileGrid {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<QuantileGrid> for Vec<f64> {
    fn from(g: QuantileGrid) -> Self {
        g.0
    }
}

pub fn pinball_loss(tau: f64, delta: f64) -> f64 {
    if delta < 0.0 {
        (tau - 1.0) * delta
    } else {
        tau * delta
    }
}

/// Converts a parametric MQR vector to canonical parameters.
pub fn mqr_to_canonical(formulation: Formulation, w: &[f64]) -> Result<CanonicalParams> {
    check_dim(formulation, w)?;
    Ok(match formulation {
        Formulation::Gumbel => CanonicalParams::gumbel(w[0], w[1], w[2]),
        Formulation::FuzzyGumbel => CanonicalParams::new(w[0], w[1], w[2], w[3]),
        Formulation::Frechet | Formulation::ReverseWeibull => {
            CanonicalParams::new(w[0], w[1] * w[3], w[2] + w[1], w[3])
        }
        Formulation::C4 => unreachable!(),
    })
}

pub fn canonical_to_mqr(formulation: Formulation, p: &CanonicalParams) -> Result<Vec<f64>> {
    match formulation {
        Formulation::C4 => Err(Error::InvalidArgument(
            "C4 has no canonical representation".into(),
        )),
        Formulation::Gumbel => Ok(vec![p.theta0, p.scale_a, p.loc_b]),
        Formulation::FuzzyGumbel => Ok(vec![p.theta0, p.scale_a, p.loc_b, p.gamma]),
        Formulation::Frechet | Formulation::ReverseWeibull => {
            if p.gamma == 0.0 {
                return Err(Error::InvalidArgument(
                    "Frechet/r-Weibull vectors need gamma != 0".into(),
                ));
            }
            let ratio = p.scale_a / p.gamma;
            Ok(vec![p.theta0, ratio, p.loc_b - ratio, p.gamma])
        }
    }
}

fn check_dim(formulation: Formulation, w: &[f64]) -> Result<()> {
    match formulation.dim() {
        Some(d) if d == w.len() => Ok(()),
        Some(d) => Err(Error::InvalidArgument(format!(
            "{formulation} expects {d} parameters, got {}",
            w.len()
        ))),
        None => Err(Error::InvalidArgument("C4 is not parametric".into())),
    }
}

/// Box of the parameter space for a parametric formulation.
pub fn mqr_bounds(formulation: Formulation, gamma_th: f64) -> Result<Bounds> {
    let inf = f64::INFINITY;
    let (lower, upper) = match formulation {
        Formulation::Gumbel => (vec![0.0, 0.0, -inf], vec![inf, inf, inf]),
        Formulation::FuzzyGumbel => (
            vec![0.0, 0.0, -inf, -gamma_th],
            vec![inf, inf, inf, gamma_th],
        ),
        Formulation::Frechet => (vec![0.0, 0.0, -inf, gamma_th], vec![inf; 4]),
        Formulation::ReverseWeibull => (
            vec![0.0, -inf, -inf, -inf],
            vec![inf, 0.0, inf, -gamma_th],
        ),
        Formulation::C4 => {
            return Err(Error::InvalidArgument("C4 is not parametric".into()));
        }
    };
    Bounds::new(lower, upper)
}

/// `(α, β_τ for τ in grid)` for a parametric formulation.
fn velander_coefficients(
    formulation: Formulation,
    w: &[f64],
    grid: &QuantileGrid,
    thresholds: &Thresholds,
) -> Result<(f64, Vec<f64>)> {
    let betas = grid
        .levels()
        .iter()
        .map(|&tau| beta_for(formulation, w, tau, thresholds))
        .collect::<Result<Vec<f64>>>()?;
    Ok((w[0], betas))
}

fn beta_for(formulation: Formulation, w: &[f64], tau: f64, thresholds: &Thresholds) -> Result<f64> {
    check_tau(tau)?;
    match formulation {
        Formulation::FuzzyGumbel => {
            if w[3].abs() > thresholds.gamma_th {
                return Err(Error::GammaOutOfRange {
                    gamma: w[3],
                    gamma_th: thresholds.gamma_th,
                });
            }
            Ok(w[1] * fgumbel_kernel_taylor(tau, w[3]) + w[2])
        }
        _ => beta_tau(tau, &mqr_to_canonical(formulation, w)?),
    }
}

/// Predicted τ-quantile of the peak for a customer with energy `energy`.
///
/// For C4, `w = (α, β_τ₁, …)` aligned with `grid` and τ must be a grid level.
pub fn predict_quantile(
    formulation: Formulation,
    w: &[f64],
    grid: &QuantileGrid,
    tau: f64,
    energy: f64,
    thresholds: &Thresholds,
) -> Result<f64> {
    if !(energy > 0.0) {
        return Err(Error::NonPositiveEnergy(energy));
    }
    let beta = match formulation {
        Formulation::C4 => {
            check_c4(w, grid)?;
            let k = grid.position(tau).ok_or(Error::OffGrid(tau))?;
            w[1 + k]
        }
        _ => {
            check_dim(formulation, w)?;
            beta_for(formulation, w, tau, thresholds)?
        }
    };
    Ok(w[0] * energy + beta * energy.sqrt())
}

fn check_c4(w: &[f64], grid: &QuantileGrid) -> Result<()> {
    if w.len() != grid.len() + 1 {
        return Err(Error::InvalidArgument(format!(
            "C4 vector has {} entries, grid needs {}",
            w.len(),
            grid.len() + 1
        )));
    }
    Ok(())
}

/// Shared APL evaluation for quantiles `α·E + β_τ·√E`.
///
/// When the βs are non-decreasing the per-record sum over levels is done
/// with prefix sums and a binary search.
pub(crate) fn apl_from_coefficients(
    alpha: f64,
    betas: &[f64],
    taus: &[f64],
    records: &[CustomerRecord],
) -> f64 {
    let m = taus.len();
    let monotone = betas.windows(2).all(|w| w[0] <= w[1]);
    let total: f64 = if monotone {
        // prefix sums over levels of τ, τβ, (1−τ), (1−τ)β
        let mut p_tau = vec![0.0; m + 1];
        let mut p_tau_beta = vec![0.0; m + 1];
        let mut p_beta = vec![0.0; m + 1];
        for k in 0..m {
            p_tau[k + 1] = p_tau[k] + taus[k];
            p_tau_beta[k + 1] = p_tau_beta[k] + taus[k] * betas[k];
            p_beta[k + 1] = p_beta[k] + betas[k];
        }
        records
            .iter()
            .map(|r| {
                let s = r.energy.sqrt();
                let v = (r.peak - alpha * r.energy) / s;
                // levels with β ≤ v contribute τ(v − β), the rest (1−τ)(β − v)
                let k = betas.partition_point(|&b| b <= v);
                let below = p_tau[k] * v - p_tau_beta[k];
                let upper_beta = p_beta[m] - p_beta[k];
                let upper_tau_beta = p_tau_beta[m] - p_tau_beta[k];
                let upper_tau = p_tau[m] - p_tau[k];
                let above = (upper_beta - upper_tau_beta) - v * ((m - k) as f64 - upper_tau);
                s * (below + above)
            })
            .sum()
    } else {
        records
            .iter()
            .map(|r| {
                let s = r.energy.sqrt();
                let base = r.peak - alpha * r.energy;
                taus.iter()
                    .zip(betas)
                    .map(|(&t, &b)| pinball_loss(t, base - b * s))
                    .sum::<f64>()
            })
            .sum()
    };
    total / (records.len() as f64 * m as f64)
}

/// Average pinball loss of `w` over `records` and `grid`.
pub fn apl(
    formulation: Formulation,
    w: &[f64],
    records: &[CustomerRecord],
    grid: &QuantileGrid,
    thresholds: &Thresholds,
) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Empty("records"));
    }
    validate_records(records, 1)?;
    let (alpha, betas) = match formulation {
        Formulation::C4 => {
            check_c4(w, grid)?;
            (w[0], w[1..].to_vec())
        }
        _ => {
            check_dim(formulation, w)?;
            velander_coefficients(formulation, w, grid, thresholds)?
        }
    };
    Ok(apl_from_coefficients(alpha, &betas, grid.levels(), records))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MqrFit {
    pub formulation: Formulation,
    pub w: Vec<f64>,
    pub canonical: Option<CanonicalParams>,
    pub train_apl: f64,
    pub grid: QuantileGrid,
    pub diagnostics: OptimResult,
}

impl MqrFit {
    pub fn predict(&self, tau: f64, energy: f64, thresholds: &Thresholds) -> Result<f64> {
        predict_quantile(self.formulation, &self.w, &self.grid, tau, energy, thresholds)
    }

    pub fn gamma(&self) -> Option<f64> {
        self.formulation
            .has_gamma()
            .then(|| self.canonical.map(|c| c.gamma))
            .flatten()
    }

    /// β at level τ: any τ for parametric fits, grid levels only for C4.
    pub fn beta(&self, tau: f64, thresholds: &Thresholds) -> Result<f64> {
        match self.formulation {
            Formulation::C4 => {
                let k = self.grid.position(tau).ok_or(Error::OffGrid(tau))?;
                Ok(self.w[1 + k])
            }
            f => beta_for(f, &self.w, tau, thresholds),
        }
    }
}

fn start_for(formulation: Formulation, base: &CanonicalParams, gamma_th: f64) -> Result<Vec<f64>> {
    let mut p = *base;
    p.gamma = match formulation {
        Formulation::Gumbel | Formulation::FuzzyGumbel => 0.0,
        Formulation::Frechet => 10.0 * gamma_th,
        Formulation::ReverseWeibull => -10.0 * gamma_th,
        Formulation::C4 => unreachable!(),
    };
    let mut w = canonical_to_mqr(formulation, &p)?;
    mqr_bounds(formulation, gamma_th)?.project(&mut w);
    Ok(w)
}

/// Fits a parametric formulation by minimizing the APL.
pub fn fit_parametric(
    formulation: Formulation,
    records: &[CustomerRecord],
    grid: &QuantileGrid,
    seed: u64,
    config: &FitConfig,
) -> Result<MqrFit> {
    let warm = match formulation {
        Formulation::Gumbel => None,
        _ => Some(fit_parametric(Formulation::Gumbel, records, grid, seed, config)?),
    };
    fit_parametric_warm(
        formulation,
        records,
        grid,
        seed,
        config,
        warm.as_ref().and_then(|f| f.canonical.as_ref()),
    )
}

/// As [`fit_parametric`], adding the nested Gumbel optimum `warm` (moved to
/// the closest point of this formulation's space) as an extra start.
pub fn fit_parametric_warm(
    formulation: Formulation,
    records: &[CustomerRecord],
    grid: &QuantileGrid,
    seed: u64,
    config: &FitConfig,
    warm: Option<&CanonicalParams>,
) -> Result<MqrFit> {
    let dim = formulation
        .dim()
        .ok_or_else(|| Error::InvalidArgument("use fit_c4 for the C4 formulation".into()))?;
    validate_records(records, dim + 1)?;
    let th = config.thresholds;
    let bounds = mqr_bounds(formulation, th.gamma_th)?;
    let gamma_index = formulation.has_gamma().then_some(3);

    let base = start_for(formulation, &moment_start(records), th.gamma_th)?;
    let mut starts = perturbed_starts(&base, config.optim.n_starts.max(1), gamma_index, &bounds, seed);
    if let Some(w) = warm {
        let mut p = *w;
        p.gamma = match formulation {
            Formulation::Frechet => th.gamma_th,
            Formulation::ReverseWeibull => -th.gamma_th,
            _ => 0.0,
        };
        let mut ws = canonical_to_mqr(formulation, &p)?;
        bounds.project(&mut ws);
        starts.push(ws);
    }

    let taus = grid.levels().to_vec();
    let objective = |w: &[f64]| -> f64 {
        match velander_coefficients(formulation, w, grid, &th) {
            Ok((alpha, betas)) => apl_from_coefficients(alpha, &betas, &taus, records),
            Err(_) => f64::INFINITY,
        }
    };
    let result = multistart_minimize(&objective, &starts, &bounds, seed, &config.optim)?;
    let w = result.argmin.clone();
    Ok(MqrFit {
        formulation,
        canonical: Some(mqr_to_canonical(formulation, &w)?),
        train_apl: apl(formulation, &w, records, grid, &th)?,
        w,
        grid: grid.clone(),
        diagnostics: result,
    })
}

/// Sorted values with cumulative weights for weighted-quantile queries.
struct WeightedSample {
    values: Vec<f64>,
    cumulative: Vec<f64>,
}

impl WeightedSample {
    fn new(mut pairs: Vec<(f64, f64)>) -> Self {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut acc = 0.0;
        let cumulative = pairs
            .iter()
            .map(|&(_, w)| {
                acc += w;
                acc
            })
            .collect();
        Self {
            values: pairs.into_iter().map(|(v, _)| v).collect(),
            cumulative,
        }
    }

    /// Smallest value whose cumulative weight reaches `level·W`: the
    /// smallest minimizer of `Σ w_i·PL(level, v_i − β)`.
    fn quantile(&self, level: f64) -> f64 {
        let total = *self.cumulative.last().unwrap();
        let k = self.cumulative.partition_point(|&c| c < level * total);
        self.values[k.min(self.values.len() - 1)]
    }
}

/// Pool-adjacent-violators under a chain order. `solve` returns the
/// pooled minimizer for a block of consecutive level indices.
pub(crate) fn pool_adjacent_violators<F>(initial: &[f64], mut solve: F) -> Vec<f64>
where
    F: FnMut(std::ops::Range<usize>) -> f64,
{
    // (start, end, value)
    let mut blocks: Vec<(usize, usize, f64)> = Vec::with_capacity(initial.len());
    for (k, &v) in initial.iter().enumerate() {
        blocks.push((k, k + 1, v));
        while blocks.len() > 1 {
            let n = blocks.len();
            if blocks[n - 2].2 <= blocks[n - 1].2 {
                break;
            }
            let (start, _, _) = blocks[n - 2];
            let (_, end, _) = blocks[n - 1];
            blocks.truncate(n - 2);
            blocks.push((start, end, solve(start..end)));
        }
    }
    let mut out = vec![0.0; initial.len()];
    for (start, end, v) in blocks {
        out[start..end].fill(v);
    }
    out
}

/// Exact monotone β solution for a fixed α.
fn c4_inner(alpha: f64, records: &[CustomerRecord], taus: &[f64]) -> Vec<f64> {
    let sample = WeightedSample::new(
        records
            .iter()
            .map(|r| {
                let s = r.energy.sqrt();
                ((r.peak - alpha * r.energy) / s, s)
            })
            .collect(),
    );
    let initial: Vec<f64> = taus.iter().map(|&t| sample.quantile(t)).collect();
    pool_adjacent_violators(&initial, |range| {
        let level = taus[range.clone()].iter().sum::<f64>() / range.len() as f64;
        sample.quantile(level)
    })
}

/// Fits the shared-α, monotone-β quantile Velander formula exactly.
///
/// The APL minimized over β for fixed α is convex in α, so a
/// golden-section search over α wraps an exact inner solve.
pub fn fit_c4(records: &[CustomerRecord], grid: &QuantileGrid, _seed: u64) -> Result<MqrFit> {
    validate_records(records, 1)?;
    let taus = grid.levels();
    let mut evaluations = 0usize;
    let mut profile = |alpha: f64| -> (f64, Vec<f64>) {
        evaluations += 1;
        let betas = c4_inner(alpha, records, taus);
        (apl_from_coefficients(alpha, &betas, taus, records), betas)
    };

    let mut hi = records
        .iter()
        .map(|r| r.peak / r.energy)
        .fold(0.0f64, f64::max);
    if !(hi > 0.0) {
        hi = 1.0;
    }
    let mut best = {
        let (v, b) = profile(0.0);
        (v, 0.0, b)
    };
    let consider = |best: &mut (f64, f64, Vec<f64>), alpha: f64, val: (f64, Vec<f64>)| {
        if val.0 < best.0 || (val.0 == best.0 && alpha < best.1) {
            *best = (val.0, alpha, val.1);
        }
    };
    for _ in 0..30 {
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (0.0, hi);
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let mut fc = profile(c);
        let mut fd = profile(d);
        while b - a > 1e-13 * (1.0 + hi) {
            if fc.0 <= fd.0 {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = profile(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = profile(d);
            }
            if (b - a) < 1e-300 {
                break;
            }
        }
        consider(&mut best, c, fc);
        consider(&mut best, d, fd);
        let at_hi = profile(hi);
        let hi_wins = at_hi.0 < best.0;
        consider(&mut best, hi, at_hi);
        if !hi_wins && best.1 < hi * (1.0 - 1e-9) {
            break;
        }
        hi *= 2.0;
    }

    let (value, alpha, betas) = best;
    let mut w = Vec::with_capacity(1 + betas.len());
    w.push(alpha);
    w.extend(betas);
    Ok(MqrFit {
        formulation: Formulation::C4,
        canonical: None,
        train_apl: value,
        diagnostics: OptimResult {
            argmin: w.clone(),
            value,
            evaluations,
            converged: true,
            restarts: 0,
            start_index: 0,
        },
        w,
        grid: grid.clone(),
    })
}

/// Fits any formulation; C4 is routed to the exact solver.
pub fn fit_mqr(
    formulation: Formulation,
    records: &[CustomerRecord],
    grid: &QuantileGrid,
    seed: u64,
    config: &FitConfig,
) -> Result<MqrFit> {
    match formulation {
        Formulation::C4 => fit_c4(records, grid, seed),
        f => fit_parametric(f, records, grid, seed, config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn th() -> Thresholds {
        Thresholds::default()
    }

    #[test]
    fn pinball_examples() {
        assert_eq!(pinball_loss(0.5, 2.0), 1.0);
        assert_abs_diff_eq!(pinball_loss(0.9, -1.0), 0.1, epsilon = 1e-15);
        assert_eq!(pinball_loss(0.25, 0.0), 0.0);
    }

    #[test]
    fn default_grid() {
        let g = QuantileGrid::default();
        assert_eq!(g.len(), 81);
        assert_eq!(g.levels()[0], 0.10);
        assert_eq!(g.levels()[80], 0.90);
        assert_eq!(QuantileGrid::parse("0.10:0.01:0.90").unwrap(), g);
        assert!(QuantileGrid::parse("0.1:0.1").is_err());
        assert!(QuantileGrid::new(vec![0.5, 0.4]).is_err());
        assert!(QuantileGrid::new(vec![0.0, 0.4]).is_err());
    }

    #[test]
    fn predict_examples() {
        let g = QuantileGrid::default();
        let tau = (-1.0f64).exp();
        let q = predict_quantile(Formulation::Gumbel, &[0.0, 1.0, 0.0], &g, tau, 1.0, &th()).unwrap();
        assert_abs_diff_eq!(q, 0.0, epsilon = 1e-15);

        let mut w = vec![0.1];
        w.extend(std::iter::repeat(2.0).take(g.len()));
        let q = predict_quantile(Formulation::C4, &w, &g, 0.5, 100.0, &th()).unwrap();
        assert_abs_diff_eq!(q, 30.0, epsilon = 1e-12);
        assert!(matches!(
            predict_quantile(Formulation::C4, &w, &g, 0.555, 100.0, &th()),
            Err(Error::OffGrid(_))
        ));

        for &tau in &[0.05, 0.3, 0.77] {
            for &e in &[1.0, 250.0] {
                let a = predict_quantile(Formulation::FuzzyGumbel, &[0.2, 1.5, 3.0, 0.0], &g, tau, e, &th()).unwrap();
                let b = predict_quantile(Formulation::Gumbel, &[0.2, 1.5, 3.0], &g, tau, e, &th()).unwrap();
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn reparameterization_round_trip() {
        for f in Formulation::PARAMETRIC {
            let gamma = match f {
                Formulation::Gumbel => 0.0,
                Formulation::FuzzyGumbel => 0.004,
                Formulation::Frechet => 0.3,
                _ => -0.2,
            };
            let p = CanonicalParams::new(0.05, 1.3, 4.0, gamma);
            let w = canonical_to_mqr(f, &p).unwrap();
            let back = mqr_to_canonical(f, &w).unwrap();
            assert_abs_diff_eq!(back.scale_a, p.scale_a, epsilon = 1e-12);
            assert_abs_diff_eq!(back.loc_b, p.loc_b, epsilon = 1e-12);
            assert!(mqr_bounds(f, 0.01).unwrap().in_box(&w), "{f}: {w:?}");
        }
    }

    #[test]
    fn apl_examples() {
        let g = QuantileGrid::new(vec![0.5]).unwrap();
        // Gumbel with A = 0: every quantile equals θ₀E + B√E
        let w = [0.0, 0.0, 3.0];
        let on = vec![CustomerRecord::new("a", 1.0, 3.0)];
        assert_eq!(apl(Formulation::Gumbel, &w, &on, &g, &th()).unwrap(), 0.0);
        let one = vec![CustomerRecord::new("a", 1.0, 5.0)];
        assert_abs_diff_eq!(apl(Formulation::Gumbel, &w, &one, &g, &th()).unwrap(), 1.0, epsilon = 1e-15);
        let two = vec![CustomerRecord::new("a", 1.0, 5.0), CustomerRecord::new("b", 1.0, 1.0)];
        assert_abs_diff_eq!(apl(Formulation::Gumbel, &w, &two, &g, &th()).unwrap(), 1.0, epsilon = 1e-15);
        assert!(apl(Formulation::Gumbel, &w, &[], &g, &th()).is_err());
    }

    #[test]
    fn fast_apl_matches_direct_sum() {
        let recs: Vec<_> = (1..30)
            .map(|i| {
                let e = 10.0 * i as f64;
                CustomerRecord::new(i.to_string(), e, 0.1 * e + ((i * 7) % 11) as f64 * e.sqrt() / 3.0)
            })
            .collect();
        let taus = QuantileGrid::default().levels().to_vec();
        let betas: Vec<f64> = taus.iter().map(|t| 4.0 * t - 0.5).collect();
        let fast = apl_from_coefficients(0.08, &betas, &taus, &recs);
        let mut direct = 0.0;
        for r in &recs {
            for (t, b) in taus.iter().zip(&betas) {
                direct += pinball_loss(*t, r.peak - 0.08 * r.energy - b * r.energy.sqrt());
            }
        }
        direct /= (recs.len() * taus.len()) as f64;
        assert_abs_diff_eq!(fast, direct, epsilon = 1e-10 * direct);
    }

    #[test]
    fn weighted_quantile_tie_goes_low() {
        let s = WeightedSample::new(vec![(1.0, 1.0), (3.0, 1.0)]);
        // any β in [1, 3] minimizes at level 0.5; the smaller is chosen
        assert_eq!(s.quantile(0.5), 1.0);
        assert_eq!(s.quantile(0.51), 3.0);
    }

    #[test]
    fn pav_merges_violators() {
        // block solution: mean of the block values
        let init = [1.0, 3.0, 2.0, 4.0, 0.0];
        let out = pool_adjacent_violators(&init, |r| init[r.clone()].iter().sum::<f64>() / r.len() as f64);
        assert_eq!(out, vec![1.0, 2.25, 2.25, 2.25, 2.25]);
    }

    #[test]
    fn c4_single_customer_interpolates() {
        let g = QuantileGrid::new(vec![0.5]).unwrap();
        let recs = vec![CustomerRecord::new("a", 50.0, 12.0)];
        let fit = fit_c4(&recs, &g, 0).unwrap();
        let q = fit.predict(0.5, 50.0, &th()).unwrap();
        assert_abs_diff_eq!(q, 12.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.train_apl, 0.0, epsilon = 1e-12);
    }
}
