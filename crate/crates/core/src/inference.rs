//! Likelihood ratio test (Gumbel vs Fréchet) and the observed-Fisher
//! standard deviation of γ̂.
//!
//! The test uses the plain χ²₁ null even though the alternative is bounded
//! away from γ = 0 (γ ≥ γ_th), which makes it conservative.

use libm::{erf, erfc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mle::{fit_mle, fit_mle_warm, mle_bounds, total_nll, MleFit};
use crate::model::{FitConfig, Formulation, Thresholds};
use crate::optim::Bounds;
use crate::profiles::CustomerRecord;

/// Relative finite-difference step.
pub const FD_STEP: f64 = 1e-4;

/// Multipliers of the base step tried in turn. Coordinates much smaller
/// than 1 get an absolute step of `FD_STEP`, which on steep directions can
/// leave truncation error large enough to make the Hessian indefinite.
pub const STEP_SCALES: [f64; 3] = [1.0, 0.1, 0.01];

/// Allowed asymmetry of the raw Hessian, relative to `1 + |H_ij|`.
pub const SYMMETRY_TOL: f64 = 1e-4;

pub fn chi2_1_cdf(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "chi-squared argument must be non-negative, got {x}"
        )));
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    Ok(erf((x / 2.0).sqrt()))
}

/// `1 − chi2_1_cdf(x)`, computed without cancellation.
pub fn chi2_1_sf(x: f64) -> Result<f64> {
    chi2_1_cdf(x)?;
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(erfc((x / 2.0).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrtResult {
    pub ell0: f64,
    pub ell1: f64,
    pub lambda: f64,
    pub p_value: f64,
}

impl LrtResult {
    pub fn from_loglik(ell0: f64, ell1: f64) -> Result<Self> {
        if !(ell0.is_finite() && ell1.is_finite()) {
            return Err(Error::InvalidArgument(
                "log-likelihoods must be finite".into(),
            ));
        }
        let lambda = (-2.0 * (ell0 - ell1)).max(0.0);
        Ok(Self {
            ell0,
            ell1,
            lambda,
            p_value: chi2_1_sf(lambda)?,
        })
    }
}

/// Both fits behind a likelihood ratio test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrtOutcome {
    pub result: LrtResult,
    pub gumbel: MleFit,
    pub frechet: MleFit,
}

/// Fits Gumbel (H₀) and Fréchet (H₁) on the full record set.
pub fn likelihood_ratio_test(
    records: &[CustomerRecord],
    seed: u64,
    config: &FitConfig,
) -> Result<LrtOutcome> {
    let gumbel = fit_mle(Formulation::Gumbel, records, seed, config)?;
    let frechet = fit_mle_warm(
        Formulation::Frechet,
        records,
        seed,
        config,
        Some(&gumbel.canonical),
    )?;
    let result = LrtResult::from_loglik(-gumbel.total_nll, -frechet.total_nll)?;
    Ok(LrtOutcome {
        result,
        gumbel,
        frechet,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherResult {
    /// Symmetrized Hessian of the total NLL at ŵ.
    pub hessian: Vec<Vec<f64>>,
    pub std_gamma: f64,
    /// Multiplier of the base step that produced a PD Hessian.
    pub step_scale: f64,
    pub attempts: usize,
}

fn fd_steps(w: &[f64]) -> Vec<f64> {
    w.iter().map(|x| FD_STEP * x.abs().max(1.0)).collect()
}

/// Central-difference Hessian. Entries are computed independently for
/// `(i, j)` and `(j, i)` so asymmetry can be checked.
pub fn central_hessian<F>(f: &F, w: &[f64], steps: &[f64]) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let n = w.len();
    let f0 = f(w)?;
    let eval = |shifts: &[(usize, f64)]| -> Result<f64> {
        let mut x = w.to_vec();
        for &(k, d) in shifts {
            x[k] += d;
        }
        match f(&x) {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(Error::OnBoundary(
                "objective not finite in a step-neighbourhood of the optimum".into(),
            )),
        }
    };
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let entries: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (hi, hj) = (steps[i], steps[j]);
            if i == j {
                let up = eval(&[(i, hi)])?;
                let down = eval(&[(i, -hi)])?;
                Ok((up - 2.0 * f0 + down) / (hi * hi))
            } else {
                let pp = eval(&[(i, hi), (j, hj)])?;
                let pm = eval(&[(i, hi), (j, -hj)])?;
                let mp = eval(&[(i, -hi), (j, hj)])?;
                let mm = eval(&[(i, -hi), (j, -hj)])?;
                Ok(((pp - pm) - (mp - mm)) / (4.0 * hi * hj))
            }
        })
        .collect::<Result<_>>()?;
    Ok(entries.chunks(n).map(|r| r.to_vec()).collect())
}

fn symmetrize(h: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = h.len();
    let mut s = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (h[i][j], h[j][i]);
            if (a - b).abs() >= SYMMETRY_TOL * (1.0 + a.abs()) {
                return Err(Error::Optim(format!(
                    "Hessian asymmetric at ({i}, {j}): {a} vs {b}"
                )));
            }
            s[i][j] = 0.5 * (a + b);
        }
    }
    Ok(s)
}

/// Fails unless every pivot of unpivoted elimination is positive.
fn check_positive_definite(h: &[Vec<f64>]) -> Result<()> {
    let n = h.len();
    let mut a = h.to_vec();
    for k in 0..n {
        let pivot = a[k][k];
        if !(pivot > 0.0) || !pivot.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        for i in k + 1..n {
            let factor = a[i][k] / pivot;
            for j in k..n {
                a[i][j] -= factor * a[k][j];
            }
        }
    }
    Ok(())
}

/// Gauss–Jordan inverse with partial pivoting.
pub fn invert(h: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = h.len();
    let mut a: Vec<Vec<f64>> = h
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&x, &y| a[x][k].abs().total_cmp(&a[y][k].abs()))
            .unwrap();
        if a[p][k] == 0.0 {
            return Err(Error::NotPositiveDefinite);
        }
        a.swap(k, p);
        let pivot = a[k][k];
        for v in a[k].iter_mut() {
            *v /= pivot;
        }
        for i in 0..n {
            if i != k {
                let factor = a[i][k];
                if factor != 0.0 {
                    for j in 0..2 * n {
                        a[i][j] -= factor * a[k][j];
                    }
                }
            }
        }
    }
    Ok(a.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Observed-information standard deviation of coordinate `index` for an
/// arbitrary objective minimized at `w`.
pub fn fisher_from_objective<F>(
    f: &F,
    w: &[f64],
    bounds: &Bounds,
    index: usize,
) -> Result<FisherResult>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    if index >= w.len() || bounds.dim() != w.len() {
        return Err(Error::InvalidArgument("dimension mismatch".into()));
    }
    let steps = fd_steps(w);
    for (j, (&x, &h)) in w.iter().zip(&steps).enumerate() {
        if x - bounds.lower()[j] <= h || bounds.upper()[j] - x <= h {
            return Err(Error::OnBoundary(format!(
                "coordinate {j} = {x} is within one step of its bound"
            )));
        }
    }
    let mut last = Error::NotPositiveDefinite;
    for (attempt, scale) in STEP_SCALES.iter().enumerate() {
        let scaled: Vec<f64> = steps.iter().map(|h| h * scale).collect();
        match hessian_std(f, w, &scaled, index) {
            Ok((hessian, std_gamma)) => {
                return Ok(FisherResult {
                    hessian,
                    std_gamma,
                    step_scale: *scale,
                    attempts: attempt + 1,
                })
            }
            Err(e @ (Error::NotPositiveDefinite | Error::Optim(_))) => last = e,
            Err(e) => return Err(e),
        }
    }
    Err(last)
}

fn hessian_std<F>(f: &F, w: &[f64], steps: &[f64], index: usize) -> Result<(Vec<Vec<f64>>, f64)>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let raw = central_hessian(f, w, steps)?;
    let hessian = symmetrize(&raw)?;
    check_positive_definite(&hessian)?;
    let inv = invert(&hessian)?;
    let var = inv[index][index];
    if !(var > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    Ok((hessian, var.sqrt()))
}

/// Std(γ̂) from the observed Fisher information of the exact total NLL.
pub fn fisher_std_gamma(
    records: &[CustomerRecord],
    fit: &MleFit,
    thresholds: &Thresholds,
) -> Result<FisherResult> {
    if !fit.formulation.has_gamma() {
        return Err(Error::InvalidArgument(format!(
            "{} has no shape parameter",
            fit.formulation
        )));
    }
    let bounds = mle_bounds(fit.formulation, thresholds.gamma_th)?;
    // canonical order so rounding in the sum does not depend on input order
    let mut sorted = records.to_vec();
    sorted.sort_by(|a, b| {
        a.customer_id
            .cmp(&b.customer_id)
            .then(a.energy.total_cmp(&b.energy))
            .then(a.peak.total_cmp(&b.peak))
    });
    let f = |w: &[f64]| total_nll(fit.formulation, w, &sorted, thresholds);
    fisher_from_objective(&f, &fit.w, &bounds, 3)
}
