//! Maximum likelihood fits of the peak-load distribution.
//!
//! Parameter vectors are `w = (1/A, θ₀/A, B/A[, γ])` and each record is
//! standardized as `z = w₀·P/√E − w₁·√E − w₂`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evd::CanonicalParams;
use crate::model::{moment_start, validate_records, FitConfig, Formulation, Thresholds};
use crate::optim::{multistart_minimize, perturbed_starts, Bounds, OptimResult};
use crate::profiles::CustomerRecord;

/// Maximum number of halvings of |γ| when searching for a start inside W*.
const MAX_SHRINK_STEPS: usize = 60;

pub fn standardize(record: &CustomerRecord, w: &[f64]) -> f64 {
    let s = record.energy.sqrt();
    w[0] * record.peak / s - w[1] * s - w[2]
}

fn check_record(record: &CustomerRecord, w: &[f64]) -> Result<()> {
    if !(record.energy > 0.0) {
        return Err(Error::NonPositiveEnergy(record.energy));
    }
    if !(w[0] > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "w0 must be positive, got {}",
            w[0]
        )));
    }
    Ok(())
}

fn log_jacobian(record: &CustomerRecord, w: &[f64]) -> f64 {
    w[0].ln() - 0.5 * record.energy.ln()
}

pub fn loglik_gumbel(record: &CustomerRecord, w: &[f64]) -> Result<f64> {
    check_record(record, w)?;
    let z = standardize(record, w);
    Ok(log_jacobian(record, w) - z - (-z).exp())
}

/// Exact Fréchet / reverse-Weibull log-likelihood.
pub fn loglik_fw(record: &CustomerRecord, w: &[f64]) -> Result<f64> {
    check_record(record, w)?;
    let gamma = w[3];
    if gamma == 0.0 {
        return Err(Error::InvalidArgument("gamma must be non-zero".into()));
    }
    let gz = gamma * standardize(record, w);
    if !(gz > -1.0) {
        return Err(Error::InfeasibleRecord {
            id: record.customer_id.clone(),
            margin: 1.0 + gz,
        });
    }
    let log_t = gz.ln_1p();
    Ok(log_jacobian(record, w) - (-log_t / gamma).exp() - (1.0 + 1.0 / gamma) * log_t)
}

/// Degree-2 Taylor expansion in γ of the exact log-likelihood.
pub fn loglik_fgumbel(record: &CustomerRecord, w: &[f64], gamma_th: f64) -> Result<f64> {
    check_record(record, w)?;
    let gamma = w[3];
    if gamma.abs() > gamma_th {
        return Err(Error::GammaOutOfRange { gamma, gamma_th });
    }
    let z = standardize(record, w);
    let ez = (-z).exp();
    let z2 = z * z;
    let z3 = z2 * z;
    let first = -z2 / 2.0 + z2 * ez / 2.0 + z;
    let second = z2 * z2 * ez / 8.0 + z3 / 3.0 - z3 * ez / 3.0 - z2 / 2.0;
    Ok(log_jacobian(record, w) - z - ez - gamma * first - gamma * gamma * second)
}

/// Exact formula with `1 + γz` clamped below at `eps_th`; total in the
/// record and used only inside optimization.
pub fn loglik_fw_safe(record: &CustomerRecord, w: &[f64], eps_th: f64) -> f64 {
    let gamma = w[3];
    let gz = gamma * standardize(record, w);
    let log_t = if 1.0 + gz > eps_th {
        gz.ln_1p()
    } else {
        eps_th.ln()
    };
    let jac = if w[0] > 0.0 {
        log_jacobian(record, w)
    } else {
        f64::NEG_INFINITY
    };
    jac - (-log_t / gamma).exp() - (1.0 + 1.0 / gamma) * log_t
}

/// Log-likelihood of one record under the formulation's exact formula.
pub fn loglik(
    formulation: Formulation,
    record: &CustomerRecord,
    w: &[f64],
    thresholds: &Thresholds,
) -> Result<f64> {
    check_dim(formulation, w)?;
    match formulation {
        Formulation::Gumbel => loglik_gumbel(record, w),
        Formulation::FuzzyGumbel => loglik_fgumbel(record, w, thresholds.gamma_th),
        Formulation::Frechet | Formulation::ReverseWeibull => loglik_fw(record, w),
        Formulation::C4 => unreachable!(),
    }
}

fn check_dim(formulation: Formulation, w: &[f64]) -> Result<()> {
    match formulation.dim() {
        None => Err(Error::InvalidArgument(
            "C4 has no likelihood; it is not a full distribution".into(),
        )),
        Some(d) if d != w.len() => Err(Error::InvalidArgument(format!(
            "{formulation} expects {d} parameters, got {}",
            w.len()
        ))),
        Some(_) => Ok(()),
    }
}

/// Sum of `−ℓ` over records, using exact formulas. Fixed summation order.
pub fn total_nll(
    formulation: Formulation,
    w: &[f64],
    records: &[CustomerRecord],
    thresholds: &Thresholds,
) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Empty("records"));
    }
    records
        .iter()
        .try_fold(0.0, |acc, r| Ok(acc - loglik(formulation, r, w, thresholds)?))
}

/// Average negative log-likelihood.
pub fn anll(
    formulation: Formulation,
    w: &[f64],
    records: &[CustomerRecord],
    thresholds: &Thresholds,
) -> Result<f64> {
    Ok(total_nll(formulation, w, records, thresholds)? / records.len() as f64)
}

/// Objective minimized during fitting (clamped for Fréchet / r-Weibull).
fn training_objective(
    formulation: Formulation,
    w: &[f64],
    records: &[CustomerRecord],
    thresholds: &Thresholds,
) -> f64 {
    let sum: f64 = match formulation {
        Formulation::Frechet | Formulation::ReverseWeibull => records
            .iter()
            .map(|r| -loglik_fw_safe(r, w, thresholds.eps_th))
            .sum(),
        _ => match total_nll(formulation, w, records, thresholds) {
            Ok(v) => v,
            Err(_) => return f64::INFINITY,
        },
    };
    sum / records.len() as f64
}

pub fn mle_to_canonical(formulation: Formulation, w: &[f64]) -> Result<CanonicalParams> {
    check_dim(formulation, w)?;
    if !(w[0] > 0.0) {
        return Err(Error::InvalidArgument("w0 must be positive to invert".into()));
    }
    let scale = 1.0 / w[0];
    let gamma = if w.len() == 4 { w[3] } else { 0.0 };
    Ok(CanonicalParams::new(w[1] * scale, scale, w[2] * scale, gamma))
}

pub fn canonical_to_mle(formulation: Formulation, p: &CanonicalParams) -> Result<Vec<f64>> {
    if !(p.scale_a > 0.0) {
        return Err(Error::InvalidArgument("scale A must be positive".into()));
    }
    let mut w = vec![1.0 / p.scale_a, p.theta0 / p.scale_a, p.loc_b / p.scale_a];
    match formulation {
        Formulation::Gumbel => {}
        Formulation::C4 => return Err(Error::InvalidArgument("C4 has no likelihood".into())),
        _ => w.push(p.gamma),
    }
    Ok(w)
}

pub fn mle_bounds(formulation: Formulation, gamma_th: f64) -> Result<Bounds> {
    let inf = f64::INFINITY;
    let mut lower = vec![0.0, 0.0, -inf];
    let mut upper = vec![inf, inf, inf];
    match formulation {
        Formulation::Gumbel => {}
        Formulation::FuzzyGumbel => {
            lower.push(-gamma_th);
            upper.push(gamma_th);
        }
        Formulation::Frechet => {
            lower.push(gamma_th);
            upper.push(inf);
        }
        Formulation::ReverseWeibull => {
            lower.push(-inf);
            upper.push(-gamma_th);
        }
        Formulation::C4 => return Err(Error::InvalidArgument("C4 has no likelihood".into())),
    }
    Bounds::new(lower, upper)
}

/// Smallest `1 + γ·z_i` over records.
pub fn feasibility_margin(w: &[f64], records: &[CustomerRecord]) -> f64 {
    records
        .iter()
        .map(|r| 1.0 + w[3] * standardize(r, w))
        .fold(f64::INFINITY, f64::min)
}

fn w_star(records: &[CustomerRecord]) -> crate::optim::Predicate {
    let data: Arc<Vec<CustomerRecord>> = Arc::new(records.to_vec());
    Arc::new(move |w: &[f64]| feasibility_margin(w, &data) > 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleFit {
    pub formulation: Formulation,
    pub w: Vec<f64>,
    pub canonical: CanonicalParams,
    pub train_anll: f64,
    pub total_nll: f64,
    /// `min_i(1 + γ·z_i)` on the training records, for γ formulations.
    pub feasibility_margin: Option<f64>,
    pub diagnostics: OptimResult,
}

impl MleFit {
    pub fn gamma(&self) -> Option<f64> {
        self.formulation.has_gamma().then_some(self.canonical.gamma)
    }
}

pub fn fit_mle(
    formulation: Formulation,
    records: &[CustomerRecord],
    seed: u64,
    config: &FitConfig,
) -> Result<MleFit> {
    let warm = match formulation {
        Formulation::Gumbel | Formulation::C4 => None,
        _ => Some(fit_mle(Formulation::Gumbel, records, seed, config)?),
    };
    fit_mle_warm(
        formulation,
        records,
        seed,
        config,
        warm.as_ref().map(|f| &f.canonical),
    )
}

/// As [`fit_mle`], adding the nested Gumbel optimum `warm` as an extra
/// start (γ set to the nearest admissible value).
pub fn fit_mle_warm(
    formulation: Formulation,
    records: &[CustomerRecord],
    seed: u64,
    config: &FitConfig,
    warm: Option<&CanonicalParams>,
) -> Result<MleFit> {
    let dim = formulation
        .dim()
        .ok_or_else(|| Error::InvalidArgument("C4 has no likelihood".into()))?;
    validate_records(records, dim + 1)?;
    let th = config.thresholds;
    let mut bounds = mle_bounds(formulation, th.gamma_th)?;
    let needs_w_star = matches!(formulation, Formulation::Frechet | Formulation::ReverseWeibull);
    if needs_w_star {
        bounds = bounds.with_predicate(w_star(records));
    }
    let gamma_index = formulation.has_gamma().then_some(3);

    let mut base_params = moment_start(records);
    base_params.gamma = match formulation {
        Formulation::Frechet => 0.1,
        Formulation::ReverseWeibull => -0.1,
        _ => 0.0,
    };
    let base = feasible_start(formulation, &base_params, &bounds)?;
    let mut starts = perturbed_starts(&base, config.optim.n_starts.max(1), gamma_index, &bounds, seed);
    if let Some(p) = warm {
        let mut p = *p;
        p.gamma = match formulation {
            Formulation::Frechet => th.gamma_th,
            Formulation::ReverseWeibull => -th.gamma_th,
            _ => 0.0,
        };
        if let Ok(w) = feasible_start(formulation, &p, &bounds) {
            starts.push(w);
        }
    }

    let objective = |w: &[f64]| training_objective(formulation, w, records, &th);
    let result = multistart_minimize(&objective, &starts, &bounds, seed, &config.optim)?;
    let w = result.argmin.clone();
    let total = total_nll(formulation, &w, records, &th)?;
    Ok(MleFit {
        formulation,
        canonical: mle_to_canonical(formulation, &w)?,
        train_anll: total / records.len() as f64,
        total_nll: total,
        feasibility_margin: needs_w_star.then(|| feasibility_margin(&w, records)),
        w,
        diagnostics: result,
    })
}

/// Maps canonical parameters into the MLE space, then halves |γ| until the
/// point lies in W* (never crossing the γ bound).
fn feasible_start(formulation: Formulation, p: &CanonicalParams, bounds: &Bounds) -> Result<Vec<f64>> {
    let mut w = canonical_to_mle(formulation, p)?;
    bounds.project(&mut w);
    for _ in 0..MAX_SHRINK_STEPS {
        if bounds.is_feasible(&w) {
            return Ok(w);
        }
        if w.len() < 4 {
            break;
        }
        w[3] *= 0.5;
        bounds.project(&mut w);
    }
    if bounds.is_feasible(&w) {
        Ok(w)
    } else {
        Err(Error::Optim(format!(
            "no feasible {formulation} start found after shrinking gamma"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evd::peak_log_pdf;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn rec(e: f64, p: f64) -> CustomerRecord {
        CustomerRecord::new("r", e, p)
    }

    #[test]
    fn gumbel_examples() {
        assert_abs_diff_eq!(loglik_gumbel(&rec(1.0, 0.0), &[1.0, 0.0, 0.0]).unwrap(), -1.0, epsilon = 1e-15);
        let ln2 = 2f64.ln();
        assert_abs_diff_eq!(
            loglik_gumbel(&rec(1.0, ln2), &[1.0, 0.0, 0.0]).unwrap(),
            -ln2 - 0.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(loglik_gumbel(&rec(4.0, 0.0), &[2.0, 0.0, 0.0]).unwrap(), -1.0, epsilon = 1e-15);
        assert!(loglik_gumbel(&rec(0.0, 1.0), &[1.0, 0.0, 0.0]).is_err());
        assert!(loglik_gumbel(&rec(1.0, 1.0), &[0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn fw_examples() {
        // z = 0 with w3 = 1
        assert_abs_diff_eq!(loglik_fw(&rec(1.0, 0.0), &[1.0, 0.0, 0.0, 1.0]).unwrap(), -1.0, epsilon = 1e-15);
        // z = 1 with w3 = 1: -1/2 - 2 ln 2
        assert_abs_diff_eq!(
            loglik_fw(&rec(1.0, 1.0), &[1.0, 0.0, 0.0, 1.0]).unwrap(),
            -0.5 - 2.0 * 2f64.ln(),
            epsilon = 1e-15
        );
        let g = loglik_gumbel(&rec(1.0, 0.7), &[1.0, 0.0, 0.0]).unwrap();
        let f = loglik_fw(&rec(1.0, 0.7), &[1.0, 0.0, 0.0, 1e-8]).unwrap();
        assert_abs_diff_eq!(f, g, epsilon = 1e-6);
        assert!(matches!(
            loglik_fw(&rec(1.0, -1.5), &[1.0, 0.0, 0.0, 1.0]),
            Err(Error::InfeasibleRecord { .. })
        ));
    }

    #[test]
    fn fgumbel_examples() {
        let w0 = [1.0, 0.0, 0.0, 0.0];
        for p in [-2.0, 0.0, 0.3, 4.0] {
            assert_eq!(
                loglik_fgumbel(&rec(1.0, p), &w0, 0.01).unwrap(),
                loglik_gumbel(&rec(1.0, p), &w0[..3]).unwrap()
            );
        }
        for (gamma, z) in [(1e-2, 1.0), (-1e-2, -1.0)] {
            let w = [1.0, 0.0, 0.0, gamma];
            let a = loglik_fgumbel(&rec(1.0, z), &w, 0.01).unwrap();
            let b = loglik_fw(&rec(1.0, z), &w).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-5);
        }
        assert!(loglik_fgumbel(&rec(1.0, 0.0), &[1.0, 0.0, 0.0, 0.02], 0.01).is_err());
    }

    #[test]
    fn safe_examples() {
        let w = [1.0, 0.0, 0.0, 1.0];
        let interior = rec(1.0, -0.5); // 1 + z = 0.5
        assert_eq!(loglik_fw_safe(&interior, &w, 1e-20), loglik_fw(&interior, &w).unwrap());
        let below = loglik_fw_safe(&rec(1.0, -1.5), &w, 1e-20);
        // -1e20 - 2 ln(1e-20)
        assert_relative_eq!(below, -1e20 - 2.0 * 1e-20f64.ln(), max_relative = 1e-14);
        assert!(below < -9.9e19);
        let saturated = loglik_fw_safe(&rec(1.0, -1.0 + 1e-30), &w, 1e-20);
        assert_eq!(saturated, below);
    }

    #[test]
    fn anll_examples() {
        let one = vec![rec(1.0, 0.0)];
        let w = [1.0, 0.0, 0.0];
        let th = Thresholds::default();
        assert_abs_diff_eq!(anll(Formulation::Gumbel, &w, &one, &th).unwrap(), 1.0, epsilon = 1e-15);
        let two = vec![rec(1.0, 0.0), rec(1.0, 0.0)];
        assert_eq!(
            anll(Formulation::Gumbel, &w, &two, &th).unwrap(),
            anll(Formulation::Gumbel, &w, &one, &th).unwrap()
        );
        assert_eq!(total_nll(Formulation::Gumbel, &w, &two, &th).unwrap(), 2.0);
        let bad = vec![rec(1.0, 0.0), CustomerRecord::new("x", 1.0, -3.0)];
        match anll(Formulation::Frechet, &[1.0, 0.0, 0.0, 1.0], &bad, &th) {
            Err(Error::InfeasibleRecord { id, .. }) => assert_eq!(id, "x"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parameter_maps_invert() {
        let p = CanonicalParams::new(0.05, 1.7, 3.9, 0.3);
        let w = canonical_to_mle(Formulation::Frechet, &p).unwrap();
        let q = mle_to_canonical(Formulation::Frechet, &w).unwrap();
        assert_abs_diff_eq!(q.theta0, p.theta0, epsilon = 1e-14);
        assert_abs_diff_eq!(q.scale_a, p.scale_a, epsilon = 1e-14);
        assert_abs_diff_eq!(q.loc_b, p.loc_b, epsilon = 1e-14);
        assert_eq!(q.gamma, p.gamma);
    }

    proptest! {
        #[test]
        fn loglik_matches_log_pdf(
            theta0 in 0.0f64..0.2, a in 0.2f64..3.0, b in -2.0f64..5.0,
            gamma in prop_oneof![Just(0.0), -0.5f64..-0.02, 0.02f64..0.8],
            e in 1.0f64..1e5, u in 0.02f64..0.98,
        ) {
            let p = CanonicalParams::new(theta0, a, b, gamma);
            let y = crate::evd::peak_qf(u, e, &p).unwrap();
            let r = rec(e, y);
            let (form, w) = if gamma == 0.0 {
                (Formulation::Gumbel, canonical_to_mle(Formulation::Gumbel, &p).unwrap())
            } else {
                (Formulation::Frechet, canonical_to_mle(Formulation::Frechet, &p).unwrap())
            };
            let l = loglik(form, &r, &w, &Thresholds::default()).unwrap();
            let lp = peak_log_pdf(y, e, &p).unwrap();
            prop_assert!((l - lp).abs() < 1e-10 * (1.0 + lp.abs()), "{} vs {}", l, lp);
        }

        #[test]
        fn anll_is_order_invariant(seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut recs: Vec<_> = (1..25).map(|i| rec(10.0 * i as f64, (i % 7) as f64 + 2.0)).collect();
            let w = [0.8, 0.01, 0.5, 0.2];
            let th = Thresholds::default();
            let a = anll(Formulation::Frechet, &w, &recs, &th).unwrap();
            recs.shuffle(&mut crate::seed::rng_from(seed));
            let b = anll(Formulation::Frechet, &w, &recs, &th).unwrap();
            prop_assert!((a - b).abs() < 1e-12 * a.abs());
        }
    }
}
