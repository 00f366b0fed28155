//! Customer-level extreme value distribution of the peak load.
//!
//! A customer with energy consumption `E` has peak load `Y` whose CDF is
//! `G_γ(z)` with the affine transform
//!
//! ```text
//! z(y) = (y - θ₀·E - B·√E) / (A·√E)
//! ```
//!
//! where `A = θ₁a_K` and `B = θ₁b_K`. Every τ-quantile therefore has the
//! Velander shape `θ₀·E + β_τ·√E`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, SupportSide};

/// Default half-width of the fuzzy-Gumbel band for γ.
pub const GAMMA_TH: f64 = 1e-2;

/// Default clamp floor for `1 + γz` inside likelihood optimization.
pub const EPS_TH: f64 = 1e-20;

/// Below this magnitude the exact branches treat γ as zero.
pub const GAMMA_ZERO: f64 = 1e-12;

/// The four-parameter representation shared by every formulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalParams {
    /// Linear energy coefficient, the `α` of the Velander formula.
    pub theta0: f64,
    /// `θ₁a_K`.
    pub scale_a: f64,
    /// `θ₁b_K`.
    pub loc_b: f64,
    /// Extreme value index.
    pub gamma: f64,
}

impl CanonicalParams {
    pub fn new(theta0: f64, scale_a: f64, loc_b: f64, gamma: f64) -> Self {
        Self {
            theta0,
            scale_a,
            loc_b,
            gamma,
        }
    }

    pub fn gumbel(theta0: f64, scale_a: f64, loc_b: f64) -> Self {
        Self::new(theta0, scale_a, loc_b, 0.0)
    }

    fn is_gumbel(&self) -> bool {
        self.gamma.abs() < GAMMA_ZERO
    }
}

/// Open interval of peak values with `1 + γ·z(y) > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportSet {
    pub lower: f64,
    pub upper: f64,
}

impl SupportSet {
    pub fn new(energy: f64, params: &CanonicalParams) -> Result<Self> {
        check_energy(energy)?;
        check_scale(params.scale_a)?;
        if params.is_gumbel() {
            return Ok(Self {
                lower: f64::NEG_INFINITY,
                upper: f64::INFINITY,
            });
        }
        let sqrt_e = energy.sqrt();
        let endpoint = params.theta0 * energy + params.loc_b * sqrt_e
            - params.scale_a * sqrt_e / params.gamma;
        Ok(if params.gamma > 0.0 {
            Self {
                lower: endpoint,
                upper: f64::INFINITY,
            }
        } else {
            Self {
                lower: f64::NEG_INFINITY,
                upper: endpoint,
            }
        })
    }

    pub fn contains(&self, y: f64) -> bool {
        y > self.lower && y < self.upper
    }
}

fn check_energy(energy: f64) -> Result<()> {
    if energy > 0.0 && energy.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveEnergy(energy))
    }
}

fn check_scale(scale_a: f64) -> Result<()> {
    if scale_a > 0.0 && scale_a.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "scale A must be positive and finite, got {scale_a}"
        )))
    }
}

pub(crate) fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidProbability(tau))
    }
}

/// `G_γ(x) = exp(-(1+γx)^(-1/γ))`, with the Gumbel limit at γ = 0.
pub fn standard_gev_cdf(x: f64, gamma: f64) -> Result<f64> {
    if gamma == 0.0 {
        return Ok((-(-x).exp()).exp());
    }
    let t = 1.0 + gamma * x;
    if t <= 0.0 {
        let side = if gamma > 0.0 {
            SupportSide::Below
        } else {
            SupportSide::Above
        };
        return Err(Error::OutsideSupport { x, side });
    }
    Ok((-(-(gamma * x).ln_1p() / gamma).exp()).exp())
}

/// Standardized peak `z = y/(A√E) - θ₀√E/A - B/A`.
pub fn z_transform(y: f64, energy: f64, params: &CanonicalParams) -> Result<f64> {
    check_energy(energy)?;
    check_scale(params.scale_a)?;
    let sqrt_e = energy.sqrt();
    Ok((y - params.theta0 * energy - params.loc_b * sqrt_e) / (params.scale_a * sqrt_e))
}

/// CDF of the peak load. Returns 0 below and 1 above a bounded support.
pub fn peak_cdf(y: f64, energy: f64, params: &CanonicalParams) -> Result<f64> {
    let z = z_transform(y, energy, params)?;
    if params.is_gumbel() {
        return Ok((-(-z).exp()).exp());
    }
    let gz = params.gamma * z;
    if gz <= -1.0 {
        return Ok(if params.gamma > 0.0 { 0.0 } else { 1.0 });
    }
    Ok((-(-gz.ln_1p() / params.gamma).exp()).exp())
}

/// Natural log of the peak density; `-inf` outside the support.
pub fn peak_log_pdf(y: f64, energy: f64, params: &CanonicalParams) -> Result<f64> {
    let z = z_transform(y, energy, params)?;
    let log_jac = -(params.scale_a.ln() + 0.5 * energy.ln());
    if params.is_gumbel() {
        return Ok(log_jac - z - (-z).exp());
    }
    let gz = params.gamma * z;
    if gz <= -1.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let log_t = gz.ln_1p();
    Ok(log_jac - (1.0 + 1.0 / params.gamma) * log_t - (-log_t / params.gamma).exp())
}

/// Density of the peak load in 1/kW; zero outside the support.
pub fn peak_pdf(y: f64, energy: f64, params: &CanonicalParams) -> Result<f64> {
    Ok(peak_log_pdf(y, energy, params)?.exp())
}

/// `(-ln τ)^(-γ) - 1) / γ`, or `-ln(-ln τ)` at γ = 0.
fn gev_quantile_kernel(tau: f64, gamma: f64) -> f64 {
    let log_log = (-tau.ln()).ln();
    if gamma.abs() < GAMMA_ZERO {
        -log_log
    } else {
        (-gamma * log_log).exp_m1() / gamma
    }
}

/// Quantile function of the peak load.
pub fn peak_qf(tau: f64, energy: f64, params: &CanonicalParams) -> Result<f64> {
    check_tau(tau)?;
    check_energy(energy)?;
    let beta = beta_tau(tau, params)?;
    Ok(params.theta0 * energy + beta * energy.sqrt())
}

/// Coefficient of `√E` in the τ-quantile.
pub fn beta_tau(tau: f64, params: &CanonicalParams) -> Result<f64> {
    check_tau(tau)?;
    Ok(params.scale_a * gev_quantile_kernel(tau, params.gamma) + params.loc_b)
}

/// Degree-3 Taylor polynomial in γ of the quantile kernel, used for the
/// fuzzy-Gumbel band `|γ| ≤ γ_th`.
pub fn fgumbel_kernel_taylor(tau: f64, gamma: f64) -> f64 {
    let l = (-tau.ln()).ln();
    let l2 = l * l;
    -l + gamma * l2 / 2.0 - gamma * gamma * l2 * l / 6.0 + gamma.powi(3) * l2 * l2 / 24.0
}

/// Fuzzy-Gumbel quantile function.
pub fn fgumbel_qf_taylor(
    tau: f64,
    energy: f64,
    params: &CanonicalParams,
    gamma_th: f64,
) -> Result<f64> {
    check_tau(tau)?;
    check_energy(energy)?;
    if params.gamma.abs() > gamma_th {
        return Err(Error::GammaOutOfRange {
            gamma: params.gamma,
            gamma_th,
        });
    }
    let beta = params.scale_a * fgumbel_kernel_taylor(tau, params.gamma) + params.loc_b;
    Ok(params.theta0 * energy + beta * energy.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::E as EULER_E;

    fn unit() -> CanonicalParams {
        CanonicalParams::new(0.0, 1.0, 0.0, 0.0)
    }

    #[test]
    fn standard_cdf_values() {
        assert_abs_diff_eq!(standard_gev_cdf(0.0, 0.0).unwrap(), (-1.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(standard_gev_cdf(0.0, 1.0).unwrap(), (-1.0f64).exp(), epsilon = 1e-15);
        // exp(-exp(-1)) computed with mpmath at 30 digits
        assert_abs_diff_eq!(
            standard_gev_cdf(1.0, 0.0).unwrap(),
            0.692200627555346353865421997183,
            epsilon = 1e-15
        );
    }

    #[test]
    fn standard_cdf_outside_support() {
        match standard_gev_cdf(-2.0, 1.0) {
            Err(Error::OutsideSupport { side, .. }) => assert_eq!(side, SupportSide::Below),
            other => panic!("unexpected {other:?}"),
        }
        match standard_gev_cdf(2.0, -1.0) {
            Err(Error::OutsideSupport { side, .. }) => assert_eq!(side, SupportSide::Above),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn z_transform_examples() {
        let p = CanonicalParams::new(0.7, 1.3, -0.4, 0.2);
        let e = 37.0;
        let y = p.theta0 * e + p.loc_b * e.sqrt();
        assert_abs_diff_eq!(z_transform(y, e, &p).unwrap(), 0.0, epsilon = 1e-12);
        assert_eq!(z_transform(2.0, 1.0, &unit()).unwrap(), 2.0);
        let p = CanonicalParams::new(2.0, 3.0, 4.0, 0.0);
        assert_abs_diff_eq!(z_transform(16.0, 4.0, &p).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn z_transform_rejects_degenerate() {
        assert!(matches!(
            z_transform(1.0, 0.0, &unit()),
            Err(Error::NonPositiveEnergy(_))
        ));
        let p = CanonicalParams::new(0.0, 0.0, 0.0, 0.0);
        assert!(z_transform(1.0, 1.0, &p).is_err());
    }

    #[test]
    fn qf_pdf_examples() {
        let tau = (-1.0f64).exp();
        assert_abs_diff_eq!(peak_qf(tau, 1.0, &unit()).unwrap(), 0.0, epsilon = 1e-15);
        let p = CanonicalParams::new(0.0, 1.0, 0.0, 1.0);
        assert_abs_diff_eq!(peak_qf(tau, 1.0, &p).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(peak_pdf(0.0, 1.0, &unit()).unwrap(), 1.0 / EULER_E, epsilon = 1e-15);
        let p = CanonicalParams::new(2.0, 3.0, 4.0, 0.0);
        assert_abs_diff_eq!(peak_qf(tau, 4.0, &p).unwrap(), 16.0, epsilon = 1e-12);
    }

    #[test]
    fn qf_rejects_bad_tau() {
        for tau in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(
                peak_qf(tau, 1.0, &unit()),
                Err(Error::InvalidProbability(_))
            ));
        }
        assert!(peak_qf(0.5, -1.0, &unit()).is_err());
    }

    #[test]
    fn beta_examples() {
        let tau = (-1.0f64).exp();
        assert_abs_diff_eq!(beta_tau(tau, &unit()).unwrap(), 0.0, epsilon = 1e-15);
        let p = CanonicalParams::new(0.0, 1.0, 5.0, 1.0);
        assert_abs_diff_eq!(beta_tau(tau, &p).unwrap(), 5.0, epsilon = 1e-15);
        // -ln(-ln 0.5) from mpmath
        assert_abs_diff_eq!(
            beta_tau(0.5, &unit()).unwrap(),
            0.366512920581664327012439158233,
            epsilon = 1e-15
        );
    }

    #[test]
    fn pdf_and_cdf_outside_support() {
        let p = CanonicalParams::new(0.0, 1.0, 0.0, 0.5);
        // support is z > -2
        assert_eq!(peak_pdf(-3.0, 1.0, &p).unwrap(), 0.0);
        assert_eq!(peak_cdf(-3.0, 1.0, &p).unwrap(), 0.0);
        let p = CanonicalParams::new(0.0, 1.0, 0.0, -0.5);
        // support is z < 2
        assert_eq!(peak_pdf(3.0, 1.0, &p).unwrap(), 0.0);
        assert_eq!(peak_cdf(3.0, 1.0, &p).unwrap(), 1.0);
    }

    #[test]
    fn support_set_shape() {
        let gumbel = SupportSet::new(4.0, &unit()).unwrap();
        assert!(gumbel.contains(-1e300) && gumbel.contains(1e300));
        let p = CanonicalParams::new(1.0, 2.0, 3.0, 0.5);
        let s = SupportSet::new(4.0, &p).unwrap();
        // endpoint: 4 + 6 - 2*2/0.5 = 2
        assert_abs_diff_eq!(s.lower, 2.0, epsilon = 1e-12);
        assert!(s.upper.is_infinite());
        assert!(!s.contains(2.0) && s.contains(2.0 + 1e-9));
        let p = CanonicalParams::new(1.0, 2.0, 3.0, -0.5);
        let s = SupportSet::new(4.0, &p).unwrap();
        assert_abs_diff_eq!(s.upper, 18.0, epsilon = 1e-12);
    }

    #[test]
    fn fgumbel_matches_gumbel_at_zero() {
        let p = CanonicalParams::new(0.3, 1.7, -2.0, 0.0);
        for &tau in &[0.01, 0.2, 0.5, 0.93] {
            for &e in &[0.5, 10.0, 1e5] {
                let a = fgumbel_qf_taylor(tau, e, &p, GAMMA_TH).unwrap();
                let b = peak_qf(tau, e, &p).unwrap();
                assert_abs_diff_eq!(a, b, epsilon = 1e-12 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn fgumbel_close_to_exact() {
        // exact values of ((-ln τ)^(-γ) - 1)/γ at 40 digits (mpmath)
        let p = CanonicalParams::new(0.0, 1.0, 0.0, 1e-2);
        let exact = 0.367185400510714006439372949675;
        assert_abs_diff_eq!(fgumbel_qf_taylor(0.5, 1.0, &p, GAMMA_TH).unwrap(), exact, epsilon = 1e-6);
        let p = CanonicalParams::new(0.0, 1.0, 0.0, -1e-2);
        let exact = 2.22523543474092598041541008563;
        assert_abs_diff_eq!(fgumbel_qf_taylor(0.9, 1.0, &p, GAMMA_TH).unwrap(), exact, epsilon = 1e-6);
    }

    #[test]
    fn fgumbel_rejects_large_gamma() {
        let p = CanonicalParams::new(0.0, 1.0, 0.0, 0.02);
        assert!(matches!(
            fgumbel_qf_taylor(0.5, 1.0, &p, GAMMA_TH),
            Err(Error::GammaOutOfRange { .. })
        ));
    }
}
