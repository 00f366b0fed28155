//! Formulation tags, thresholds and the moment-based starting point shared
//! by the quantile-regression and likelihood fits.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evd::{CanonicalParams, EPS_TH, GAMMA_TH};
use crate::optim::OptimConfig;
use crate::profiles::CustomerRecord;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Formulation {
    #[serde(rename = "c4")]
    C4,
    #[serde(rename = "gumbel")]
    Gumbel,
    #[serde(rename = "f-gumbel")]
    FuzzyGumbel,
    #[serde(rename = "frechet")]
    Frechet,
    #[serde(rename = "r-weibull")]
    ReverseWeibull,
}

impl Formulation {
    pub const ALL: [Formulation; 5] = [
        Formulation::C4,
        Formulation::Gumbel,
        Formulation::FuzzyGumbel,
        Formulation::Frechet,
        Formulation::ReverseWeibull,
    ];

    pub const PARAMETRIC: [Formulation; 4] = [
        Formulation::Gumbel,
        Formulation::FuzzyGumbel,
        Formulation::Frechet,
        Formulation::ReverseWeibull,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Formulation::C4 => "c4",
            Formulation::Gumbel => "gumbel",
            Formulation::FuzzyGumbel => "f-gumbel",
            Formulation::Frechet => "frechet",
            Formulation::ReverseWeibull => "r-weibull",
        }
    }

    /// Column heading used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            Formulation::C4 => "C4",
            Formulation::Gumbel => "Gumbel",
            Formulation::FuzzyGumbel => "f-Gumbel",
            Formulation::Frechet => "Frechet",
            Formulation::ReverseWeibull => "r-Weibull",
        }
    }

    pub fn has_gamma(self) -> bool {
        matches!(
            self,
            Formulation::FuzzyGumbel | Formulation::Frechet | Formulation::ReverseWeibull
        )
    }

    /// Dimension of the parametric vector; `None` for C4, whose size
    /// depends on the quantile grid.
    pub fn dim(self) -> Option<usize> {
        match self {
            Formulation::C4 => None,
            Formulation::Gumbel => Some(3),
            _ => Some(4),
        }
    }
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Formulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "c4" | "qvf" => Ok(Formulation::C4),
            "gumbel" => Ok(Formulation::Gumbel),
            "f-gumbel" | "fgumbel" | "fuzzy-gumbel" => Ok(Formulation::FuzzyGumbel),
            "frechet" | "fréchet" => Ok(Formulation::Frechet),
            "r-weibull" | "rweibull" | "reverse-weibull" => Ok(Formulation::ReverseWeibull),
            other => Err(Error::InvalidArgument(format!("unknown formulation '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub gamma_th: f64,
    pub eps_th: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            gamma_th: GAMMA_TH,
            eps_th: EPS_TH,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FitConfig {
    pub thresholds: Thresholds,
    pub optim: OptimConfig,
}

pub(crate) fn validate_records(records: &[CustomerRecord], needed: usize) -> Result<()> {
    if records.len() < needed {
        return Err(Error::TooFewRecords {
            needed,
            got: records.len(),
        });
    }
    for r in records {
        if !(r.energy > 0.0 && r.energy.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "record {}: energy must be positive, got {}",
                r.customer_id, r.energy
            )));
        }
        if !r.peak.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "record {}: peak is not finite",
                r.customer_id
            )));
        }
    }
    Ok(())
}

/// Moment-based Gumbel starting point.
///
/// Least squares of peak on `(E, √E)` gives θ₀; the residuals divided by
/// `√E` are treated as Gumbel(B, A) draws, so `A = sd·√6/π` and
/// `B = mean − 0.5772·A`.
pub fn moment_start(records: &[CustomerRecord]) -> CanonicalParams {
    let (mut see, mut ses, mut ss, mut spe, mut sps) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for r in records {
        let s = r.energy.sqrt();
        see += r.energy * r.energy;
        ses += r.energy * s;
        ss += r.energy;
        spe += r.peak * r.energy;
        sps += r.peak * s;
    }
    let det = see * ss - ses * ses;
    let mut theta0 = if det > 1e-10 * see * ss {
        (spe * ss - sps * ses) / det
    } else {
        0.0
    };
    if !theta0.is_finite() || theta0 < 0.0 {
        theta0 = 0.0;
    }
    let n = records.len().max(1) as f64;
    let resid: Vec<f64> = records
        .iter()
        .map(|r| (r.peak - theta0 * r.energy) / r.energy.sqrt())
        .collect();
    let mean = resid.iter().sum::<f64>() / n;
    let var = resid.iter().map(|u| (u - mean).powi(2)).sum::<f64>() / n;
    let mut scale = var.sqrt() * 6f64.sqrt() / std::f64::consts::PI;
    if !(scale > 0.0) {
        scale = 1e-3 * mean.abs().max(1.0);
    }
    CanonicalParams::gumbel(theta0, scale, mean - EULER_GAMMA * scale)
}
