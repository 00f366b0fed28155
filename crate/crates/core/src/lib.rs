//! Extreme-value models of customer peak load as a function of annual
//! energy consumption, fitted by multiple quantile regression or maximum
//! likelihood.

pub mod error;
pub mod evd;
pub mod experiments;
pub mod inference;
pub mod mle;
pub mod model;
pub mod mqr;
pub mod optim;
pub mod profiles;
pub mod seed;

pub use error::{Error, Result};
pub use evd::{CanonicalParams, EPS_TH, GAMMA_TH};
pub use experiments::{BaseDistribution, CvOptions, CvReport, FittedModel, Method, SynthConfig, SynthMode};
pub use inference::{FisherResult, LrtOutcome, LrtResult};
pub use mle::MleFit;
pub use model::{FitConfig, Formulation, Thresholds};
pub use mqr::{MqrFit, QuantileGrid};
pub use optim::{OptimConfig, OptimResult};
pub use profiles::{CustomerRecord, FilterReport, LoadProfile};
