//! Shared inputs for the benchmarks.

use peakload_core::experiments::{log_uniform_energies, synth_records};
use peakload_core::{BaseDistribution, CustomerRecord, SynthConfig, SynthMode};

/// `n` Pareto(2)-based records with the usual synthetic settings.
pub fn pareto_records(n: usize, seed: u64) -> Vec<CustomerRecord> {
    synth_records(&SynthConfig {
        theta0: 0.05,
        theta1: 1.0,
        k: 50,
        base: BaseDistribution::Pareto { shape: 2.0 },
        energies: log_uniform_energies(n, 1e2, 1e6, seed).expect("valid range"),
        seed,
        mode: SynthMode::Records,
    })
    .expect("valid config")
}
