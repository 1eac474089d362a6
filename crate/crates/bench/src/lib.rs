//! Shared fixtures for the estimator benchmarks.

use fairaudit_core::synthlab::{build_population, PopulationSpec, PricingFunctionSpec};
use fairaudit_core::AuditDataset;

/// The deterministic territorial population the benchmarks resample.
pub fn bench_population(size: usize) -> AuditDataset {
    build_population(
        &PopulationSpec::new(size, 8, 0.8, 1215),
        &PricingFunctionSpec::exp_territorial(8),
    )
    .expect("benchmark population builds")
}
