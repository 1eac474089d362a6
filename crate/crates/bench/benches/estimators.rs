//! Hot-path benchmarks: the per-replicate cost of the Monte Carlo
//! oracles is one OLS or GLM fit plus a covariance assembly, so these
//! four paths bound the wall-clock of every experiment in the toolkit.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use fairaudit_bench::bench_population;
use fairaudit_core::dataio::ModelScale;
use fairaudit_core::glm::{fit_glm, GlmFamily, GlmSpec};
use fairaudit_core::regression::{fit_ols, sandwich_cov, HcKind};
use fairaudit_core::shift::shift_variance_full;
use fairaudit_core::synthlab::{mc_variance_oracle, OracleStatistic};

fn bench_fit_and_hc3(c: &mut Criterion) {
    let pop = bench_population(2000);
    let x = pop.design(&["minority", "risk", "x1"], true).unwrap();
    let f = pop.response_vector(ModelScale::Level).unwrap();
    c.bench_function("ols_fit_n2000_p4", |b| {
        b.iter(|| fit_ols(black_box(&x), black_box(&f)).unwrap())
    });
    let fit = fit_ols(&x, &f).unwrap();
    c.bench_function("hc3_sandwich_n2000_p4", |b| {
        b.iter(|| sandwich_cov(black_box(&fit), black_box(&x), HcKind::HC3).unwrap())
    });
}

fn bench_shift_variance(c: &mut Criterion) {
    let pop = bench_population(2000);
    let x = pop.design(&["risk", "x1"], true).unwrap();
    let x_ext = pop.design(&["risk", "x1", "minority"], true).unwrap();
    let f = pop.response_vector(ModelScale::Level).unwrap();
    c.bench_function("shift_variance_full_n2000", |b| {
        b.iter(|| shift_variance_full(black_box(&x), black_box(&x_ext), &f, 1, 1).unwrap())
    });
}

fn bench_glm_fit(c: &mut Criterion) {
    let pop = bench_population(2000);
    let x = pop.design(&["minority", "x1"], true).unwrap();
    let f = pop.response_vector(ModelScale::Level).unwrap();
    let spec = GlmSpec::new(GlmFamily::GaussianLog);
    c.bench_function("glm_gaussian_log_n2000", |b| {
        b.iter(|| fit_glm(black_box(&x), black_box(&f), &spec).unwrap())
    });
}

fn bench_oracle(c: &mut Criterion) {
    let pop = bench_population(20_000);
    let stat = OracleStatistic::AuditBetaA {
        controls: vec!["risk".into(), "x1".into()],
        scale: ModelScale::Level,
    };
    c.bench_function("mc_oracle_200reps_n1000", |b| {
        b.iter(|| mc_variance_oracle(black_box(&pop), 1000, 200, 5, &stat).unwrap())
    });
}

criterion_group!(
    benches,
    bench_fit_and_hc3,
    bench_shift_variance,
    bench_glm_fit,
    bench_oracle
);
criterion_main!(benches);
