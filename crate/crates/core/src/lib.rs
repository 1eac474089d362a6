//! Statistically valid regression-based fairness audits of deterministic
//! pricing algorithms.
//!
//! Deterministic pricing output breaks the classical audit toolkit: the
//! same profile always returns the same price, so regression residuals
//! are approximation error rather than sampling noise, the classical
//! `σ̂²(XᵀX)⁻¹` covariance is structurally invalid, and treating the two
//! regressions of a proxy-discrimination test as independent badly
//! overstates the variance of the coefficient shift. This crate provides
//! the corrected estimators and the audit protocol built on them:
//!
//! - [`regression`]: OLS with HC0-HC3 sandwich covariances and the
//!   sandwich/classical `ρ` diagnostic.
//! - [`glm`]: IRLS fitting with the naive GLM covariance and the score
//!   sandwich for deterministic responses.
//! - [`shift`]: the proxy-discrimination coefficient-shift test with the
//!   full cross-covariance variance.
//! - [`tost`]: conditional-demographic-parity regressions and the
//!   three-outcome TOST equivalence verdict.
//! - [`power`]: pilot-based power and sample-size planning.
//! - [`protocol`]: the pre-registered pipeline producing digested,
//!   reproducible reports.
//! - [`synthlab`]: synthetic pricing populations and Monte Carlo oracles
//!   that validate every estimator by brute force.
//! - [`dataio`]: strict CSV ingestion and summary statistics.

pub mod dataio;
pub mod error;
pub mod glm;
pub mod normal;
pub mod power;
pub mod protocol;
pub mod regression;
pub mod shift;
pub mod streams;
pub mod synthlab;
pub mod tost;

pub use dataio::{load_csv, load_csv_bytes, summarize, AuditDataset, BindingSpec, ModelScale};
pub use error::{AuditError, Result};
pub use glm::{fit_glm, glm_naive_cov, glm_score_sandwich, GlmFamily, GlmFit, GlmSpec};
pub use power::{power_at, required_n, required_n_planning, PilotSummary};
pub use protocol::{
    lock_config, run_audit, AuditConfig, AuditReport, Criterion, GroupOutcome, GroupReport,
};
pub use regression::{
    classical_cov, fit_ols, sandwich_cov, se_ratio, CovKind, CovarianceEstimate, DesignMatrix,
    HcKind, RegressionFit, ResponseVector,
};
pub use shift::{
    pd_test, shift_variance_full, shift_variance_independent, ShiftTestResult,
};
pub use synthlab::{
    build_population, build_poisson_population, coverage_experiment, default_grid,
    mc_variance_oracle, OracleStatistic, OracleSummary, PopulationSpec, PricingFunctionSpec,
    PricingKind,
};
pub use tost::{fit_cdp, implied_dollar_gap, tost_verdict, CdpResult, ToleranceBands, Verdict};
