//! Power and sample-size planning from pilot quantities.
//!
//! The audit estimators' variances all scale as 1/n, so a pilot estimate
//! `σ²_Δ` at size `n₀` extrapolates to `σ²_Δ(n) = n₀σ²_Δ/n`. Power uses
//! the one-sided normal approximation; its interaction with the
//! two-sided TOST pair is approximate by construction.

use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};
use crate::normal;

/// Pilot quantities driving a power computation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PilotSummary {
    /// Pilot sample size behind `sigma2_delta`.
    pub n0: u64,
    /// Pilot variance of the estimator Δ̂.
    pub sigma2_delta: f64,
    /// Assumed true effect Δ*.
    pub delta_star: f64,
    /// TOST threshold d relevant to the test (0 for the PD shift).
    pub d: f64,
    pub alpha: f64,
    /// Target power 1−β.
    pub target_power: f64,
}

impl PilotSummary {
    pub fn new(
        n0: u64,
        sigma2_delta: f64,
        delta_star: f64,
        d: f64,
        alpha: f64,
        target_power: f64,
    ) -> Result<Self> {
        if n0 == 0 {
            return Err(AuditError::InvalidRange {
                field: "n0".into(),
                detail: "pilot size must be >= 1".into(),
            });
        }
        if sigma2_delta <= 0.0 {
            return Err(AuditError::InvalidRange {
                field: "sigma2_delta".into(),
                detail: format!("must be > 0, got {sigma2_delta}"),
            });
        }
        if !(0.0 < alpha && alpha < 1.0) {
            return Err(AuditError::InvalidRange {
                field: "alpha".into(),
                detail: format!("must be in (0,1), got {alpha}"),
            });
        }
        if !(0.0 < target_power && target_power < 1.0) {
            return Err(AuditError::InvalidRange {
                field: "target_power".into(),
                detail: format!("must be in (0,1), got {target_power}"),
            });
        }
        Ok(Self {
            n0,
            sigma2_delta,
            delta_star,
            d,
            alpha,
            target_power,
        })
    }

    pub fn effect(&self) -> f64 {
        (self.delta_star - self.d).abs()
    }
}

/// π(n) = 1 − Φ(z_{1−α} − |Δ*−d| / σ_Δ(n)) with σ²_Δ(n) = n₀σ²_Δ/n.
pub fn power_at(pilot: &PilotSummary, n: u64) -> f64 {
    assert!(n >= 1, "sample size must be >= 1");
    let sigma = (pilot.n0 as f64 * pilot.sigma2_delta / n as f64).sqrt();
    1.0 - normal::cdf(normal::upper_quantile(pilot.alpha) - pilot.effect() / sigma)
}

/// The exact (real-valued) sample-size bound, before the ceiling.
pub(crate) fn required_n_raw(pilot: &PilotSummary) -> Result<f64> {
    let effect = pilot.effect();
    if effect == 0.0 {
        return Err(AuditError::EffectAtThreshold);
    }
    let za = normal::upper_quantile(pilot.alpha);
    let zb = normal::upper_quantile(1.0 - pilot.target_power);
    let s = za + zb;
    Ok(pilot.n0 as f64 * pilot.sigma2_delta * s * s / (effect * effect))
}

/// Smallest integer n with power ≥ the target:
/// `n ≥ n₀σ²_Δ(z_{1−α} + z_{1−β})² / |Δ*−d|²`.
pub fn required_n(pilot: &PilotSummary) -> Result<u64> {
    Ok(required_n_raw(pilot)?.ceil().max(1.0) as u64)
}

/// Planning target across several tests: each test's requirement is
/// computed separately and the largest wins. For CDP this is the δ-test
/// and the log-τ test.
pub fn required_n_planning(pilots: &[PilotSummary]) -> Result<u64> {
    if pilots.is_empty() {
        return Err(AuditError::InvalidRange {
            field: "pilots".into(),
            detail: "at least one test required".into(),
        });
    }
    let mut best = 0;
    for p in pilots {
        best = best.max(required_n(p)?);
    }
    Ok(best)
}
