//! Conditional demographic parity fitting and the TOST equivalence
//! verdict.
//!
//! TOST inverts the burden of proof: the null hypothesis is that the
//! disparity is at least as large as the pre-registered tolerance, so a
//! Pass is affirmative evidence of compliance. The verdict is three-way:
//! Pass when the (1−2α) confidence interval sits inside the tolerance
//! band, Fail when it sits entirely outside, Insufficient Information
//! when it straddles the boundary.

use serde::{Deserialize, Serialize};

use crate::dataio::{AuditDataset, ModelScale};
use crate::error::{AuditError, Result};
use crate::normal;
use crate::regression::{fit_ols, sandwich_cov, DesignMatrix, HcKind, RegressionFit};

/// Pre-registered tolerance margins.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ToleranceBands {
    /// Level-gap margin δ, in currency units.
    pub delta: f64,
    /// Ratio margin τ in (0,1); log band is (log τ, −log τ).
    pub tau: f64,
    pub alpha: f64,
    /// Reference mean premium P̄ for the implied dollar gap.
    pub mean_premium: f64,
}

impl ToleranceBands {
    pub fn new(delta: f64, tau: f64, alpha: f64, mean_premium: f64) -> Result<Self> {
        if delta <= 0.0 {
            return Err(AuditError::InvalidRange {
                field: "delta".into(),
                detail: format!("must be > 0, got {delta}"),
            });
        }
        if !(0.0 < tau && tau < 1.0) {
            return Err(AuditError::InvalidRange {
                field: "tau".into(),
                detail: format!("must be in (0,1), got {tau}"),
            });
        }
        if !(0.0 < alpha && alpha < 0.5) {
            return Err(AuditError::InvalidRange {
                field: "alpha".into(),
                detail: format!("must be in (0,0.5), got {alpha}"),
            });
        }
        if mean_premium <= 0.0 {
            return Err(AuditError::InvalidRange {
                field: "mean_premium".into(),
                detail: format!("must be > 0, got {mean_premium}"),
            });
        }
        Ok(Self {
            delta,
            tau,
            alpha,
            mean_premium,
        })
    }

    /// Symmetric band (log τ, −log τ) on the log-ratio scale.
    pub fn log_band(&self) -> (f64, f64) {
        (self.tau.ln(), -self.tau.ln())
    }
}

/// Three-outcome audit verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Fail,
    InsufficientInformation,
}

/// A fitted per-group CDP regression, ready for the TOST verdict.
#[derive(Debug, Clone)]
pub struct CdpFit {
    pub scale: ModelScale,
    pub n_obs: usize,
    /// Conditional gap β̂_A (log or level scale).
    pub beta_a: f64,
    /// HC3 standard error of β̂_A.
    pub se: f64,
    pub mu0: f64,
    /// Coefficient on the first control, when present.
    pub gamma: Option<f64>,
    /// Coefficient on the second control, when present.
    pub psi: Option<f64>,
    pub r_squared: f64,
    pub fit: RegressionFit,
    pub design: DesignMatrix,
}

/// Verdict plus the quantities behind it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CdpResult {
    pub beta_a: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// e^{β̂_A}; log specification only.
    pub ratio: Option<f64>,
    /// P̄(e^{β̂_A}−1) for the log spec, β̂_A itself for the level spec.
    pub dollar_gap: f64,
    pub dollar_ci_low: f64,
    pub dollar_ci_high: f64,
    pub verdict: Verdict,
    pub mu0: f64,
    pub gamma: Option<f64>,
    pub psi: Option<f64>,
    pub n_obs: usize,
    pub r_squared: f64,
}

/// Fit the CDP audit regression for one group.
///
/// Design is [intercept, protected, controls...]; the response is
/// transformed per `scale`. The standard error is always HC3 — the
/// response is a deterministic algorithm output, so the classical
/// formula is invalid.
pub fn fit_cdp(
    data: &AuditDataset,
    group: Option<&str>,
    scale: ModelScale,
    controls: &[&str],
) -> Result<CdpFit> {
    let subset;
    let rows = match group {
        Some(g) => {
            subset = data.filter_group(g)?;
            &subset
        }
        None => data,
    };
    let p = 2 + controls.len();
    if rows.n_rows() < p + 2 {
        return Err(AuditError::InsufficientObservations {
            group: group.unwrap_or("<all>").to_string(),
            needed: p + 2,
            got: rows.n_rows(),
        });
    }
    let protected = rows.protected_name().to_string();
    let mut model_cols: Vec<&str> = vec![&protected];
    model_cols.extend(controls);

    let design = rows.design(&model_cols, true)?;
    let f = rows.response_vector(scale)?;
    let fit = fit_ols(&design, &f)?;
    let se = sandwich_cov(&fit, &design, HcKind::HC3)?.standard_error(1)?;

    Ok(CdpFit {
        scale,
        n_obs: rows.n_rows(),
        beta_a: fit.beta_hat[1],
        se,
        mu0: fit.beta_hat[0],
        gamma: (design.n_cols() > 2).then(|| fit.beta_hat[2]),
        psi: (design.n_cols() > 3).then(|| fit.beta_hat[3]),
        r_squared: fit.r_squared,
        fit,
        design,
    })
}

/// Implied dollar gap at mean premium: P̄(e^{β_A} − 1).
pub fn implied_dollar_gap(beta_a: f64, mean_premium: f64) -> f64 {
    mean_premium * (beta_a.exp() - 1.0)
}

fn inside(lo: f64, hi: f64, band: (f64, f64)) -> bool {
    lo > band.0 && hi < band.1
}

fn disjoint(lo: f64, hi: f64, band: (f64, f64)) -> bool {
    lo >= band.1 || hi <= band.0
}

/// Render the three-outcome TOST verdict for a fitted CDP regression.
///
/// Log spec: Pass requires the log-scale CI inside (log τ, −log τ) and
/// the implied dollar-gap CI inside (−δ, δ); Fail triggers when either
/// CI is disjoint from its band; anything else is Insufficient
/// Information. Level spec: the gap is already in currency, only the δ
/// condition applies.
pub fn tost_verdict(cdp: &CdpFit, bands: &ToleranceBands) -> Result<CdpResult> {
    let z = normal::upper_quantile(bands.alpha);
    let ci_low = cdp.beta_a - z * cdp.se;
    let ci_high = cdp.beta_a + z * cdp.se;
    let delta_band = (-bands.delta, bands.delta);

    let (ratio, dollar_gap, dollar_ci, verdict) = match cdp.scale {
        ModelScale::Log => {
            let ratio = cdp.beta_a.exp();
            let dollar_gap = implied_dollar_gap(cdp.beta_a, bands.mean_premium);
            let d_lo = implied_dollar_gap(ci_low, bands.mean_premium);
            let d_hi = implied_dollar_gap(ci_high, bands.mean_premium);
            let log_band = bands.log_band();
            let pass = inside(ci_low, ci_high, log_band) && inside(d_lo, d_hi, delta_band);
            let fail =
                disjoint(ci_low, ci_high, log_band) || disjoint(d_lo, d_hi, delta_band);
            let verdict = if pass {
                Verdict::Pass
            } else if fail {
                Verdict::Fail
            } else {
                Verdict::InsufficientInformation
            };
            (Some(ratio), dollar_gap, (d_lo, d_hi), verdict)
        }
        ModelScale::Level => {
            let pass = inside(ci_low, ci_high, delta_band);
            let fail = disjoint(ci_low, ci_high, delta_band);
            let verdict = if pass {
                Verdict::Pass
            } else if fail {
                Verdict::Fail
            } else {
                Verdict::InsufficientInformation
            };
            (None, cdp.beta_a, (ci_low, ci_high), verdict)
        }
    };

    Ok(CdpResult {
        beta_a: cdp.beta_a,
        se: cdp.se,
        ci_low,
        ci_high,
        ratio,
        dollar_gap,
        dollar_ci_low: dollar_ci.0,
        dollar_ci_high: dollar_ci.1,
        verdict,
        mu0: cdp.mu0,
        gamma: cdp.gamma,
        psi: cdp.psi,
        n_obs: cdp.n_obs,
        r_squared: cdp.r_squared,
    })
}
