//! The proxy-discrimination coefficient-shift test.
//!
//! A candidate proxy's coefficient is compared between a restricted model
//! (protected attribute omitted) and an extended model (protected
//! attribute added). Both models are fitted to the same deterministic
//! response vector, so the two estimates are correlated; the practice of
//! summing their variances as if independent overstates the variance of
//! the shift, typically by an order of magnitude. The full formula keeps
//! the cross term.
//!
//! All component moments are score-based: with `aᵀ = e_jᵀ(XᵀX)⁻¹Xᵀ` and
//! `ãᵀ = e_kᵀ(X̃ᵀX̃)⁻¹X̃ᵀ`, the shift is `(a − ã)ᵀF` and its estimated
//! variance assembles `Σ(aᵢr̂ᵢ)² + Σ(ãᵢr̃ᵢ)² − 2Σ aᵢr̂ᵢãᵢr̃ᵢ` from the two
//! fits' residuals.

use serde::{Deserialize, Serialize};

use crate::dataio::{AuditDataset, ModelScale};
use crate::error::{AuditError, Result};
use crate::normal;
use crate::regression::{fit_ols, DesignMatrix, ResponseVector};

/// Outcome of one proxy-discrimination shift test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShiftTestResult {
    /// Proxy coefficient in the restricted model.
    pub phi: f64,
    /// Proxy coefficient in the extended model.
    pub phi_prime: f64,
    /// Coefficient on the protected attribute in the extended model.
    pub kappa: f64,
    /// φ − φ′.
    pub delta_pd: f64,
    /// |δ/φ|; `None` when φ = 0 leaves it undefined.
    pub relative_shift: Option<f64>,
    pub se_independent: f64,
    pub se_full: f64,
    pub z_independent: f64,
    pub z_full: f64,
    /// Two-part decision: |z_full| above the quantile AND relative shift
    /// above `rho_min`.
    pub flagged: bool,
    pub alpha: f64,
    pub rho_min: f64,
    pub diagnostic: Option<String>,
}

struct ShiftComponents {
    phi: f64,
    phi_prime: f64,
    var_restricted: f64,
    var_extended: f64,
    cross: f64,
    kappa: Option<f64>,
}

fn validate_pair(
    x: &DesignMatrix,
    x_ext: &DesignMatrix,
    f: &ResponseVector,
    j: usize,
    k: usize,
) -> Result<()> {
    if x.n_rows() != x_ext.n_rows() {
        return Err(AuditError::InvalidModelPair {
            reason: format!(
                "row counts differ: {} vs {}",
                x.n_rows(),
                x_ext.n_rows()
            ),
        });
    }
    if f.len() != x.n_rows() {
        return Err(AuditError::DimensionMismatch {
            context: "response length",
            expected: x.n_rows(),
            actual: f.len(),
        });
    }
    if j >= x.n_cols() || k >= x_ext.n_cols() {
        return Err(AuditError::InvalidModelPair {
            reason: "proxy index out of bounds".into(),
        });
    }
    for label in x.labels() {
        if !x_ext.labels().contains(label) {
            return Err(AuditError::InvalidModelPair {
                reason: format!("restricted column `{label}` missing from extended model"),
            });
        }
    }
    if x.labels()[j] != x_ext.labels()[k] {
        return Err(AuditError::InvalidModelPair {
            reason: format!(
                "indices select different columns: `{}` vs `{}`",
                x.labels()[j],
                x_ext.labels()[k]
            ),
        });
    }
    Ok(())
}

fn identical_models(x: &DesignMatrix, x_ext: &DesignMatrix, j: usize, k: usize) -> bool {
    j == k && x.labels() == x_ext.labels() && x.matrix() == x_ext.matrix()
}

fn components(
    x: &DesignMatrix,
    x_ext: &DesignMatrix,
    f: &ResponseVector,
    j: usize,
    k: usize,
    kappa_index: Option<usize>,
) -> Result<ShiftComponents> {
    validate_pair(x, x_ext, f, j, k)?;
    let fit_r = fit_ols(x, f)?;
    let fit_e = fit_ols(x_ext, f)?;

    let n = x.n_rows();
    let a = x.matrix() * fit_r.xtx_inverse.column(j);
    let a_ext = x_ext.matrix() * fit_e.xtx_inverse.column(k);

    let (mut t1, mut t2, mut cross) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let u = a[i] * fit_r.residuals[i];
        let v = a_ext[i] * fit_e.residuals[i];
        t1 += u * u;
        t2 += v * v;
        cross += u * v;
    }

    Ok(ShiftComponents {
        phi: fit_r.beta_hat[j],
        phi_prime: fit_e.beta_hat[k],
        var_restricted: t1,
        var_extended: t2,
        cross,
        kappa: kappa_index.map(|i| fit_e.beta_hat[i]),
    })
}

/// Variance of φ̂ − φ̂′ keeping the cross-covariance term.
///
/// `j` and `k` select the same proxy column in the restricted and
/// extended designs. Identical models return exactly 0. Tiny negative
/// assemblies (floating-point cancellation) are clamped to 0; negativity
/// beyond `1e-10` of the leading terms is an error.
pub fn shift_variance_full(
    x: &DesignMatrix,
    x_ext: &DesignMatrix,
    f: &ResponseVector,
    j: usize,
    k: usize,
) -> Result<f64> {
    validate_pair(x, x_ext, f, j, k)?;
    if identical_models(x, x_ext, j, k) {
        return Ok(0.0);
    }
    let c = components(x, x_ext, f, j, k, None)?;
    assemble_full(&c)
}

fn assemble_full(c: &ShiftComponents) -> Result<f64> {
    let var = c.var_restricted + c.var_extended - 2.0 * c.cross;
    if var >= 0.0 {
        return Ok(var);
    }
    let lead = c.var_restricted + c.var_extended;
    if var >= -1e-10 * lead {
        Ok(0.0)
    } else {
        Err(AuditError::NegativeVarianceBeyondTolerance {
            value: var,
            tolerance: 1e-10 * lead,
        })
    }
}

/// Sum of the two sandwich variances, treating the estimates as
/// independent. Same score-based plug-in as [`shift_variance_full`], so
/// the two differ exactly by the cross term.
pub fn shift_variance_independent(
    x: &DesignMatrix,
    x_ext: &DesignMatrix,
    f: &ResponseVector,
    j: usize,
    k: usize,
) -> Result<f64> {
    let c = components(x, x_ext, f, j, k, None)?;
    Ok(c.var_restricted + c.var_extended)
}

/// Run the full proxy-discrimination test for one candidate column.
///
/// The restricted model regresses the response on intercept, proxy, and
/// controls; the extended model adds the protected attribute. The flag
/// requires both |z_full| > z_{1−α} and a relative shift above `rho_min`.
pub fn pd_test(
    data: &AuditDataset,
    proxy: &str,
    controls: &[&str],
    alpha: f64,
    rho_min: f64,
    scale: ModelScale,
) -> Result<ShiftTestResult> {
    pd_test_with_quantile(
        data,
        proxy,
        controls,
        alpha,
        rho_min,
        scale,
        normal::upper_quantile(alpha),
    )
}

/// [`pd_test`] with the rejection quantile supplied explicitly (the
/// protocol exposes it as a pre-registered configuration value).
#[allow(clippy::too_many_arguments)]
pub fn pd_test_with_quantile(
    data: &AuditDataset,
    proxy: &str,
    controls: &[&str],
    alpha: f64,
    rho_min: f64,
    scale: ModelScale,
    z_crit: f64,
) -> Result<ShiftTestResult> {
    let protected = data.protected_name().to_string();
    if proxy == protected || controls.iter().any(|c| *c == protected) {
        return Err(AuditError::InvalidModelPair {
            reason: "proxy and controls must exclude the protected column".into(),
        });
    }
    if controls.contains(&proxy) {
        return Err(AuditError::InvalidModelPair {
            reason: "proxy cannot also be a control".into(),
        });
    }

    let mut restricted_cols: Vec<&str> = vec![proxy];
    restricted_cols.extend(controls);
    let mut extended_cols = restricted_cols.clone();
    extended_cols.push(&protected);

    let x = data.design(&restricted_cols, true)?;
    let x_ext = data.design(&extended_cols, true)?;
    let f = data.response_vector(scale)?;

    // Intercept occupies column 0, proxy column 1, protected last.
    let j = 1;
    let k = 1;
    let kappa_index = x_ext.n_cols() - 1;

    let c = components(&x, &x_ext, &f, j, k, Some(kappa_index))?;
    let var_full = assemble_full(&c)?;
    let var_ind = c.var_restricted + c.var_extended;

    let delta = c.phi - c.phi_prime;
    let se_full = var_full.sqrt();
    let se_ind = var_ind.sqrt();

    let mut diagnostic = None;
    let relative_shift = if c.phi == 0.0 {
        diagnostic = Some(
            "restricted proxy coefficient is zero; relative shift undefined, not flagged".into(),
        );
        None
    } else {
        Some((delta / c.phi).abs())
    };

    let z_of = |se: f64| {
        if se > 0.0 {
            delta / se
        } else {
            if delta != 0.0 && diagnostic.is_none() {
                // Degenerate zero-variance fit; report a z of 0 rather
                // than an infinity that cannot round-trip through JSON.
            }
            0.0
        }
    };
    let z_full = z_of(se_full);
    let z_independent = z_of(se_ind);
    if se_full == 0.0 && delta != 0.0 {
        diagnostic = Some("shift variance is exactly zero; z statistic undefined".into());
    }

    let flagged = z_full.abs() > z_crit && relative_shift.map(|r| r > rho_min).unwrap_or(false);

    Ok(ShiftTestResult {
        phi: c.phi,
        phi_prime: c.phi_prime,
        kappa: c.kappa.unwrap_or(0.0),
        delta_pd: delta,
        relative_shift,
        se_independent: se_ind,
        se_full,
        z_independent,
        z_full,
        flagged,
        alpha,
        rho_min,
        diagnostic,
    })
}

/// Holm step-down multiplicity correction.
///
/// Returns, per input p-value, whether it stays significant at family
/// level `alpha`. Uniformly more powerful than Bonferroni with the same
/// family-wise error control.
pub fn holm_significant(p_values: &[f64], alpha: f64) -> Vec<bool> {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|a, b| {
        p_values[*a]
            .partial_cmp(&p_values[*b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut out = vec![false; m];
    for (rank, idx) in order.iter().enumerate() {
        let threshold = alpha / (m - rank) as f64;
        if p_values[*idx] <= threshold {
            out[*idx] = true;
        } else {
            break;
        }
    }
    out
}

/// Two-sided p-value matching the |z| > z_{1−α} decision rule.
pub fn shift_p_value(z: f64) -> f64 {
    1.0 - normal::cdf(z.abs())
}
