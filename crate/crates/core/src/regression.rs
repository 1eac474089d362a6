//! Least-squares audit regressions with classical and
//! heteroskedasticity-consistent covariance estimators.
//!
//! Pricing algorithms are deterministic, so the residuals of an audit
//! regression are approximation error rather than sampling noise. The
//! classical covariance `σ̂²(XᵀX)⁻¹` is then invalid; the sandwich
//! estimators HC0–HC3 remain consistent. HC3 is the default everywhere
//! downstream.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};

/// Relative tolerance on the smallest/largest singular value ratio below
/// which a design is treated as rank deficient.
pub const SINGULAR_VALUE_RATIO_TOL: f64 = 1e-10;

/// Relative tolerance for clamping tiny negative variance diagonals that
/// arise from floating-point cancellation.
pub const NEGATIVE_VARIANCE_TOL: f64 = 1e-10;

/// A validated n×p design matrix with unique column labels.
///
/// Invariants enforced at construction: all entries finite, n ≥ p + 1,
/// labels unique, and columns linearly independent up to
/// [`SINGULAR_VALUE_RATIO_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    matrix: DMatrix<f64>,
    labels: Vec<String>,
}

impl DesignMatrix {
    pub fn new(matrix: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        let (n, p) = matrix.shape();
        if labels.len() != p {
            return Err(AuditError::DimensionMismatch {
                context: "design matrix labels",
                expected: p,
                actual: labels.len(),
            });
        }
        for (i, a) in labels.iter().enumerate() {
            if labels[..i].contains(a) {
                return Err(AuditError::DuplicateLabel { label: a.clone() });
            }
        }
        if n < p + 1 {
            return Err(AuditError::DimensionMismatch {
                context: "design matrix rows (need n >= p + 1)",
                expected: p + 1,
                actual: n,
            });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(AuditError::NonFinite {
                context: "design matrix entries",
            });
        }
        // Rank check on the p×p triangular factor; its singular values are
        // those of the full matrix.
        let r = matrix.clone().qr().unpack_r();
        let sv = r.svd(false, false).singular_values;
        let max = sv.max();
        let min = sv.min();
        if max <= 0.0 || min <= SINGULAR_VALUE_RATIO_TOL * max {
            return Err(AuditError::RankDeficient {
                ratio: if max > 0.0 { min / max } else { 0.0 },
                tolerance: SINGULAR_VALUE_RATIO_TOL,
            });
        }
        Ok(Self { matrix, labels })
    }

    /// Build from named columns of equal length.
    pub fn from_named_columns(columns: &[(&str, &[f64])]) -> Result<Self> {
        let p = columns.len();
        let n = columns.first().map(|(_, c)| c.len()).unwrap_or(0);
        for (name, c) in columns {
            if c.len() != n {
                return Err(AuditError::DimensionMismatch {
                    context: "column lengths",
                    expected: n,
                    actual: c.len(),
                });
            }
            let _ = name;
        }
        let mut m = DMatrix::zeros(n, p);
        for (j, (_, c)) in columns.iter().enumerate() {
            for (i, v) in c.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        Self::new(m, columns.iter().map(|(l, _)| l.to_string()).collect())
    }

    pub fn n_rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn column_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// A validated response vector (all entries finite).
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseVector(DVector<f64>);

impl ResponseVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(AuditError::NonFinite {
                context: "response vector",
            });
        }
        Ok(Self(DVector::from_vec(values)))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.len() == 0
    }

    pub fn vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }
}

/// Which covariance estimator a [`CovarianceEstimate`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CovKind {
    Classical,
    HC0,
    HC1,
    HC2,
    HC3,
    ScoreSandwich,
    ShiftFull,
    ShiftIndependent,
}

/// The leverage-correction variants of the sandwich estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HcKind {
    HC0,
    HC1,
    HC2,
    HC3,
}

impl From<HcKind> for CovKind {
    fn from(k: HcKind) -> Self {
        match k {
            HcKind::HC0 => CovKind::HC0,
            HcKind::HC1 => CovKind::HC1,
            HcKind::HC2 => CovKind::HC2,
            HcKind::HC3 => CovKind::HC3,
        }
    }
}

/// One fitted least-squares regression.
#[derive(Debug, Clone)]
pub struct RegressionFit {
    pub beta_hat: DVector<f64>,
    pub residuals: DVector<f64>,
    pub fitted: DVector<f64>,
    pub leverages: DVector<f64>,
    pub xtx_inverse: DMatrix<f64>,
    pub r_squared: f64,
}

impl RegressionFit {
    pub fn n_obs(&self) -> usize {
        self.residuals.len()
    }

    pub fn n_params(&self) -> usize {
        self.beta_hat.len()
    }
}

/// A p×p coefficient covariance matrix tagged with its estimator kind.
///
/// Construction symmetrizes floating-point asymmetry and rejects matrices
/// whose smallest eigenvalue is below `-1e-10` relative to the largest.
#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    matrix: DMatrix<f64>,
    kind: CovKind,
}

impl CovarianceEstimate {
    pub fn new(matrix: DMatrix<f64>, kind: CovKind) -> Result<Self> {
        let (r, c) = matrix.shape();
        if r != c {
            return Err(AuditError::DimensionMismatch {
                context: "covariance matrix shape",
                expected: r,
                actual: c,
            });
        }
        let sym = (&matrix + matrix.transpose()) * 0.5;
        let eig = sym.clone().symmetric_eigen().eigenvalues;
        let max = eig.iter().cloned().fold(0.0_f64, |a, b| a.max(b.abs()));
        let min = eig.min();
        if min < -NEGATIVE_VARIANCE_TOL * max {
            return Err(AuditError::IndefiniteCovariance {
                min_eigenvalue: min,
            });
        }
        Ok(Self { matrix: sym, kind })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn kind(&self) -> CovKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Variance of coefficient `j`, with tiny negative diagonals (from
    /// cancellation) clamped to zero.
    pub fn variance(&self, j: usize) -> Result<f64> {
        let d = self.matrix[(j, j)];
        if d >= 0.0 {
            return Ok(d);
        }
        let max_diag = (0..self.dim())
            .map(|i| self.matrix[(i, i)])
            .fold(0.0_f64, f64::max);
        if d >= -NEGATIVE_VARIANCE_TOL * max_diag.max(1e-300) {
            Ok(0.0)
        } else {
            Err(AuditError::NegativeVarianceBeyondTolerance {
                value: d,
                tolerance: NEGATIVE_VARIANCE_TOL * max_diag,
            })
        }
    }

    /// Standard error of coefficient `j`.
    pub fn standard_error(&self, j: usize) -> Result<f64> {
        Ok(self.variance(j)?.sqrt())
    }

    /// Standard errors of all coefficients.
    pub fn standard_errors(&self) -> Result<Vec<f64>> {
        (0..self.dim()).map(|j| self.standard_error(j)).collect()
    }
}

/// Ordinary least squares via a Householder QR decomposition.
///
/// `β̂` solves `Rβ = QᵀF`; the normal equations are never formed for the
/// solve itself, though `(XᵀX)⁻¹ = R⁻¹R⁻ᵀ` is materialized for the
/// covariance formulas. Leverages come from the row norms of the thin
/// orthogonal factor, so the full hat matrix is never built.
pub fn fit_ols(x: &DesignMatrix, f: &ResponseVector) -> Result<RegressionFit> {
    let n = x.n_rows();
    let p = x.n_cols();
    if f.len() != n {
        return Err(AuditError::DimensionMismatch {
            context: "response length",
            expected: n,
            actual: f.len(),
        });
    }
    let qr = x.matrix().clone().qr();
    let q = qr.q();
    let r = qr.r();
    let qty = q.tr_mul(f.vector());
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or(AuditError::RankDeficient {
            ratio: 0.0,
            tolerance: SINGULAR_VALUE_RATIO_TOL,
        })?;
    let fitted = x.matrix() * &beta;
    let residuals = f.vector() - &fitted;

    let mut leverages = DVector::zeros(n);
    for i in 0..n {
        let mut h = 0.0;
        for j in 0..p {
            h += q[(i, j)] * q[(i, j)];
        }
        leverages[i] = h;
    }

    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or(AuditError::RankDeficient {
            ratio: 0.0,
            tolerance: SINGULAR_VALUE_RATIO_TOL,
        })?;
    let xtx_inverse = &r_inv * r_inv.transpose();

    let mean = f.vector().mean();
    let sst: f64 = f.vector().iter().map(|v| (v - mean) * (v - mean)).sum();
    let ssr: f64 = residuals.iter().map(|v| v * v).sum();
    let r_squared = if sst > 0.0 {
        (1.0 - ssr / sst).clamp(0.0, 1.0)
    } else if ssr <= 1e-24 {
        1.0
    } else {
        0.0
    };

    Ok(RegressionFit {
        beta_hat: beta,
        residuals,
        fitted,
        leverages,
        xtx_inverse,
        r_squared,
    })
}

/// Classical OLS covariance `σ̂²(XᵀX)⁻¹` with `σ̂² = n⁻¹Σ r̂ᵢ²`.
///
/// Valid only when the audit model is correctly specified; kept as the
/// comparison baseline for the `ρ` diagnostic.
pub fn classical_cov(fit: &RegressionFit, x: &DesignMatrix) -> Result<CovarianceEstimate> {
    check_fit_matches(fit, x)?;
    let n = fit.n_obs() as f64;
    let sigma2 = fit.residuals.iter().map(|r| r * r).sum::<f64>() / n;
    CovarianceEstimate::new(&fit.xtx_inverse * sigma2, CovKind::Classical)
}

/// Heteroskedasticity-consistent sandwich covariance.
///
/// HC0 is `(XᵀX)⁻¹(Σ xᵢxᵢᵀ r̂ᵢ²)(XᵀX)⁻¹`; HC1 applies the n/(n−p)
/// finite-sample factor; HC2 and HC3 inflate each squared residual by
/// `(1−hᵢᵢ)⁻¹` and `(1−hᵢᵢ)⁻²`.
pub fn sandwich_cov(
    fit: &RegressionFit,
    x: &DesignMatrix,
    kind: HcKind,
) -> Result<CovarianceEstimate> {
    check_fit_matches(fit, x)?;
    let n = fit.n_obs();
    let p = fit.n_params();

    if matches!(kind, HcKind::HC2 | HcKind::HC3) {
        for i in 0..n {
            let h = fit.leverages[i];
            if h >= 1.0 - 1e-10 {
                return Err(AuditError::LeverageAtOne {
                    index: i,
                    leverage: h,
                });
            }
        }
    }

    let mut weights = DVector::zeros(n);
    for i in 0..n {
        let r2 = fit.residuals[i] * fit.residuals[i];
        weights[i] = match kind {
            HcKind::HC0 | HcKind::HC1 => r2,
            HcKind::HC2 => r2 / (1.0 - fit.leverages[i]),
            HcKind::HC3 => {
                let d = 1.0 - fit.leverages[i];
                r2 / (d * d)
            }
        };
    }

    let mut scaled = x.matrix().clone();
    for i in 0..n {
        let w = weights[i];
        for j in 0..p {
            scaled[(i, j)] *= w;
        }
    }
    let meat = x.matrix().tr_mul(&scaled);
    let mut cov = &fit.xtx_inverse * meat * &fit.xtx_inverse;
    if matches!(kind, HcKind::HC1) {
        cov *= n as f64 / (n - p) as f64;
    }
    CovarianceEstimate::new(cov, kind.into())
}

/// `ρ_j`: the ratio of the HC3 sandwich standard error to the classical
/// standard error for coefficient `j`. Departures from 1 signal that the
/// linear audit model is misspecified relative to the pricing function.
pub fn se_ratio(fit: &RegressionFit, x: &DesignMatrix, j: usize) -> Result<f64> {
    if j >= fit.n_params() {
        return Err(AuditError::DimensionMismatch {
            context: "coefficient index",
            expected: fit.n_params(),
            actual: j,
        });
    }
    let classical = classical_cov(fit, x)?.variance(j)?;
    let sandwich = sandwich_cov(fit, x, HcKind::HC3)?.variance(j)?;
    if classical <= 0.0 {
        return if sandwich <= 0.0 {
            // Both estimators are exactly degenerate (zero-residual fit);
            // they agree, so the ratio is reported as 1.
            Ok(1.0)
        } else {
            Err(AuditError::ZeroClassicalVariance { index: j })
        };
    }
    Ok((sandwich / classical).sqrt())
}

fn check_fit_matches(fit: &RegressionFit, x: &DesignMatrix) -> Result<()> {
    if fit.n_obs() != x.n_rows() {
        return Err(AuditError::DimensionMismatch {
            context: "fit/design rows",
            expected: x.n_rows(),
            actual: fit.n_obs(),
        });
    }
    if fit.n_params() != x.n_cols() {
        return Err(AuditError::DimensionMismatch {
            context: "fit/design columns",
            expected: x.n_cols(),
            actual: fit.n_params(),
        });
    }
    Ok(())
}
