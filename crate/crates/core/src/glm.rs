//! Generalized linear audit models fitted by iteratively reweighted least
//! squares, with the naive `(XᵀΛ̂X)⁻¹` covariance and the score sandwich
//! `Ĵ⁻¹M̂Ĵ⁻¹` that stays valid when the response is a deterministic
//! algorithm output.
//!
//! For a genuine draw from the posited family the information identity
//! gives `J = M` and the two covariances agree. For deterministic
//! responses the identity fails and only the sandwich is consistent.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};
use crate::regression::{CovKind, CovarianceEstimate, DesignMatrix, ResponseVector};

const BOUNDARY_ADJUST: f64 = 1e-8;
// Absolute floor in the relative-deviance convergence test; keeps
// perfect fits (deviance at rounding level) from oscillating forever.
const DEVIANCE_FLOOR: f64 = 1.0;
const MAX_STEP_HALVINGS: usize = 10;

/// Supported family/link combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GlmFamily {
    GaussianIdentity,
    GaussianLog,
    PoissonLog,
    GammaLog,
}

impl GlmFamily {
    fn name(self) -> &'static str {
        match self {
            GlmFamily::GaussianIdentity => "gaussian-identity",
            GlmFamily::GaussianLog => "gaussian-log",
            GlmFamily::PoissonLog => "poisson-log",
            GlmFamily::GammaLog => "gamma-log",
        }
    }

    fn has_log_link(self) -> bool {
        !matches!(self, GlmFamily::GaussianIdentity)
    }

    fn inv_link(self, eta: f64) -> f64 {
        if self.has_log_link() {
            eta.exp()
        } else {
            eta
        }
    }

    fn link(self, mu: f64) -> f64 {
        if self.has_log_link() {
            mu.ln()
        } else {
            mu
        }
    }

    /// g'(μ), the derivative of the link at the fitted mean.
    fn link_deriv(self, mu: f64) -> f64 {
        if self.has_log_link() {
            1.0 / mu
        } else {
            1.0
        }
    }

    /// Fisher working weight λ = 1 / (V(μ) g'(μ)²).
    fn working_weight(self, mu: f64) -> f64 {
        match self {
            GlmFamily::GaussianIdentity => 1.0,
            GlmFamily::GaussianLog => mu * mu,
            GlmFamily::PoissonLog => mu,
            GlmFamily::GammaLog => 1.0,
        }
    }

    /// ∂ log p(y|η) / ∂η at unit dispersion (the per-observation score
    /// factor; dispersion is profiled out and cancels in the sandwich).
    fn score_eta(self, y: f64, mu: f64) -> f64 {
        match self {
            GlmFamily::GaussianIdentity => y - mu,
            GlmFamily::GaussianLog => (y - mu) * mu,
            GlmFamily::PoissonLog => y - mu,
            GlmFamily::GammaLog => y / mu - 1.0,
        }
    }

    /// −∂² log p(y|η) / ∂η², the observed information factor.
    fn neg_hessian_eta(self, y: f64, mu: f64) -> f64 {
        match self {
            GlmFamily::GaussianIdentity => 1.0,
            GlmFamily::GaussianLog => mu * (2.0 * mu - y),
            GlmFamily::PoissonLog => mu,
            GlmFamily::GammaLog => y / mu,
        }
    }

    fn deviance(self, y: &[f64], mu: &DVector<f64>) -> f64 {
        match self {
            GlmFamily::GaussianIdentity | GlmFamily::GaussianLog => y
                .iter()
                .zip(mu.iter())
                .map(|(y, m)| (y - m) * (y - m))
                .sum(),
            GlmFamily::PoissonLog => y
                .iter()
                .zip(mu.iter())
                .map(|(y, m)| {
                    let t = if *y > 0.0 { y * (y / m).ln() } else { 0.0 };
                    2.0 * (t - (y - m))
                })
                .sum(),
            GlmFamily::GammaLog => y
                .iter()
                .zip(mu.iter())
                .map(|(y, m)| 2.0 * (-(y / m).ln() + (y - m) / m))
                .sum(),
        }
    }

    fn validate_response(self, f: &ResponseVector) -> Result<()> {
        match self {
            GlmFamily::GaussianIdentity | GlmFamily::GaussianLog => Ok(()),
            GlmFamily::PoissonLog => {
                for (i, y) in f.as_slice().iter().enumerate() {
                    if *y < 0.0 {
                        return Err(AuditError::InvalidResponseForFamily {
                            family: self.name(),
                            row: i,
                            value: *y,
                        });
                    }
                }
                Ok(())
            }
            GlmFamily::GammaLog => {
                for (i, y) in f.as_slice().iter().enumerate() {
                    if *y <= 0.0 {
                        return Err(AuditError::InvalidResponseForFamily {
                            family: self.name(),
                            row: i,
                            value: *y,
                        });
                    }
                }
                Ok(())
            }
        }
    }

    fn initial_mu(self, y: f64) -> f64 {
        if self.has_log_link() {
            y.max(BOUNDARY_ADJUST)
        } else {
            y
        }
    }
}

/// Fitting controls for [`fit_glm`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GlmSpec {
    pub family: GlmFamily,
    pub max_iterations: usize,
    /// Relative deviance change below which IRLS stops.
    pub convergence_tolerance: f64,
}

impl GlmSpec {
    pub fn new(family: GlmFamily) -> Self {
        Self {
            family,
            max_iterations: 100,
            convergence_tolerance: 1e-10,
        }
    }
}

/// A converged (or final-iterate) GLM fit.
#[derive(Debug, Clone)]
pub struct GlmFit {
    pub family: GlmFamily,
    pub beta_hat: DVector<f64>,
    pub linear_predictor: DVector<f64>,
    pub fitted_means: DVector<f64>,
    pub working_weights: DVector<f64>,
    /// n×p score matrix; row i is xᵢ · ∂log p/∂η at η̂ᵢ.
    pub scores: DMatrix<f64>,
    /// −∂²log p/∂η² per observation at η̂ᵢ.
    pub neg_hessian: DVector<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub deviance: f64,
}

impl GlmFit {
    pub fn n_obs(&self) -> usize {
        self.fitted_means.len()
    }

    pub fn n_params(&self) -> usize {
        self.beta_hat.len()
    }

    /// ‖Σᵢ sᵢ‖ / n, the score-equation residual; ~0 at convergence.
    pub fn score_norm(&self) -> f64 {
        let col_sums = self.scores.row_sum();
        col_sums.iter().map(|v| v * v).sum::<f64>().sqrt() / self.n_obs() as f64
    }
}

/// Fit a GLM by Fisher-scoring IRLS with step halving.
pub fn fit_glm(x: &DesignMatrix, f: &ResponseVector, spec: &GlmSpec) -> Result<GlmFit> {
    let n = x.n_rows();
    let p = x.n_cols();
    if f.len() != n {
        return Err(AuditError::DimensionMismatch {
            context: "response length",
            expected: n,
            actual: f.len(),
        });
    }
    if spec.max_iterations == 0 || spec.convergence_tolerance <= 0.0 {
        return Err(AuditError::InvalidSpec(
            "max_iterations >= 1 and convergence_tolerance > 0 required".into(),
        ));
    }
    let fam = spec.family;
    fam.validate_response(f)?;
    let y = f.as_slice();

    let mut mu = DVector::from_iterator(n, y.iter().map(|v| fam.initial_mu(*v)));
    let mut eta = mu.map(|m| fam.link(m));
    let mut dev = fam.deviance(y, &mu);
    let mut beta: Option<DVector<f64>> = None;
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=spec.max_iterations {
        iterations = iter;
        // Weighted least squares on the working response.
        let mut wx = x.matrix().clone();
        let mut wz = DVector::zeros(n);
        for i in 0..n {
            let w = fam.working_weight(mu[i]).sqrt();
            let z = eta[i] + (y[i] - mu[i]) * fam.link_deriv(mu[i]);
            wz[i] = w * z;
            for j in 0..p {
                wx[(i, j)] *= w;
            }
        }
        let qr = wx.qr();
        let qty = qr.q().tr_mul(&wz);
        let mut beta_new = qr
            .r()
            .solve_upper_triangular(&qty)
            .ok_or(AuditError::SingularInformation)?;

        let mut eta_new = x.matrix() * &beta_new;
        let mut mu_new = eta_new.map(|e| fam.inv_link(e));
        let mut dev_new = fam.deviance(y, &mu_new);

        if let Some(prev) = &beta {
            let mut halvings = 0;
            while dev_new > dev && halvings < MAX_STEP_HALVINGS {
                beta_new = (&beta_new + prev) * 0.5;
                eta_new = x.matrix() * &beta_new;
                mu_new = eta_new.map(|e| fam.inv_link(e));
                dev_new = fam.deviance(y, &mu_new);
                halvings += 1;
            }
        }

        let rel = (dev_new - dev).abs() / (dev.abs() + DEVIANCE_FLOOR);
        beta = Some(beta_new);
        eta = eta_new;
        mu = mu_new;
        dev = dev_new;
        if rel < spec.convergence_tolerance {
            converged = true;
            break;
        }
    }

    let beta = beta.expect("at least one IRLS iteration runs");
    let mut weights = DVector::zeros(n);
    let mut negh = DVector::zeros(n);
    let mut scores = DMatrix::zeros(n, p);
    for i in 0..n {
        weights[i] = fam.working_weight(mu[i]);
        negh[i] = fam.neg_hessian_eta(y[i], mu[i]);
        let s = fam.score_eta(y[i], mu[i]);
        for j in 0..p {
            scores[(i, j)] = x.matrix()[(i, j)] * s;
        }
    }

    let fit = GlmFit {
        family: fam,
        beta_hat: beta,
        linear_predictor: eta,
        fitted_means: mu,
        working_weights: weights,
        scores,
        neg_hessian: negh,
        converged,
        iterations,
        deviance: dev,
    };
    if !fit.converged {
        return Err(AuditError::NotConverged {
            iterations: fit.iterations,
            deviance: fit.deviance,
        });
    }
    Ok(fit)
}

/// The standard GLM covariance `(XᵀΛ̂X)⁻¹`, scaled by the deviance-based
/// dispersion (divisor n) for the Gaussian families.
///
/// Valid only when the response is a genuine draw from the posited family.
pub fn glm_naive_cov(fit: &GlmFit, x: &DesignMatrix) -> Result<CovarianceEstimate> {
    check_shapes(fit, x)?;
    let n = fit.n_obs();
    let p = fit.n_params();
    let mut wx = x.matrix().clone();
    for i in 0..n {
        let w = fit.working_weights[i];
        for j in 0..p {
            wx[(i, j)] *= w;
        }
    }
    let info = x.matrix().tr_mul(&wx);
    let inv = info
        .cholesky()
        .ok_or(AuditError::SingularInformation)?
        .inverse();
    let dispersion = match fit.family {
        GlmFamily::GaussianIdentity | GlmFamily::GaussianLog => fit.deviance / n as f64,
        GlmFamily::PoissonLog | GlmFamily::GammaLog => 1.0,
    };
    CovarianceEstimate::new(inv * dispersion, CovKind::Classical)
}

/// The score sandwich `Ĵ⁻¹M̂Ĵ⁻¹ / n` with the observed information
/// `Ĵ = n⁻¹Σ xᵢxᵢᵀ(−∂²logp/∂η²)` and outer score product
/// `M̂ = n⁻¹Σ sᵢsᵢᵀ`.
pub fn glm_score_sandwich(fit: &GlmFit, x: &DesignMatrix) -> Result<CovarianceEstimate> {
    check_shapes(fit, x)?;
    let n = fit.n_obs();
    let p = fit.n_params();
    let nf = n as f64;

    let mut hx = x.matrix().clone();
    for i in 0..n {
        let h = fit.neg_hessian[i];
        for j in 0..p {
            hx[(i, j)] *= h;
        }
    }
    let j_hat = (x.matrix().tr_mul(&hx)) / nf;
    let j_hat = (&j_hat + j_hat.transpose()) * 0.5;
    let m_hat = fit.scores.tr_mul(&fit.scores) / nf;

    let j_inv = j_hat
        .try_inverse()
        .ok_or(AuditError::SingularInformation)?;
    let cov = (&j_inv * m_hat * &j_inv) / nf;
    CovarianceEstimate::new(cov, CovKind::ScoreSandwich)
}

fn check_shapes(fit: &GlmFit, x: &DesignMatrix) -> Result<()> {
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
