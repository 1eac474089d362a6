//! Synthetic deterministic pricing populations and the Monte Carlo
//! machinery that validates every estimator in the toolkit against
//! brute-force resampling.
//!
//! The territorial-loading generator prices profiles as a fixed function
//! of a territory and an individual rating factor. Minority membership is
//! correlated with territory through an association strength knob, and
//! territory mass can be skewed so the exponential loading curve leaves
//! approximation error that grows with minority share. That reproduces
//! the empirical failure mode of classical audit inference: the linear
//! audit model's squared residuals correlate with the protected
//! indicator.

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{AuditDataset, BindingSpec, ColumnData, ModelScale};
use crate::error::{AuditError, Result};
use crate::glm::{fit_glm, glm_naive_cov, glm_score_sandwich, GlmFamily, GlmSpec};
use crate::normal;
use crate::regression::{classical_cov, fit_ols, sandwich_cov, se_ratio, CovKind, HcKind};
use crate::shift::{shift_variance_full, shift_variance_independent};
use crate::streams::replicate_rng;

/// Functional form of the synthetic pricing algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PricingKind {
    /// Price is the linear index itself (noise is additive).
    Linear,
    /// Price is exp(index); noise enters the index, so it is
    /// multiplicative on the price.
    ExpLinear,
    /// exp of a step function of the rating factor (tier assignment),
    /// plus the territory loading.
    TieredExp,
}

/// A synthetic pricing function.
///
/// `lambda` holds one loading per territory followed by the coefficient
/// on the individual rating factor (or on the tier index for
/// [`PricingKind::TieredExp`]). With `noise_sd = 0` the function is
/// deterministic: the same profile always returns the same price.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PricingFunctionSpec {
    pub kind: PricingKind,
    pub lambda: Vec<f64>,
    pub tier_breaks: Vec<f64>,
    pub noise_sd: f64,
    /// Direct loading on the protected indicator; nonzero builds a
    /// population that genuinely violates conditional parity.
    pub protected_loading: f64,
}

impl PricingFunctionSpec {
    pub fn validate(&self, territory_count: usize) -> Result<()> {
        if self.lambda.len() != territory_count + 1 {
            return Err(AuditError::InvalidSpec(format!(
                "lambda must hold {} territory loadings plus one factor coefficient, got {}",
                territory_count,
                self.lambda.len()
            )));
        }
        if self.noise_sd < 0.0 {
            return Err(AuditError::InvalidSpec("noise_sd must be >= 0".into()));
        }
        if matches!(self.kind, PricingKind::TieredExp) {
            if self.tier_breaks.is_empty() {
                return Err(AuditError::InvalidSpec(
                    "TieredExp requires tier_breaks".into(),
                ));
            }
            if self.tier_breaks.windows(2).any(|w| w[0] > w[1]) {
                return Err(AuditError::InvalidSpec("tier_breaks must be sorted".into()));
            }
        }
        Ok(())
    }

    /// The territory loading, which doubles as the observable risk-score
    /// proxy column.
    pub fn territory_loading(&self, territory: usize) -> f64 {
        self.lambda[territory]
    }

    fn factor_coefficient(&self) -> f64 {
        self.lambda[self.lambda.len() - 1]
    }

    fn tier_of(&self, x: f64) -> f64 {
        self.tier_breaks.iter().filter(|b| x >= **b).count() as f64
    }

    /// Evaluate the pricing function. `noise` is the realized index
    /// disturbance (0 for the deterministic arm); re-evaluating with the
    /// same arguments returns the identical price.
    pub fn price(&self, territory: usize, x1: f64, protected: f64, noise: f64) -> f64 {
        let base = self.territory_loading(territory) + self.protected_loading * protected;
        match self.kind {
            PricingKind::Linear => base + self.factor_coefficient() * x1 + noise,
            PricingKind::ExpLinear => (base + self.factor_coefficient() * x1 + noise).exp(),
            PricingKind::TieredExp => {
                (base + self.factor_coefficient() * self.tier_of(x1) + noise).exp()
            }
        }
    }

    /// Exponential territorial loading calibrated to premium-like scales
    /// (roughly $250-$830 across territories).
    pub fn exp_territorial(territory_count: usize) -> Self {
        let mut lambda = territory_loadings(territory_count, 250.0f64.ln(), 1.2);
        lambda.push(0.15);
        Self {
            kind: PricingKind::ExpLinear,
            lambda,
            tier_breaks: Vec::new(),
            noise_sd: 0.0,
            protected_loading: 0.0,
        }
    }

    /// Linear (dollar-scale) territorial loading; the stochastic control
    /// arm adds homoskedastic noise to this form.
    pub fn linear_territorial(territory_count: usize) -> Self {
        let mut lambda = territory_loadings(territory_count, 250.0, 150.0);
        lambda.push(40.0);
        Self {
            kind: PricingKind::Linear,
            lambda,
            tier_breaks: Vec::new(),
            noise_sd: 0.0,
            protected_loading: 0.0,
        }
    }

    /// Tiered-exponential form: nonlinear in the rating factor but with
    /// approximation error unrelated to the protected indicator when the
    /// association strength is zero.
    pub fn tiered_territorial(territory_count: usize) -> Self {
        let mut lambda = territory_loadings(territory_count, 250.0f64.ln(), 0.6);
        lambda.push(0.25);
        Self {
            kind: PricingKind::TieredExp,
            lambda,
            tier_breaks: vec![-1.0, 0.0, 1.0],
            noise_sd: 0.0,
            protected_loading: 0.0,
        }
    }
}

fn territory_loadings(count: usize, base: f64, spread: f64) -> Vec<f64> {
    (0..count)
        .map(|t| {
            let frac = if count > 1 {
                t as f64 / (count - 1) as f64
            } else {
                0.0
            };
            base + spread * frac
        })
        .collect()
}

/// Covariate-distribution parameters of a synthetic population.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub size: usize,
    pub territory_count: usize,
    /// Minority-territory association strength in [0, 1]. Zero assigns
    /// the protected indicator by a fair coin independent of everything.
    pub assoc_strength: f64,
    /// Geometric decay of territory mass (1 = uniform; below 1 puts most
    /// mass on low territories, leaving high-loading territories rare).
    pub territory_skew: f64,
    pub factor_mean: f64,
    pub factor_sd: f64,
    pub seed: u64,
}

impl PopulationSpec {
    pub fn new(size: usize, territory_count: usize, assoc_strength: f64, seed: u64) -> Self {
        Self {
            size,
            territory_count,
            assoc_strength,
            territory_skew: 0.65,
            factor_mean: 0.0,
            factor_sd: 1.0,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.size == 0 || self.territory_count == 0 {
            return Err(AuditError::InvalidSpec(
                "population size and territory count must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.assoc_strength) {
            return Err(AuditError::InvalidSpec(
                "assoc_strength must be in [0,1]".into(),
            ));
        }
        if self.territory_skew <= 0.0 || !self.territory_skew.is_finite() {
            return Err(AuditError::InvalidSpec(
                "territory_skew must be positive and finite".into(),
            ));
        }
        if self.factor_sd < 0.0 {
            return Err(AuditError::InvalidSpec("factor_sd must be >= 0".into()));
        }
        Ok(())
    }

    /// P(minority | territory): a fair coin at zero association, tilting
    /// toward high territories as the association strengthens.
    fn minority_probability(&self, territory: usize) -> f64 {
        let frac = if self.territory_count > 1 {
            territory as f64 / (self.territory_count - 1) as f64
        } else {
            0.0
        };
        0.5 * (1.0 - self.assoc_strength) + self.assoc_strength * (0.05 + 0.5 * frac)
    }

    fn territory_cdf(&self) -> Vec<f64> {
        let mut w: Vec<f64> = (0..self.territory_count)
            .map(|t| self.territory_skew.powi(t as i32))
            .collect();
        let total: f64 = w.iter().sum();
        let mut acc = 0.0;
        for v in w.iter_mut() {
            acc += *v / total;
            *v = acc;
        }
        w
    }
}

fn population_bindings() -> BindingSpec {
    BindingSpec {
        response: "premium".into(),
        protected: "minority".into(),
        controls: vec!["risk".into(), "x1".into()],
        proxies: vec!["risk".into()],
        group: None,
        require_positive_response: false,
    }
}

/// Generate a finite pricing population with columns
/// (premium, minority, risk, x1, territory).
///
/// `risk` is the territory loading itself, the observable score that
/// serves as the proxy candidate in shift tests. Identical specs produce
/// bitwise-identical datasets.
pub fn build_population(
    pspec: &PopulationSpec,
    fspec: &PricingFunctionSpec,
) -> Result<AuditDataset> {
    pspec.validate()?;
    fspec.validate(pspec.territory_count)?;
    let n = pspec.size;
    let mut rng = replicate_rng(pspec.seed, 0);
    let normal_x = Normal::new(pspec.factor_mean, pspec.factor_sd.max(1e-300))
        .map_err(|e| AuditError::InvalidSpec(e.to_string()))?;
    let noise_dist = (fspec.noise_sd > 0.0)
        .then(|| Normal::new(0.0, fspec.noise_sd).unwrap());
    let cdf = pspec.territory_cdf();

    let mut premium = Vec::with_capacity(n);
    let mut minority = Vec::with_capacity(n);
    let mut risk = Vec::with_capacity(n);
    let mut x1 = Vec::with_capacity(n);
    let mut territory = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random();
        let t = cdf.iter().position(|c| u <= *c).unwrap_or(cdf.len() - 1);
        let a = if rng.random_bool(pspec.minority_probability(t)) {
            1.0
        } else {
            0.0
        };
        let x = normal_x.sample(&mut rng);
        let eps = noise_dist.as_ref().map_or(0.0, |d| d.sample(&mut rng));
        premium.push(fspec.price(t, x, a, eps));
        minority.push(a);
        risk.push(fspec.territory_loading(t));
        x1.push(x);
        territory.push(t as f64);
    }

    AuditDataset::from_columns(
        vec![
            ("premium".into(), ColumnData::Numeric(premium)),
            ("minority".into(), ColumnData::Numeric(minority)),
            ("risk".into(), ColumnData::Numeric(risk)),
            ("x1".into(), ColumnData::Numeric(x1)),
            ("territory".into(), ColumnData::Numeric(territory)),
        ],
        &population_bindings(),
    )
}

/// A stochastic control population whose response is a genuine Poisson
/// draw with mean exp(territory loading + coefficient · x1).
///
/// The GLM information identity holds here, so the naive covariance and
/// the score sandwich must agree; the deterministic arms are where they
/// separate.
pub fn build_poisson_population(pspec: &PopulationSpec, lambda: &[f64]) -> Result<AuditDataset> {
    pspec.validate()?;
    if lambda.len() != pspec.territory_count + 1 {
        return Err(AuditError::InvalidSpec(format!(
            "lambda must hold {} territory loadings plus one factor coefficient, got {}",
            pspec.territory_count,
            lambda.len()
        )));
    }
    let n = pspec.size;
    let mut rng = replicate_rng(pspec.seed, 0);
    let normal_x = Normal::new(pspec.factor_mean, pspec.factor_sd.max(1e-300))
        .map_err(|e| AuditError::InvalidSpec(e.to_string()))?;
    let cdf = pspec.territory_cdf();

    let mut premium = Vec::with_capacity(n);
    let mut minority = Vec::with_capacity(n);
    let mut risk = Vec::with_capacity(n);
    let mut x1 = Vec::with_capacity(n);
    let mut territory = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random();
        let t = cdf.iter().position(|c| u <= *c).unwrap_or(cdf.len() - 1);
        let a = if rng.random_bool(pspec.minority_probability(t)) {
            1.0
        } else {
            0.0
        };
        let x = normal_x.sample(&mut rng);
        let mu = (lambda[t] + lambda[pspec.territory_count] * x).exp();
        let y: f64 = Poisson::new(mu)
            .map_err(|e| AuditError::InvalidSpec(e.to_string()))?
            .sample(&mut rng);
        premium.push(y);
        minority.push(a);
        risk.push(lambda[t]);
        x1.push(x);
        territory.push(t as f64);
    }

    AuditDataset::from_columns(
        vec![
            ("premium".into(), ColumnData::Numeric(premium)),
            ("minority".into(), ColumnData::Numeric(minority)),
            ("risk".into(), ColumnData::Numeric(risk)),
            ("x1".into(), ColumnData::Numeric(x1)),
            ("territory".into(), ColumnData::Numeric(territory)),
        ],
        &population_bindings(),
    )
}

/// Which estimator the Monte Carlo oracle resamples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum OracleStatistic {
    /// β̂_A from the linear audit model; candidate SEs: classical and HC3.
    AuditBetaA {
        controls: Vec<String>,
        scale: ModelScale,
    },
    /// δ̂_PD = φ̂ − φ̂′ for a proxy column; candidate SEs: independent-sums
    /// and full cross-covariance.
    PdShift {
        proxy: String,
        controls: Vec<String>,
        scale: ModelScale,
    },
    /// GLM β̂_A; candidate SEs: naive (XᵀΛ̂X)⁻¹ and the score sandwich.
    GlmBetaA {
        family: GlmFamily,
        controls: Vec<String>,
    },
}

impl OracleStatistic {
    fn label(&self) -> String {
        match self {
            OracleStatistic::AuditBetaA { .. } => "beta_A".into(),
            OracleStatistic::PdShift { proxy, .. } => format!("pd_shift[{proxy}]"),
            OracleStatistic::GlmBetaA { family, .. } => format!("glm_beta_A[{family:?}]"),
        }
    }

    fn evaluate(&self, data: &AuditDataset) -> Result<(f64, Vec<(CovKind, f64)>)> {
        match self {
            OracleStatistic::AuditBetaA { controls, scale } => {
                let mut cols: Vec<&str> = vec![data.protected_name()];
                cols.extend(controls.iter().map(|s| s.as_str()));
                let x = data.design(&cols, true)?;
                let f = data.response_vector(*scale)?;
                let fit = fit_ols(&x, &f)?;
                let se_c = classical_cov(&fit, &x)?.standard_error(1)?;
                let se_3 = sandwich_cov(&fit, &x, HcKind::HC3)?.standard_error(1)?;
                Ok((
                    fit.beta_hat[1],
                    vec![(CovKind::Classical, se_c), (CovKind::HC3, se_3)],
                ))
            }
            OracleStatistic::PdShift {
                proxy,
                controls,
                scale,
            } => {
                let mut restricted: Vec<&str> = vec![proxy.as_str()];
                restricted.extend(controls.iter().map(|s| s.as_str()));
                let mut extended = restricted.clone();
                extended.push(data.protected_name());
                let x = data.design(&restricted, true)?;
                let x_ext = data.design(&extended, true)?;
                let f = data.response_vector(*scale)?;
                let fit_r = fit_ols(&x, &f)?;
                let fit_e = fit_ols(&x_ext, &f)?;
                let delta = fit_r.beta_hat[1] - fit_e.beta_hat[1];
                let v_full = shift_variance_full(&x, &x_ext, &f, 1, 1)?;
                let v_ind = shift_variance_independent(&x, &x_ext, &f, 1, 1)?;
                Ok((
                    delta,
                    vec![
                        (CovKind::ShiftIndependent, v_ind.sqrt()),
                        (CovKind::ShiftFull, v_full.sqrt()),
                    ],
                ))
            }
            OracleStatistic::GlmBetaA { family, controls } => {
                let mut cols: Vec<&str> = vec![data.protected_name()];
                cols.extend(controls.iter().map(|s| s.as_str()));
                let x = data.design(&cols, true)?;
                let f = data.response_vector(ModelScale::Level)?;
                let fit = fit_glm(&x, &f, &GlmSpec::new(*family))?;
                let se_naive = glm_naive_cov(&fit, &x)?.standard_error(1)?;
                let se_sand = glm_score_sandwich(&fit, &x)?.standard_error(1)?;
                Ok((
                    fit.beta_hat[1],
                    vec![
                        (CovKind::Classical, se_naive),
                        (CovKind::ScoreSandwich, se_sand),
                    ],
                ))
            }
        }
    }
}

/// How one candidate standard error performed across replicates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SePerformance {
    pub kind: CovKind,
    pub mean_se: f64,
    /// Fraction of replicates whose nominal 95% CI covered the
    /// population value.
    pub coverage95: f64,
}

/// Resampling summary for one statistic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleSummary {
    pub statistic: String,
    pub n: usize,
    pub reps: usize,
    /// The statistic evaluated on the full population (the estimand
    /// under subsampling).
    pub true_value: f64,
    pub empirical_mean: f64,
    pub empirical_sd: f64,
    pub se_performance: Vec<SePerformance>,
}

impl OracleSummary {
    pub fn performance(&self, kind: CovKind) -> Option<&SePerformance> {
        self.se_performance.iter().find(|p| p.kind == kind)
    }
}

/// Draw `reps` subsamples of size `n` without replacement, recompute the
/// statistic and its candidate standard errors on each, and report the
/// empirical spread and CI coverage per candidate.
///
/// Replicate RNG streams derive from the master seed by index, so the
/// summary is independent of thread scheduling.
pub fn mc_variance_oracle(
    population: &AuditDataset,
    n: usize,
    reps: usize,
    seed: u64,
    statistic: &OracleStatistic,
) -> Result<OracleSummary> {
    let pop_n = population.n_rows();
    if n == 0 || n > pop_n {
        return Err(AuditError::InvalidRange {
            field: "n".into(),
            detail: format!("subsample size {n} must be in 1..={pop_n}"),
        });
    }
    if reps < 100 {
        return Err(AuditError::InvalidRange {
            field: "reps".into(),
            detail: format!("need at least 100 replicates, got {reps}"),
        });
    }

    let (true_value, _) = statistic.evaluate(population)?;

    let replicates: Vec<(f64, Vec<(CovKind, f64)>)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(seed, r as u64 + 1);
            let mut idx = rand::seq::index::sample(&mut rng, pop_n, n).into_vec();
            // Row order is statistically irrelevant; a sorted subset keeps
            // floating-point accumulation identical for identical index
            // sets (the exhaustive n = population case in particular).
            idx.sort_unstable();
            statistic.evaluate(&population.subset(&idx))
        })
        .collect::<Result<_>>()?;

    let reps_f = reps as f64;
    // Shifted two-pass moments: exact zero spread when every replicate
    // returns the identical estimate (the exhaustive-subsample case).
    let shift = replicates[0].0;
    let mean_shift = replicates.iter().map(|(e, _)| e - shift).sum::<f64>() / reps_f;
    let mean = shift + mean_shift;
    let var = replicates
        .iter()
        .map(|(e, _)| {
            let d = (e - shift) - mean_shift;
            d * d
        })
        .sum::<f64>()
        / (reps_f - 1.0);
    let z95 = normal::quantile(0.975);

    let kinds: Vec<CovKind> = replicates[0].1.iter().map(|(k, _)| *k).collect();
    let mut se_performance = Vec::with_capacity(kinds.len());
    for (ki, kind) in kinds.iter().enumerate() {
        let mean_se = replicates.iter().map(|(_, s)| s[ki].1).sum::<f64>() / reps_f;
        let covered = replicates
            .iter()
            .filter(|(e, s)| (e - true_value).abs() <= z95 * s[ki].1)
            .count();
        se_performance.push(SePerformance {
            kind: *kind,
            mean_se,
            coverage95: covered as f64 / reps_f,
        });
    }

    Ok(OracleSummary {
        statistic: statistic.label(),
        n,
        reps,
        true_value,
        empirical_mean: mean,
        empirical_sd: var.sqrt(),
        se_performance,
    })
}

/// One cell of a coverage experiment grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentCell {
    pub label: String,
    pub population: PopulationSpec,
    pub pricing: PricingFunctionSpec,
    /// Audit-model controls (protected indicator is always included).
    pub controls: Vec<String>,
    pub subsample: usize,
    pub reps: usize,
    pub seed: u64,
}

/// One output row of [`coverage_experiment`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageRow {
    pub label: String,
    pub kind: String,
    pub assoc_strength: f64,
    pub noise_sd: f64,
    pub n: usize,
    pub reps: usize,
    pub coefficient: String,
    /// HC3/classical SE ratio of the full-population fit.
    pub rho: f64,
    pub empirical_sd: f64,
    pub mean_se_classical: f64,
    pub mean_se_hc3: f64,
    pub coverage_classical: f64,
    pub coverage_hc3: f64,
}

/// Run the coverage grid: per cell, build the population, compute the
/// population-level ρ diagnostic, and resample coverage for the
/// protected-attribute coefficient under both candidate SEs.
pub fn coverage_experiment(grid: &[ExperimentCell]) -> Result<Vec<CoverageRow>> {
    if grid.is_empty() {
        return Err(AuditError::NonemptyGridRequired);
    }
    let mut rows = Vec::with_capacity(grid.len());
    for cell in grid {
        let pop = build_population(&cell.population, &cell.pricing)?;
        let mut cols: Vec<&str> = vec![pop.protected_name()];
        cols.extend(cell.controls.iter().map(|s| s.as_str()));
        let x = pop.design(&cols, true)?;
        let f = pop.response_vector(ModelScale::Level)?;
        let fit = fit_ols(&x, &f)?;
        let rho = se_ratio(&fit, &x, 1)?;

        let summary = mc_variance_oracle(
            &pop,
            cell.subsample,
            cell.reps,
            cell.seed,
            &OracleStatistic::AuditBetaA {
                controls: cell.controls.clone(),
                scale: ModelScale::Level,
            },
        )?;
        let classical = summary
            .performance(CovKind::Classical)
            .expect("classical candidate present");
        let hc3 = summary
            .performance(CovKind::HC3)
            .expect("hc3 candidate present");
        rows.push(CoverageRow {
            label: cell.label.clone(),
            kind: format!("{:?}", cell.pricing.kind),
            assoc_strength: cell.population.assoc_strength,
            noise_sd: cell.pricing.noise_sd,
            n: cell.subsample,
            reps: cell.reps,
            coefficient: pop.protected_name().to_string(),
            rho,
            empirical_sd: summary.empirical_sd,
            mean_se_classical: classical.mean_se,
            mean_se_hc3: hc3.mean_se,
            coverage_classical: classical.coverage95,
            coverage_hc3: hc3.coverage95,
        });
    }
    Ok(rows)
}

/// The three-scenario default grid: well-specified stochastic control,
/// nonlinear-but-unrelated approximation error, and minority-correlated
/// approximation error.
pub fn default_grid(subsample: usize, reps: usize, seed: u64) -> Vec<ExperimentCell> {
    let territories = 8;
    let controls = vec!["risk".to_string(), "x1".to_string()];
    let mut linear = PricingFunctionSpec::linear_territorial(territories);
    linear.noise_sd = 35.0;
    let scenario1 = ExperimentCell {
        label: "s1-linear-independent".into(),
        population: PopulationSpec {
            territory_skew: 0.85,
            ..PopulationSpec::new(50_000, territories, 0.0, seed.wrapping_add(1))
        },
        pricing: linear,
        controls: controls.clone(),
        subsample,
        reps,
        seed: seed.wrapping_add(101),
    };
    let scenario2 = ExperimentCell {
        label: "s2-tiered-unrelated".into(),
        population: PopulationSpec::new(50_000, territories, 0.0, seed.wrapping_add(2)),
        pricing: PricingFunctionSpec::tiered_territorial(territories),
        controls: controls.clone(),
        subsample,
        reps,
        seed: seed.wrapping_add(102),
    };
    let scenario3 = ExperimentCell {
        label: "s3-exp-correlated".into(),
        population: PopulationSpec::new(50_000, territories, 0.8, seed.wrapping_add(3)),
        pricing: PricingFunctionSpec::exp_territorial(territories),
        controls,
        subsample,
        reps,
        seed: seed.wrapping_add(103),
    };
    vec![scenario1, scenario2, scenario3]
}

/// Serialize experiment rows as CSV.
pub fn rows_to_csv<W: std::io::Write>(rows: &[CoverageRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "label",
        "kind",
        "assoc_strength",
        "noise_sd",
        "n",
        "reps",
        "coefficient",
        "rho",
        "empirical_sd",
        "mean_se_classical",
        "mean_se_hc3",
        "coverage_classical",
        "coverage_hc3",
    ])?;
    for r in rows {
        w.write_record([
            r.label.clone(),
            r.kind.clone(),
            format!("{}", r.assoc_strength),
            format!("{}", r.noise_sd),
            format!("{}", r.n),
            format!("{}", r.reps),
            r.coefficient.clone(),
            format!("{}", r.rho),
            format!("{}", r.empirical_sd),
            format!("{}", r.mean_se_classical),
            format!("{}", r.mean_se_hc3),
            format!("{}", r.coverage_classical),
            format!("{}", r.coverage_hc3),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Sample covariance of the protected indicator with the squared audit
/// residuals, plus the Monte Carlo standard error of that covariance.
/// The generator pre-validation for the sandwich experiments checks that
/// this covariance is nonzero at better than 5 standard errors.
pub fn protected_residual_covariance(
    population: &AuditDataset,
    controls: &[&str],
    scale: ModelScale,
) -> Result<(f64, f64)> {
    let mut cols: Vec<&str> = vec![population.protected_name()];
    cols.extend(controls);
    let x = population.design(&cols, true)?;
    let f = population.response_vector(scale)?;
    let fit = fit_ols(&x, &f)?;
    let a = population.numeric(population.protected_name())?;
    let n = a.len() as f64;
    let a_mean = a.iter().sum::<f64>() / n;
    let r2: Vec<f64> = fit.residuals.iter().map(|r| r * r).collect();
    let r2_mean = r2.iter().sum::<f64>() / n;
    let prods: Vec<f64> = a
        .iter()
        .zip(&r2)
        .map(|(ai, ri)| (ai - a_mean) * (ri - r2_mean))
        .collect();
    let cov = prods.iter().sum::<f64>() / n;
    let prod_mean = cov;
    let prod_var = prods
        .iter()
        .map(|p| (p - prod_mean) * (p - prod_mean))
        .sum::<f64>()
        / (n - 1.0);
    Ok((cov, (prod_var / n).sqrt()))
}
