//! The pre-registered audit pipeline: lock a configuration, ingest the
//! dataset, run the selected criterion per company, and emit a
//! reproducible report with digests of both inputs.
//!
//! Every design choice — criterion, columns, margins, estimators — is
//! fixed in the configuration before data is examined, and the report
//! echoes the configuration together with its digest so post-hoc edits
//! are detectable. Per-group failures (too few rows, degenerate designs)
//! are contained as Insufficient Information entries and never abort the
//! other groups: an unrunnable test is not evidence of a violation.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataio::{load_csv_bytes, AuditDataset, BindingSpec, ModelScale};
use crate::error::{AuditError, Result};
use crate::normal;
use crate::shift::{
    holm_significant, pd_test_with_quantile, shift_p_value, ShiftTestResult,
};
use crate::tost::{fit_cdp, tost_verdict, CdpResult, ToleranceBands, Verdict};

/// Which fairness criterion the audit tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criterion {
    PD,
    CDP,
}

fn default_rho_min() -> f64 {
    0.10
}

fn default_pd_quantile() -> f64 {
    1.645
}

/// The locked audit configuration. Field names are the configuration
/// file's keys; unknown keys are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    pub criterion: Criterion,
    pub response_column: String,
    pub protected_column: String,
    #[serde(default)]
    pub control_columns: Vec<String>,
    #[serde(default)]
    pub proxy_columns: Vec<String>,
    pub group_column: String,
    pub spec: ModelScale,
    pub alpha: f64,
    /// CDP level-gap margin as a fraction of the mean premium.
    #[serde(default)]
    pub delta_pct: Option<f64>,
    /// CDP ratio margin.
    #[serde(default)]
    pub tau: Option<f64>,
    /// Reference mean premium P̄ for the dollar margin. Defaults to the
    /// dataset's grand mean response; pre-registering an explicit value
    /// decouples each group's verdict from the other groups' rows.
    #[serde(default)]
    pub mean_premium: Option<f64>,
    #[serde(default = "default_rho_min")]
    pub rho_min: f64,
    /// Rejection quantile for the PD shift test. The default 1.645
    /// reproduces the published protocol; it equals z_{0.95}, so with
    /// alpha = 0.05 the |z| > z_{1-alpha} rule is unchanged.
    #[serde(default = "default_pd_quantile")]
    pub pd_quantile: f64,
    #[serde(default)]
    pub seed: u64,
}

impl AuditConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.alpha && self.alpha < 0.5) {
            return Err(AuditError::InvalidRange {
                field: "alpha".into(),
                detail: format!("must be in (0,0.5), got {}", self.alpha),
            });
        }
        if self.rho_min < 0.0 {
            return Err(AuditError::InvalidRange {
                field: "rho_min".into(),
                detail: format!("must be >= 0, got {}", self.rho_min),
            });
        }
        if let Some(p) = self.mean_premium {
            if p <= 0.0 || p.is_nan() {
                return Err(AuditError::InvalidRange {
                    field: "mean_premium".into(),
                    detail: format!("must be > 0, got {p}"),
                });
            }
        }
        if self.pd_quantile <= 0.0 || self.pd_quantile.is_nan() {
            return Err(AuditError::InvalidRange {
                field: "pd_quantile".into(),
                detail: format!("must be > 0, got {}", self.pd_quantile),
            });
        }
        match self.criterion {
            Criterion::CDP => {
                let delta = self.delta_pct.ok_or_else(|| AuditError::MissingField {
                    field: "delta_pct".into(),
                })?;
                if delta <= 0.0 {
                    return Err(AuditError::InvalidRange {
                        field: "delta_pct".into(),
                        detail: format!("must be > 0, got {delta}"),
                    });
                }
                let tau = self.tau.ok_or_else(|| AuditError::MissingField {
                    field: "tau".into(),
                })?;
                if !(0.0 < tau && tau < 1.0) {
                    return Err(AuditError::InvalidRange {
                        field: "tau".into(),
                        detail: format!("must be in (0,1), got {tau}"),
                    });
                }
            }
            Criterion::PD => {
                if self.proxy_columns.is_empty() {
                    return Err(AuditError::MissingField {
                        field: "proxy_columns".into(),
                    });
                }
            }
        }
        // Column roles must be distinct; existence is checked at ingestion.
        let mut names: Vec<&String> = vec![
            &self.response_column,
            &self.protected_column,
            &self.group_column,
        ];
        names.extend(&self.control_columns);
        names.extend(&self.proxy_columns);
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return Err(AuditError::DuplicateLabel {
                    label: (*a).clone(),
                });
            }
        }
        Ok(())
    }

    /// Role bindings for ingestion.
    pub fn binding_spec(&self) -> BindingSpec {
        BindingSpec {
            response: self.response_column.clone(),
            protected: self.protected_column.clone(),
            controls: self.control_columns.clone(),
            proxies: self.proxy_columns.clone(),
            group: Some(self.group_column.clone()),
            require_positive_response: matches!(self.spec, ModelScale::Log),
        }
    }
}

/// Canonical serialization: JSON with lexicographically sorted keys, so
/// the digest is independent of key order in the source file.
pub fn canonical_config_json(config: &AuditConfig) -> Result<String> {
    Ok(serde_json::to_value(config)?.to_string())
}

/// SHA-256 digest of the canonical configuration serialization.
pub fn config_digest(config: &AuditConfig) -> Result<String> {
    Ok(hex::encode(Sha256::digest(
        canonical_config_json(config)?.as_bytes(),
    )))
}

const REQUIRED_FIELDS: &[&str] = &[
    "criterion",
    "response_column",
    "protected_column",
    "group_column",
    "spec",
    "alpha",
];

/// Parse, validate, and digest a raw configuration document.
pub fn lock_config(raw: &str) -> Result<(AuditConfig, String)> {
    let value: serde_json::Value =
        serde_json::from_str(raw).map_err(|e| AuditError::ConfigSyntax(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| AuditError::ConfigSyntax("top level must be an object".into()))?;
    for field in REQUIRED_FIELDS {
        if !obj.contains_key(*field) {
            return Err(AuditError::MissingField {
                field: (*field).into(),
            });
        }
    }
    let config: AuditConfig = serde_json::from_value(value)
        .map_err(|e| AuditError::ConfigSyntax(e.to_string()))?;
    config.validate()?;
    let digest = config_digest(&config)?;
    Ok((config, digest))
}

/// Load the dataset named by the configuration.
pub fn load_dataset(config: &AuditConfig, bytes: &[u8]) -> Result<AuditDataset> {
    load_csv_bytes(bytes, &config.binding_spec())
}

/// Input provenance recorded in the report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub dataset_sha256: String,
    pub record_count: usize,
    pub columns: Vec<String>,
    pub timestamp: Option<String>,
    pub tool_version: String,
}

/// One proxy candidate's result within a PD group.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PdCandidate {
    pub proxy: String,
    pub result: ShiftTestResult,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum GroupOutcome {
    Cdp { result: CdpResult },
    Pd { candidates: Vec<PdCandidate> },
    Error { message: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupReport {
    pub group: String,
    pub n_obs: usize,
    pub outcome: GroupOutcome,
}

/// Aggregated counts across groups. For PD audits a flagged group counts
/// as a failure for exit-code purposes; groups whose test could not run
/// count as Insufficient Information under either criterion.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Summary {
    pub groups: usize,
    pub pass: usize,
    pub fail: usize,
    pub insufficient: usize,
    pub flagged: usize,
    pub significant: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditReport {
    pub config: AuditConfig,
    pub config_sha256: String,
    pub manifest: Manifest,
    pub groups: Vec<GroupReport>,
    pub summary: Summary,
    pub warnings: Vec<String>,
}

impl AuditReport {
    /// Process exit code: 0 all pass, 2 any failure, 3 insufficient
    /// information only.
    pub fn exit_code(&self) -> i32 {
        if self.summary.fail > 0 {
            2
        } else if self.summary.insufficient > 0 {
            3
        } else {
            0
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(raw: &str) -> Result<AuditReport> {
        Ok(serde_json::from_str(raw)?)
    }

    /// Plain-text summary for operators.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "fairness audit report (tool {})", self.manifest.tool_version);
        let _ = writeln!(out, "criterion: {:?}  spec: {:?}  alpha: {}",
            self.config.criterion, self.config.spec, self.config.alpha);
        let _ = writeln!(out, "config sha256:  {}", self.config_sha256);
        let _ = writeln!(out, "dataset sha256: {}", self.manifest.dataset_sha256);
        let _ = writeln!(
            out,
            "records: {}  groups: {}",
            self.manifest.record_count, self.summary.groups
        );
        if let Some(ts) = &self.manifest.timestamp {
            let _ = writeln!(out, "timestamp: {ts}");
        }
        let _ = writeln!(out);
        match self.config.criterion {
            Criterion::CDP => {
                let _ = writeln!(
                    out,
                    "{:<36} {:>6} {:>9} {:>8} {:>8} {:>9} {:>8}  verdict",
                    "group", "n", "beta_A", "se(HC3)", "ratio", "gap($)", "CI"
                );
                for g in &self.groups {
                    match &g.outcome {
                        GroupOutcome::Cdp { result } => {
                            let _ = writeln!(
                                out,
                                "{:<36} {:>6} {:>9.4} {:>8.4} {:>8} {:>9.2} [{:+.3},{:+.3}]  {}",
                                g.group,
                                g.n_obs,
                                result.beta_a,
                                result.se,
                                result
                                    .ratio
                                    .map(|r| format!("{r:.3}"))
                                    .unwrap_or_else(|| "-".into()),
                                result.dollar_gap,
                                result.ci_low,
                                result.ci_high,
                                verdict_label(result.verdict),
                            );
                        }
                        GroupOutcome::Error { message } => {
                            let _ = writeln!(
                                out,
                                "{:<36} {:>6} INSUFFICIENT INFORMATION - {message}",
                                g.group, g.n_obs
                            );
                        }
                        GroupOutcome::Pd { .. } => {}
                    }
                }
                let _ = writeln!(out);
                let _ = writeln!(
                    out,
                    "pass {}  fail {}  insufficient {}",
                    self.summary.pass, self.summary.fail, self.summary.insufficient
                );
            }
            Criterion::PD => {
                let _ = writeln!(
                    out,
                    "{:<36} {:<14} {:>7} {:>9} {:>9} {:>7} {:>7}  decision",
                    "group", "proxy", "shift", "se_ind", "se_full", "z_ind", "z_full"
                );
                for g in &self.groups {
                    match &g.outcome {
                        GroupOutcome::Pd { candidates } => {
                            for c in candidates {
                                let r = &c.result;
                                let _ = writeln!(
                                    out,
                                    "{:<36} {:<14} {:>6}% {:>9.4} {:>9.4} {:>7.2} {:>7.2}  {}",
                                    g.group,
                                    c.proxy,
                                    r.relative_shift
                                        .map(|s| format!("{:.1}", 100.0 * s))
                                        .unwrap_or_else(|| "-".into()),
                                    r.se_independent,
                                    r.se_full,
                                    r.z_independent,
                                    r.z_full,
                                    if r.flagged { "FLAG" } else { "---" },
                                );
                            }
                        }
                        GroupOutcome::Error { message } => {
                            let _ = writeln!(
                                out,
                                "{:<36} {:<14} INSUFFICIENT INFORMATION - {message}",
                                g.group, "-"
                            );
                        }
                        GroupOutcome::Cdp { .. } => {}
                    }
                }
                let _ = writeln!(out);
                let _ = writeln!(
                    out,
                    "groups {}  significant {}  flagged {}  insufficient {}",
                    self.summary.groups,
                    self.summary.significant,
                    self.summary.flagged,
                    self.summary.insufficient
                );
            }
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}

fn verdict_label(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "PASS",
        Verdict::Fail => "FAIL",
        Verdict::InsufficientInformation => "INSUFFICIENT",
    }
}

/// Execute the audit pipeline on a validated dataset.
///
/// Groups run independently at the configured level (no cross-company
/// correction); multiple proxy candidates within one group get a Holm
/// step-down correction. Group ordering in the report is lexicographic,
/// and the whole report is a pure function of (config, dataset,
/// timestamp, tool version).
pub fn run_audit(
    config: &AuditConfig,
    data: &AuditDataset,
    timestamp: Option<String>,
) -> Result<AuditReport> {
    config.validate()?;
    let config_sha256 = config_digest(config)?;
    let dataset_sha256 = match data.digest() {
        Some(d) => d.to_string(),
        None => hex::encode(Sha256::digest(data.canonical_csv_bytes()?)),
    };

    let mean_premium = match config.mean_premium {
        Some(p) => p,
        None => {
            let y = data.numeric(data.response_name())?;
            if y.is_empty() {
                return Err(AuditError::InsufficientObservations {
                    group: "<all>".into(),
                    needed: 1,
                    got: 0,
                });
            }
            y.iter().sum::<f64>() / y.len() as f64
        }
    };

    let labels = data.group_labels()?;
    let subsets: Vec<(String, AuditDataset)> = labels
        .iter()
        .map(|g| Ok((g.clone(), data.filter_group(g)?)))
        .collect::<Result<_>>()?;

    let controls: Vec<&str> = config.control_columns.iter().map(|s| s.as_str()).collect();
    let bands = match config.criterion {
        Criterion::CDP => Some(ToleranceBands::new(
            config.delta_pct.unwrap() * mean_premium,
            config.tau.unwrap(),
            config.alpha,
            mean_premium,
        )?),
        Criterion::PD => None,
    };

    let groups: Vec<GroupReport> = subsets
        .par_iter()
        .map(|(label, subset)| {
            let outcome = match config.criterion {
                Criterion::CDP => run_cdp_group(config, subset, bands.as_ref().unwrap(), &controls),
                Criterion::PD => run_pd_group(config, subset, &controls),
            };
            GroupReport {
                group: label.clone(),
                n_obs: subset.n_rows(),
                outcome: outcome.unwrap_or_else(|e| GroupOutcome::Error {
                    message: e.to_string(),
                }),
            }
        })
        .collect();

    let mut summary = Summary {
        groups: groups.len(),
        ..Summary::default()
    };
    let mut warnings = Vec::new();
    for g in &groups {
        match &g.outcome {
            GroupOutcome::Cdp { result } => match result.verdict {
                Verdict::Pass => summary.pass += 1,
                Verdict::Fail => summary.fail += 1,
                Verdict::InsufficientInformation => summary.insufficient += 1,
            },
            GroupOutcome::Pd { candidates } => {
                let any_flag = candidates.iter().any(|c| c.result.flagged);
                let any_sig = candidates.iter().any(|c| {
                    c.result.z_full.abs() > config.pd_quantile
                });
                if any_sig {
                    summary.significant += 1;
                }
                if any_flag {
                    summary.flagged += 1;
                    summary.fail += 1;
                } else {
                    summary.pass += 1;
                }
                for c in candidates {
                    if let Some(d) = &c.result.diagnostic {
                        warnings.push(format!("{}/{}: {d}", g.group, c.proxy));
                    }
                }
            }
            GroupOutcome::Error { message } => {
                summary.insufficient += 1;
                warnings.push(format!("{}: {message}", g.group));
            }
        }
    }

    Ok(AuditReport {
        config: config.clone(),
        config_sha256,
        manifest: Manifest {
            dataset_sha256,
            record_count: data.n_rows(),
            columns: data.header().to_vec(),
            timestamp,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        },
        groups,
        summary,
        warnings,
    })
}

fn run_cdp_group(
    config: &AuditConfig,
    subset: &AuditDataset,
    bands: &ToleranceBands,
    controls: &[&str],
) -> Result<GroupOutcome> {
    let fit = fit_cdp(subset, None, config.spec, controls)?;
    let result = tost_verdict(&fit, bands)?;
    Ok(GroupOutcome::Cdp { result })
}

fn run_pd_group(
    config: &AuditConfig,
    subset: &AuditDataset,
    controls: &[&str],
) -> Result<GroupOutcome> {
    let mut candidates = Vec::with_capacity(config.proxy_columns.len());
    for proxy in &config.proxy_columns {
        let result = pd_test_with_quantile(
            subset,
            proxy,
            controls,
            config.alpha,
            config.rho_min,
            config.spec,
            config.pd_quantile,
        )?;
        candidates.push(PdCandidate {
            proxy: proxy.clone(),
            result,
        });
    }
    // Within-group multiplicity correction across proxy candidates: Holm
    // at the level implied by the registered quantile. With one
    // candidate this reduces to |z| > pd_quantile exactly.
    if candidates.len() > 1 {
        let alpha_family = 1.0 - normal::cdf(config.pd_quantile);
        let p_values: Vec<f64> = candidates
            .iter()
            .map(|c| shift_p_value(c.result.z_full))
            .collect();
        let keep = holm_significant(&p_values, alpha_family);
        for (c, sig) in candidates.iter_mut().zip(keep) {
            c.result.flagged = sig
                && c.result
                    .relative_shift
                    .map(|r| r > c.result.rho_min)
                    .unwrap_or(false);
        }
    }
    Ok(GroupOutcome::Pd { candidates })
}
