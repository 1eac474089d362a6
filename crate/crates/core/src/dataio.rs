//! Dataset ingestion, validation, and summary statistics.
//!
//! Audits are pre-registered, so ingestion is strict: bound columns must
//! parse as numbers in every row, the protected column must be 0/1, and a
//! log-scale response must be strictly positive. Nothing is imputed and
//! nothing is silently dropped. Unbound columns pass through untouched.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{AuditError, Result};
use crate::regression::{DesignMatrix, ResponseVector};

/// Whether a model runs on the raw response or its natural log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelScale {
    Level,
    Log,
}

/// Column-role assignments used to validate and bind a CSV file.
#[derive(Debug, Clone)]
pub struct BindingSpec {
    pub response: String,
    pub protected: String,
    pub controls: Vec<String>,
    pub proxies: Vec<String>,
    pub group: Option<String>,
    /// Set for log-scale audits; enforces a strictly positive response.
    pub require_positive_response: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    Text(Vec<String>),
}

impl ColumnData {
    fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Text(v) => v.len(),
        }
    }

    fn subset(&self, idx: &[usize]) -> ColumnData {
        match self {
            ColumnData::Numeric(v) => ColumnData::Numeric(idx.iter().map(|i| v[*i]).collect()),
            ColumnData::Text(v) => ColumnData::Text(idx.iter().map(|i| v[*i].clone()).collect()),
        }
    }
}

/// Resolved role bindings (indices into the header).
#[derive(Debug, Clone, PartialEq)]
pub struct RoleBindings {
    pub response: usize,
    pub protected: usize,
    pub controls: Vec<usize>,
    pub proxies: Vec<usize>,
    pub group: Option<usize>,
}

/// An immutable, validated observation table.
#[derive(Debug, Clone)]
pub struct AuditDataset {
    header: Vec<String>,
    columns: Vec<ColumnData>,
    bindings: RoleBindings,
    digest: Option<String>,
}

impl PartialEq for AuditDataset {
    // Source digest is provenance, not content.
    fn eq(&self, other: &Self) -> bool {
        self.header == other.header
            && self.columns == other.columns
            && self.bindings == other.bindings
    }
}

impl AuditDataset {
    /// Build a dataset from in-memory columns; used by the synthetic lab
    /// and tests. Bound columns must be numeric.
    pub fn from_columns(
        columns: Vec<(String, ColumnData)>,
        spec: &BindingSpec,
    ) -> Result<AuditDataset> {
        let header: Vec<String> = columns.iter().map(|(n, _)| n.clone()).collect();
        let n = columns.first().map(|(_, c)| c.len()).unwrap_or(0);
        for (name, c) in &columns {
            if c.len() != n {
                return Err(AuditError::DimensionMismatch {
                    context: "column lengths",
                    expected: n,
                    actual: c.len(),
                });
            }
            let _ = name;
        }
        let cols: Vec<ColumnData> = columns.into_iter().map(|(_, c)| c).collect();
        let bindings = resolve_bindings(&header, spec)?;
        let ds = AuditDataset {
            header,
            columns: cols,
            bindings,
            digest: None,
        };
        ds.validate(spec)?;
        let digest = hex::encode(Sha256::digest(ds.canonical_csv_bytes()?));
        Ok(AuditDataset {
            digest: Some(digest),
            ..ds
        })
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map(|c| c.len()).unwrap_or(0)
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn bindings(&self) -> &RoleBindings {
        &self.bindings
    }

    /// SHA-256 of the ingested bytes (or of the canonical serialization
    /// for programmatic datasets).
    pub fn digest(&self) -> Option<&str> {
        self.digest.as_deref()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn column(&self, name: &str) -> Result<&ColumnData> {
        self.column_index(name)
            .map(|i| &self.columns[i])
            .ok_or_else(|| AuditError::MissingColumn { name: name.into() })
    }

    pub fn numeric(&self, name: &str) -> Result<&[f64]> {
        match self.column(name)? {
            ColumnData::Numeric(v) => Ok(v),
            ColumnData::Text(_) => Err(AuditError::NonNumericColumn { name: name.into() }),
        }
    }

    pub fn response_name(&self) -> &str {
        &self.header[self.bindings.response]
    }

    pub fn protected_name(&self) -> &str {
        &self.header[self.bindings.protected]
    }

    pub fn control_names(&self) -> Vec<&str> {
        self.bindings
            .controls
            .iter()
            .map(|i| self.header[*i].as_str())
            .collect()
    }

    pub fn proxy_names(&self) -> Vec<&str> {
        self.bindings
            .proxies
            .iter()
            .map(|i| self.header[*i].as_str())
            .collect()
    }

    fn group_values(&self) -> Result<Vec<String>> {
        let gi = self.bindings.group.ok_or(AuditError::MissingColumn {
            name: "<group role unbound>".into(),
        })?;
        Ok(match &self.columns[gi] {
            ColumnData::Text(v) => v.clone(),
            ColumnData::Numeric(v) => v.iter().map(|x| format!("{x}")).collect(),
        })
    }

    /// Distinct group labels in sorted order.
    pub fn group_labels(&self) -> Result<Vec<String>> {
        let mut set: Vec<String> = self.group_values()?;
        set.sort();
        set.dedup();
        Ok(set)
    }

    /// Observation count per group, sorted by group id.
    pub fn group_sizes(&self) -> Result<BTreeMap<String, usize>> {
        let mut m = BTreeMap::new();
        for g in self.group_values()? {
            *m.entry(g).or_insert(0) += 1;
        }
        Ok(m)
    }

    /// Rows belonging to one group. Empty result is legal; downstream
    /// fitting reports InsufficientObservations.
    pub fn filter_group(&self, group: &str) -> Result<AuditDataset> {
        let values = self.group_values()?;
        let idx: Vec<usize> = values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| (v == group).then_some(i))
            .collect();
        Ok(self.subset(&idx))
    }

    /// Row subset in the given index order.
    pub fn subset(&self, idx: &[usize]) -> AuditDataset {
        AuditDataset {
            header: self.header.clone(),
            columns: self.columns.iter().map(|c| c.subset(idx)).collect(),
            bindings: self.bindings.clone(),
            digest: None,
        }
    }

    /// Assemble a design matrix from named numeric columns, with an
    /// intercept column prepended when requested.
    pub fn design(&self, columns: &[&str], intercept: bool) -> Result<DesignMatrix> {
        let n = self.n_rows();
        let mut named: Vec<(&str, &[f64])> = Vec::with_capacity(columns.len() + 1);
        let ones = vec![1.0; n];
        if intercept {
            named.push(("intercept", &ones));
        }
        for c in columns {
            named.push((c, self.numeric(c)?));
        }
        DesignMatrix::from_named_columns(&named)
    }

    /// The bound response on the requested scale.
    pub fn response_vector(&self, scale: ModelScale) -> Result<ResponseVector> {
        let raw = match &self.columns[self.bindings.response] {
            ColumnData::Numeric(v) => v,
            ColumnData::Text(_) => {
                return Err(AuditError::NonNumericColumn {
                    name: self.response_name().into(),
                })
            }
        };
        match scale {
            ModelScale::Level => ResponseVector::new(raw.clone()),
            ModelScale::Log => {
                let mut out = Vec::with_capacity(raw.len());
                for (i, v) in raw.iter().enumerate() {
                    if *v <= 0.0 {
                        return Err(AuditError::NonpositiveResponseForLog { row: i, value: *v });
                    }
                    out.push(v.ln());
                }
                ResponseVector::new(out)
            }
        }
    }

    fn validate(&self, spec: &BindingSpec) -> Result<()> {
        let protected = match &self.columns[self.bindings.protected] {
            ColumnData::Numeric(v) => v,
            ColumnData::Text(_) => {
                return Err(AuditError::NonNumericColumn {
                    name: self.protected_name().into(),
                })
            }
        };
        for (i, v) in protected.iter().enumerate() {
            if *v != 0.0 && *v != 1.0 {
                return Err(AuditError::NonBinaryProtected { row: i, value: *v });
            }
        }
        let mut bound = vec![self.bindings.response];
        bound.extend(&self.bindings.controls);
        bound.extend(&self.bindings.proxies);
        for bi in bound {
            if let ColumnData::Text(_) = self.columns[bi] {
                return Err(AuditError::NonNumericColumn {
                    name: self.header[bi].clone(),
                });
            }
        }
        if spec.require_positive_response {
            if let ColumnData::Numeric(v) = &self.columns[self.bindings.response] {
                for (i, y) in v.iter().enumerate() {
                    if *y <= 0.0 {
                        return Err(AuditError::NonpositiveResponse { row: i, value: *y });
                    }
                }
            }
        }
        Ok(())
    }

    /// Write the full table as CSV. Numeric cells use the shortest
    /// round-trip representation, so write-then-load is lossless.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        let n = self.n_rows();
        for i in 0..n {
            let row: Vec<String> = self
                .columns
                .iter()
                .map(|c| match c {
                    ColumnData::Numeric(v) => format!("{}", v[i]),
                    ColumnData::Text(v) => v[i].clone(),
                })
                .collect();
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn canonical_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(buf)
    }
}

fn resolve_bindings(header: &[String], spec: &BindingSpec) -> Result<RoleBindings> {
    let find = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| AuditError::MissingColumn { name: name.into() })
    };
    // A column may serve as both a control and a proxy candidate (the
    // models drawing on the roles differ), but the response and the
    // protected attribute must not double as covariates.
    for covariate in spec.controls.iter().chain(spec.proxies.iter()) {
        if covariate == &spec.response || covariate == &spec.protected {
            return Err(AuditError::DuplicateLabel {
                label: covariate.clone(),
            });
        }
    }
    if spec.response == spec.protected {
        return Err(AuditError::DuplicateLabel {
            label: spec.response.clone(),
        });
    }
    for (i, c) in spec.controls.iter().enumerate() {
        if spec.controls[..i].contains(c) {
            return Err(AuditError::DuplicateLabel { label: c.clone() });
        }
    }
    for (i, c) in spec.proxies.iter().enumerate() {
        if spec.proxies[..i].contains(c) {
            return Err(AuditError::DuplicateLabel { label: c.clone() });
        }
    }
    Ok(RoleBindings {
        response: find(&spec.response)?,
        protected: find(&spec.protected)?,
        controls: spec
            .controls
            .iter()
            .map(|c| find(c))
            .collect::<Result<_>>()?,
        proxies: spec
            .proxies
            .iter()
            .map(|c| find(c))
            .collect::<Result<_>>()?,
        group: spec.group.as_deref().map(find).transpose()?,
    })
}

/// Load and validate a dataset from a CSV file.
pub fn load_csv(path: &Path, spec: &BindingSpec) -> Result<AuditDataset> {
    let bytes = std::fs::read(path)?;
    load_csv_bytes(&bytes, spec)
}

/// Same as [`load_csv`] but from raw bytes; the manifest digest is the
/// SHA-256 of exactly these bytes.
pub fn load_csv_bytes(bytes: &[u8], spec: &BindingSpec) -> Result<AuditDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(bytes);
    let header: Vec<String> = rdr.headers()?.iter().map(|s| s.to_string()).collect();
    let bindings = resolve_bindings(&header, spec)?;

    let mut raw: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    for (ri, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(AuditError::ParseError {
                row: ri + 1,
                col: "<record>".into(),
                detail: format!("expected {} fields, got {}", header.len(), rec.len()),
            });
        }
        for (ci, field) in rec.iter().enumerate() {
            raw[ci].push(field.to_string());
        }
    }

    let mut is_bound = vec![false; header.len()];
    is_bound[bindings.response] = true;
    is_bound[bindings.protected] = true;
    for c in &bindings.controls {
        is_bound[*c] = true;
    }
    for c in &bindings.proxies {
        is_bound[*c] = true;
    }

    let mut columns = Vec::with_capacity(header.len());
    for (ci, cells) in raw.into_iter().enumerate() {
        if Some(ci) == bindings.group {
            columns.push(ColumnData::Text(cells));
            continue;
        }
        let mut nums = Vec::with_capacity(cells.len());
        let mut ok = true;
        for (ri, cell) in cells.iter().enumerate() {
            match cell.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => nums.push(v),
                _ => {
                    if is_bound[ci] {
                        return Err(AuditError::ParseError {
                            row: ri + 1,
                            col: header[ci].clone(),
                            detail: format!("cannot parse `{cell}` as a number"),
                        });
                    }
                    ok = false;
                    break;
                }
            }
        }
        columns.push(if ok {
            ColumnData::Numeric(nums)
        } else {
            ColumnData::Text(cells)
        });
    }

    let ds = AuditDataset {
        header,
        columns,
        bindings,
        digest: Some(hex::encode(Sha256::digest(bytes))),
    };
    ds.validate(spec)?;
    Ok(ds)
}

/// One row of the summary table.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub column: String,
    pub mean: f64,
    pub sd: f64,
    pub max: f64,
    pub mean_unprotected: Option<f64>,
    pub mean_protected: Option<f64>,
    /// protected mean / unprotected mean.
    pub ratio: Option<f64>,
}

/// Per-column summary statistics, overall and by protected group.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryTable {
    pub n_rows: usize,
    pub n_groups: Option<usize>,
    pub rows: Vec<SummaryRow>,
}

/// Mean/SD/max per numeric column plus by-protected-group means and
/// their ratio.
pub fn summarize(data: &AuditDataset) -> Result<SummaryTable> {
    let protected_name = data.protected_name().to_string();
    let protected = data.numeric(&protected_name)?.to_vec();
    let mut rows = Vec::new();
    for (name, col) in data.header.iter().zip(&data.columns) {
        let v = match col {
            ColumnData::Numeric(v) => v,
            ColumnData::Text(_) => continue,
        };
        if v.is_empty() {
            continue;
        }
        // By-group means of the group indicator itself are vacuous.
        let is_protected = *name == protected_name;
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = if v.len() > 1 {
            v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

        let (mut s0, mut n0, mut s1, mut n1) = (0.0, 0usize, 0.0, 0usize);
        for (x, a) in v.iter().zip(&protected) {
            if *a == 1.0 {
                s1 += x;
                n1 += 1;
            } else {
                s0 += x;
                n0 += 1;
            }
        }
        let m0 = (n0 > 0).then(|| s0 / n0 as f64);
        let m1 = (n1 > 0).then(|| s1 / n1 as f64);
        let ratio = match (m0, m1) {
            (Some(a), Some(b)) if a == b => Some(1.0),
            (Some(a), Some(b)) => Some(b / a),
            _ => None,
        };
        rows.push(SummaryRow {
            column: name.clone(),
            mean,
            sd: var.sqrt(),
            max,
            mean_unprotected: m0,
            mean_protected: m1,
            ratio,
        });
    }
    Ok(SummaryTable {
        n_rows: data.n_rows(),
        n_groups: data.bindings.group.and_then(|_| {
            data.group_sizes().ok().map(|m| m.len())
        }),
        rows,
    })
}

impl SummaryTable {
    pub fn to_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "column",
            "mean",
            "sd",
            "max",
            "mean_unprotected",
            "mean_protected",
            "ratio",
        ])?;
        let fmt = |o: Option<f64>| o.map(|v| format!("{v}")).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.column.clone(),
                format!("{}", r.mean),
                format!("{}", r.sd),
                format!("{}", r.max),
                fmt(r.mean_unprotected),
                fmt(r.mean_protected),
                fmt(r.ratio),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl fmt::Display for SummaryTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "rows: {}", self.n_rows)?;
        if let Some(g) = self.n_groups {
            writeln!(f, "groups: {g}")?;
        }
        writeln!(
            f,
            "{:<20} {:>12} {:>12} {:>12} {:>12} {:>12} {:>8}",
            "column", "mean", "sd", "max", "mean A=0", "mean A=1", "ratio"
        )?;
        let opt = |o: Option<f64>| o.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into());
        for r in &self.rows {
            writeln!(
                f,
                "{:<20} {:>12.3} {:>12.3} {:>12.3} {:>12} {:>12} {:>8}",
                r.column,
                r.mean,
                r.sd,
                r.max,
                opt(r.mean_unprotected),
                opt(r.mean_protected),
                opt(r.ratio),
            )?;
        }
        Ok(())
    }
}
