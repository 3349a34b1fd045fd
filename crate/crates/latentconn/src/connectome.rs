//! Connectivity matrices over the 90-region AAL cerebral atlas.
//!
//! A subject's regional BOLD time series becomes a weighted graph: nodes are
//! atlas regions, edge weights are absolute Pearson correlations between the
//! regional signals. The 4005 upper-triangle weights, in a fixed row-major
//! order, are the subject's edge vector.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Abbreviated names of the 45 cerebral regions, one per hemisphere pair,
/// in standard AAL numbering order.
const AAL_PAIR_NAMES: [&str; 45] = [
    "PreCG", "SFGdor", "ORBsup", "MFG", "ORBmid", "IFGoperc", "IFGtriang", "ORBinf", "ROL",
    "SMA", "OLF", "SFGmed", "ORBsupmed", "REC", "INS", "ACG", "DCG", "PCG", "HIP", "PHG",
    "AMYG", "CAL", "CUN", "LING", "SOG", "MOG", "IOG", "FFG", "PoCG", "SPG", "IPL", "SMG",
    "ANG", "PCUN", "PCL", "CAU", "PUT", "PAL", "THA", "HES", "STG", "TPOsup", "MTG",
    "TPOmid", "ITG",
];

/// Ordered region labels defining node identity for every matrix in the crate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionAtlas {
    names: Vec<String>,
}

impl RegionAtlas {
    /// The 90-region cerebral atlas: left/right interleaved
    /// (`PreCG.L`, `PreCG.R`, `SFGdor.L`, ...).
    pub fn aal90() -> Self {
        let mut names = Vec::with_capacity(90);
        for pair in AAL_PAIR_NAMES {
            names.push(format!("{pair}.L"));
            names.push(format!("{pair}.R"));
        }
        RegionAtlas { names }
    }

    pub fn from_names(names: Vec<String>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for n in &names {
            if !seen.insert(n.clone()) {
                return Err(Error::Validation(format!("duplicate region label {n:?}")));
            }
        }
        if names.is_empty() {
            return Err(Error::Validation("atlas needs at least one region".into()));
        }
        Ok(RegionAtlas { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// T x n matrix of regional BOLD samples, row-major, one column per region.
#[derive(Debug, Clone)]
pub struct RoiTimeSeries {
    samples: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl RoiTimeSeries {
    pub fn new(samples: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if samples.len() != rows * cols {
            return Err(Error::Shape(format!(
                "time series buffer holds {} values, expected {rows}x{cols}",
                samples.len()
            )));
        }
        if rows < 3 {
            return Err(Error::Validation(format!(
                "need at least 3 time points, got {rows}"
            )));
        }
        if let Some(bad) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite sample at row {}, column {}",
                bad / cols,
                bad % cols
            )));
        }
        let ts = RoiTimeSeries { samples, rows, cols };
        for c in 0..cols {
            if ts.column_variance(c) == 0.0 {
                return Err(Error::DegenerateSeries(format!(
                    "column {c} has zero variance"
                )));
            }
        }
        Ok(ts)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.samples[r * self.cols + c]).collect()
    }

    fn column_variance(&self, c: usize) -> f64 {
        let n = self.rows as f64;
        let mean = (0..self.rows).map(|r| self.samples[r * self.cols + c]).sum::<f64>() / n;
        (0..self.rows)
            .map(|r| {
                let d = self.samples[r * self.cols + c] - mean;
                d * d
            })
            .sum::<f64>()
    }
}

/// Symmetric n x n matrix of absolute-correlation edge weights,
/// diagonal fixed at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityMatrix {
    weights: Vec<f64>,
    n: usize,
}

impl ConnectivityMatrix {
    pub fn from_weights(weights: Vec<f64>, n: usize) -> Result<Self> {
        if weights.len() != n * n {
            return Err(Error::Shape(format!(
                "matrix buffer holds {} values, expected {n}x{n}",
                weights.len()
            )));
        }
        for i in 0..n {
            if weights[i * n + i] != 0.0 {
                return Err(Error::Validation(format!("diagonal entry {i} must be 0")));
            }
            for j in (i + 1)..n {
                let w = weights[i * n + j];
                if w != weights[j * n + i] {
                    return Err(Error::Validation(format!(
                        "matrix not symmetric at ({i},{j})"
                    )));
                }
                if !(0.0..=1.0).contains(&w) {
                    return Err(Error::Validation(format!(
                        "edge weight {w} at ({i},{j}) outside [0,1]"
                    )));
                }
            }
        }
        Ok(ConnectivityMatrix { weights, n })
    }

    pub(crate) fn from_weights_unchecked(weights: Vec<f64>, n: usize) -> Self {
        debug_assert_eq!(weights.len(), n * n);
        ConnectivityMatrix { weights, n }
    }

    pub fn n_regions(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Upper-triangle edge weights in canonical row-major (i < j) order.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeVector {
    edges: Vec<f64>,
    n_regions: usize,
}

impl EdgeVector {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        let n_regions = regions_for_edge_count(edges.len())?;
        if let Some(bad) = edges.iter().position(|e| !(0.0..=1.0).contains(e)) {
            return Err(Error::Validation(format!(
                "edge {bad} value {} outside [0,1]",
                edges[bad]
            )));
        }
        Ok(EdgeVector { edges, n_regions })
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn n_regions(&self) -> usize {
        self.n_regions
    }

    pub fn values(&self) -> &[f64] {
        &self.edges
    }
}

/// Number of regions n such that n(n-1)/2 equals `len`, or a shape error.
pub fn regions_for_edge_count(len: usize) -> Result<usize> {
    // n^2 - n - 2len = 0
    let disc = 1.0 + 8.0 * len as f64;
    let n = ((1.0 + disc.sqrt()) / 2.0).round() as usize;
    if n < 2 || n * (n - 1) / 2 != len {
        return Err(Error::Shape(format!(
            "{len} is not a triangular edge count"
        )));
    }
    Ok(n)
}

/// Canonical index of edge (i, j), i < j, in the row-major upper triangle.
pub fn edge_index(i: usize, j: usize, n: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// Sample Pearson correlation of two equal-length series.
pub fn pearson_corr(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!(
            "series lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::Validation(format!(
            "need at least 3 samples, got {}",
            x.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateSeries(
            "zero-variance input to correlation".into(),
        ));
    }
    // Rounding can push |r| infinitesimally past 1; clamp to the exact bound.
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Absolute-Pearson connectivity matrix of a time series.
pub fn build_connectivity(ts: &RoiTimeSeries) -> Result<ConnectivityMatrix> {
    let n = ts.cols();
    let columns: Vec<Vec<f64>> = (0..n).map(|c| ts.column(c)).collect();
    let mut weights = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let r = pearson_corr(&columns[i], &columns[j]).map_err(|e| match e {
                Error::DegenerateSeries(_) => Error::DegenerateSeries(format!(
                    "column {i} or {j} has zero variance"
                )),
                other => other,
            })?;
            let w = r.abs();
            weights[i * n + j] = w;
            weights[j * n + i] = w;
        }
    }
    Ok(ConnectivityMatrix::from_weights_unchecked(weights, n))
}

/// Upper-triangle values of a matrix in canonical order.
pub fn vectorize_upper(m: &ConnectivityMatrix) -> EdgeVector {
    let n = m.n_regions();
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            edges.push(m.get(i, j));
        }
    }
    EdgeVector { edges, n_regions: n }
}

/// Inverse of [`vectorize_upper`]: symmetric matrix with zero diagonal.
pub fn devectorize(v: &EdgeVector) -> ConnectivityMatrix {
    let n = v.n_regions();
    let mut weights = vec![0.0; n * n];
    let mut k = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            weights[i * n + j] = v.edges[k];
            weights[j * n + i] = v.edges[k];
            k += 1;
        }
    }
    ConnectivityMatrix::from_weights_unchecked(weights, n)
}

/// Functional connectivity strength: per-node sum of incident edge weights.
pub fn fcs(m: &ConnectivityMatrix) -> Vec<f64> {
    let n = m.n_regions();
    (0..n)
        .map(|i| (0..n).filter(|&j| j != i).map(|j| m.get(i, j)).sum())
        .collect()
}

/// Normalized age channel appended to the network input (age/100, clamped).
pub fn normalize_age(age_years: f64) -> Result<f64> {
    if !age_years.is_finite() || !(0.0..=120.0).contains(&age_years) {
        return Err(Error::Validation(format!(
            "age {age_years} outside [0, 120]"
        )));
    }
    Ok((age_years / 100.0).clamp(0.0, 1.0))
}

/// Model input: edge vector followed by the normalized age channel.
pub fn assemble_input(v: &EdgeVector, age_years: f64) -> Result<Vec<f64>> {
    let age = normalize_age(age_years)?;
    let mut input = Vec::with_capacity(v.len() + 1);
    input.extend_from_slice(v.values());
    input.push(age);
    Ok(input)
}

// ---------------------------------------------------------------------------
// Subject records and manifests
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Diagnosis {
    Asd,
    Nc,
}

impl Diagnosis {
    pub fn as_str(&self) -> &'static str {
        match self {
            Diagnosis::Asd => "ASD",
            Diagnosis::Nc => "NC",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ASD" => Ok(Diagnosis::Asd),
            "NC" => Ok(Diagnosis::Nc),
            other => Err(Error::Parse(format!(
                "unknown group {other:?}, expected ASD or NC"
            ))),
        }
    }
}

/// One cohort member: identity, diagnosis, age, optional full-scale IQ,
/// and the 4005-edge vector.
#[derive(Debug, Clone)]
pub struct SubjectRecord {
    pub id: String,
    pub group: Diagnosis,
    pub age: f64,
    pub fiq: Option<f64>,
    pub edges: EdgeVector,
}

/// One manifest row before the edge vector is attached.
#[derive(Debug, Clone)]
pub struct ManifestRow {
    pub id: String,
    pub group: Diagnosis,
    pub age: f64,
    pub fiq: Option<f64>,
}

pub const MANIFEST_HEADER: &str = "subject_id,group,age,fiq";

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse(format!("{}: empty manifest", path.display())))?;
    if header.trim_end_matches('\r') != MANIFEST_HEADER {
        return Err(Error::Parse(format!(
            "{}: manifest header must be {MANIFEST_HEADER:?}",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse(format!(
                "{}:{}: expected 4 fields, got {}",
                path.display(),
                lineno + 1,
                fields.len()
            )));
        }
        let age: f64 = fields[2].parse().map_err(|_| {
            Error::Parse(format!(
                "{}:{}: bad age {:?}",
                path.display(),
                lineno + 1,
                fields[2]
            ))
        })?;
        let fiq = if fields[3].is_empty() {
            None
        } else {
            Some(fields[3].parse().map_err(|_| {
                Error::Parse(format!(
                    "{}:{}: bad fiq {:?}",
                    path.display(),
                    lineno + 1,
                    fields[3]
                ))
            })?)
        };
        rows.push(ManifestRow {
            id: fields[0].to_string(),
            group: Diagnosis::parse(fields[1])?,
            age,
            fiq,
        });
    }
    Ok(rows)
}

pub fn write_manifest(path: &Path, rows: &[ManifestRow]) -> Result<()> {
    let mut out = String::new();
    out.push_str(MANIFEST_HEADER);
    out.push('\n');
    for r in rows {
        let fiq = r.fiq.map(|v| fmt_sig(v, 9)).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{}", r.id, r.group.as_str(), fmt_sig(r.age, 9), fiq);
    }
    std::fs::write(path, out)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// CSV formats
// ---------------------------------------------------------------------------

/// Plain-decimal formatting with a fixed number of significant digits.
pub fn fmt_sig(v: f64, sig: usize) -> String {
    if v == 0.0 {
        return "0.0".to_string();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    let decimals = (sig as i32 - 1 - exp).clamp(0, 40) as usize;
    format!("{v:.decimals$}")
}

/// Time-series CSV: T rows x n columns of BOLD samples, with an optional
/// header row naming the atlas regions.
pub fn read_timeseries_csv(path: &Path, atlas: &RegionAtlas) -> Result<RoiTimeSeries> {
    let text = std::fs::read_to_string(path)?;
    let mut samples: Vec<f64> = Vec::new();
    let mut rows = 0usize;
    let n = atlas.len();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if lineno == 0 && fields[0].trim().parse::<f64>().is_err() {
            // header row: must match the atlas labels exactly
            let labels: Vec<String> = fields.iter().map(|f| f.trim().to_string()).collect();
            if labels != atlas.names() {
                return Err(Error::Validation(format!(
                    "{}: header does not match the {}-region atlas",
                    path.display(),
                    n
                )));
            }
            continue;
        }
        if fields.len() != n {
            return Err(Error::Shape(format!(
                "{}:{}: expected {n} columns, got {}",
                path.display(),
                lineno + 1,
                fields.len()
            )));
        }
        for f in &fields {
            samples.push(f.trim().parse::<f64>().map_err(|_| {
                Error::Parse(format!(
                    "{}:{}: bad value {f:?}",
                    path.display(),
                    lineno + 1
                ))
            })?);
        }
        rows += 1;
    }
    RoiTimeSeries::new(samples, rows, n)
}

/// Connectivity CSV: full symmetric n x n matrix, 9 significant digits.
pub fn write_matrix_csv(path: &Path, m: &ConnectivityMatrix) -> Result<()> {
    let n = m.n_regions();
    let mut out = String::with_capacity(n * n * 12);
    for i in 0..n {
        for j in 0..n {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&fmt_sig(m.get(i, j), 9));
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<ConnectivityMatrix> {
    let text = std::fs::read_to_string(path)?;
    let mut values = Vec::new();
    let mut rows = 0usize;
    let mut cols = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        match cols {
            None => cols = Some(fields.len()),
            Some(c) if c != fields.len() => {
                return Err(Error::Shape(format!(
                    "{}:{}: ragged row, expected {c} columns",
                    path.display(),
                    lineno + 1
                )))
            }
            _ => {}
        }
        for f in &fields {
            values.push(f.trim().parse::<f64>().map_err(|_| {
                Error::Parse(format!(
                    "{}:{}: bad value {f:?}",
                    path.display(),
                    lineno + 1
                ))
            })?);
        }
        rows += 1;
    }
    let n = cols.unwrap_or(0);
    if rows != n || n == 0 {
        return Err(Error::Shape(format!(
            "{}: expected square matrix, got {rows}x{n}",
            path.display()
        )));
    }
    ConnectivityMatrix::from_weights(values, n)
}

/// Edge CSV: one line, n(n-1)/2 comma-separated weights in canonical order.
pub fn write_edges_csv(path: &Path, v: &EdgeVector) -> Result<()> {
    let mut out = String::with_capacity(v.len() * 12);
    for (k, e) in v.values().iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        out.push_str(&fmt_sig(*e, 9));
    }
    out.push('\n');
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_edges_csv(path: &Path) -> Result<EdgeVector> {
    let text = std::fs::read_to_string(path)?;
    let line = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .ok_or_else(|| Error::Parse(format!("{}: empty edge file", path.display())))?;
    let mut edges = Vec::new();
    for f in line.trim_end_matches('\r').split(',') {
        edges.push(f.trim().parse::<f64>().map_err(|_| {
            Error::Parse(format!("{}: bad value {f:?}", path.display()))
        })?);
    }
    EdgeVector::new(edges)
}
