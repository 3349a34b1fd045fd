//! Group statistics over the extracted latent features: two-sample t-test,
//! Pearson correlation with full-scale IQ, and rank-based ROC AUC.
//!
//! The Student t CDF is computed from the regularized incomplete beta
//! function (Lentz continued fraction), so no statistics library is needed.

use serde::{Deserialize, Serialize};

use crate::connectome::Diagnosis;
use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Special functions
// ---------------------------------------------------------------------------

/// ln Gamma(z) for z > 0 (Lanczos approximation).
pub fn ln_gamma(z: f64) -> f64 {
    const C: [f64; 6] = [
        76.18009172947146,
        -86.50532032941677,
        24.01409824083091,
        -1.231739572450155,
        0.1208650973866179e-2,
        -0.5395239384953e-5,
    ];
    let mut sum = 1.000000000190015;
    for (i, &c) in C.iter().enumerate() {
        sum += c / (z + i as f64 + 1.0);
    }
    let tmp = z + 5.5;
    (z + 0.5) * tmp.ln() - tmp + (2.5066282746310005 * sum / z).ln()
}

/// Regularized incomplete beta I_x(a, b) via the Lentz continued fraction.
pub fn inc_beta(x: f64, a: f64, b: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) || a <= 0.0 || b <= 0.0 {
        return f64::NAN;
    }
    if x == 0.0 {
        return 0.0;
    }
    if x == 1.0 {
        return 1.0;
    }
    if x > (a + 1.0) / (a + b + 2.0) {
        return 1.0 - inc_beta(1.0 - x, b, a);
    }
    let ln_front = a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b);
    let front = ln_front.exp();

    const TINY: f64 = 1e-30;
    const EPS: f64 = 1e-16;
    let mut f = 1.0;
    let mut c = 1.0;
    let mut d = 0.0;
    for m in 0..300 {
        let m_f = m as f64;
        let odd = -(a + m_f) * (a + b + m_f) * x / ((a + 2.0 * m_f) * (a + 2.0 * m_f + 1.0));
        let mut delta = lentz_step(odd, &mut c, &mut d, TINY);
        f *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
        let even =
            (m_f + 1.0) * (b - m_f - 1.0) * x / ((a + 2.0 * m_f + 1.0) * (a + 2.0 * m_f + 2.0));
        delta = lentz_step(even, &mut c, &mut d, TINY);
        f *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    front / (f * a)
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

fn lentz_step(coeff: f64, c: &mut f64, d: &mut f64, tiny: f64) -> f64 {
    *d = 1.0 + coeff * *d;
    if d.abs() < tiny {
        *d = tiny;
    }
    *d = 1.0 / *d;
    *c = 1.0 + coeff / *c;
    if c.abs() < tiny {
        *c = tiny;
    }
    *c * *d
}

/// Student t cumulative distribution function.
pub fn t_cdf(t: f64, df: f64) -> f64 {
    if df <= 0.0 || !t.is_finite() {
        return f64::NAN;
    }
    let x = df / (df + t * t);
    let half = 0.5 * inc_beta(x, 0.5 * df, 0.5);
    if t >= 0.0 {
        1.0 - half
    } else {
        half
    }
}

/// Two-sided tail probability of |T| >= |t|.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    inc_beta(df / (df + t * t), 0.5 * df, 0.5)
}

// ---------------------------------------------------------------------------
// Tests of group difference and association
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

fn mean_and_ss(sample: &[f64]) -> (f64, f64) {
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let ss = sample.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, ss)
}

/// Student's two-sample t-test with pooled variance, df = na + nb - 2.
pub fn ttest_ind(a: &[f64], b: &[f64]) -> Result<TTest> {
    validate_samples(a, b)?;
    let (ma, ssa) = mean_and_ss(a);
    let (mb, ssb) = mean_and_ss(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let df = na + nb - 2.0;
    let pooled = (ssa + ssb) / df;
    if pooled == 0.0 {
        return Err(Error::DegenerateSeries(
            "both samples have zero variance".into(),
        ));
    }
    let t = (ma - mb) / (pooled * (1.0 / na + 1.0 / nb)).sqrt();
    Ok(TTest { t, df, p: t_two_sided_p(t, df) })
}

/// Welch's unequal-variance variant (Welch-Satterthwaite df).
pub fn ttest_welch(a: &[f64], b: &[f64]) -> Result<TTest> {
    validate_samples(a, b)?;
    let (ma, ssa) = mean_and_ss(a);
    let (mb, ssb) = mean_and_ss(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let va = ssa / (na - 1.0) / na;
    let vb = ssb / (nb - 1.0) / nb;
    if va + vb == 0.0 {
        return Err(Error::DegenerateSeries(
            "both samples have zero variance".into(),
        ));
    }
    let df = (va + vb) * (va + vb) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let t = (ma - mb) / (va + vb).sqrt();
    Ok(TTest { t, df, p: t_two_sided_p(t, df) })
}

fn validate_samples(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "each sample needs at least 2 values, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Validation("non-finite sample value".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PearsonTest {
    pub r: f64,
    pub p: f64,
    pub n_used: usize,
}

/// Signed Pearson correlation with a two-sided p from
/// t = r sqrt((n-2)/(1-r^2)).
pub fn pearson_with_p(x: &[f64], y: &[f64]) -> Result<PearsonTest> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!(
            "paired samples differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 complete pairs, got {n}"
        )));
    }
    let r = crate::connectome::pearson_corr(x, y)?;
    let df = (n - 2) as f64;
    let p = if r.abs() >= 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        t_two_sided_p(t, df)
    };
    Ok(PearsonTest { r, p, n_used: n })
}

/// Drop pairs with a missing second value.
pub fn pairwise_complete(x: &[f64], y: &[Option<f64>]) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&a, b) in x.iter().zip(y) {
        if let Some(v) = b {
            xs.push(a);
            ys.push(*v);
        }
    }
    (xs, ys)
}

/// Rank-based AUC: P(score_pos > score_neg) + 0.5 P(tie). Reported as
/// computed, never flipped; orientation is conveyed separately.
pub fn roc_auc(scores: &[f64], is_positive: &[bool]) -> Result<f64> {
    if scores.len() != is_positive.len() {
        return Err(Error::Shape(format!(
            "scores and labels differ in length: {} vs {}",
            scores.len(),
            is_positive.len()
        )));
    }
    let n_pos = is_positive.iter().filter(|&&p| p).count();
    let n_neg = scores.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Validation(
            "AUC needs both classes present".into(),
        ));
    }
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("non-finite score".into()));
    }
    // midranks over the pooled sample
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[i].partial_cmp(&scores[j]).unwrap());
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = midrank;
        }
        i = j + 1;
    }
    let rank_sum_pos: f64 = ranks
        .iter()
        .zip(is_positive)
        .filter(|(_, &p)| p)
        .map(|(r, _)| r)
        .sum();
    let n_pos = n_pos as f64;
    let n_neg = n_neg as f64;
    let u = rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0;
    Ok(u / (n_pos * n_neg))
}

// ---------------------------------------------------------------------------
// Feature selection and reporting
// ---------------------------------------------------------------------------

pub const SELECTION_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureStats {
    pub index: usize,
    pub asd_mean: f64,
    pub asd_sd: f64,
    pub nc_mean: f64,
    pub nc_sd: f64,
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IqCorrelation {
    pub r: f64,
    pub p: f64,
    pub n_used: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AucReport {
    pub auc: f64,
    /// True when higher feature values associate with the ASD group
    /// (mean difference positive); the AUC value itself is never flipped.
    pub asd_higher: bool,
}

/// Full statistics report; serialized as JSON with these exact field names.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatsReport {
    pub n_subjects: usize,
    pub n_asd: usize,
    pub n_nc: usize,
    pub method: String,
    pub features: Vec<FeatureStats>,
    pub selected_feature: Option<usize>,
    pub iq_n_used: usize,
    pub iq_correlation: Option<IqCorrelation>,
    pub auc: Option<AucReport>,
    pub checkpoint_hash: Option<String>,
}

fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Per-feature group comparison; the feature with p below 0.05 is selected,
/// smallest p breaking ties. Returns `None` when no feature qualifies.
pub fn select_asd_feature(
    features: &[Vec<f64>],
    labels: &[Diagnosis],
    welch: bool,
) -> Result<(Option<usize>, Vec<FeatureStats>)> {
    if features.len() != labels.len() {
        return Err(Error::Shape(format!(
            "feature rows {} do not match labels {}",
            features.len(),
            labels.len()
        )));
    }
    if features.is_empty() {
        return Err(Error::Validation("no feature rows".into()));
    }
    let n_features = features[0].len();
    if features.iter().any(|row| row.len() != n_features) {
        return Err(Error::Shape("ragged feature rows".into()));
    }
    let has_asd = labels.contains(&Diagnosis::Asd);
    let has_nc = labels.contains(&Diagnosis::Nc);
    if !has_asd || !has_nc {
        return Err(Error::Validation(
            "both diagnosis groups must be present".into(),
        ));
    }
    let mut stats = Vec::with_capacity(n_features);
    for f in 0..n_features {
        let asd: Vec<f64> = features
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == Diagnosis::Asd)
            .map(|(row, _)| row[f])
            .collect();
        let nc: Vec<f64> = features
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == Diagnosis::Nc)
            .map(|(row, _)| row[f])
            .collect();
        let test = if welch { ttest_welch(&asd, &nc)? } else { ttest_ind(&asd, &nc)? };
        stats.push(FeatureStats {
            index: f,
            asd_mean: asd.iter().sum::<f64>() / asd.len() as f64,
            asd_sd: sample_sd(&asd),
            nc_mean: nc.iter().sum::<f64>() / nc.len() as f64,
            nc_sd: sample_sd(&nc),
            t: test.t,
            df: test.df,
            p: test.p,
        });
    }
    let selected = stats
        .iter()
        .filter(|s| s.p < SELECTION_ALPHA)
        .min_by(|a, b| a.p.partial_cmp(&b.p).unwrap())
        .map(|s| s.index);
    Ok((selected, stats))
}

impl StatsReport {
    /// Human-readable rendering of the same content as the JSON document.
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "subjects: {} ({} ASD, {} NC)", self.n_subjects, self.n_asd, self.n_nc);
        let _ = writeln!(out, "t-test: {}", self.method);
        let _ = writeln!(
            out,
            "{:<8} {:>12} {:>12} {:>12} {:>12} {:>10} {:>8} {:>12}",
            "feature", "ASD mean", "ASD sd", "NC mean", "NC sd", "t", "df", "p"
        );
        for f in &self.features {
            let _ = writeln!(
                out,
                "{:<8} {:>12.5} {:>12.5} {:>12.5} {:>12.5} {:>10.4} {:>8.1} {:>12.4e}",
                f.index, f.asd_mean, f.asd_sd, f.nc_mean, f.nc_sd, f.t, f.df, f.p
            );
        }
        match self.selected_feature {
            Some(idx) => {
                let _ = writeln!(out, "selected feature: {idx} (p < {SELECTION_ALPHA})");
            }
            None => {
                let _ = writeln!(out, "selected feature: none (no p < {SELECTION_ALPHA})");
            }
        }
        match &self.iq_correlation {
            Some(iq) => {
                let _ = writeln!(
                    out,
                    "IQ correlation: r = {:.4}, p = {:.4e}, n_used = {}",
                    iq.r, iq.p, iq.n_used
                );
            }
            None => {
                let _ = writeln!(out, "IQ correlation: absent (n_used = {})", self.iq_n_used);
            }
        }
        match &self.auc {
            Some(a) => {
                let dir = if a.asd_higher { "ASD higher" } else { "ASD lower" };
                let _ = writeln!(out, "AUC: {:.4} ({dir})", a.auc);
            }
            None => {
                let _ = writeln!(out, "AUC: absent");
            }
        }
        if let Some(hash) = &self.checkpoint_hash {
            let _ = writeln!(out, "checkpoint: {hash}");
        }
        out
    }
}
