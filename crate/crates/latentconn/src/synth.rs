//! Synthetic cohort generator.
//!
//! Builds a cohort whose edge vectors carry two latent factors, so the whole
//! pipeline can be exercised and verified without any real data:
//!
//! * a group factor planted on a configurable edge subset, with a mean that
//!   differs by diagnosis and an optional (negative) coupling to IQ;
//! * a group-independent global factor loading every edge, standing in for
//!   the dominant cohort-wide variation real connectivity data carries.
//!
//! Each subject's edges are
//! `base + factor * loadings + global * global_loadings + noise`, clamped
//! to [0, 1].

use serde::{Deserialize, Serialize};

use crate::connectome::{edge_index, Diagnosis, EdgeVector, RegionAtlas, SubjectRecord};
use crate::error::{Error, Result};
use crate::rng::{tags, Rng64};

/// Region abbreviations (both hemispheres) whose mutual edges carry the
/// planted factor by default: medial frontal plus parietal association
/// cortex.
pub const DEFAULT_PLANTED_REGIONS: [&str; 9] =
    ["SFGdor", "SFGmed", "REC", "MFG", "SPG", "IPL", "SMG", "ANG", "PCUN"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub subjects: usize,
    pub asd_fraction: f64,
    /// Region abbreviations (hemisphere suffix optional) selecting the
    /// planted edge subset.
    pub regions: Vec<String>,
    /// When true (default) the planted set is every edge incident to a
    /// selected region; when false, only edges between selected regions.
    pub plant_incident: bool,
    pub loading_low: f64,
    pub loading_high: f64,
    /// Factor mean for ASD is +group_shift, for NC -group_shift; the
    /// within-group factor SD is 1.
    pub group_shift: f64,
    /// Loading range for the group-independent global factor over all edges.
    pub global_loading_low: f64,
    pub global_loading_high: f64,
    pub noise_sd: f64,
    pub base_low: f64,
    pub base_high: f64,
    pub age_mean: f64,
    pub age_sd: f64,
    pub age_min: f64,
    pub age_max: f64,
    pub iq_mean: f64,
    /// IQ points per unit of the planted factor (negative couples high
    /// factor values to low IQ).
    pub iq_coupling: f64,
    pub iq_noise_sd: f64,
    /// Fraction of subjects with no IQ on record.
    pub iq_missing_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            subjects: 600,
            asd_fraction: 0.5,
            regions: DEFAULT_PLANTED_REGIONS.iter().map(|s| s.to_string()).collect(),
            plant_incident: true,
            loading_low: 0.10,
            loading_high: 0.20,
            group_shift: 1.2,
            global_loading_low: 0.03,
            global_loading_high: 0.07,
            noise_sd: 0.02,
            base_low: 0.3,
            base_high: 0.7,
            age_mean: 16.5,
            age_sd: 7.5,
            age_min: 6.0,
            age_max: 58.0,
            iq_mean: 105.0,
            iq_coupling: -5.0,
            iq_noise_sd: 10.0,
            iq_missing_fraction: 0.2,
            seed: 7,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.subjects < 4 {
            return Err(Error::Validation("need at least 4 subjects".into()));
        }
        let n_asd = self.n_asd();
        if n_asd == 0 || n_asd == self.subjects {
            return Err(Error::Validation(
                "both groups must be non-empty; adjust asd_fraction".into(),
            ));
        }
        if !(0.0 <= self.loading_low && self.loading_low <= self.loading_high) {
            return Err(Error::Validation("loading range must satisfy 0 <= low <= high".into()));
        }
        if !(0.0 <= self.global_loading_low && self.global_loading_low <= self.global_loading_high)
        {
            return Err(Error::Validation(
                "global loading range must satisfy 0 <= low <= high".into(),
            ));
        }
        if self.noise_sd < 0.0 || self.iq_noise_sd < 0.0 || self.age_sd < 0.0 {
            return Err(Error::Validation("noise SDs must be nonnegative".into()));
        }
        if !(0.0 <= self.base_low && self.base_low <= self.base_high && self.base_high <= 1.0) {
            return Err(Error::Validation("base range must sit inside [0,1]".into()));
        }
        if !(0.0..=1.0).contains(&self.iq_missing_fraction) {
            return Err(Error::Validation("iq_missing_fraction outside [0,1]".into()));
        }
        if self.age_min > self.age_max || self.age_min < 0.0 || self.age_max > 120.0 {
            return Err(Error::Validation("age bounds must satisfy 0 <= min <= max <= 120".into()));
        }
        if self.regions.is_empty() {
            return Err(Error::Validation("planted region set is empty".into()));
        }
        Ok(())
    }

    pub fn n_asd(&self) -> usize {
        ((self.subjects as f64) * self.asd_fraction).round() as usize
    }

    /// Atlas indices of the planted regions; a bare abbreviation selects
    /// both hemispheres.
    pub fn planted_region_indices(&self, atlas: &RegionAtlas) -> Result<Vec<usize>> {
        let mut indices = Vec::new();
        for name in &self.regions {
            if let Some(idx) = atlas.index_of(name) {
                indices.push(idx);
                continue;
            }
            let left = atlas.index_of(&format!("{name}.L"));
            let right = atlas.index_of(&format!("{name}.R"));
            match (left, right) {
                (Some(l), Some(r)) => {
                    indices.push(l);
                    indices.push(r);
                }
                _ => {
                    return Err(Error::Validation(format!(
                        "region {name:?} not found in the atlas"
                    )))
                }
            }
        }
        indices.sort_unstable();
        indices.dedup();
        Ok(indices)
    }
}

/// Generated cohort plus the ground truth needed by recovery checks.
#[derive(Debug, Clone)]
pub struct SyntheticCohort {
    pub subjects: Vec<SubjectRecord>,
    /// Canonical indices of edges carrying the planted group factor.
    pub planted_edges: Vec<usize>,
    /// Loading per planted edge (same order as `planted_edges`).
    pub loadings: Vec<f64>,
    /// Planted group factor value per subject.
    pub factor: Vec<f64>,
    /// Global factor value per subject.
    pub global_factor: Vec<f64>,
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticCohort> {
    spec.validate()?;
    let atlas = RegionAtlas::aal90();
    let n = atlas.len();
    let n_edges = n * (n - 1) / 2;

    let region_idx = spec.planted_region_indices(&atlas)?;
    let selected: Vec<bool> = {
        let mut mask = vec![false; n];
        for &i in &region_idx {
            mask[i] = true;
        }
        mask
    };
    let mut planted_edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let planted = if spec.plant_incident {
                selected[i] || selected[j]
            } else {
                selected[i] && selected[j]
            };
            if planted {
                planted_edges.push(edge_index(i, j, n));
            }
        }
    }
    if planted_edges.is_empty() {
        return Err(Error::Validation(
            "planted region set yields no edges; need at least 2 regions".into(),
        ));
    }

    // base pattern and loadings are cohort-level draws
    let mut base_rng = Rng64::stream(spec.seed, tags::SYNTH_BASE);
    let base: Vec<f64> = (0..n_edges)
        .map(|_| base_rng.next_range(spec.base_low, spec.base_high))
        .collect();
    let mut loading_rng = Rng64::stream(spec.seed, tags::SYNTH_LOADINGS);
    let loadings: Vec<f64> = planted_edges
        .iter()
        .map(|_| loading_rng.next_range(spec.loading_low, spec.loading_high))
        .collect();
    // global loadings signed so the global factor is not a uniform offset
    let global_loadings: Vec<f64> = (0..n_edges)
        .map(|_| {
            let magnitude =
                loading_rng.next_range(spec.global_loading_low, spec.global_loading_high);
            if loading_rng.next_f64() < 0.5 {
                -magnitude
            } else {
                magnitude
            }
        })
        .collect();

    let n_asd = spec.n_asd();
    let mut subject_rng = Rng64::stream(spec.seed, tags::SYNTH_SUBJECTS);
    let mut subjects = Vec::with_capacity(spec.subjects);
    let mut factors = Vec::with_capacity(spec.subjects);
    let mut globals = Vec::with_capacity(spec.subjects);
    for k in 0..spec.subjects {
        let group = if k < n_asd { Diagnosis::Asd } else { Diagnosis::Nc };
        let group_mean = match group {
            Diagnosis::Asd => spec.group_shift,
            Diagnosis::Nc => -spec.group_shift,
        };
        // draw order per subject: factor, global, age, iq noise, iq presence,
        // edge noise
        let factor = group_mean + subject_rng.next_normal();
        let global = subject_rng.next_normal();
        let age = (spec.age_mean + spec.age_sd * subject_rng.next_normal())
            .clamp(spec.age_min, spec.age_max);
        let iq_value = spec.iq_mean + spec.iq_coupling * factor
            + spec.iq_noise_sd * subject_rng.next_normal();
        let iq_present = subject_rng.next_f64() >= spec.iq_missing_fraction;
        let mut edges = base.clone();
        for (e, &gl) in edges.iter_mut().zip(&global_loadings) {
            *e += global * gl;
        }
        for (&e, &l) in planted_edges.iter().zip(&loadings) {
            edges[e] += factor * l;
        }
        for e in edges.iter_mut() {
            *e = (*e + spec.noise_sd * subject_rng.next_normal()).clamp(0.0, 1.0);
        }
        subjects.push(SubjectRecord {
            id: format!("S{:04}", k + 1),
            group,
            age,
            fiq: iq_present.then_some(iq_value),
            edges: EdgeVector::new(edges)?,
        });
        factors.push(factor);
        globals.push(global);
    }

    Ok(SyntheticCohort {
        subjects,
        planted_edges,
        loadings,
        factor: factors,
        global_factor: globals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> SyntheticSpec {
        SyntheticSpec { subjects: 20, seed: 5, ..SyntheticSpec::default() }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate(&small_spec()).unwrap();
        let b = generate(&small_spec()).unwrap();
        assert_eq!(a.subjects.len(), b.subjects.len());
        for (x, y) in a.subjects.iter().zip(&b.subjects) {
            assert_eq!(x.id, y.id);
            assert_eq!(x.edges.values(), y.edges.values());
            assert_eq!(x.fiq, y.fiq);
        }
    }

    #[test]
    fn zero_noise_zero_loadings_make_groups_identical() {
        let spec = SyntheticSpec {
            subjects: 10,
            noise_sd: 0.0,
            loading_low: 0.0,
            loading_high: 0.0,
            global_loading_low: 0.0,
            global_loading_high: 0.0,
            seed: 2,
            ..SyntheticSpec::default()
        };
        let cohort = generate(&spec).unwrap();
        let first = cohort.subjects[0].edges.values();
        for s in &cohort.subjects[1..] {
            assert_eq!(s.edges.values(), first);
        }
    }

    #[test]
    fn edges_stay_in_unit_interval() {
        let spec = SyntheticSpec {
            subjects: 12,
            loading_low: 0.4,
            loading_high: 0.9,
            noise_sd: 0.5,
            seed: 3,
            ..SyntheticSpec::default()
        };
        let cohort = generate(&spec).unwrap();
        for s in &cohort.subjects {
            assert!(s.edges.values().iter().all(|&e| (0.0..=1.0).contains(&e)));
        }
    }

    #[test]
    fn groups_split_by_fraction() {
        let cohort = generate(&small_spec()).unwrap();
        let asd = cohort.subjects.iter().filter(|s| s.group == Diagnosis::Asd).count();
        assert_eq!(asd, 10);
    }

    #[test]
    fn iq_couples_negatively_to_factor() {
        let spec = SyntheticSpec { subjects: 400, iq_missing_fraction: 0.0, seed: 11, ..SyntheticSpec::default() };
        let cohort = generate(&spec).unwrap();
        let x: Vec<f64> = cohort.factor.clone();
        let y: Vec<f64> = cohort.subjects.iter().map(|s| s.fiq.unwrap()).collect();
        let r = crate::connectome::pearson_corr(&x, &y).unwrap();
        assert!(r < -0.3, "expected strong negative coupling, got r = {r}");
    }

    #[test]
    fn planted_regions_resolve_both_hemispheres() {
        let spec = SyntheticSpec::default();
        let atlas = RegionAtlas::aal90();
        let idx = spec.planted_region_indices(&atlas).unwrap();
        assert_eq!(idx.len(), 2 * DEFAULT_PLANTED_REGIONS.len());
    }

    #[test]
    fn unknown_region_rejected() {
        let spec = SyntheticSpec { regions: vec!["NOPE".into()], ..SyntheticSpec::default() };
        assert!(matches!(generate(&spec), Err(Error::Validation(_))));
    }

    #[test]
    fn single_group_rejected() {
        let spec = SyntheticSpec { asd_fraction: 1.0, ..SyntheticSpec::default() };
        assert!(matches!(generate(&spec), Err(Error::Validation(_))));
    }
}
