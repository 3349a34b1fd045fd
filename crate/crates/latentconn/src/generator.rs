//! Generative visualization: decode latent coordinates into virtual
//! connectivity matrices, difference them against the cohort-mean matrix,
//! and summarize per-region strength changes.

use crate::connectome::{devectorize, fcs, ConnectivityMatrix, EdgeVector};
use crate::error::{Error, Result};
use crate::vae::VaeModel;

/// Signed edge differences between two generated matrices, with the latent
/// shift that produced them.
#[derive(Debug, Clone)]
pub struct DeltaMatrix {
    values: Vec<f64>,
    n: usize,
    pub feature: Option<usize>,
    /// Shift applied to the feature, in cohort-SD units (or the raw latent
    /// coordinate for manifold cells).
    pub shift: f64,
    pub age_years: f64,
}

impl DeltaMatrix {
    pub fn n_regions(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sum over the upper triangle (each edge once).
    pub fn edge_sum(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                acc += self.get(i, j);
            }
        }
        acc
    }

    /// Largest absolute entry; the symmetric color scale bound.
    pub fn abs_max(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Edge indices (canonical order) ranked by |delta|, largest first.
    pub fn edges_by_magnitude(&self) -> Vec<usize> {
        let mut edges = Vec::with_capacity(self.n * (self.n - 1) / 2);
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                edges.push(self.get(i, j));
            }
        }
        let mut order: Vec<usize> = (0..edges.len()).collect();
        order.sort_by(|&a, &b| {
            edges[b]
                .abs()
                .partial_cmp(&edges[a].abs())
                .unwrap()
                .then(a.cmp(&b))
        });
        order
    }
}

fn difference(a: &ConnectivityMatrix, b: &ConnectivityMatrix) -> Vec<f64> {
    a.weights().iter().zip(b.weights()).map(|(x, y)| x - y).collect()
}

/// Per-region strength changes with the set of regions past the annotation
/// threshold.
#[derive(Debug, Clone)]
pub struct FcsDelta {
    pub deltas: Vec<f64>,
    pub threshold: f64,
    pub annotated: Vec<usize>,
}

/// Decode a latent coordinate into a full connectivity matrix.
pub fn generate_matrix(model: &VaeModel, z: &[f64], age_years: f64) -> Result<ConnectivityMatrix> {
    let out = model.decode(z, age_years)?;
    let edges = EdgeVector::new(out)?;
    Ok(devectorize(&edges))
}

/// Latent coordinate for a shift of `shift_sd` cohort standard deviations on
/// feature `i`, all other features at their cohort means.
pub fn shifted_code(model: &VaeModel, i: usize, shift_sd: f64) -> Result<Vec<f64>> {
    let cohort = model.cohort()?;
    if i >= cohort.latent_mean.len() {
        return Err(Error::Validation(format!(
            "feature index {i} out of range for {} latent features",
            cohort.latent_mean.len()
        )));
    }
    let mut z = cohort.latent_mean.clone();
    z[i] += shift_sd * cohort.latent_sd[i];
    Ok(z)
}

/// Matrix generated at a +-SD shift of one feature minus the matrix
/// generated at the cohort mean. Age defaults to the cohort mean when `None`.
pub fn feature_delta(
    model: &VaeModel,
    i: usize,
    shift_sd: f64,
    age_years: Option<f64>,
) -> Result<DeltaMatrix> {
    let cohort = model.cohort()?;
    let age = age_years.unwrap_or(cohort.mean_age_years);
    let base = generate_matrix(model, &cohort.latent_mean.clone(), age)?;
    let shifted = generate_matrix(model, &shifted_code(model, i, shift_sd)?, age)?;
    Ok(DeltaMatrix {
        values: difference(&shifted, &base),
        n: base.n_regions(),
        feature: Some(i),
        shift: shift_sd,
        age_years: age,
    })
}

/// Evenly spaced lattice over both latent axes; each cell is the matrix at
/// (a, b) minus the matrix at the origin. Coordinates are raw latent values,
/// not SD units.
pub struct ManifoldGrid {
    pub coords: Vec<f64>,
    /// Row-major cells: row r varies the first feature, column c the second.
    pub cells: Vec<DeltaMatrix>,
    pub age_years: f64,
}

pub fn manifold_grid(
    model: &VaeModel,
    range: (f64, f64),
    steps: usize,
    age_years: Option<f64>,
) -> Result<ManifoldGrid> {
    if steps < 2 {
        return Err(Error::Validation(format!("steps {steps} must be at least 2")));
    }
    if !(range.0.is_finite() && range.1.is_finite()) || range.0 >= range.1 {
        return Err(Error::Validation(format!(
            "invalid latent range [{}, {}]",
            range.0, range.1
        )));
    }
    if model.latent_dim() != 2 {
        return Err(Error::Validation(format!(
            "manifold grid needs 2 latent features, model has {}",
            model.latent_dim()
        )));
    }
    let age = match age_years {
        Some(a) => a,
        None => model.cohort()?.mean_age_years,
    };
    let coords: Vec<f64> = (0..steps)
        .map(|k| range.0 + (range.1 - range.0) * k as f64 / (steps - 1) as f64)
        .collect();
    let origin = generate_matrix(model, &[0.0, 0.0], age)?;
    let mut cells = Vec::with_capacity(steps * steps);
    for &a in &coords {
        for &b in &coords {
            let m = generate_matrix(model, &[a, b], age)?;
            cells.push(DeltaMatrix {
                values: difference(&m, &origin),
                n: origin.n_regions(),
                feature: None,
                shift: 0.0,
                age_years: age,
            });
        }
    }
    Ok(ManifoldGrid { coords, cells, age_years: age })
}

/// Strength change per region between the shifted and mean generated
/// matrices, annotating |delta| above the threshold.
pub fn fcs_delta(
    model: &VaeModel,
    i: usize,
    shift_sd: f64,
    age_years: Option<f64>,
    threshold: f64,
) -> Result<FcsDelta> {
    let cohort = model.cohort()?;
    let age = age_years.unwrap_or(cohort.mean_age_years);
    let base = fcs(&generate_matrix(model, &cohort.latent_mean.clone(), age)?);
    let shifted = fcs(&generate_matrix(model, &shifted_code(model, i, shift_sd)?, age)?);
    let deltas: Vec<f64> = shifted.iter().zip(&base).map(|(s, b)| s - b).collect();
    let annotated = deltas
        .iter()
        .enumerate()
        .filter(|(_, d)| d.abs() > threshold)
        .map(|(k, _)| k)
        .collect();
    Ok(FcsDelta { deltas, threshold, annotated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::{Activation, DenseLayer, Network};
    use crate::vae::{CohortStats, TrainConfig, VaeModel};

    fn trained_toy_model(n_edges: usize, seed: u64) -> VaeModel {
        let config = TrainConfig {
            hidden_dims: vec![4],
            latent_dim: 2,
            seed,
            ..TrainConfig::default()
        };
        let mut model = VaeModel::new(n_edges, &config).unwrap();
        model.cohort = Some(CohortStats {
            latent_mean: vec![0.2, -0.4],
            latent_sd: vec![0.8, 1.3],
            mean_age_years: 17.0,
            n_subjects: 10,
        });
        model
    }

    #[test]
    fn generated_matrix_is_valid_connectivity() {
        let model = trained_toy_model(10, 1);
        let m = generate_matrix(&model, &[0.7, -1.1], 25.0).unwrap();
        assert_eq!(m.n_regions(), 5);
        for i in 0..5 {
            assert_eq!(m.get(i, i), 0.0);
            for j in 0..5 {
                assert_eq!(m.get(i, j), m.get(j, i));
                if i != j {
                    assert!(m.get(i, j) > 0.0 && m.get(i, j) < 1.0);
                }
            }
        }
        // deterministic
        let again = generate_matrix(&model, &[0.7, -1.1], 25.0).unwrap();
        assert_eq!(m.weights(), again.weights());
    }

    #[test]
    fn zero_shift_gives_exact_zero_delta() {
        let model = trained_toy_model(10, 2);
        let d = feature_delta(&model, 0, 0.0, None).unwrap();
        assert!(d.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn missing_cohort_stats_is_usage_error() {
        let config = TrainConfig { hidden_dims: vec![4], latent_dim: 2, seed: 3, ..TrainConfig::default() };
        let model = VaeModel::new(10, &config).unwrap();
        assert!(matches!(
            feature_delta(&model, 0, 1.0, None),
            Err(crate::error::Error::Usage(_))
        ));
    }

    #[test]
    fn linear_decoder_deltas_are_exact_negatives() {
        // identity activations and dyadic weights keep the arithmetic exact
        let config = TrainConfig { hidden_dims: vec![4], latent_dim: 2, seed: 4, ..TrainConfig::default() };
        let mut model = VaeModel::new(3, &config).unwrap();
        let mut w = vec![0.0; 3 * 3];
        for (k, val) in w.iter_mut().enumerate() {
            *val = ((k % 5) as f64 - 2.0) / 16.0;
        }
        let layer = DenseLayer {
            in_dim: 3,
            out_dim: 3,
            weights: w,
            biases: vec![0.5, 0.5, 0.5],
            activation: Activation::Identity,
        };
        model.decoder = Network::new(vec![layer]).unwrap();
        // mean age 25 keeps the normalized age channel (0.25) dyadic, so the
        // identity-activation arithmetic below is exact
        model.cohort = Some(CohortStats {
            latent_mean: vec![0.25, -0.5],
            latent_sd: vec![0.5, 0.5],
            mean_age_years: 25.0,
            n_subjects: 4,
        });
        let plus = feature_delta(&model, 1, 1.0, None).unwrap();
        let minus = feature_delta(&model, 1, -1.0, None).unwrap();
        for (p, m) in plus.values().iter().zip(minus.values()) {
            assert_eq!(*p, -*m);
        }
    }

    #[test]
    fn manifold_center_cell_is_zero() {
        let model = trained_toy_model(10, 5);
        let grid = manifold_grid(&model, (-2.0, 2.0), 5, None).unwrap();
        assert_eq!(grid.coords, vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
        assert_eq!(grid.cells.len(), 25);
        let center = &grid.cells[2 * 5 + 2];
        assert!(center.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn manifold_cell_matches_standalone_evaluation() {
        let model = trained_toy_model(10, 6);
        let grid = manifold_grid(&model, (-2.0, 2.0), 5, None).unwrap();
        let age = grid.age_years;
        let cell = &grid.cells[5]; // row 1 (a = -1), column 0 (b = -2)
        let m = generate_matrix(&model, &[-1.0, -2.0], age).unwrap();
        let origin = generate_matrix(&model, &[0.0, 0.0], age).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let expected = m.get(i, j) - origin.get(i, j);
                assert_eq!(cell.get(i, j), expected);
            }
        }
    }

    #[test]
    fn manifold_rejects_bad_arguments() {
        let model = trained_toy_model(10, 7);
        assert!(manifold_grid(&model, (-2.0, 2.0), 1, None).is_err());
        assert!(manifold_grid(&model, (2.0, -2.0), 5, None).is_err());
    }

    #[test]
    fn fcs_delta_zero_shift_empty_annotation() {
        let model = trained_toy_model(10, 8);
        let d = fcs_delta(&model, 0, 0.0, None, 1.5).unwrap();
        assert!(d.deltas.iter().all(|&v| v == 0.0));
        assert!(d.annotated.is_empty());
    }

    #[test]
    fn fcs_delta_node_sums_double_count_edges() {
        let model = trained_toy_model(10, 9);
        let fd = feature_delta(&model, 1, 1.0, None).unwrap();
        let nd = fcs_delta(&model, 1, 1.0, None, 1.5).unwrap();
        let node_sum: f64 = nd.deltas.iter().sum();
        assert!((node_sum - 2.0 * fd.edge_sum()).abs() < 1e-12);
    }

    #[test]
    fn fcs_delta_infinite_threshold_annotates_nothing() {
        let model = trained_toy_model(10, 10);
        let d = fcs_delta(&model, 0, 1.0, None, f64::INFINITY).unwrap();
        assert!(d.annotated.is_empty());
    }

    #[test]
    fn fcs_delta_consistent_with_feature_delta_per_node() {
        let model = trained_toy_model(10, 11);
        let fd = feature_delta(&model, 0, 1.0, None).unwrap();
        let nd = fcs_delta(&model, 0, 1.0, None, 1.5).unwrap();
        for i in 0..fd.n_regions() {
            let strength: f64 = (0..fd.n_regions()).filter(|&j| j != i).map(|j| fd.get(i, j)).sum();
            assert!((strength - nd.deltas[i]).abs() < 1e-12);
        }
    }
}
