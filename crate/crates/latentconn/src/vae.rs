//! Age-conditioned variational autoencoder over edge vectors.
//!
//! Encoder: edges + age (4006 for the 90-region atlas) -> two rectifier
//! hidden layers -> identity heads for the latent mean and log-variance.
//! Decoder: latent code + age -> two rectifier hidden layers -> sigmoid
//! output over the 4005 edges. The training objective is the reconstruction
//! negative log-likelihood plus the closed-form Gaussian KL term.

use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::connectome::{normalize_age, SubjectRecord};
use crate::error::{Error, Result};
use crate::nnet::{
    adadelta_step, Activation, Adadelta, AdadeltaState, DenseLayer, GradientSet, Network,
};
use crate::rng::{tags, Rng64};

/// Reconstruction likelihood over the edge dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReconLoss {
    /// Independent Bernoulli per edge (cross-entropy against sigmoid output).
    Bernoulli,
    /// Unit-variance Gaussian per edge (half squared error).
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub validation_fraction: f64,
    pub seed: u64,
    pub hidden_dims: Vec<usize>,
    pub latent_dim: usize,
    pub rho: f64,
    pub eps: f64,
    pub learning_rate: f64,
    pub reconstruction: ReconLoss,
    /// Fresh standard-normal draws per subject per epoch (losses and
    /// gradients are averaged over them).
    pub noise_draws: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 64,
            validation_fraction: 0.1,
            seed: 0,
            hidden_dims: vec![128, 128],
            latent_dim: 2,
            rho: 0.95,
            eps: 1e-6,
            learning_rate: 1.0,
            reconstruction: ReconLoss::Bernoulli,
            noise_draws: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::Validation("epochs must be at least 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Validation("batch size must be at least 1".into()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Validation(format!(
                "validation fraction {} outside (0,1)",
                self.validation_fraction
            )));
        }
        if self.latent_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::Validation("layer dimensions must be nonzero".into()));
        }
        if self.noise_draws == 0 {
            return Err(Error::Validation("noise draws must be at least 1".into()));
        }
        Adadelta { rho: self.rho, eps: self.eps, learning_rate: self.learning_rate }.validate()
    }

    pub fn optimizer(&self) -> Adadelta {
        Adadelta { rho: self.rho, eps: self.eps, learning_rate: self.learning_rate }
    }
}

/// Per-epoch mean-per-subject losses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub epoch: usize,
    pub train_total: f64,
    pub train_reconstruction: f64,
    pub train_kl: f64,
    pub validation_total: f64,
}

/// Latent posterior parameters for one subject, plus a sampled code.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentCode {
    pub mean: Vec<f64>,
    pub log_variance: Vec<f64>,
    pub sample: Vec<f64>,
}

/// Cohort-level latent statistics captured after training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortStats {
    pub latent_mean: Vec<f64>,
    pub latent_sd: Vec<f64>,
    pub mean_age_years: f64,
    pub n_subjects: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub reconstruction: f64,
    pub kl: f64,
    pub total: f64,
}

/// Encoder/decoder parameters plus latent heads and cohort statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VaeModel {
    pub encoder: Network,
    pub mu_head: Network,
    pub logvar_head: Network,
    pub decoder: Network,
    pub config: TrainConfig,
    pub cohort: Option<CohortStats>,
    pub history: Vec<LossRecord>,
}

impl VaeModel {
    /// Fresh model for `n_edges` edge dimensions; layer shapes come from the
    /// config, parameters from the init stream of `config.seed`.
    pub fn new(n_edges: usize, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        if n_edges == 0 {
            return Err(Error::Validation("edge dimension must be nonzero".into()));
        }
        let mut rng = Rng64::stream(config.seed, tags::PARAM_INIT);
        // consumption order: encoder trunk, mu head, logvar head, decoder
        let mut enc_dims = vec![n_edges + 1];
        enc_dims.extend_from_slice(&config.hidden_dims);
        let encoder = glorot_network(&enc_dims, Activation::Rectifier, Activation::Rectifier, &mut rng)?;
        let trunk_out = *enc_dims.last().unwrap();
        let mu_head = Network::new(vec![DenseLayer::glorot(
            trunk_out,
            config.latent_dim,
            Activation::Identity,
            &mut rng,
        )?])?;
        let logvar_head = Network::new(vec![DenseLayer::glorot(
            trunk_out,
            config.latent_dim,
            Activation::Identity,
            &mut rng,
        )?])?;
        let mut dec_dims = vec![config.latent_dim + 1];
        dec_dims.extend_from_slice(&config.hidden_dims);
        dec_dims.push(n_edges);
        let decoder = glorot_network(&dec_dims, Activation::Rectifier, Activation::Sigmoid, &mut rng)?;
        Ok(VaeModel {
            encoder,
            mu_head,
            logvar_head,
            decoder,
            config: config.clone(),
            cohort: None,
            history: Vec::new(),
        })
    }

    pub fn n_edges(&self) -> usize {
        self.decoder.out_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.mu_head.out_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.in_dim()
    }

    /// Noise-free encoding: the sampled code equals the posterior mean.
    pub fn encode(&self, input: &[f64]) -> Result<LatentCode> {
        if input.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "encoder expects {} inputs, got {}",
                self.input_dim(),
                input.len()
            )));
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite encoder input".into()));
        }
        let trunk = self.encoder.forward(input)?;
        let mean = self.mu_head.forward(&trunk)?;
        let log_variance = self.logvar_head.forward(&trunk)?;
        Ok(LatentCode { sample: mean.clone(), mean, log_variance })
    }

    /// Decode a latent code at a given age; entries land in (0, 1).
    pub fn decode(&self, z: &[f64], age_years: f64) -> Result<Vec<f64>> {
        if z.len() != self.latent_dim() {
            return Err(Error::Shape(format!(
                "decoder expects {} latent values, got {}",
                self.latent_dim(),
                z.len()
            )));
        }
        let mut dec_in = z.to_vec();
        dec_in.push(normalize_age(age_years)?);
        self.decoder.forward(&dec_in)
    }

    pub fn cohort(&self) -> Result<&CohortStats> {
        self.cohort
            .as_ref()
            .ok_or_else(|| Error::Usage("model has no cohort statistics; train it first".into()))
    }
}

fn glorot_network(
    dims: &[usize],
    hidden: Activation,
    output: Activation,
    rng: &mut Rng64,
) -> Result<Network> {
    let mut layers = Vec::with_capacity(dims.len() - 1);
    for (k, pair) in dims.windows(2).enumerate() {
        let act = if k + 2 == dims.len() { output } else { hidden };
        layers.push(DenseLayer::glorot(pair[0], pair[1], act, rng)?);
    }
    Network::new(layers)
}

/// z = mu + exp(log_variance / 2) * eps, elementwise.
pub fn reparameterize(code: &LatentCode, eps: &[f64]) -> Vec<f64> {
    code.mean
        .iter()
        .zip(&code.log_variance)
        .zip(eps)
        .map(|((&m, &lv), &e)| m + (0.5 * lv).exp() * e)
        .collect()
}

/// Closed-form KL divergence against the standard normal prior:
/// 0.5 * sum(mu^2 + sigma^2 - 1 - log sigma^2).
pub fn kl_divergence(mean: &[f64], log_variance: &[f64]) -> f64 {
    mean.iter()
        .zip(log_variance)
        .map(|(&m, &lv)| 0.5 * (m * m + lv.exp() - 1.0 - lv))
        .sum()
}

/// Objective terms for a reconstruction: Bernoulli negative log-likelihood
/// over the edges plus the KL regularizer.
pub fn elbo_loss(x: &[f64], reconstruction: &[f64], code: &LatentCode) -> Result<LossBreakdown> {
    if x.len() != reconstruction.len() {
        return Err(Error::Shape(format!(
            "target has {} dims, reconstruction {}",
            x.len(),
            reconstruction.len()
        )));
    }
    let mut recon = 0.0;
    for (k, (&t, &p)) in x.iter().zip(reconstruction).enumerate() {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Numeric(format!(
                "reconstruction value {p} at dim {k} outside (0,1)"
            )));
        }
        recon -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
    }
    let kl = kl_divergence(&code.mean, &code.log_variance);
    Ok(LossBreakdown { reconstruction: recon, kl, total: recon + kl })
}

// ---------------------------------------------------------------------------
// Gradients of the full objective
// ---------------------------------------------------------------------------

/// Gradients for all four model components.
#[derive(Debug, Clone)]
pub struct VaeGrads {
    pub encoder: GradientSet,
    pub mu_head: GradientSet,
    pub logvar_head: GradientSet,
    pub decoder: GradientSet,
}

impl VaeGrads {
    pub fn zeros_like(model: &VaeModel) -> Self {
        VaeGrads {
            encoder: GradientSet::zeros_like(&model.encoder),
            mu_head: GradientSet::zeros_like(&model.mu_head),
            logvar_head: GradientSet::zeros_like(&model.logvar_head),
            decoder: GradientSet::zeros_like(&model.decoder),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.encoder.scale(factor);
        self.mu_head.scale(factor);
        self.logvar_head.scale(factor);
        self.decoder.scale(factor);
    }

    pub fn is_finite(&self) -> bool {
        self.encoder.is_finite()
            && self.mu_head.is_finite()
            && self.logvar_head.is_finite()
            && self.decoder.is_finite()
    }
}

/// Total loss for one subject with a fixed noise vector. The reconstruction
/// target is the edge part of the input; the trailing age channel conditions
/// both encoder and decoder and is never reconstructed.
pub fn subject_loss(model: &VaeModel, input: &[f64], eps: &[f64]) -> Result<LossBreakdown> {
    let n_edges = model.n_edges();
    let code = model.encode(input)?;
    let z = reparameterize(&code, eps);
    let mut dec_in = z;
    dec_in.push(input[n_edges]);
    let x = &input[..n_edges];
    let recon = match model.config.reconstruction {
        ReconLoss::Bernoulli => {
            // computed from the output-layer logits for stability
            let cache = model.decoder.forward_cached(&dec_in)?;
            let pre = cache.pres.last().unwrap();
            bernoulli_nll_from_logits(pre, x)
        }
        ReconLoss::Gaussian => {
            let out = model.decoder.forward(&dec_in)?;
            0.5 * out
                .iter()
                .zip(x)
                .map(|(o, t)| {
                    let d = o - t;
                    d * d
                })
                .sum::<f64>()
        }
    };
    let kl = kl_divergence(&code.mean, &code.log_variance);
    Ok(LossBreakdown { reconstruction: recon, kl, total: recon + kl })
}

fn bernoulli_nll_from_logits(logits: &[f64], x: &[f64]) -> f64 {
    logits
        .iter()
        .zip(x)
        .map(|(&p, &t)| p.max(0.0) - p * t + (-p.abs()).exp().ln_1p())
        .sum()
}

/// Analytic gradients of the total objective for one subject with fixed
/// noise. Accumulates into `grads` and returns the loss terms.
pub fn subject_gradients(
    model: &VaeModel,
    input: &[f64],
    eps: &[f64],
    grads: &mut VaeGrads,
) -> Result<LossBreakdown> {
    let n_edges = model.n_edges();
    if input.len() != model.input_dim() {
        return Err(Error::Shape(format!(
            "encoder expects {} inputs, got {}",
            model.input_dim(),
            input.len()
        )));
    }
    let enc_cache = model.encoder.forward_cached(input)?;
    let trunk_out = enc_cache.output().to_vec();
    let mu_cache = model.mu_head.forward_cached(&trunk_out)?;
    let lv_cache = model.logvar_head.forward_cached(&trunk_out)?;
    let mean = mu_cache.output().to_vec();
    let log_var = lv_cache.output().to_vec();
    let half_sigma: Vec<f64> = log_var.iter().map(|&lv| (0.5 * lv).exp()).collect();
    let z: Vec<f64> = mean
        .iter()
        .zip(&half_sigma)
        .zip(eps)
        .map(|((&m, &s), &e)| m + s * e)
        .collect();
    let mut dec_in = z;
    dec_in.push(input[n_edges]);
    let dec_cache = model.decoder.forward_cached(&dec_in)?;
    let x = &input[..n_edges];

    let (recon, dec_in_grad) = match model.config.reconstruction {
        ReconLoss::Bernoulli => {
            let pre = dec_cache.pres.last().unwrap();
            let recon = bernoulli_nll_from_logits(pre, x);
            // d(loss)/d(logit) = sigmoid(logit) - x, already available as the output
            let dpre: Vec<f64> = dec_cache.output().iter().zip(x).map(|(o, t)| o - t).collect();
            let ig = model
                .decoder
                .backward_from_pre_into(&dec_cache, &dpre, &mut grads.decoder)?;
            (recon, ig)
        }
        ReconLoss::Gaussian => {
            let out = dec_cache.output();
            let recon = 0.5
                * out
                    .iter()
                    .zip(x)
                    .map(|(o, t)| {
                        let d = o - t;
                        d * d
                    })
                    .sum::<f64>();
            let dout: Vec<f64> = out.iter().zip(x).map(|(o, t)| o - t).collect();
            let ig = model.decoder.backward_into(&dec_cache, &dout, &mut grads.decoder)?;
            (recon, ig)
        }
    };

    let kl = kl_divergence(&mean, &log_var);

    let latent = model.latent_dim();
    let dz = &dec_in_grad[..latent];
    // d(total)/d(mu) = dz + mu; d(total)/d(logvar) = dz * eps * sigma/2 + (sigma^2 - 1)/2
    let dmu: Vec<f64> = dz.iter().zip(&mean).map(|(&g, &m)| g + m).collect();
    let dlv: Vec<f64> = dz
        .iter()
        .zip(&half_sigma)
        .zip(eps)
        .zip(&log_var)
        .map(|(((&g, &s), &e), &lv)| g * 0.5 * s * e + 0.5 * (lv.exp() - 1.0))
        .collect();

    let trunk_from_mu = model.mu_head.backward_into(&mu_cache, &dmu, &mut grads.mu_head)?;
    let trunk_from_lv = model
        .logvar_head
        .backward_into(&lv_cache, &dlv, &mut grads.logvar_head)?;
    let trunk_grad: Vec<f64> = trunk_from_mu
        .iter()
        .zip(&trunk_from_lv)
        .map(|(a, b)| a + b)
        .collect();
    model.encoder.backward_into(&enc_cache, &trunk_grad, &mut grads.encoder)?;

    Ok(LossBreakdown { reconstruction: recon, kl, total: recon + kl })
}

type ComponentAccess = fn(&mut VaeModel) -> &mut Network;

/// Gradient check for the full objective: max over every parameter of
/// |analytic - central difference| / max(1, |central difference|), with the
/// noise vector held fixed.
pub fn vae_grad_check(model: &VaeModel, input: &[f64], eps: &[f64], h: f64) -> Result<f64> {
    if h <= 0.0 {
        return Err(Error::Validation(format!("step size {h} must be positive")));
    }
    let mut grads = VaeGrads::zeros_like(model);
    let base = subject_gradients(model, input, eps, &mut grads)?;
    if !base.total.is_finite() {
        return Err(Error::Numeric("loss is not finite".into()));
    }
    let mut worst: f64 = 0.0;
    let mut probe = model.clone();
    let components: [(ComponentAccess, &GradientSet); 4] = [
        (|m| &mut m.encoder, &grads.encoder),
        (|m| &mut m.mu_head, &grads.mu_head),
        (|m| &mut m.logvar_head, &grads.logvar_head),
        (|m| &mut m.decoder, &grads.decoder),
    ];
    for (access, gset) in components {
        let n_layers = access(&mut probe).layers.len();
        for li in 0..n_layers {
            let n_w = access(&mut probe).layers[li].weights.len();
            for wi in 0..n_w {
                let orig = access(&mut probe).layers[li].weights[wi];
                access(&mut probe).layers[li].weights[wi] = orig + h;
                let plus = subject_loss(&probe, input, eps)?.total;
                access(&mut probe).layers[li].weights[wi] = orig - h;
                let minus = subject_loss(&probe, input, eps)?.total;
                access(&mut probe).layers[li].weights[wi] = orig;
                let numeric = (plus - minus) / (2.0 * h);
                let err = (gset.layers[li].weights[wi] - numeric).abs() / numeric.abs().max(1.0);
                worst = worst.max(err);
            }
            let n_b = access(&mut probe).layers[li].biases.len();
            for bi in 0..n_b {
                let orig = access(&mut probe).layers[li].biases[bi];
                access(&mut probe).layers[li].biases[bi] = orig + h;
                let plus = subject_loss(&probe, input, eps)?.total;
                access(&mut probe).layers[li].biases[bi] = orig - h;
                let minus = subject_loss(&probe, input, eps)?.total;
                access(&mut probe).layers[li].biases[bi] = orig;
                let numeric = (plus - minus) / (2.0 * h);
                let err = (gset.layers[li].biases[bi] - numeric).abs() / numeric.abs().max(1.0);
                worst = worst.max(err);
            }
        }
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Dataset split and training
// ---------------------------------------------------------------------------

/// Stratified split into (training, validation) index sets. Diagnosis labels
/// are used only to equalize class proportions; both returned sets preserve
/// the original subject order.
pub fn split_dataset(
    subjects: &[SubjectRecord],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Validation(format!(
            "validation fraction {fraction} outside (0,1)"
        )));
    }
    let asd: Vec<usize> = (0..subjects.len())
        .filter(|&i| subjects[i].group == crate::connectome::Diagnosis::Asd)
        .collect();
    let nc: Vec<usize> = (0..subjects.len())
        .filter(|&i| subjects[i].group == crate::connectome::Diagnosis::Nc)
        .collect();
    if asd.is_empty() || nc.is_empty() {
        return Err(Error::Validation(
            "both diagnosis groups must be present for a stratified split".into(),
        ));
    }
    let mut rng = Rng64::stream(seed, tags::DATASET_SPLIT);
    let mut validation = Vec::new();
    let mut training = Vec::new();
    // ASD shuffled first, then NC, from the same stream.
    for class in [asd, nc] {
        let mut indices = class;
        rng.shuffle(&mut indices);
        // round half away from zero keeps proportions within one subject
        let take = ((indices.len() as f64) * fraction).round() as usize;
        let take = take.min(indices.len());
        validation.extend_from_slice(&indices[..take]);
        training.extend_from_slice(&indices[take..]);
    }
    if validation.is_empty() || training.is_empty() {
        return Err(Error::Validation(format!(
            "fraction {fraction} leaves an empty partition"
        )));
    }
    validation.sort_unstable();
    training.sort_unstable();
    Ok((training, validation))
}

/// Train a fresh model on the cohort. Mini-batch Adadelta on the
/// mean-per-subject objective; one fresh noise draw per subject per epoch;
/// validation monitored noise-free. After the final epoch the cohort latent
/// statistics are computed from noise-free encodings of all subjects.
pub fn train(subjects: &[SubjectRecord], config: &TrainConfig) -> Result<(VaeModel, Vec<LossRecord>)> {
    config.validate()?;
    if subjects.is_empty() {
        return Err(Error::Validation("empty cohort".into()));
    }
    let n_edges = subjects[0].edges.len();
    if n_edges != 4005 {
        return Err(Error::Validation(format!(
            "training expects the 90-region atlas (4005 edges), got {n_edges}"
        )));
    }
    for s in subjects {
        if s.edges.len() != n_edges {
            return Err(Error::Shape(format!(
                "subject {} has {} edges, expected {n_edges}",
                s.id,
                s.edges.len()
            )));
        }
    }
    let inputs: Vec<Vec<f64>> = subjects
        .iter()
        .map(|s| crate::connectome::assemble_input(&s.edges, s.age))
        .collect::<Result<_>>()?;

    let (train_idx, val_idx) = split_dataset(subjects, config.validation_fraction, config.seed)?;
    if train_idx.len() < 2 || val_idx.len() < 2 {
        return Err(Error::Validation(format!(
            "need at least 2 subjects per partition, got {}/{}",
            train_idx.len(),
            val_idx.len()
        )));
    }

    let mut model = VaeModel::new(n_edges, config)?;
    let optimizer = config.optimizer();
    let mut states = [
        AdadeltaState::zeros_like(&model.encoder),
        AdadeltaState::zeros_like(&model.mu_head),
        AdadeltaState::zeros_like(&model.logvar_head),
        AdadeltaState::zeros_like(&model.decoder),
    ];

    let mut noise_rng = Rng64::stream(config.seed, tags::LATENT_NOISE);
    let mut shuffle_rng = Rng64::stream(config.seed, tags::EPOCH_SHUFFLE);
    let latent = config.latent_dim;
    let zero_eps = vec![0.0; latent];
    let mut records = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        // noise for every training subject, drawn in split order
        let eps_draws: Vec<Vec<Vec<f64>>> = train_idx
            .iter()
            .map(|_| {
                (0..config.noise_draws)
                    .map(|_| (0..latent).map(|_| noise_rng.next_normal()).collect())
                    .collect()
            })
            .collect();

        let mut order: Vec<usize> = (0..train_idx.len()).collect();
        shuffle_rng.shuffle(&mut order);

        let mut epoch_recon = 0.0;
        let mut epoch_kl = 0.0;
        for (batch_no, batch) in order.chunks(config.batch_size).enumerate() {
            let mut grads = VaeGrads::zeros_like(&model);
            for &pos in batch {
                let input = &inputs[train_idx[pos]];
                for eps in &eps_draws[pos] {
                    let terms = subject_gradients(&model, input, eps, &mut grads)?;
                    if !terms.total.is_finite() {
                        return Err(Error::Numeric(format!(
                            "non-finite training loss at epoch {epoch}, batch {batch_no}"
                        )));
                    }
                    let w = 1.0 / config.noise_draws as f64;
                    epoch_recon += w * terms.reconstruction;
                    epoch_kl += w * terms.kl;
                }
            }
            grads.scale(1.0 / (batch.len() * config.noise_draws) as f64);
            if !grads.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite gradient at epoch {epoch}, batch {batch_no}"
                )));
            }
            adadelta_step(&optimizer, &mut model.encoder, &grads.encoder, &mut states[0])?;
            adadelta_step(&optimizer, &mut model.mu_head, &grads.mu_head, &mut states[1])?;
            adadelta_step(&optimizer, &mut model.logvar_head, &grads.logvar_head, &mut states[2])?;
            adadelta_step(&optimizer, &mut model.decoder, &grads.decoder, &mut states[3])?;
        }

        let mut val_total = 0.0;
        for &i in &val_idx {
            let terms = subject_loss(&model, &inputs[i], &zero_eps)?;
            if !terms.total.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite validation loss at epoch {epoch}"
                )));
            }
            val_total += terms.total;
        }

        let n_train = train_idx.len() as f64;
        let recon = epoch_recon / n_train;
        let kl = epoch_kl / n_train;
        records.push(LossRecord {
            epoch,
            train_total: recon + kl,
            train_reconstruction: recon,
            train_kl: kl,
            validation_total: val_total / val_idx.len() as f64,
        });
    }

    // cohort latent statistics from noise-free encodings of all subjects
    let mut means = vec![0.0; latent];
    let mut codes = Vec::with_capacity(subjects.len());
    for input in &inputs {
        let code = model.encode(input)?;
        for (m, v) in means.iter_mut().zip(&code.mean) {
            *m += v;
        }
        codes.push(code.mean);
    }
    let n = subjects.len() as f64;
    for m in &mut means {
        *m /= n;
    }
    let mut sds = vec![0.0; latent];
    for code in &codes {
        for ((s, &v), &m) in sds.iter_mut().zip(code).zip(&means) {
            let d = v - m;
            *s += d * d;
        }
    }
    for s in &mut sds {
        *s = (*s / (n - 1.0)).sqrt();
    }
    let mean_age = subjects.iter().map(|s| s.age).sum::<f64>() / n;
    model.cohort = Some(CohortStats {
        latent_mean: means,
        latent_sd: sds,
        mean_age_years: mean_age,
        n_subjects: subjects.len(),
    });
    model.history = records.clone();
    Ok((model, records))
}

/// Noise-free latent means for every subject, in input order.
pub fn extract_features(model: &VaeModel, subjects: &[SubjectRecord]) -> Result<Vec<(String, Vec<f64>)>> {
    let mut rows = Vec::with_capacity(subjects.len());
    for s in subjects {
        let input = crate::connectome::assemble_input(&s.edges, s.age)?;
        let code = model.encode(&input)?;
        rows.push((s.id.clone(), code.mean));
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Checkpoint {
    schema_version: u32,
    model: VaeModel,
}

/// Serialize the model as a single JSON document (lossless f64 round-trip).
pub fn save_checkpoint(model: &VaeModel, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut writer = BufWriter::new(file);
    let doc = Checkpoint { schema_version: CHECKPOINT_SCHEMA_VERSION, model: model.clone() };
    serde_json::to_writer(&mut writer, &doc)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    writer.write_all(b"\n")?;
    writer.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<VaeModel> {
    let file = std::fs::File::open(path)?;
    let doc: Checkpoint = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    if doc.schema_version != CHECKPOINT_SCHEMA_VERSION {
        return Err(Error::Parse(format!(
            "{}: unsupported checkpoint schema {}",
            path.display(),
            doc.schema_version
        )));
    }
    let model = doc.model;
    for (name, net) in [
        ("encoder", &model.encoder),
        ("mu_head", &model.mu_head),
        ("logvar_head", &model.logvar_head),
        ("decoder", &model.decoder),
    ] {
        net.validate_shapes().map_err(|e| {
            Error::Parse(format!("{}: {name}: {e}", path.display()))
        })?;
    }
    if model.mu_head.in_dim() != model.encoder.out_dim()
        || model.logvar_head.in_dim() != model.encoder.out_dim()
        || model.decoder.in_dim() != model.latent_dim() + 1
        || model.input_dim() != model.n_edges() + 1
    {
        return Err(Error::Parse(format!(
            "{}: component dimensions are inconsistent",
            path.display()
        )));
    }
    Ok(model)
}
