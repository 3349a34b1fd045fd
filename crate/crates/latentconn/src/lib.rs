//! Connectome feature learning over 90-region functional connectivity
//! graphs: absolute-Pearson edge weights, an age-conditioned variational
//! autoencoder trained from scratch, group statistics over the learned
//! latent features, and generative visualization of what a feature encodes.

pub mod analysis;
pub mod cli;
pub mod connectome;
pub mod error;
pub mod generator;
pub mod heatmap;
pub mod nnet;
pub mod rng;
pub mod synth;
pub mod vae;

pub use error::{Error, Result};
