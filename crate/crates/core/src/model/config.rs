use serde::{Deserialize, Serialize};

use super::{ModelError, Result};
use crate::residue::RESIDUE_VOCAB;

/// Architecture and featurization hyperparameters. Serialized inside weight
/// files and accepted as a TOML key-value file by the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Equivariant atom-encoder layers.
    pub atom_layers: usize,
    /// Residue graph attention layers.
    pub residue_layers: usize,
    /// Causal decoder layers.
    pub decoder_layers: usize,
    pub width: usize,
    pub heads: usize,
    pub dropout: f64,
    pub vocab: usize,
    /// Backbone coordinate noise during training, Å.
    pub noise_sigma: f64,
    pub k_neighbors: usize,
    pub atom_radius: f64,
    pub atom_k_max: usize,
    pub rbf_bins: usize,
    pub leaky_slope: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            atom_layers: 2,
            residue_layers: 3,
            decoder_layers: 3,
            width: 128,
            heads: 4,
            dropout: 0.1,
            vocab: RESIDUE_VOCAB,
            noise_sigma: 0.02,
            k_neighbors: 48,
            atom_radius: 15.0,
            atom_k_max: 96,
            rbf_bins: 16,
            leaky_slope: 0.2,
        }
    }
}

impl ModelConfig {
    /// Small configuration for tests and desk-scale training.
    pub fn toy() -> Self {
        Self {
            atom_layers: 1,
            residue_layers: 2,
            decoder_layers: 2,
            width: 32,
            heads: 4,
            dropout: 0.0,
            noise_sigma: 0.0,
            k_neighbors: 16,
            atom_radius: 10.0,
            atom_k_max: 32,
            ..Self::default()
        }
    }

    pub fn head_dim(&self) -> usize {
        self.width / self.heads.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(ModelError::Config(m.to_string()));
        if self.width == 0 || self.heads == 0 || !self.width.is_multiple_of(self.heads) {
            return fail("width must be a positive multiple of heads");
        }
        if self.vocab != RESIDUE_VOCAB {
            return fail("vocab must match the residue vocabulary (33)");
        }
        if self.k_neighbors == 0 || self.atom_k_max == 0 || self.rbf_bins == 0 {
            return fail("neighbour counts and rbf bins must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail("dropout must lie in [0, 1)");
        }
        if !(self.noise_sigma >= 0.0) || !(self.atom_radius > 0.0) {
            return fail("noise_sigma must be >= 0 and atom_radius > 0");
        }
        Ok(())
    }
}
