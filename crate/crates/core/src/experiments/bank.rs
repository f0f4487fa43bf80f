use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub const EMBEDDING_DIM: usize = 768;

/// Seeded stand-in for per-class image embeddings: one random unit vector
/// per class.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBank {
    vectors: Array2<f64>,
    seed: u64,
}

impl EmbeddingBank {
    pub fn new(n_classes: usize, dim: usize, seed: u64) -> Result<Self> {
        if n_classes == 0 || dim == 0 {
            return Err(Error::invalid("embedding bank needs classes and dimensions"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vectors = Array2::from_shape_simple_fn((n_classes, dim), || rng.sample::<f64, _>(StandardNormal));
        for mut row in vectors.outer_iter_mut() {
            let n = row.dot(&row).sqrt();
            row /= n;
        }
        Ok(Self { vectors, seed })
    }

    pub fn vectors(&self) -> &Array2<f64> {
        &self.vectors
    }

    pub fn n_classes(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}
