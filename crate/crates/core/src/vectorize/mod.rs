//! Feature spaces for reviews: smoothed TF-IDF over a truncated vocabulary
//! and mean-pooled subword skip-gram embeddings.

mod embedding;
mod tfidf;

pub use embedding::{
    char_ngrams, fnv1a32, sgns_loss_and_gradient, subword_objective, EmbeddingModel,
    EmbeddingParams, EmbeddingTrainer, NegativeTable, SgnsGradient, SubwordGradient,
};
pub use tfidf::{fit_tfidf, TfidfModel, DEFAULT_MAX_FEATURES};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSpace {
    Tfidf,
    Embedding,
}

/// Dense feature row tagged with the space it lives in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub space: FeatureSpace,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn zeros(space: FeatureSpace, dim: usize) -> Self {
        FeatureVector {
            space,
            values: vec![0.0; dim],
        }
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Scales `v` to unit L2 norm; a zero vector stays zero.
pub(crate) fn l2_normalize(v: &mut [f64]) {
    let norm = l2_norm(v);
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}
