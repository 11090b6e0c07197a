//! Reference kernels for the model mechanics: temporal self-attention and its
//! multi-head stack, dual residual fusion, the temporal contrastive (VCLAP)
//! loss with gradient check, and the latent diffusion noise objective.

mod attention;
mod diffusion;
mod fusion;
mod vclap;

pub use attention::{attend, attention_weights, multi_head_stack, temporal_self_attention, AttentionConfig};
pub use diffusion::{ddpm_forward, ddpm_loss, DiffusionSchedule, Latent, LatentSpec, NoiseNorm};
pub use fusion::{dual_residual_fusion, AffineMap, FusionParams};
pub use vclap::{
    logit_grad_check, similarity_logits, vclap_grad_check, vclap_logit_grad, vclap_loss,
    vclap_loss_from_logits, GradCheck, VclapConfig,
};

use crate::embedset::EmbeddingSet;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `T × D` feature sequence, one row per timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSeq<T> {
    steps: usize,
    dim: usize,
    values: Vec<T>,
}

impl<T: Scalar> FeatureSeq<T> {
    pub fn new(steps: usize, dim: usize, values: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ShapeMismatch("feature dimension must be positive".into()));
        }
        if values.len() != steps * dim {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {steps}x{dim} sequence",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / dim,
                col: pos % dim,
            });
        }
        Ok(Self { steps, dim, values })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        Self::new(rows.len(), dim, rows.concat())
    }

    pub fn zeros(steps: usize, dim: usize) -> Self {
        Self {
            steps,
            dim,
            values: vec![T::zero(); steps * dim],
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.values.chunks_exact(self.dim)
    }

    pub(crate) fn from_parts(steps: usize, dim: usize, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), steps * dim);
        Self { steps, dim, values }
    }
}

/// `B × T × D` batch of feature sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqBatch<T> {
    batch: usize,
    steps: usize,
    dim: usize,
    values: Vec<T>,
}

impl<T: Scalar> SeqBatch<T> {
    pub fn new(batch: usize, steps: usize, dim: usize, values: Vec<T>) -> Result<Self> {
        if values.len() != batch * steps * dim {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {batch}x{steps}x{dim} batch",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / dim.max(1),
                col: pos % dim.max(1),
            });
        }
        Ok(Self {
            batch,
            steps,
            dim,
            values,
        })
    }

    pub fn from_seqs(seqs: &[FeatureSeq<T>]) -> Result<Self> {
        let first = seqs
            .first()
            .ok_or_else(|| Error::ShapeMismatch("empty batch".into()))?;
        if seqs.iter().any(|s| s.steps != first.steps || s.dim != first.dim) {
            return Err(Error::ShapeMismatch("batch items differ in shape".into()));
        }
        Ok(Self {
            batch: seqs.len(),
            steps: first.steps,
            dim: first.dim,
            values: seqs.iter().flat_map(|s| s.values.iter().copied()).collect(),
        })
    }

    /// Reinterprets the `B·T` rows of an embedding set as a `B × T × D` batch.
    pub fn from_embeddings(set: &EmbeddingSet, batch: usize, steps: usize) -> Result<Self> {
        if batch * steps != set.count() {
            return Err(Error::ShapeMismatch(format!(
                "{} rows cannot be reshaped to batch {batch} x steps {steps}",
                set.count()
            )));
        }
        Self::new(
            batch,
            steps,
            set.dim(),
            set.data().iter().map(|&v| T::of_f32(v)).collect(),
        )
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Feature vector of item `b` at timestep `i`.
    pub fn at(&self, b: usize, i: usize) -> &[T] {
        let start = (b * self.steps + i) * self.dim;
        &self.values[start..start + self.dim]
    }

    pub fn item(&self, b: usize) -> FeatureSeq<T> {
        let w = self.steps * self.dim;
        FeatureSeq::from_parts(self.steps, self.dim, self.values[b * w..(b + 1) * w].to_vec())
    }
}
