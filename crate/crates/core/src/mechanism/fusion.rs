use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stats::Matrix;

use super::FeatureSeq;

/// `x ↦ tanh(W x + b)` with `W` of shape `D × D`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap<T> {
    pub weight: Matrix<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> AffineMap<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            weight: Matrix::zeros(dim, dim),
            bias: vec![T::zero(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.bias.len()
    }

    fn check(&self, dim: usize) -> Result<()> {
        if self.weight.rows() != dim || self.weight.cols() != dim || self.bias.len() != dim {
            return Err(Error::ShapeMismatch(format!(
                "affine map is {}x{} with bias {} but features have dimension {dim}",
                self.weight.rows(),
                self.weight.cols(),
                self.bias.len()
            )));
        }
        Ok(())
    }

    fn apply(&self, x: &[T], out: &mut [T]) {
        for (r, o) in out.iter_mut().enumerate() {
            let pre: T = self.weight.row(r).iter().zip(x).map(|(&w, &v)| w * v).sum::<T>() + self.bias[r];
            *o = pre.tanh();
        }
    }
}

/// Parameters of the two residual branches.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams<T> {
    pub text: AffineMap<T>,
    pub video: AffineMap<T>,
}

impl<T: Scalar> FusionParams<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            text: AffineMap::zeros(dim),
            video: AffineMap::zeros(dim),
        }
    }
}

/// Fuses text features with attended video features through two residual
/// branches: `(t + g_t(t)) + (v + g_v(v))` per timestep.
pub fn dual_residual_fusion<T: Scalar>(
    text: &FeatureSeq<T>,
    video: &FeatureSeq<T>,
    params: &FusionParams<T>,
) -> Result<FeatureSeq<T>> {
    if text.steps() != video.steps() || text.dim() != video.dim() {
        return Err(Error::ShapeMismatch(format!(
            "text is {}x{} but video is {}x{}",
            text.steps(),
            text.dim(),
            video.steps(),
            video.dim()
        )));
    }
    let d = text.dim();
    params.text.check(d)?;
    params.video.check(d)?;
    let mut gt = vec![T::zero(); d];
    let mut gv = vec![T::zero(); d];
    let mut out = Vec::with_capacity(text.values().len());
    for (t, v) in text.rows().zip(video.rows()) {
        params.text.apply(t, &mut gt);
        params.video.apply(v, &mut gv);
        for c in 0..d {
            out.push((t[c] + gt[c]) + (v[c] + gv[c]));
        }
    }
    Ok(FeatureSeq::from_parts(text.steps(), d, out))
}
