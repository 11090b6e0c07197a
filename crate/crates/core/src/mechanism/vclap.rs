//! Temporal contrastive loss between audio and (visually fused) text features:
//!
//! `L = −(1/B) Σ_b Σ_i log softmax_m(sim(a_{b,i}, t_{m,i}) / τ)[b]`
//!
//! with cosine similarity. The outer normalisation is `1/B`, not `1/(B·T)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stats::Matrix;

use super::SeqBatch;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VclapConfig {
    pub batch: usize,
    pub steps: usize,
    pub dim: usize,
    pub temperature: f64,
}

impl VclapConfig {
    pub const DEFAULT_TEMPERATURE: f64 = 0.07;

    pub fn new(batch: usize, steps: usize, dim: usize) -> Self {
        Self {
            batch,
            steps,
            dim,
            temperature: Self::DEFAULT_TEMPERATURE,
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch < 2 || self.steps == 0 || self.dim == 0 {
            return Err(Error::Config(format!(
                "need batch >= 2, steps >= 1, dim >= 1 (got {}x{}x{})",
                self.batch, self.steps, self.dim
            )));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::Config(format!(
                "temperature must be finite and positive, got {}",
                self.temperature
            )));
        }
        Ok(())
    }

    fn check<T: Scalar>(&self, name: &str, x: &SeqBatch<T>) -> Result<()> {
        if (x.batch(), x.steps(), x.dim()) != (self.batch, self.steps, self.dim) {
            return Err(Error::ShapeMismatch(format!(
                "{name} is {}x{}x{} but the configuration expects {}x{}x{}",
                x.batch(),
                x.steps(),
                x.dim(),
                self.batch,
                self.steps,
                self.dim
            )));
        }
        Ok(())
    }
}

fn norm<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

/// Per-timestep `B × B` logit matrices `sim(a_{b,i}, t_{m,i}) / τ`, indexed
/// `[i][(b, m)]`.
pub fn similarity_logits<T: Scalar>(
    audio: &SeqBatch<T>,
    text: &SeqBatch<T>,
    cfg: &VclapConfig,
) -> Result<Vec<Matrix<T>>> {
    cfg.validate()?;
    cfg.check("audio", audio)?;
    cfg.check("text", text)?;
    let (b_n, t_n) = (cfg.batch, cfg.steps);
    let mut a_norm = vec![T::zero(); b_n * t_n];
    let mut t_norm = vec![T::zero(); b_n * t_n];
    for b in 0..b_n {
        for i in 0..t_n {
            for (x, norms) in [(audio, &mut a_norm), (text, &mut t_norm)] {
                let n = norm(x.at(b, i));
                if !(n > T::zero()) {
                    return Err(Error::ZeroNorm { batch: b, step: i });
                }
                norms[b * t_n + i] = n;
            }
        }
    }
    let inv_tau = T::one() / T::of(cfg.temperature);
    let mut out = Vec::with_capacity(t_n);
    for i in 0..t_n {
        let mut z = Matrix::zeros(b_n, b_n);
        for b in 0..b_n {
            let a = audio.at(b, i);
            for m in 0..b_n {
                let t = text.at(m, i);
                let dot: T = a.iter().zip(t).map(|(&x, &y)| x * y).sum();
                z[(b, m)] = dot / (a_norm[b * t_n + i] * t_norm[m * t_n + i]) * inv_tau;
            }
        }
        out.push(z);
    }
    Ok(out)
}

fn log_sum_exp<T: Scalar>(row: &[T]) -> T {
    let max = row.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
    max + row.iter().map(|&x| (x - max).exp()).sum::<T>().ln()
}

/// Loss from precomputed logits (see [`similarity_logits`]).
pub fn vclap_loss_from_logits<T: Scalar>(logits: &[Matrix<T>]) -> T {
    let batch = logits.first().map_or(1, Matrix::rows);
    let mut total = T::zero();
    for z in logits {
        for b in 0..z.rows() {
            total += log_sum_exp(z.row(b)) - z[(b, b)];
        }
    }
    total / T::of_usize(batch)
}

pub fn vclap_loss<T: Scalar>(audio: &SeqBatch<T>, text: &SeqBatch<T>, cfg: &VclapConfig) -> Result<T> {
    Ok(vclap_loss_from_logits(&similarity_logits(audio, text, cfg)?))
}

/// Analytic gradient of the loss with respect to each logit:
/// `(softmax_m(z_{b,·,i}) − 1[m = b]) / B`.
pub fn vclap_logit_grad<T: Scalar>(logits: &[Matrix<T>]) -> Vec<Matrix<T>> {
    let batch = logits.first().map_or(1, Matrix::rows);
    let inv_b = T::one() / T::of_usize(batch);
    logits
        .iter()
        .map(|z| {
            let mut g = Matrix::zeros(z.rows(), z.cols());
            for b in 0..z.rows() {
                let lse = log_sum_exp(z.row(b));
                for m in 0..z.cols() {
                    let p = (z[(b, m)] - lse).exp();
                    let indicator = if m == b { T::one() } else { T::zero() };
                    g[(b, m)] = (p - indicator) * inv_b;
                }
            }
            g
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradCheck {
    pub max_rel_err: f64,
    pub epsilon: f64,
}

/// Floor on the denominator of the relative error, so entries whose gradient
/// is numerically zero are compared absolutely.
const REL_ERR_FLOOR: f64 = 1e-6;

/// Largest elementwise relative error between the analytic logit gradient and
/// central finite differences of the loss.
pub fn logit_grad_check<T: Scalar>(logits: &[Matrix<T>], epsilon: f64) -> Result<f64> {
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(Error::Config(format!(
            "epsilon {epsilon} outside [1e-7, 1e-3]"
        )));
    }
    let analytic = vclap_logit_grad(logits);
    let eps = T::of(epsilon);
    let batch = T::of_usize(logits.first().map_or(1, Matrix::rows));
    let mut worst = 0.0f64;
    for (i, z) in logits.iter().enumerate() {
        for b in 0..z.rows() {
            let mut row = z.row(b).to_vec();
            let reference = row.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
            // Loss terms outside this row are constant in the perturbed logit.
            let term = |row: &[T]| row.iter().map(|&x| (x - reference).exp()).sum::<T>().ln() - row[b];
            for m in 0..z.cols() {
                let orig = row[m];
                row[m] = orig + eps;
                let up = term(&row);
                row[m] = orig - eps;
                let down = term(&row);
                row[m] = orig;
                let numeric = ((up - down) / (eps + eps) / batch).to_f64_lossy();
                let exact = analytic[i][(b, m)].to_f64_lossy();
                let denom = exact.abs().max(numeric.abs()).max(REL_ERR_FLOOR);
                worst = worst.max((exact - numeric).abs() / denom);
            }
        }
    }
    Ok(worst)
}

/// Gradient check at the logits produced by `audio`, `text` and `cfg`.
pub fn vclap_grad_check<T: Scalar>(
    audio: &SeqBatch<T>,
    text: &SeqBatch<T>,
    cfg: &VclapConfig,
    epsilon: f64,
) -> Result<GradCheck> {
    let logits = similarity_logits(audio, text, cfg)?;
    Ok(GradCheck {
        max_rel_err: logit_grad_check(&logits, epsilon)?,
        epsilon,
    })
}
