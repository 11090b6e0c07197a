use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stats::Matrix;

use super::FeatureSeq;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttentionConfig {
    pub heads: usize,
    pub depth: usize,
    pub dim: usize,
    pub residual: bool,
}

impl Default for AttentionConfig {
    fn default() -> Self {
        Self {
            heads: 8,
            depth: 4,
            dim: 768,
            residual: true,
        }
    }
}

impl AttentionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 || self.dim == 0 || self.dim % self.heads != 0 {
            return Err(Error::Config(format!(
                "dimension {} is not divisible into {} heads",
                self.dim, self.heads
            )));
        }
        Ok(())
    }
}

fn lexicographic<T: Scalar>(a: &[T], b: &[T]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.partial_cmp(y).unwrap_or(Ordering::Equal))
        .find(|o| *o != Ordering::Equal)
        .unwrap_or(Ordering::Equal)
}

// Softmax-weighted average of the memory rows restricted to columns
// [offset, offset + width). Memory rows are visited in a canonical
// (lexicographic) order so the result does not depend on their arrangement.
fn attend_columns<T: Scalar>(
    queries: &FeatureSeq<T>,
    memory: &FeatureSeq<T>,
    offset: usize,
    width: usize,
    out: &mut [T],
    out_stride: usize,
) {
    let scale = T::one() / T::of_usize(width).sqrt();
    let slice = |s: &FeatureSeq<T>, r: usize| -> Vec<T> { s.row(r)[offset..offset + width].to_vec() };
    let mut keys: Vec<Vec<T>> = (0..memory.steps()).map(|r| slice(memory, r)).collect();
    keys.sort_by(|a, b| lexicographic(a, b));

    let mut logits = vec![T::zero(); keys.len()];
    for q in 0..queries.steps() {
        let query = &queries.row(q)[offset..offset + width];
        for (l, k) in logits.iter_mut().zip(&keys) {
            *l = query.iter().zip(k).map(|(&a, &b)| a * b).sum::<T>() * scale;
        }
        let max = logits.iter().fold(T::neg_infinity(), |m, &l| m.max(l));
        let mut norm = T::zero();
        for l in logits.iter_mut() {
            *l = (*l - max).exp();
            norm += *l;
        }
        let dst = &mut out[q * out_stride + offset..q * out_stride + offset + width];
        dst.iter_mut().for_each(|v| *v = T::zero());
        for (&w, k) in logits.iter().zip(&keys) {
            let w = w / norm;
            for (o, &v) in dst.iter_mut().zip(k) {
                *o += w * v;
            }
        }
    }
}

/// `softmax(q Kᵀ / √D) K` for every query row, with the memory serving as both
/// keys and values and no learned projections.
pub fn attend<T: Scalar>(queries: &FeatureSeq<T>, memory: &FeatureSeq<T>) -> Result<FeatureSeq<T>> {
    if queries.dim() != memory.dim() {
        return Err(Error::DimensionMismatch(format!(
            "queries have dimension {} but memory has {}",
            queries.dim(),
            memory.dim()
        )));
    }
    if memory.steps() == 0 {
        return Err(Error::ShapeMismatch("attention over an empty memory".into()));
    }
    let d = queries.dim();
    let mut out = vec![T::zero(); queries.steps() * d];
    attend_columns(queries, memory, 0, d, &mut out, d);
    Ok(FeatureSeq::from_parts(queries.steps(), d, out))
}

/// Self-attention over time: every step attends over the whole sequence.
pub fn temporal_self_attention<T: Scalar>(seq: &FeatureSeq<T>) -> FeatureSeq<T> {
    if seq.steps() == 0 {
        return seq.clone();
    }
    attend(seq, seq).expect("self-attention shapes agree")
}

/// The `T × T` matrix of attention weights used by [`temporal_self_attention`].
pub fn attention_weights<T: Scalar>(seq: &FeatureSeq<T>) -> Matrix<T> {
    let t = seq.steps();
    let scale = T::one() / T::of_usize(seq.dim()).sqrt();
    let mut w = Matrix::zeros(t, t);
    for i in 0..t {
        let mut max = T::neg_infinity();
        for j in 0..t {
            let l = seq.row(i).iter().zip(seq.row(j)).map(|(&a, &b)| a * b).sum::<T>() * scale;
            w[(i, j)] = l;
            max = max.max(l);
        }
        let mut norm = T::zero();
        for j in 0..t {
            let e = (w[(i, j)] - max).exp();
            w[(i, j)] = e;
            norm += e;
        }
        for j in 0..t {
            w[(i, j)] /= norm;
        }
    }
    w
}

/// `depth` layers of head-sliced self-attention. Each layer splits the
/// channels into `heads` slices of width `D/heads`, attends within each slice
/// (scale `√(D/heads)`), concatenates, and adds the layer input when
/// `residual` is set.
pub fn multi_head_stack<T: Scalar>(seq: &FeatureSeq<T>, cfg: &AttentionConfig) -> Result<FeatureSeq<T>> {
    cfg.validate()?;
    if seq.dim() != cfg.dim {
        return Err(Error::DimensionMismatch(format!(
            "sequence dimension {} does not match configured {}",
            seq.dim(),
            cfg.dim
        )));
    }
    if seq.steps() == 0 {
        return Ok(seq.clone());
    }
    let d = cfg.dim;
    let width = d / cfg.heads;
    let mut cur = seq.clone();
    for _ in 0..cfg.depth {
        let mut out = vec![T::zero(); cur.steps() * d];
        for h in 0..cfg.heads {
            attend_columns(&cur, &cur, h * width, width, &mut out, d);
        }
        if cfg.residual {
            for (o, &x) in out.iter_mut().zip(cur.values()) {
                *o += x;
            }
        }
        cur = FeatureSeq::from_parts(cur.steps(), d, out);
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_seq(t: usize, d: usize, seed: u64) -> FeatureSeq<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FeatureSeq::new(t, d, (0..t * d).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap()
    }

    #[test]
    fn single_step_is_identity() {
        let s = random_seq(1, 5, 1);
        assert_eq!(temporal_self_attention(&s), s);
    }

    #[test]
    fn identical_rows_are_fixed_points() {
        let s = FeatureSeq::<f64>::from_rows(&vec![vec![0.3, -1.2, 4.0]; 4]).unwrap();
        let out = temporal_self_attention(&s);
        for row in out.rows() {
            for (a, b) in row.iter().zip(s.row(0)) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn hand_example() {
        let s = FeatureSeq::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let out = temporal_self_attention(&s);
        // logits (1, 0)/√2 -> weights (e^{1/√2}, 1)/(e^{1/√2} + 1)
        let w0 = 1.0 / (1.0 + (-1.0f64 / 2f64.sqrt()).exp());
        assert!((out.row(0)[0] - w0).abs() < 1e-12);
        assert!((out.row(0)[1] - (1.0 - w0)).abs() < 1e-12);
        assert!((out.row(0)[0] - 0.6698).abs() < 1e-4);
        assert!((out.row(0)[1] - 0.3302).abs() < 1e-4);
    }

    #[test]
    fn weights_are_distributions() {
        let s = random_seq(7, 6, 2);
        let w = attention_weights(&s);
        for i in 0..7 {
            let row: Vec<f64> = (0..7).map(|j| w[(i, j)]).collect();
            assert!(row.iter().all(|&x| x >= 0.0));
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        // output equals W · F
        let out = temporal_self_attention(&s);
        for i in 0..7 {
            for c in 0..6 {
                let manual: f64 = (0..7).map(|j| w[(i, j)] * s.row(j)[c]).sum();
                assert!((out.row(i)[c] - manual).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn memory_permutation_is_exactly_invariant() {
        let q = random_seq(3, 4, 3);
        let m = random_seq(6, 4, 4);
        let mut rows: Vec<Vec<f64>> = m.rows().map(<[f64]>::to_vec).collect();
        rows.rotate_left(2);
        rows.swap(0, 3);
        let permuted = FeatureSeq::from_rows(&rows).unwrap();
        assert_eq!(attend(&q, &m).unwrap(), attend(&q, &permuted).unwrap());
    }

    #[test]
    fn degenerate_stack_is_plain_attention() {
        let s = random_seq(5, 4, 5);
        let cfg = AttentionConfig {
            heads: 1,
            depth: 1,
            dim: 4,
            residual: false,
        };
        assert_eq!(multi_head_stack(&s, &cfg).unwrap(), temporal_self_attention(&s));
        let one = random_seq(1, 8, 6);
        let cfg = AttentionConfig {
            heads: 4,
            depth: 3,
            dim: 8,
            residual: false,
        };
        assert_eq!(multi_head_stack(&one, &cfg).unwrap(), one);
    }

    #[test]
    fn depth_two_is_composition_of_depth_one() {
        let s = random_seq(6, 8, 7);
        let one = AttentionConfig {
            heads: 2,
            depth: 1,
            dim: 8,
            residual: true,
        };
        let two = AttentionConfig { depth: 2, ..one };
        let manual = multi_head_stack(&multi_head_stack(&s, &one).unwrap(), &one).unwrap();
        assert_eq!(multi_head_stack(&s, &two).unwrap(), manual);
    }

    #[test]
    fn heads_attend_independently() {
        // with two heads, each half of the channels is the single-head result on that half
        let s = random_seq(4, 6, 8);
        let cfg = AttentionConfig {
            heads: 2,
            depth: 1,
            dim: 6,
            residual: false,
        };
        let out = multi_head_stack(&s, &cfg).unwrap();
        for h in 0..2 {
            let half: Vec<Vec<f64>> = s.rows().map(|r| r[h * 3..h * 3 + 3].to_vec()).collect();
            let single = temporal_self_attention(&FeatureSeq::from_rows(&half).unwrap());
            for i in 0..4 {
                assert_eq!(&out.row(i)[h * 3..h * 3 + 3], single.row(i));
            }
        }
    }

    #[test]
    fn config_errors() {
        let s = random_seq(2, 6, 9);
        let bad = AttentionConfig {
            heads: 4,
            depth: 1,
            dim: 6,
            residual: true,
        };
        assert!(matches!(multi_head_stack(&s, &bad), Err(Error::Config(_))));
        let mismatch = AttentionConfig {
            heads: 1,
            depth: 1,
            dim: 4,
            residual: true,
        };
        assert!(multi_head_stack(&s, &mismatch).is_err());
        let d = AttentionConfig::default();
        assert_eq!((d.heads, d.depth, d.dim, d.residual), (8, 4, 768, true));
    }
}
