//! Gaussian summaries of embedding sets and the Fréchet distance between them.

mod eigen;
mod matrix;

pub use eigen::{eigen_residual, psd_sqrt, sym_eig, trace_sqrt, SymEigen};
pub use matrix::Matrix;

use rayon::prelude::*;
use serde::Deserialize;

use crate::embedset::EmbeddingSet;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Rows per block when accumulating co-moments; each block is centred on its
/// own mean and folded in with the pairwise update.
const BLOCK_ROWS: usize = 256;

/// Mergeable (count, mean, co-moment) accumulator. The covariance is the
/// co-moment divided by `count - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats<T> {
    dim: usize,
    count: usize,
    mean: Vec<T>,
    co_moment: Matrix<T>,
}

impl<T: Scalar> GaussianStats<T> {
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            count: 0,
            mean: vec![T::zero(); dim],
            co_moment: Matrix::zeros(dim, dim),
        }
    }

    /// Builds a summary directly from a mean and unbiased covariance.
    pub fn from_mean_cov(mean: Vec<T>, cov: &Matrix<T>, count: usize) -> Result<Self> {
        let dim = mean.len();
        if cov.rows() != dim || cov.cols() != dim {
            return Err(Error::DimensionMismatch(format!(
                "mean has length {dim} but covariance is {}x{}",
                cov.rows(),
                cov.cols()
            )));
        }
        if count < 2 {
            return Err(Error::InsufficientRows { needed: 2, got: count });
        }
        let asym = cov.asymmetry().to_f64_lossy();
        let tol = 1e-12f64.max(T::SYMMETRY_TOL * cov.frobenius_norm().to_f64_lossy());
        if asym > tol {
            return Err(Error::Asymmetric {
                asymmetry: asym,
                tolerance: tol,
            });
        }
        let mut co_moment = cov.scale(T::of_usize(count - 1));
        co_moment.symmetrize();
        Ok(Self {
            dim,
            count,
            mean,
            co_moment,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn co_moment(&self) -> &Matrix<T> {
        &self.co_moment
    }

    /// Unbiased sample covariance (divisor N−1); needs at least two rows.
    pub fn covariance(&self) -> Result<Matrix<T>> {
        if self.count < 2 {
            return Err(Error::InsufficientRows {
                needed: 2,
                got: self.count,
            });
        }
        Ok(self.co_moment.scale(T::one() / T::of_usize(self.count - 1)))
    }

    /// Welford update with a single row.
    pub fn push(&mut self, row: &[f32]) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "row of width {} pushed into {}-dimensional stats",
                row.len(),
                self.dim
            )));
        }
        self.count += 1;
        let n = T::of_usize(self.count);
        let delta: Vec<T> = row
            .iter()
            .zip(&self.mean)
            .map(|(&x, &m)| T::of_f32(x) - m)
            .collect();
        for (m, &d) in self.mean.iter_mut().zip(&delta) {
            *m += d / n;
        }
        let after: Vec<T> = row
            .iter()
            .zip(&self.mean)
            .map(|(&x, &m)| T::of_f32(x) - m)
            .collect();
        let d = self.dim;
        let co = self.co_moment.as_mut_slice();
        for i in 0..d {
            for j in 0..d {
                co[i * d + j] += delta[i] * after[j];
            }
        }
        self.co_moment.symmetrize();
        Ok(())
    }

    /// Pairwise (Chan et al.) combination of two accumulators.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(format!(
                "cannot merge {}-dimensional stats with {}-dimensional stats",
                self.dim, other.dim
            )));
        }
        if other.count == 0 {
            return Ok(self.clone());
        }
        if self.count == 0 {
            return Ok(other.clone());
        }
        let na = T::of_usize(self.count);
        let nb = T::of_usize(other.count);
        let n = na + nb;
        let delta: Vec<T> = other
            .mean
            .iter()
            .zip(&self.mean)
            .map(|(&b, &a)| b - a)
            .collect();
        let mean = self
            .mean
            .iter()
            .zip(&delta)
            .map(|(&a, &d)| a + d * (nb / n))
            .collect();
        let weight = na * nb / n;
        let d = self.dim;
        let mut co_moment = self.co_moment.clone();
        let co = co_moment.as_mut_slice();
        let other_co = other.co_moment.as_slice();
        for i in 0..d {
            let wi = delta[i] * weight;
            for j in 0..d {
                co[i * d + j] += other_co[i * d + j] + wi * delta[j];
            }
        }
        Ok(Self {
            dim: d,
            count: self.count + other.count,
            mean,
            co_moment,
        })
    }

    /// Accumulates a contiguous run of rows (row-major, width `dim`).
    fn from_rows(data: &[f32], dim: usize) -> Self {
        let mut acc = Self::empty(dim);
        for block in data.chunks(BLOCK_ROWS * dim) {
            let block_stats = Self::from_block(block, dim);
            acc = acc.merge(&block_stats).expect("equal dims");
        }
        acc
    }

    fn from_block(block: &[f32], dim: usize) -> Self {
        let m = block.len() / dim;
        let inv_m = T::one() / T::of_usize(m);
        let mut mean = vec![T::zero(); dim];
        for row in block.chunks_exact(dim) {
            for (acc, &x) in mean.iter_mut().zip(row) {
                *acc += T::of_f32(x);
            }
        }
        mean.iter_mut().for_each(|v| *v *= inv_m);

        // centred block, transposed so every feature is contiguous
        let mut cols = vec![T::zero(); m * dim];
        for (r, row) in block.chunks_exact(dim).enumerate() {
            for (c, (&x, &mu)) in row.iter().zip(&mean).enumerate() {
                cols[c * m + r] = T::of_f32(x) - mu;
            }
        }
        let mut co_moment = Matrix::zeros(dim, dim);
        for i in 0..dim {
            let xi = &cols[i * m..(i + 1) * m];
            for j in i..dim {
                let v = dot(xi, &cols[j * m..(j + 1) * m]);
                co_moment[(i, j)] = v;
                co_moment[(j, i)] = v;
            }
        }
        Self {
            dim,
            count: m,
            mean,
            co_moment,
        }
    }

    /// JSON document `{dim, count, mean, cov}` with 17 significant digits.
    /// `cov` is `null` when fewer than two rows were seen.
    pub fn to_json(&self) -> String {
        let num = |v: T| format!("{:.16e}", v.to_f64_lossy());
        let mean: Vec<String> = self.mean.iter().map(|&v| num(v)).collect();
        let cov = match self.covariance() {
            Ok(c) => {
                let rows: Vec<String> = c
                    .to_rows()
                    .into_iter()
                    .map(|r| {
                        let cells: Vec<String> = r.into_iter().map(num).collect();
                        format!("[{}]", cells.join(","))
                    })
                    .collect();
                format!("[{}]", rows.join(","))
            }
            Err(_) => "null".to_string(),
        };
        format!(
            "{{\"dim\":{},\"count\":{},\"mean\":[{}],\"cov\":{}}}",
            self.dim,
            self.count,
            mean.join(","),
            cov
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Doc {
            dim: usize,
            count: usize,
            mean: Vec<f64>,
            cov: Option<Vec<Vec<f64>>>,
        }
        let doc: Doc = serde_json::from_str(text)?;
        if doc.mean.len() != doc.dim {
            return Err(Error::DimensionMismatch(format!(
                "dim {} but mean has {} entries",
                doc.dim,
                doc.mean.len()
            )));
        }
        let mean: Vec<T> = doc.mean.into_iter().map(T::of).collect();
        match doc.cov {
            Some(rows) => {
                let rows: Vec<Vec<T>> = rows
                    .into_iter()
                    .map(|r| r.into_iter().map(T::of).collect())
                    .collect();
                Self::from_mean_cov(mean, &Matrix::from_rows(&rows)?, doc.count)
            }
            None if doc.count < 2 => Ok(Self {
                dim: doc.dim,
                count: doc.count,
                mean,
                co_moment: Matrix::zeros(doc.dim, doc.dim),
            }),
            None => Err(Error::Config("covariance missing".into())),
        }
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = T::zero();
    for (&x, &y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Mean and unbiased covariance of all rows.
pub fn fit<T: Scalar>(set: &EmbeddingSet) -> Result<GaussianStats<T>> {
    if set.count() < 2 {
        return Err(Error::InsufficientRows {
            needed: 2,
            got: set.count(),
        });
    }
    set.validate()?;
    Ok(GaussianStats::from_rows(set.data(), set.dim()))
}

/// Splits the rows into `parts` contiguous partitions, fits them on the rayon
/// pool and merges the partial summaries left to right. The result depends on
/// `parts` only through rounding.
pub fn fit_partitioned<T: Scalar>(set: &EmbeddingSet, parts: usize) -> Result<GaussianStats<T>> {
    if set.count() < 2 {
        return Err(Error::InsufficientRows {
            needed: 2,
            got: set.count(),
        });
    }
    set.validate()?;
    let parts = parts.clamp(1, set.count());
    let n = set.count();
    let d = set.dim();
    let partials: Vec<GaussianStats<T>> = (0..parts)
        .into_par_iter()
        .map(|p| {
            let lo = p * n / parts;
            let hi = (p + 1) * n / parts;
            GaussianStats::from_rows(&set.data()[lo * d..hi * d], d)
        })
        .collect();
    partials
        .iter()
        .try_fold(GaussianStats::empty(d), |acc, s| acc.merge(s))
}

/// Fréchet distance between the Gaussians described by `a` and `b`:
/// `‖μa−μb‖² + Tr Σa + Tr Σb − 2 Tr((Σa^{1/2} Σb Σa^{1/2})^{1/2})`.
///
/// Bitwise-identical summaries give exactly zero. Small negative results from
/// rounding (down to `-1e-6·max(1, Tr Σa + Tr Σb)`) are clamped to zero.
pub fn frechet<T: Scalar>(a: &GaussianStats<T>, b: &GaussianStats<T>) -> Result<T> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch(format!(
            "frechet between {}-dimensional and {}-dimensional stats",
            a.dim, b.dim
        )));
    }
    let cov_a = a.covariance()?;
    let cov_b = b.covariance()?;
    if a.mean == b.mean && cov_a == cov_b {
        return Ok(T::zero());
    }
    let mean_term: T = a
        .mean
        .iter()
        .zip(&b.mean)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum();
    let sqrt_a = psd_sqrt(&cov_a)?;
    let mut inner = sqrt_a.matmul(&cov_b)?.matmul(&sqrt_a)?;
    inner.symmetrize();
    let cross = trace_sqrt(&inner)?;
    let traces = cov_a.trace() + cov_b.trace();
    let d = mean_term + traces - (cross + cross);
    if d >= T::zero() {
        return Ok(d);
    }
    let tol = T::of(1e-6) * traces.max(T::one());
    if d >= -tol {
        Ok(T::zero())
    } else {
        Err(Error::Indefinite {
            eigenvalue: d.to_f64_lossy(),
            tolerance: -tol.to_f64_lossy(),
        })
    }
}
