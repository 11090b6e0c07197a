//! Embedding sets: the N×D row collections every metric and validation
//! protocol operates on, plus their binary format and pair manifests.

mod format;
mod manifest;

pub use format::{decode_embeddings, encode_embeddings, read_embeddings, write_embeddings, HEADER_LEN, MAGIC};
pub use manifest::{manifest_path, read_manifest, write_manifest, Pair, PairLabel, PairManifest};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Audio,
    Video,
    Text,
    Latent,
    Probs,
}

/// N rows of D `f32` values. When `segments_per_clip` is non-zero the rows are
/// grouped clip-major, segment-minor.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    dim: usize,
    segments_per_clip: usize,
    modality: Option<Modality>,
    data: Vec<f32>,
}

impl EmbeddingSet {
    /// Builds a set from row-major data. Finiteness is not checked here; see
    /// [`EmbeddingSet::validate`].
    pub fn new(dim: usize, segments_per_clip: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ShapeMismatch("embedding dimension must be positive".into()));
        }
        if data.len() % dim != 0 {
            return Err(Error::ShapeMismatch(format!(
                "{} values do not form rows of width {dim}",
                data.len()
            )));
        }
        let count = data.len() / dim;
        if segments_per_clip > 0 && count % segments_per_clip != 0 {
            return Err(Error::Segments(format!(
                "{count} rows are not a multiple of {segments_per_clip} segments per clip"
            )));
        }
        Ok(Self {
            dim,
            segments_per_clip,
            modality: None,
            data,
        })
    }

    pub fn empty(dim: usize) -> Result<Self> {
        Self::new(dim, 0, Vec::new())
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        Self::new(dim, 0, rows.concat())
    }

    pub fn with_modality(mut self, modality: Modality) -> Self {
        self.modality = Some(modality);
        self
    }

    pub fn with_segments(self, segments_per_clip: usize) -> Result<Self> {
        let modality = self.modality;
        let mut out = Self::new(self.dim, segments_per_clip, self.data)?;
        out.modality = modality;
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn segments_per_clip(&self) -> usize {
        self.segments_per_clip
    }

    pub fn clip_count(&self) -> usize {
        match self.segments_per_clip {
            0 => self.count(),
            t => self.count() / t,
        }
    }

    pub fn modality(&self) -> Option<Modality> {
        self.modality
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// Rejects NaN and infinite entries.
    pub fn validate(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(pos) => Err(Error::NonFinite {
                row: pos / self.dim,
                col: pos % self.dim,
            }),
            None => Ok(()),
        }
    }

    /// Equality of header fields and bit patterns of every value.
    pub fn bitwise_eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.segments_per_clip == other.segments_per_clip
            && self.data.len() == other.data.len()
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    fn derived(&self, dim: usize, segments_per_clip: usize, data: Vec<f32>) -> Self {
        Self {
            dim,
            segments_per_clip,
            modality: self.modality,
            data,
        }
    }
}

/// Copies the given rows in order. The result is unsegmented.
pub fn select_rows(set: &EmbeddingSet, indices: &[usize]) -> Result<EmbeddingSet> {
    let count = set.count();
    let mut data = Vec::with_capacity(indices.len() * set.dim);
    for &i in indices {
        if i >= count {
            return Err(Error::IndexOutOfBounds { index: i, count });
        }
        data.extend_from_slice(set.row(i));
    }
    Ok(set.derived(set.dim, 0, data))
}

/// Copies whole clips (all their segments) in order, keeping the segment structure.
pub fn select_clips(set: &EmbeddingSet, clips: &[usize]) -> Result<EmbeddingSet> {
    let t = set.segments_per_clip;
    if t == 0 {
        return Err(Error::Segments("clip selection needs a segmented set".into()));
    }
    let n_clips = set.clip_count();
    let width = t * set.dim;
    let mut data = Vec::with_capacity(clips.len() * width);
    for &c in clips {
        if c >= n_clips {
            return Err(Error::IndexOutOfBounds {
                index: c,
                count: n_clips,
            });
        }
        data.extend_from_slice(&set.data[c * width..(c + 1) * width]);
    }
    Ok(set.derived(set.dim, t, data))
}

/// Concatenates sets of equal dim and segment structure.
pub fn concat_sets(sets: &[&EmbeddingSet]) -> Result<EmbeddingSet> {
    let first = sets
        .first()
        .ok_or_else(|| Error::ShapeMismatch("nothing to concatenate".into()))?;
    let mut data = Vec::with_capacity(sets.iter().map(|s| s.data.len()).sum());
    for s in sets {
        if s.dim != first.dim || s.segments_per_clip != first.segments_per_clip {
            return Err(Error::ShapeMismatch(format!(
                "cannot concatenate D={} T={} with D={} T={}",
                first.dim, first.segments_per_clip, s.dim, s.segments_per_clip
            )));
        }
        data.extend_from_slice(&s.data);
    }
    Ok(first.derived(first.dim, first.segments_per_clip, data))
}

/// Adapter reconciling embedding dimensions.
#[derive(Debug, Clone, PartialEq)]
pub enum ProjectionSpec {
    /// Row-vector times a `D_in × D_out` matrix.
    Matrix(Matrix<f64>),
    /// Zero-pad or truncate every row to `target_dim`.
    PadTruncate { target_dim: usize },
}

impl ProjectionSpec {
    pub fn output_dim(&self) -> usize {
        match self {
            ProjectionSpec::Matrix(m) => m.cols(),
            ProjectionSpec::PadTruncate { target_dim } => *target_dim,
        }
    }

    /// Short label recorded in metric reports.
    pub fn descriptor(&self) -> String {
        match self {
            ProjectionSpec::Matrix(m) => format!("matrix:{}x{}", m.rows(), m.cols()),
            ProjectionSpec::PadTruncate { target_dim } => format!("pad_truncate:{target_dim}"),
        }
    }
}

pub fn project(set: &EmbeddingSet, spec: &ProjectionSpec) -> Result<EmbeddingSet> {
    match spec {
        ProjectionSpec::PadTruncate { target_dim } => {
            let target = *target_dim;
            if target == 0 {
                return Err(Error::DimensionMismatch("target dimension must be positive".into()));
            }
            let keep = target.min(set.dim);
            let mut data = Vec::with_capacity(set.count() * target);
            for row in set.rows() {
                data.extend_from_slice(&row[..keep]);
                data.resize(data.len() + (target - keep), 0.0);
            }
            Ok(set.derived(target, set.segments_per_clip, data))
        }
        ProjectionSpec::Matrix(m) => {
            if m.rows() != set.dim || m.cols() == 0 {
                return Err(Error::DimensionMismatch(format!(
                    "projection is {}x{} but the set has dimension {}",
                    m.rows(),
                    m.cols(),
                    set.dim
                )));
            }
            let d_out = m.cols();
            let mut data = Vec::with_capacity(set.count() * d_out);
            let mut acc = vec![0.0f64; d_out];
            for row in set.rows() {
                acc.iter_mut().for_each(|a| *a = 0.0);
                for (k, &x) in row.iter().enumerate() {
                    let x = f64::from(x);
                    for (a, &w) in acc.iter_mut().zip(m.row(k)) {
                        *a += x * w;
                    }
                }
                data.extend(acc.iter().map(|&a| a as f32));
            }
            Ok(set.derived(d_out, set.segments_per_clip, data))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftMode {
    Cyclic,
    PadZero,
}

/// Delays every clip by `k` segments: output segment `i` takes input segment
/// `i - k`. Vacated leading segments wrap around (`Cyclic`) or are zero rows
/// (`PadZero`).
pub fn shift_segments(set: &EmbeddingSet, k: usize, mode: ShiftMode) -> Result<EmbeddingSet> {
    let t = set.segments_per_clip;
    if t == 0 {
        return Err(Error::Segments("cannot shift an unsegmented set".into()));
    }
    if k >= t {
        return Err(Error::Segments(format!(
            "shift {k} out of range for {t} segments per clip"
        )));
    }
    let d = set.dim;
    let mut data = vec![0.0f32; set.data.len()];
    for (src_clip, dst_clip) in set.data.chunks_exact(t * d).zip(data.chunks_exact_mut(t * d)) {
        for i in 0..t {
            let src = match (i.checked_sub(k), mode) {
                (Some(j), _) => j,
                (None, ShiftMode::Cyclic) => i + t - k,
                (None, ShiftMode::PadZero) => continue,
            };
            dst_clip[i * d..(i + 1) * d].copy_from_slice(&src_clip[src * d..(src + 1) * d]);
        }
    }
    Ok(set.derived(d, t, data))
}

/// Row-wise mean of two equally shaped sets.
pub fn average_sets(a: &EmbeddingSet, b: &EmbeddingSet) -> Result<EmbeddingSet> {
    if a.dim != b.dim || a.count() != b.count() || a.segments_per_clip != b.segments_per_clip {
        return Err(Error::ShapeMismatch(format!(
            "cannot average N={} D={} T={} with N={} D={} T={}",
            a.count(),
            a.dim,
            a.segments_per_clip,
            b.count(),
            b.dim,
            b.segments_per_clip
        )));
    }
    let data = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| ((f64::from(x) + f64::from(y)) * 0.5) as f32)
        .collect();
    let mut out = a.derived(a.dim, a.segments_per_clip, data);
    if a.modality != b.modality {
        out.modality = None;
    }
    Ok(out)
}
