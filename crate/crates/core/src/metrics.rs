//! FD/FAD and the cross-modal Fréchet metrics (FAVD, FATD, FA(VT)D), plus the
//! classifier-probability metrics IS and paired KL.

use serde::{Deserialize, Serialize};

use crate::embedset::{average_sets, project, EmbeddingSet, Modality, ProjectionSpec};
use crate::error::{Error, Result};
use crate::stats::{fit, frechet};

/// Floor applied to probabilities inside logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MetricKind {
    FD,
    FAD,
    FAVD,
    FATD,
    FAVTD,
    IS,
    KL,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::FD => "FD",
            MetricKind::FAD => "FAD",
            MetricKind::FAVD => "FAVD",
            MetricKind::FATD => "FATD",
            MetricKind::FAVTD => "FAVTD",
            MetricKind::IS => "IS",
            MetricKind::KL => "KL",
        }
    }

    pub fn is_frechet(self) -> bool {
        matches!(
            self,
            MetricKind::FD | MetricKind::FAD | MetricKind::FAVD | MetricKind::FATD | MetricKind::FAVTD
        )
    }
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricReport {
    pub metric: MetricKind,
    pub value: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub adapter: Option<String>,
    pub seed: Option<u64>,
}

impl MetricReport {
    fn new(metric: MetricKind, value: f64, n_a: usize, n_b: usize) -> Self {
        Self {
            metric,
            value,
            n_a,
            n_b,
            adapter: None,
            seed: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

/// Fréchet distance between the Gaussian fits of two equally dimensioned sets.
/// `kind` only labels the report (FD and FAD differ by embedding source).
pub fn frechet_sets(a: &EmbeddingSet, b: &EmbeddingSet, kind: MetricKind) -> Result<MetricReport> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "sets have dimensions {} and {}; apply a projection first",
            a.dim(),
            b.dim()
        )));
    }
    let sa = fit::<f64>(a)?;
    let sb = fit::<f64>(b)?;
    let value = frechet(&sa, &sb)?;
    Ok(MetricReport::new(kind, value, a.count(), b.count()))
}

impl ProjectionSpec {
    /// Pad/truncate adapter targeting the narrowest of `sets`.
    pub fn pad_to_narrowest(sets: &[&EmbeddingSet]) -> Self {
        let target_dim = sets.iter().map(|s| s.dim()).min().unwrap_or(1);
        ProjectionSpec::PadTruncate { target_dim }
    }
}

fn adapt(set: &EmbeddingSet, adapter: &ProjectionSpec, is_reference: bool) -> Result<EmbeddingSet> {
    match adapter {
        ProjectionSpec::PadTruncate { target_dim } if set.dim() != *target_dim => project(set, adapter),
        ProjectionSpec::Matrix(m) if set.dim() == m.rows() && (m.rows() != m.cols() || is_reference) => {
            project(set, adapter)
        }
        _ => Ok(set.clone()),
    }
}

/// Applies the adapter to whichever sets need it and checks that all
/// resulting dimensions agree.
///
/// Pad/truncate maps every set not already at the target width. A matrix maps
/// sets of width `D_in`; a square matrix maps only the reference sets.
fn reconcile(
    audio: &EmbeddingSet,
    references: &[&EmbeddingSet],
    adapter: &ProjectionSpec,
) -> Result<(EmbeddingSet, Vec<EmbeddingSet>)> {
    let audio = adapt(audio, adapter, false)?;
    let refs = references
        .iter()
        .map(|r| adapt(r, adapter, true))
        .collect::<Result<Vec<_>>>()?;
    if let Some(bad) = refs.iter().find(|r| r.dim() != audio.dim()) {
        return Err(Error::DimensionMismatch(format!(
            "adapter {} leaves audio at {} and reference at {}",
            adapter.descriptor(),
            audio.dim(),
            bad.dim()
        )));
    }
    Ok((audio, refs))
}

fn labelled(mut report: MetricReport, adapter: &ProjectionSpec) -> MetricReport {
    report.adapter = Some(adapter.descriptor());
    report
}

/// [`frechet_sets`] after reconciling dimensions with `adapter`; `b` is the
/// reference side.
pub fn frechet_adapted(
    a: &EmbeddingSet,
    b: &EmbeddingSet,
    kind: MetricKind,
    adapter: &ProjectionSpec,
) -> Result<MetricReport> {
    let (a, refs) = reconcile(a, &[b], adapter)?;
    Ok(labelled(frechet_sets(&a, &refs[0], kind)?, adapter))
}

/// Fréchet audio-visual distance.
pub fn favd(audio: &EmbeddingSet, video: &EmbeddingSet, adapter: &ProjectionSpec) -> Result<MetricReport> {
    let (a, refs) = reconcile(audio, &[video], adapter)?;
    Ok(labelled(frechet_sets(&a, &refs[0], MetricKind::FAVD)?, adapter))
}

/// Fréchet audio-text distance.
pub fn fatd(audio: &EmbeddingSet, text: &EmbeddingSet, adapter: &ProjectionSpec) -> Result<MetricReport> {
    let (a, refs) = reconcile(audio, &[text], adapter)?;
    Ok(labelled(frechet_sets(&a, &refs[0], MetricKind::FATD)?, adapter))
}

/// Fréchet distance between audio and the row-wise average of video and text.
pub fn favtd(
    audio: &EmbeddingSet,
    video: &EmbeddingSet,
    text: &EmbeddingSet,
    adapter: &ProjectionSpec,
) -> Result<MetricReport> {
    if video.count() != text.count() {
        return Err(Error::ShapeMismatch(format!(
            "video has {} rows but text has {}",
            video.count(),
            text.count()
        )));
    }
    let (a, refs) = reconcile(audio, &[video, text], adapter)?;
    let joint = average_sets(&refs[0], &refs[1])?;
    Ok(labelled(frechet_sets(&a, &joint, MetricKind::FAVTD)?, adapter))
}

fn check_probs(set: &EmbeddingSet) -> Result<()> {
    match set.modality() {
        None | Some(Modality::Probs) => Ok(()),
        Some(other) => Err(Error::Config(format!(
            "expected class probabilities, got {other:?} embeddings"
        ))),
    }
}

/// Validated, renormalised probability rows.
fn distributions(set: &EmbeddingSet) -> Result<Vec<Vec<f64>>> {
    check_probs(set)?;
    set.rows()
        .enumerate()
        .map(|(i, row)| {
            if let Some(v) = row.iter().find(|v| !(**v >= 0.0)) {
                return Err(Error::InvalidDistribution {
                    row: i,
                    reason: format!("entry {v} is negative or not a number"),
                });
            }
            let sum: f64 = row.iter().map(|&v| f64::from(v)).sum();
            if !(sum > 0.0) {
                return Err(Error::InvalidDistribution {
                    row: i,
                    reason: "row sums to zero".into(),
                });
            }
            Ok(row.iter().map(|&v| f64::from(v) / sum).collect())
        })
        .collect()
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi.max(PROB_FLOOR).ln() - qi.max(PROB_FLOOR).ln()))
        .sum()
}

/// Inception Score `exp(E_x KL(p(y|x) ‖ p(y)))` with natural logarithms,
/// averaged over `splits` contiguous splits.
pub fn inception_score(probs: &EmbeddingSet, splits: usize) -> Result<MetricReport> {
    if splits == 0 {
        return Err(Error::Config("splits must be positive".into()));
    }
    let n = probs.count();
    if n < splits {
        return Err(Error::InsufficientRows { needed: splits, got: n });
    }
    let rows = distributions(probs)?;
    let classes = probs.dim();
    let mut total = 0.0;
    for s in 0..splits {
        let part = &rows[s * n / splits..(s + 1) * n / splits];
        let mut marginal = vec![0.0; classes];
        for row in part {
            for (m, &p) in marginal.iter_mut().zip(row) {
                *m += p;
            }
        }
        let inv = 1.0 / part.len() as f64;
        marginal.iter_mut().for_each(|m| *m *= inv);
        let mean_kl = part.iter().map(|row| kl(row, &marginal)).sum::<f64>() * inv;
        total += mean_kl.exp();
    }
    Ok(MetricReport::new(MetricKind::IS, total / splits as f64, n, 0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlDirection {
    /// `KL(reference ‖ generated)`.
    #[default]
    RefToGen,
    /// `KL(generated ‖ reference)`.
    GenToRef,
}

/// Mean over pairs of the per-row KL divergence.
pub fn paired_kl(
    reference: &EmbeddingSet,
    generated: &EmbeddingSet,
    direction: KlDirection,
) -> Result<MetricReport> {
    if reference.count() != generated.count() || reference.dim() != generated.dim() {
        return Err(Error::ShapeMismatch(format!(
            "reference is {}x{} but generated is {}x{}",
            reference.count(),
            reference.dim(),
            generated.count(),
            generated.dim()
        )));
    }
    if reference.is_empty() {
        return Err(Error::InsufficientRows { needed: 1, got: 0 });
    }
    let p = distributions(reference)?;
    let q = distributions(generated)?;
    let sum: f64 = p
        .iter()
        .zip(&q)
        .map(|(p, q)| match direction {
            KlDirection::RefToGen => kl(p, q),
            KlDirection::GenToRef => kl(q, p),
        })
        .sum();
    Ok(MetricReport::new(
        MetricKind::KL,
        sum / p.len() as f64,
        reference.count(),
        generated.count(),
    ))
}
