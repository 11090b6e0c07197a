//! Synthetic audio/video/text populations and the metric-validation protocols
//! run on them.
//!
//! Every clip has a latent `u = c_class + s_w·w` shared by its modalities.
//! Video and matched audio rows are `o + M_x u + drift_s + σ·n` with
//! per-modality maps `M_x = M + gap·E_x` and a common offset `o`; text rows
//! are `o + M_t c_class + σ·n`. Mismatched
//! audio for false pairs is produced according to [`MismatchMode`]:
//!
//! * `IndependentLatent`: a fresh class centre and within-class draw from an
//!   external content prior displaced by `mismatch_shift`.
//! * `SameClassOtherClip`: the clip's own class centre with a fresh
//!   within-class draw from the external prior, displaced by half as much.
//! * `TemporalShift`: the clip's own audio delayed by `k` segments with zero
//!   padding (`k` drawn from `1..T` when unspecified).
//!
//! The matched population, the mismatched audio and the pair selection use
//! independent random streams, so matched cells do not depend on the
//! mismatch mode.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedset::{
    concat_sets, select_clips, shift_segments, EmbeddingSet, Modality, Pair, PairLabel, PairManifest,
    ProjectionSpec, ShiftMode,
};
use crate::error::{Error, Result};
use crate::metrics::{favd, fatd, favtd, MetricKind};

/// Grid of `(true_count, false_count)` cells used by the visual and temporal tables.
pub const DEFAULT_GRID: [(usize, usize); 5] = [(500, 0), (0, 500), (500, 500), (500, 1000), (1000, 500)];

const CLASS_SPREAD: f64 = 0.8;
const WITHIN_SPREAD: f64 = 0.6;

const STREAM_POPULATION: u64 = 0;
const STREAM_MISMATCH: u64 = 1;
const STREAM_SELECTION: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MismatchMode {
    IndependentLatent,
    SameClassOtherClip,
    TemporalShift { k: Option<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationSpec {
    pub n_clips: usize,
    pub segments: usize,
    pub dim: usize,
    pub latent_dim: usize,
    pub noise_scale: f64,
    pub mismatch_mode: MismatchMode,
    pub seed: u64,
    pub n_classes: usize,
    /// Per-segment drift standard deviation, relative to the unit signal scale.
    pub drift_scale: f64,
    /// Size of the per-modality perturbation of the shared map; 0 gives identical maps.
    pub modality_gap: f64,
    /// Norm of the latent displacement of mismatched content.
    pub mismatch_shift: f64,
    /// Norm of the mean vector shared by all modalities.
    pub embedding_offset: f64,
    pub clip_seconds: f64,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        Self {
            n_clips: 1500,
            segments: 4,
            dim: 16,
            latent_dim: 8,
            noise_scale: 0.3,
            mismatch_mode: MismatchMode::IndependentLatent,
            seed: 0,
            n_classes: 10,
            drift_scale: 0.5,
            modality_gap: 0.3,
            mismatch_shift: 1.5,
            embedding_offset: 3.0,
            clip_seconds: 10.0,
        }
    }
}

impl PopulationSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n_clips == 0 || self.segments == 0 || self.dim == 0 || self.latent_dim == 0 || self.n_classes == 0 {
            return fail(format!("population sizes must be positive: {self:?}"));
        }
        if self.latent_dim > self.dim {
            return fail(format!(
                "latent dimension {} exceeds embedding dimension {}",
                self.latent_dim, self.dim
            ));
        }
        for (name, v) in [
            ("noise_scale", self.noise_scale),
            ("drift_scale", self.drift_scale),
            ("modality_gap", self.modality_gap),
            ("mismatch_shift", self.mismatch_shift),
            ("embedding_offset", self.embedding_offset),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return fail(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if !(self.clip_seconds.is_finite() && self.clip_seconds > 0.0) {
            return fail(format!("clip_seconds must be positive, got {}", self.clip_seconds));
        }
        if let MismatchMode::TemporalShift { k } = self.mismatch_mode {
            match k {
                Some(k) if k >= self.segments => {
                    return Err(Error::Segments(format!(
                        "shift {k} out of range for {} segments",
                        self.segments
                    )))
                }
                None if self.segments < 2 => {
                    return Err(Error::Segments("random shifts need at least two segments".into()))
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Generated population. `audio` holds `2·n_clips` clips: the matched audio of
/// every clip followed by its mismatched counterpart; `video` and `text` hold
/// one clip each. Manifest indices address clips.
#[derive(Debug, Clone)]
pub struct Population {
    pub audio: EmbeddingSet,
    pub video: EmbeddingSet,
    pub text: EmbeddingSet,
    pub manifest: PairManifest,
}

impl Population {
    pub fn n_clips(&self) -> usize {
        self.video.clip_count()
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn gaussian_vec(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> Vec<f64> {
    (0..len).map(|_| scale * normal(rng)).collect()
}

fn random_direction(rng: &mut ChaCha8Rng, len: usize, norm: f64) -> Vec<f64> {
    let dir = gaussian_vec(rng, len, 1.0);
    let n = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    dir.into_iter().map(|x| x * norm / n).collect()
}

// Row-major D×k map.
struct LinearMap {
    rows: usize,
    cols: usize,
    w: Vec<f64>,
}

impl LinearMap {
    fn apply(&self, u: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|r| self.w[r * self.cols..(r + 1) * self.cols].iter().zip(u).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn perturbed(&self, rng: &mut ChaCha8Rng, gap: f64) -> Self {
        let scale = gap / (self.cols as f64).sqrt();
        Self {
            rows: self.rows,
            cols: self.cols,
            w: self.w.iter().map(|&x| x + scale * normal(rng)).collect(),
        }
    }
}

fn push_rows(out: &mut Vec<f32>, mean: &[f64], drift: Option<&[f64]>, sigma: f64, rng: &mut ChaCha8Rng) {
    for (j, &m) in mean.iter().enumerate() {
        let d = drift.map_or(0.0, |d| d[j]);
        out.push((m + d + sigma * normal(rng)) as f32);
    }
}

/// Draws a population from `spec`; identical specs give bit-identical output.
pub fn gen_population(spec: &PopulationSpec) -> Result<Population> {
    spec.validate()?;
    let (n, t, d, k) = (spec.n_clips, spec.segments, spec.dim, spec.latent_dim);
    let sigma = spec.noise_scale;
    let mut rng = spec.rng(STREAM_POPULATION);

    let base = LinearMap {
        rows: d,
        cols: k,
        w: gaussian_vec(&mut rng, d * k, 1.0 / (k as f64).sqrt()),
    };
    let map_video = base.perturbed(&mut rng, spec.modality_gap);
    let map_audio = base.perturbed(&mut rng, spec.modality_gap);
    let map_text = base.perturbed(&mut rng, spec.modality_gap);
    let centers: Vec<Vec<f64>> = (0..spec.n_classes)
        .map(|_| gaussian_vec(&mut rng, k, CLASS_SPREAD))
        .collect();
    let drift: Vec<Vec<f64>> = (0..t).map(|_| gaussian_vec(&mut rng, d, spec.drift_scale)).collect();
    let offset = random_direction(&mut rng, d, spec.embedding_offset);
    let shifted = |v: Vec<f64>| -> Vec<f64> { v.iter().zip(&offset).map(|(a, b)| a + b).collect() };

    let mut classes = Vec::with_capacity(n);
    let mut audio = Vec::with_capacity(2 * n * t * d);
    let mut video = Vec::with_capacity(n * t * d);
    let mut text = Vec::with_capacity(n * t * d);
    for _ in 0..n {
        let class = rng.random_range(0..spec.n_classes);
        classes.push(class);
        let within = gaussian_vec(&mut rng, k, WITHIN_SPREAD);
        let u: Vec<f64> = centers[class].iter().zip(&within).map(|(c, w)| c + w).collect();
        let (mv, ma, mt) = (
            shifted(map_video.apply(&u)),
            shifted(map_audio.apply(&u)),
            shifted(map_text.apply(&centers[class])),
        );
        for s in 0..t {
            push_rows(&mut video, &mv, Some(&drift[s]), sigma, &mut rng);
            push_rows(&mut audio, &ma, Some(&drift[s]), sigma, &mut rng);
            push_rows(&mut text, &mt, None, sigma, &mut rng);
        }
    }
    let matched_audio = EmbeddingSet::new(d, t, audio)?.with_modality(Modality::Audio);

    let mut rng = spec.rng(STREAM_MISMATCH);
    let displacement = random_direction(&mut rng, k, spec.mismatch_shift);
    let mut shifts = vec![0usize; n];
    let mismatched_audio = match spec.mismatch_mode {
        MismatchMode::TemporalShift { k: fixed } => {
            let mut clips = Vec::with_capacity(n);
            for (c, shift) in shifts.iter_mut().enumerate() {
                *shift = fixed.unwrap_or_else(|| rng.random_range(1..t));
                let clip = select_clips(&matched_audio, &[c])?;
                clips.push(shift_segments(&clip, *shift, ShiftMode::PadZero)?);
            }
            let refs: Vec<&EmbeddingSet> = clips.iter().collect();
            concat_sets(&refs)?
        }
        mode => {
            let mut data = Vec::with_capacity(n * t * d);
            for &class in &classes {
                let (center, offset) = match mode {
                    MismatchMode::IndependentLatent => (gaussian_vec(&mut rng, k, CLASS_SPREAD), 1.0),
                    _ => (centers[class].clone(), 0.5),
                };
                let within = gaussian_vec(&mut rng, k, WITHIN_SPREAD);
                let u: Vec<f64> = (0..k).map(|j| center[j] + within[j] + offset * displacement[j]).collect();
                let ma = shifted(map_audio.apply(&u));
                for drift_s in &drift {
                    push_rows(&mut data, &ma, Some(drift_s), sigma, &mut rng);
                }
            }
            EmbeddingSet::new(d, t, data)?
        }
    };
    let audio = concat_sets(&[&matched_audio, &mismatched_audio])?.with_modality(Modality::Audio);

    let segment_seconds = spec.clip_seconds / t as f64;
    let mut pairs = Vec::with_capacity(2 * n);
    for (c, &class) in classes.iter().enumerate() {
        for (label, audio_row, shift) in [(PairLabel::TruePair, c, 0), (PairLabel::FalsePair, n + c, shifts[c])] {
            let suffix = if label == PairLabel::TruePair { "true" } else { "false" };
            pairs.push(Pair {
                id: format!("clip{c:05}-{suffix}"),
                audio_row,
                visual_row: c,
                text_row: c,
                label,
                shift_s: shift as f64 * segment_seconds,
                class_tag: format!("class{class:02}"),
            });
        }
    }
    let manifest = PairManifest::new(pairs);

    Ok(Population {
        audio,
        video: EmbeddingSet::new(d, t, video)?.with_modality(Modality::Video),
        text: EmbeddingSet::new(d, t, text)?.with_modality(Modality::Text),
        manifest,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationRow {
    pub true_count: usize,
    pub false_count: usize,
    pub metric: MetricKind,
    pub value: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub rows: Vec<ValidationRow>,
}

impl ValidationReport {
    /// Value of `metric` at a cell for a given seed.
    pub fn value(&self, cell: (usize, usize), metric: MetricKind, seed: u64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| (r.true_count, r.false_count) == cell && r.metric == metric && r.seed == seed)
            .map(|r| r.value)
    }

    pub fn seeds(&self) -> Vec<u64> {
        let mut seeds: Vec<u64> = self.rows.iter().map(|r| r.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        seeds
    }
}

/// Selected pair sets for one grid cell.
pub struct CellSets {
    pub audio: EmbeddingSet,
    pub video: EmbeddingSet,
    pub text: EmbeddingSet,
}

/// Builds the audio/video/text sets of a `(true_count, false_count)` cell: the
/// first `true_count` clips of a seeded permutation contribute matched pairs,
/// the next `false_count` contribute mismatched ones.
pub fn cell_sets(pop: &Population, order: &[usize], true_count: usize, false_count: usize) -> Result<CellSets> {
    let n = pop.n_clips();
    let needed = true_count + false_count;
    if needed > order.len() || needed > n {
        return Err(Error::InsufficientRows { needed, got: n });
    }
    let trues = &order[..true_count];
    let falses = &order[true_count..needed];
    let audio_idx: Vec<usize> = trues.iter().copied().chain(falses.iter().map(|&c| n + c)).collect();
    let ref_idx: Vec<usize> = order[..needed].to_vec();
    Ok(CellSets {
        audio: select_clips(&pop.audio, &audio_idx)?,
        video: select_clips(&pop.video, &ref_idx)?,
        text: select_clips(&pop.text, &ref_idx)?,
    })
}

fn selection_order(spec: &PopulationSpec) -> Vec<usize> {
    let mut order: Vec<usize> = (0..spec.n_clips).collect();
    order.shuffle(&mut spec.rng(STREAM_SELECTION));
    order
}

fn check_grid(spec: &PopulationSpec, grid: &[(usize, usize)]) -> Result<()> {
    for &(t, f) in grid {
        if t + f > spec.n_clips {
            return Err(Error::InsufficientRows {
                needed: t + f,
                got: spec.n_clips,
            });
        }
    }
    Ok(())
}

/// FAVD, FATD and FA(VT)D for every grid cell at `spec.seed`.
pub fn run_visual_validation(spec: &PopulationSpec, grid: &[(usize, usize)]) -> Result<ValidationReport> {
    check_grid(spec, grid)?;
    let pop = gen_population(spec)?;
    let order = selection_order(spec);
    let adapter = ProjectionSpec::PadTruncate { target_dim: spec.dim };
    let mut rows = Vec::with_capacity(grid.len() * 3);
    for &(t, f) in grid {
        let cell = cell_sets(&pop, &order, t, f)?;
        for report in [
            favd(&cell.audio, &cell.video, &adapter)?,
            fatd(&cell.audio, &cell.text, &adapter)?,
            favtd(&cell.audio, &cell.video, &cell.text, &adapter)?,
        ] {
            rows.push(ValidationRow {
                true_count: t,
                false_count: f,
                metric: report.metric,
                value: report.value,
                seed: spec.seed,
            });
        }
    }
    Ok(ValidationReport { rows })
}

/// FAVD for every grid cell, with false pairs formed by temporal shifts or
/// same-class swaps according to `spec.mismatch_mode`.
pub fn run_temporal_validation(spec: &PopulationSpec, grid: &[(usize, usize)]) -> Result<ValidationReport> {
    match spec.mismatch_mode {
        MismatchMode::TemporalShift { .. } | MismatchMode::SameClassOtherClip => {}
        MismatchMode::IndependentLatent => {
            return Err(Error::Config(
                "temporal validation needs temporal_shift or same_class_other_clip mismatches".into(),
            ))
        }
    }
    check_grid(spec, grid)?;
    let pop = gen_population(spec)?;
    let order = selection_order(spec);
    let adapter = ProjectionSpec::PadTruncate { target_dim: spec.dim };
    grid.iter()
        .map(|&(t, f)| {
            let cell = cell_sets(&pop, &order, t, f)?;
            Ok(ValidationRow {
                true_count: t,
                false_count: f,
                metric: MetricKind::FAVD,
                value: favd(&cell.audio, &cell.video, &adapter)?.value,
                seed: spec.seed,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map(|rows| ValidationReport { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    Visual,
    Temporal,
}

/// Runs `protocol` for each seed (in parallel) and orders the rows by grid
/// cell, then seed, independent of scheduling.
pub fn run_seeds(
    protocol: Protocol,
    spec: &PopulationSpec,
    grid: &[(usize, usize)],
    seeds: &[u64],
) -> Result<ValidationReport> {
    let per_seed: Vec<ValidationReport> = seeds
        .par_iter()
        .map(|&seed| {
            let spec = PopulationSpec { seed, ..spec.clone() };
            match protocol {
                Protocol::Visual => run_visual_validation(&spec, grid),
                Protocol::Temporal => run_temporal_validation(&spec, grid),
            }
        })
        .collect::<Result<_>>()?;
    let per_cell = per_seed.first().map_or(0, |r| r.rows.len() / grid.len().max(1));
    let mut rows = Vec::with_capacity(per_seed.iter().map(|r| r.rows.len()).sum());
    for cell in 0..grid.len() {
        for report in &per_seed {
            rows.extend_from_slice(&report.rows[cell * per_cell..(cell + 1) * per_cell]);
        }
    }
    Ok(ValidationReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> PopulationSpec {
        PopulationSpec {
            n_clips: 200,
            seed,
            ..PopulationSpec::default()
        }
    }

    fn cosine(a: &[f32], b: &[f32]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum();
        let na: f64 = a.iter().map(|&x| f64::from(x).powi(2)).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|&x| f64::from(x).powi(2)).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    #[test]
    fn degenerate_spec_makes_audio_equal_video() {
        let spec = PopulationSpec {
            noise_scale: 0.0,
            modality_gap: 0.0,
            ..small(1)
        };
        let pop = gen_population(&spec).unwrap();
        let n_rows = pop.video.count();
        assert_eq!(&pop.audio.data()[..n_rows * spec.dim], pop.video.data());
    }

    #[test]
    fn generation_is_deterministic() {
        let a = gen_population(&small(5)).unwrap();
        let b = gen_population(&small(5)).unwrap();
        assert!(a.audio.bitwise_eq(&b.audio));
        assert!(a.video.bitwise_eq(&b.video));
        assert!(a.text.bitwise_eq(&b.text));
        assert_eq!(a.manifest, b.manifest);
        let c = gen_population(&small(6)).unwrap();
        assert!(!a.audio.bitwise_eq(&c.audio));
    }

    #[test]
    fn manifest_is_consistent() {
        let pop = gen_population(&small(2)).unwrap();
        let m = &pop.manifest;
        m.validate().unwrap();
        m.check_bounds(pop.audio.clip_count(), pop.video.clip_count(), pop.text.clip_count())
            .unwrap();
        assert_eq!(m.count(PairLabel::TruePair), 200);
        assert_eq!(m.count(PairLabel::FalsePair), 200);
    }

    #[test]
    fn matched_population_ignores_mismatch_mode() {
        let a = gen_population(&small(3)).unwrap();
        let spec = PopulationSpec {
            mismatch_mode: MismatchMode::TemporalShift { k: None },
            ..small(3)
        };
        let b = gen_population(&spec).unwrap();
        let n = a.video.count() * 16;
        assert_eq!(&a.audio.data()[..n], &b.audio.data()[..n]);
        assert!(b.manifest.pairs.iter().any(|p| p.shift_s > 0.0));
    }

    #[test]
    fn true_pairs_are_more_similar_than_false_pairs() {
        for seed in 0..100 {
            let spec = PopulationSpec {
                noise_scale: 0.1,
                ..small(seed)
            };
            let pop = gen_population(&spec).unwrap();
            let rows = pop.video.count();
            let mean_cos = |offset: usize| -> f64 {
                (0..rows)
                    .map(|r| cosine(pop.audio.row(offset + r), pop.video.row(r)))
                    .sum::<f64>()
                    / rows as f64
            };
            assert!(mean_cos(0) > mean_cos(rows), "seed {seed}");
        }
    }

    #[test]
    fn spec_validation() {
        assert!(PopulationSpec { latent_dim: 32, ..small(0) }.validate().is_err());
        assert!(PopulationSpec { noise_scale: f64::NAN, ..small(0) }.validate().is_err());
        let shift = PopulationSpec {
            segments: 1,
            mismatch_mode: MismatchMode::TemporalShift { k: None },
            ..small(0)
        };
        assert!(matches!(shift.validate(), Err(Error::Segments(_))));
    }

    #[test]
    fn insufficient_population() {
        let err = run_visual_validation(&small(0), &[(150, 100)]).unwrap_err();
        assert!(matches!(err, Error::InsufficientRows { needed: 250, got: 200 }));
    }

    #[test]
    fn false_pairs_raise_every_metric() {
        let r = run_visual_validation(&small(4), &[(100, 0), (100, 100)]).unwrap();
        for m in [MetricKind::FAVD, MetricKind::FATD, MetricKind::FAVTD] {
            assert!(r.value((100, 100), m, 4).unwrap() > r.value((100, 0), m, 4).unwrap());
        }
    }

    #[test]
    fn zero_shift_reproduces_true_cell() {
        let spec = PopulationSpec {
            mismatch_mode: MismatchMode::TemporalShift { k: Some(0) },
            ..small(7)
        };
        let r = run_temporal_validation(&spec, &[(100, 0), (0, 100)]).unwrap();
        assert_eq!(r.rows[0].value, r.rows[1].value);
        let visual = run_visual_validation(&small(7), &[(100, 0)]).unwrap();
        assert_eq!(visual.value((100, 0), MetricKind::FAVD, 7), Some(r.rows[0].value));
    }

    #[test]
    fn temporal_needs_temporal_mode() {
        assert!(run_temporal_validation(&small(0), &[(10, 10)]).is_err());
    }

    #[test]
    fn seeds_are_ordered_by_cell_then_seed() {
        let grid = [(50, 0), (50, 50)];
        let r = run_seeds(Protocol::Visual, &small(0), &grid, &[3, 1, 2]).unwrap();
        assert_eq!(r.rows.len(), 2 * 3 * 3);
        let keys: Vec<(usize, u64)> = r.rows.iter().map(|x| (x.false_count, x.seed)).collect();
        assert_eq!(keys[0], (0, 3));
        assert_eq!(keys[3], (0, 1));
        assert_eq!(keys[9], (50, 3));
        let again = run_seeds(Protocol::Visual, &small(0), &grid, &[3, 1, 2]).unwrap();
        assert_eq!(r, again);
    }
}
