use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use serde_json::json;
use t2av_core::embedset::{manifest_path, read_embeddings, write_embeddings, write_manifest};
use t2av_core::mechanism::{
    ddpm_loss, multi_head_stack, vclap_grad_check, vclap_loss, AttentionConfig, DiffusionSchedule, FeatureSeq,
    Latent, NoiseNorm, SeqBatch, VclapConfig,
};
use t2av_core::metrics::{favd, fatd, favtd, frechet_adapted, frechet_sets, inception_score, paired_kl};
use t2av_core::report::{render_metric_reports, render_validation};
use t2av_core::simbench::{gen_population, run_seeds, MismatchMode, Protocol, DEFAULT_GRID};
use t2av_core::stats::{fit, GaussianStats, Matrix};
use t2av_core::{EmbeddingSet, MetricKind, PopulationSpec, ProjectionSpec};

use crate::args::{BenchArg, Command, Mech, MetricArg, Opts, Predictor, SynthMode, TemporalMode};
use crate::CliError;

/// Runs a parsed command and returns the text for stdout (or `--out`).
pub fn run(command: &Command, opts: &Opts) -> Result<String, CliError> {
    match command {
        Command::Stats => stats(opts),
        Command::Frechet => frechet(opts),
        Command::Metric { kind } => metric(*kind, opts),
        Command::Is => {
            let probs = load(&opts.path("a", &opts.a)?)?;
            let report = inception_score(&probs, opts.splits.unwrap_or(1))?;
            Ok(render_metric_reports(&[report], opts.format()))
        }
        Command::Kl => {
            let reference = load(&opts.path("a", &opts.a)?)?;
            let generated = load(&opts.path("b", &opts.b)?)?;
            let direction = opts.direction.map(Into::into).unwrap_or_default();
            let report = paired_kl(&reference, &generated, direction)?;
            Ok(render_metric_reports(&[report], opts.format()))
        }
        Command::Mech { kernel } => mech(kernel, opts),
        Command::Bench {
            protocol,
            mode,
            shift,
            clips,
        } => bench(*protocol, *mode, *shift, *clips, opts),
        Command::Synth { mode, shift, clips } => synth(*mode, *shift, *clips, opts),
    }
}

fn load(path: &Path) -> Result<EmbeddingSet, CliError> {
    Ok(read_embeddings(path)?)
}

fn adapter(opts: &Opts, sets: &[&EmbeddingSet]) -> Result<ProjectionSpec, CliError> {
    match opts.adapter.as_deref() {
        None | Some("pad") => Ok(ProjectionSpec::pad_to_narrowest(sets)),
        Some(spec) => match spec.strip_prefix("matrix:") {
            Some(path) => {
                let m = load(Path::new(path))?;
                let rows: Vec<Vec<f64>> = m.rows().map(|r| r.iter().map(|&v| f64::from(v)).collect()).collect();
                Ok(ProjectionSpec::Matrix(Matrix::from_rows(&rows)?))
            }
            None => Err(CliError::Usage(format!(
                "adapter {spec:?} must be \"pad\" or \"matrix:<path>\""
            ))),
        },
    }
}

fn stats(opts: &Opts) -> Result<String, CliError> {
    let set = load(&opts.path("a", &opts.a)?)?;
    let stats = if set.count() >= 2 {
        fit::<f64>(&set)?
    } else {
        let mut s = GaussianStats::<f64>::empty(set.dim());
        for row in set.rows() {
            s.push(row)?;
        }
        s
    };
    Ok(stats.to_json() + "\n")
}

fn frechet(opts: &Opts) -> Result<String, CliError> {
    let a = load(&opts.path("a", &opts.a)?)?;
    let b = load(&opts.path("b", &opts.b)?)?;
    let report = match opts.adapter {
        None => frechet_sets(&a, &b, MetricKind::FD)?,
        Some(_) => frechet_adapted(&a, &b, MetricKind::FD, &adapter(opts, &[&a, &b])?)?,
    };
    Ok(render_metric_reports(&[report], opts.format()))
}

fn metric(kind: MetricArg, opts: &Opts) -> Result<String, CliError> {
    let audio = load(&opts.path("audio", &opts.audio)?)?;
    let report = match kind {
        MetricArg::Favd => {
            let video = load(&opts.path("video", &opts.video)?)?;
            favd(&audio, &video, &adapter(opts, &[&audio, &video])?)?
        }
        MetricArg::Fatd => {
            let text = load(&opts.path("text", &opts.text)?)?;
            fatd(&audio, &text, &adapter(opts, &[&audio, &text])?)?
        }
        MetricArg::Favtd => {
            let video = load(&opts.path("video", &opts.video)?)?;
            let text = load(&opts.path("text", &opts.text)?)?;
            favtd(&audio, &video, &text, &adapter(opts, &[&audio, &video, &text])?)?
        }
    };
    Ok(render_metric_reports(&[report], opts.format()))
}

fn json_line<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("json values serialize") + "\n"
}

fn mech(kernel: &Mech, opts: &Opts) -> Result<String, CliError> {
    match *kernel {
        Mech::Attn { heads, depth, no_residual } => {
            let set = load(&opts.path("a", &opts.a)?)?;
            let rows: Vec<Vec<f64>> = set.rows().map(|r| r.iter().map(|&v| f64::from(v)).collect()).collect();
            let seq = FeatureSeq::from_rows(&rows)?;
            let cfg = AttentionConfig {
                heads,
                depth,
                dim: set.dim(),
                residual: !no_residual,
            };
            let out = multi_head_stack(&seq, &cfg)?;
            let values: Vec<&[f64]> = out.rows().collect();
            Ok(json_line(&json!({
                "steps": out.steps(),
                "dim": out.dim(),
                "heads": heads,
                "depth": depth,
                "residual": !no_residual,
                "values": values,
            })))
        }
        Mech::Vclap {
            batch,
            steps,
            dim,
            temperature,
            epsilon,
        } => {
            let (audio, text, seed) = match (&opts.audio, &opts.text) {
                (Some(a), Some(t)) => {
                    let (a, t) = (load(a)?, load(t)?);
                    let steps = steps.unwrap_or(a.segments_per_clip().max(1));
                    let batch = batch.unwrap_or(a.count() / steps);
                    (
                        SeqBatch::<f64>::from_embeddings(&a, batch, steps)?,
                        SeqBatch::<f64>::from_embeddings(&t, batch, steps)?,
                        None,
                    )
                }
                (None, None) => {
                    let seed = opts.seed.unwrap_or(0);
                    let (b, t) = (batch.unwrap_or(4), steps.unwrap_or(2));
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let mut draw = || -> Result<SeqBatch<f64>, CliError> {
                        let values = (0..b * t * dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                        Ok(SeqBatch::new(b, t, dim, values)?)
                    };
                    (draw()?, draw()?, Some(seed))
                }
                _ => return Err(CliError::Usage("vclap needs both --audio and --text, or neither".into())),
            };
            let cfg = VclapConfig::new(audio.batch(), audio.steps(), audio.dim()).with_temperature(temperature);
            let loss = vclap_loss(&audio, &text, &cfg)?;
            let check = vclap_grad_check(&audio, &text, &cfg, epsilon)?;
            Ok(json_line(&json!({
                "loss": loss,
                "max_rel_err": check.max_rel_err,
                "epsilon": check.epsilon,
                "seed": seed,
            })))
        }
        Mech::Ddpm {
            channels,
            time,
            freq,
            timestep,
            predictor,
        } => {
            let seed = opts.seed.unwrap_or(0);
            let norm: NoiseNorm = opts.norm.map(Into::into).unwrap_or_default();
            let shape = [channels, time, freq];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let z0 = Latent::<f64>::standard_normal(shape, &mut rng);
            let eps = Latent::<f64>::standard_normal(shape, &mut rng);
            let schedule = DiffusionSchedule::<f64>::default();
            let condition = FeatureSeq::zeros(1, 1);
            let loss = match predictor {
                Predictor::Oracle => ddpm_loss(&z0, &eps, timestep, &schedule, |_, _, _| eps.clone(), &condition, norm)?,
                Predictor::Zero => {
                    ddpm_loss(&z0, &eps, timestep, &schedule, |z, _, _| Latent::zeros(z.shape()), &condition, norm)?
                }
            };
            let alpha_bar = schedule.alpha_bars()[timestep];
            Ok(json_line(&json!({
                "timestep": timestep,
                "alpha_bar": alpha_bar,
                "loss": loss,
                "norm": norm,
                "predictor": format!("{predictor:?}").to_lowercase(),
                "seed": seed,
            })))
        }
    }
}

fn population(opts: &Opts, clips: Option<usize>, mode: MismatchMode) -> PopulationSpec {
    let mut spec = opts.population.clone().unwrap_or_default();
    if let Some(n) = clips {
        spec.n_clips = n;
    }
    spec.mismatch_mode = mode;
    spec
}

fn bench(
    protocol: BenchArg,
    mode: TemporalMode,
    shift: Option<usize>,
    clips: Option<usize>,
    opts: &Opts,
) -> Result<String, CliError> {
    let grid = opts.grid()?.unwrap_or_else(|| DEFAULT_GRID.to_vec());
    let (protocol, mismatch) = match (protocol, mode) {
        (BenchArg::Visual, _) => (Protocol::Visual, MismatchMode::IndependentLatent),
        (BenchArg::Temporal, TemporalMode::Shift) => (Protocol::Temporal, MismatchMode::TemporalShift { k: shift }),
        (BenchArg::Temporal, TemporalMode::Class) => (Protocol::Temporal, MismatchMode::SameClassOtherClip),
    };
    let spec = population(opts, clips, mismatch);
    let report = run_seeds(protocol, &spec, &grid, &opts.seed_list()?)?;
    Ok(render_validation(&report, opts.format()))
}

fn synth(mode: SynthMode, shift: Option<usize>, clips: Option<usize>, opts: &Opts) -> Result<String, CliError> {
    let dir = opts.path("out", &opts.out)?;
    let mismatch = match mode {
        SynthMode::Independent => MismatchMode::IndependentLatent,
        SynthMode::Class => MismatchMode::SameClassOtherClip,
        SynthMode::Shift => MismatchMode::TemporalShift { k: shift },
    };
    let mut spec = population(opts, clips, mismatch);
    if let Some(seed) = opts.seed {
        spec.seed = seed;
    }
    let pop = gen_population(&spec)?;
    fs::create_dir_all(&dir).map_err(|e| t2av_core::Error::io(&dir, e))?;
    let file = |name: &str| -> PathBuf { dir.join(name) };
    write_embeddings(&pop.audio, file("audio.emb"))?;
    write_embeddings(&pop.video, file("video.emb"))?;
    write_embeddings(&pop.text, file("text.emb"))?;
    let manifest = manifest_path(file("audio.emb"));
    write_manifest(&pop.manifest, &manifest)?;
    Ok(json_line(&json!({
        "audio": file("audio.emb"),
        "video": file("video.emb"),
        "text": file("text.emb"),
        "manifest": manifest,
        "clips": pop.n_clips(),
        "segments": spec.segments,
        "dim": spec.dim,
        "seed": spec.seed,
    })))
}
