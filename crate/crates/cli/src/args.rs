use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use t2av_core::mechanism::NoiseNorm;
use t2av_core::metrics::KlDirection;
use t2av_core::{Format, PopulationSpec};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "t2av", version, about = "Evaluation metrics and reference kernels for video-aligned text-to-audio")]
pub struct Cli {
    #[command(flatten)]
    pub opts: Opts,
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every command. A `--config` JSON file may supply any of
/// them (plus `population`); flags take precedence.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Opts {
    #[arg(long, global = true)]
    pub a: Option<PathBuf>,
    #[arg(long, global = true)]
    pub b: Option<PathBuf>,
    #[arg(long, global = true)]
    pub audio: Option<PathBuf>,
    #[arg(long, global = true)]
    pub video: Option<PathBuf>,
    #[arg(long, global = true)]
    pub text: Option<PathBuf>,
    /// `pad` or `matrix:<path>` (a T2AVEMB1 file holding the D_in x D_out matrix).
    #[arg(long, global = true)]
    pub adapter: Option<String>,
    #[arg(long, global = true)]
    pub splits: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub direction: Option<DirectionArg>,
    /// Grid cells as `true:false` pairs, e.g. `500:0,0:500`.
    #[arg(long, global = true)]
    pub grid: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of consecutive seeds starting at `--seed`.
    #[arg(long, global = true)]
    pub seeds: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<FormatArg>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub norm: Option<NormArg>,
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(skip)]
    pub population: Option<PopulationSpec>,
}

macro_rules! overlay {
    ($self:ident, $file:ident, $($field:ident),*) => {
        $( if $self.$field.is_none() { $self.$field = $file.$field; } )*
    };
}

impl Opts {
    /// Fills unset options from the config file, if one was given.
    pub fn resolve(mut self) -> Result<Self, CliError> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = fs::read_to_string(&path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let file: Opts = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
        overlay!(
            self, file, a, b, audio, video, text, adapter, splits, direction, grid, seed, seeds, out, format,
            threads, norm, population
        );
        Ok(self)
    }

    pub fn format(&self) -> Format {
        self.format.map_or(Format::Json, Into::into)
    }

    pub fn path(&self, name: &str, value: &Option<PathBuf>) -> Result<PathBuf, CliError> {
        value.clone().ok_or_else(|| CliError::Usage(format!("--{name} <path> is required")))
    }

    pub fn seed_list(&self) -> Result<Vec<u64>, CliError> {
        let start = self.seed.unwrap_or(0);
        let n = self.seeds.unwrap_or(1);
        if n == 0 {
            return Err(CliError::Usage("--seeds must be positive".into()));
        }
        (0..n as u64)
            .map(|i| start.checked_add(i).ok_or_else(|| CliError::Usage("seed range overflows u64".into())))
            .collect()
    }

    pub fn grid(&self) -> Result<Option<Vec<(usize, usize)>>, CliError> {
        self.grid.as_deref().map(parse_grid).transpose()
    }
}

pub fn parse_grid(text: &str) -> Result<Vec<(usize, usize)>, CliError> {
    let bad = || CliError::Usage(format!("grid {text:?} must look like \"500:0,0:500\""));
    let cells = text
        .split(',')
        .map(|cell| {
            let (t, f) = cell.trim().split_once(':').ok_or_else(bad)?;
            Ok((t.trim().parse().map_err(|_| bad())?, f.trim().parse().map_err(|_| bad())?))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    if cells.is_empty() {
        return Err(bad());
    }
    Ok(cells)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionArg {
    RefGen,
    GenRef,
}

impl From<DirectionArg> for KlDirection {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::RefGen => KlDirection::RefToGen,
            DirectionArg::GenRef => KlDirection::GenToRef,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatArg {
    Json,
    Csv,
    Table,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
            FormatArg::Table => Format::Table,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormArg {
    /// Euclidean norm of the noise residual.
    L2,
    /// Mean squared residual.
    L2sq,
}

impl From<NormArg> for NoiseNorm {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::L2 => NoiseNorm::L2,
            NormArg::L2sq => NoiseNorm::L2Squared,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Gaussian statistics (mean, covariance) of an embedding file.
    Stats,
    /// Fréchet distance between two embedding files.
    Frechet,
    /// Cross-modal Fréchet metric.
    Metric {
        #[arg(value_enum)]
        kind: MetricArg,
    },
    /// Inception Score of a class-probability file.
    Is,
    /// Mean paired KL divergence between two class-probability files.
    Kl,
    /// Reference kernels.
    Mech {
        #[command(subcommand)]
        kernel: Mech,
    },
    /// Metric validation on synthetic populations.
    Bench {
        #[arg(value_enum)]
        protocol: BenchArg,
        /// False-pair construction for the temporal protocol.
        #[arg(long, value_enum, default_value = "shift")]
        mode: TemporalMode,
        /// Fixed segment shift; drawn per clip when omitted.
        #[arg(long)]
        shift: Option<usize>,
        #[arg(long)]
        clips: Option<usize>,
    },
    /// Writes a synthetic population (audio/video/text files and the pair
    /// manifest) into the `--out` directory.
    Synth {
        #[arg(long, value_enum, default_value = "independent")]
        mode: SynthMode,
        #[arg(long)]
        shift: Option<usize>,
        #[arg(long)]
        clips: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Favd,
    Fatd,
    Favtd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchArg {
    Visual,
    Temporal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TemporalMode {
    Shift,
    Class,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthMode {
    Independent,
    Class,
    Shift,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Predictor {
    /// Returns the true noise.
    Oracle,
    /// Predicts zero noise.
    Zero,
}

#[derive(Debug, Subcommand)]
pub enum Mech {
    /// Multi-head temporal self-attention over the rows of `--a`.
    Attn {
        #[arg(long, default_value_t = 8)]
        heads: usize,
        #[arg(long, default_value_t = 4)]
        depth: usize,
        #[arg(long)]
        no_residual: bool,
    },
    /// VCLAP loss and gradient check, on `--audio/--text` or a seeded random batch.
    Vclap {
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, default_value_t = 16)]
        dim: usize,
        #[arg(long, default_value_t = 0.07)]
        temperature: f64,
        #[arg(long, default_value_t = 1e-5)]
        epsilon: f64,
    },
    /// Diffusion noise objective on a seeded random latent.
    Ddpm {
        #[arg(long, default_value_t = 8)]
        channels: usize,
        #[arg(long, default_value_t = 64)]
        time: usize,
        #[arg(long, default_value_t = 16)]
        freq: usize,
        #[arg(long, default_value_t = 500)]
        timestep: usize,
        #[arg(long, value_enum, default_value = "oracle")]
        predictor: Predictor,
    },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("500:0, 0:500").unwrap(), vec![(500, 0), (0, 500)]);
        assert!(parse_grid("500").is_err());
        assert!(parse_grid("a:1").is_err());
        assert!(parse_grid("").is_err());
    }

    #[test]
    fn config_fills_unset_flags_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        fs::write(&path, r#"{"seed": 3, "seeds": 2, "format": "csv", "grid": "1:1"}"#).unwrap();
        let opts = Opts {
            seed: Some(9),
            config: Some(path),
            ..Opts::default()
        }
        .resolve()
        .unwrap();
        assert_eq!(opts.seed, Some(9));
        assert_eq!(opts.seeds, Some(2));
        assert_eq!(opts.format(), Format::Csv);
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        fs::write(&path, r#"{"sed": 3}"#).unwrap();
        let opts = Opts {
            config: Some(path),
            ..Opts::default()
        };
        assert!(matches!(opts.resolve(), Err(CliError::Usage(_))));
    }

    #[test]
    fn seed_ranges() {
        let opts = Opts {
            seed: Some(7),
            seeds: Some(3),
            ..Opts::default()
        };
        assert_eq!(opts.seed_list().unwrap(), vec![7, 8, 9]);
    }
}
