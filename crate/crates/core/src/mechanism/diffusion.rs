//! Linear-β DDPM schedule, forward noising and the noise-prediction objective
//! in latent space.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::FeatureSeq;

/// Latent geometry: `channels × time/compression × freq/compression`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatentSpec {
    pub channels: usize,
    pub time: usize,
    pub freq: usize,
    pub compression: usize,
}

impl LatentSpec {
    pub fn shape(&self) -> Result<[usize; 3]> {
        let LatentSpec {
            channels,
            time,
            freq,
            compression,
        } = *self;
        if channels == 0 || time == 0 || freq == 0 || compression == 0 {
            return Err(Error::Config(format!("latent dimensions must be positive: {self:?}")));
        }
        if time % compression != 0 || freq % compression != 0 {
            return Err(Error::Config(format!(
                "time {time} and freq {freq} must be divisible by compression {compression}"
            )));
        }
        Ok([channels, time / compression, freq / compression])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Latent<T> {
    shape: [usize; 3],
    data: Vec<T>,
}

impl<T: Scalar> Latent<T> {
    pub fn new(shape: [usize; 3], data: Vec<T>) -> Result<Self> {
        if data.len() != shape.iter().product::<usize>() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for latent shape {shape:?}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: [usize; 3]) -> Self {
        Self {
            shape,
            data: vec![T::zero(); shape.iter().product()],
        }
    }

    pub fn standard_normal<R: Rng + ?Sized>(shape: [usize; 3], rng: &mut R) -> Self {
        let data = (0..shape.iter().product::<usize>())
            .map(|_| T::of(rng.sample::<f64, _>(StandardNormal)))
            .collect();
        Self { shape, data }
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn norm(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    fn check_same_shape(&self, other: &Self, what: &str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!(
                "{what} has shape {:?}, expected {:?}",
                other.shape, self.shape
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSchedule<T> {
    betas: Vec<T>,
    alpha_bars: Vec<T>,
}

impl<T: Scalar> DiffusionSchedule<T> {
    pub const DEFAULT_STEPS: usize = 1000;
    pub const BETA_START: f64 = 1e-4;
    pub const BETA_END: f64 = 0.02;

    /// β linearly spaced from `beta_start` to `beta_end` inclusive.
    pub fn linear(steps: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Config("diffusion needs at least one step".into()));
        }
        if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
            return Err(Error::Config(format!(
                "betas must satisfy 0 < start <= end < 1 (got {beta_start}, {beta_end})"
            )));
        }
        let betas: Vec<T> = (0..steps)
            .map(|i| {
                let frac = if steps == 1 { 0.0 } else { i as f64 / (steps - 1) as f64 };
                T::of(beta_start + (beta_end - beta_start) * frac)
            })
            .collect();
        let mut alpha_bars = Vec::with_capacity(steps);
        let mut acc = T::one();
        for &b in &betas {
            acc *= T::one() - b;
            alpha_bars.push(acc);
        }
        Ok(Self { betas, alpha_bars })
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    pub fn betas(&self) -> &[T] {
        &self.betas
    }

    pub fn alpha_bars(&self) -> &[T] {
        &self.alpha_bars
    }

    fn alpha_bar(&self, n: usize) -> Result<T> {
        self.alpha_bars.get(n).copied().ok_or_else(|| {
            Error::Config(format!("step {n} out of range for {} steps", self.steps()))
        })
    }
}

impl<T: Scalar> Default for DiffusionSchedule<T> {
    fn default() -> Self {
        Self::linear(Self::DEFAULT_STEPS, Self::BETA_START, Self::BETA_END).expect("valid defaults")
    }
}

/// `z_n = √ᾱ_n · z0 + √(1 − ᾱ_n) · eps`.
pub fn ddpm_forward<T: Scalar>(
    z0: &Latent<T>,
    eps: &Latent<T>,
    n: usize,
    schedule: &DiffusionSchedule<T>,
) -> Result<Latent<T>> {
    z0.check_same_shape(eps, "noise")?;
    let ab = schedule.alpha_bar(n)?;
    let signal = ab.sqrt();
    let noise = (T::one() - ab).sqrt();
    Ok(Latent {
        shape: z0.shape,
        data: z0
            .data
            .iter()
            .zip(&eps.data)
            .map(|(&z, &e)| signal * z + noise * e)
            .collect(),
    })
}

/// How the noise residual is reduced to a scalar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseNorm {
    /// Mean of squared residuals over all elements.
    #[default]
    L2Squared,
    /// Euclidean norm of the residual.
    L2,
}

/// Noise-prediction objective: noise `z0` to step `n`, ask `predictor` for the
/// noise given the condition, and compare against the true `eps`.
pub fn ddpm_loss<T, P>(
    z0: &Latent<T>,
    eps: &Latent<T>,
    n: usize,
    schedule: &DiffusionSchedule<T>,
    predictor: P,
    condition: &FeatureSeq<T>,
    norm: NoiseNorm,
) -> Result<T>
where
    T: Scalar,
    P: Fn(&Latent<T>, usize, &FeatureSeq<T>) -> Latent<T>,
{
    let zn = ddpm_forward(z0, eps, n, schedule)?;
    let predicted = predictor(&zn, n, condition);
    eps.check_same_shape(&predicted, "predictor output")?;
    let sq: T = eps
        .data
        .iter()
        .zip(&predicted.data)
        .map(|(&e, &p)| (e - p) * (e - p))
        .sum();
    Ok(match norm {
        NoiseNorm::L2Squared => {
            if eps.data.is_empty() {
                T::zero()
            } else {
                sq / T::of_usize(eps.data.len())
            }
        }
        NoiseNorm::L2 => sq.sqrt(),
    })
}
