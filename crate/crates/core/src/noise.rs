//! White and pink measurement noise, mixed into impulse responses at an
//! exact signal-to-noise ratio.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Ear, HrirSet};
use crate::error::{Error, Result};

/// Number of Voss–McCartney rows used unless configured otherwise.
pub const DEFAULT_PINK_SOURCES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseColor {
    White,
    Pink,
}

impl std::str::FromStr for NoiseColor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "white" => Ok(NoiseColor::White),
            "pink" => Ok(NoiseColor::Pink),
            other => Err(Error::Config(format!("unknown noise color {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub color: NoiseColor,
    pub snr_db: f64,
    #[serde(default = "default_sources")]
    pub num_sources: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_sources() -> usize {
    DEFAULT_PINK_SOURCES
}

impl NoiseSpec {
    pub fn white(snr_db: f64, seed: u64) -> Self {
        NoiseSpec {
            color: NoiseColor::White,
            snr_db,
            num_sources: DEFAULT_PINK_SOURCES,
            seed,
        }
    }

    pub fn pink(snr_db: f64, seed: u64) -> Self {
        NoiseSpec {
            color: NoiseColor::Pink,
            ..NoiseSpec::white(snr_db, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.snr_db.is_finite() {
            return Err(Error::Config(format!("SNR must be finite, got {}", self.snr_db)));
        }
        if self.num_sources == 0 {
            return Err(Error::Config("pink noise needs at least one source".into()));
        }
        Ok(())
    }

    /// One unscaled noise realization of `length` samples.
    pub fn realize(&self, length: usize, seed: u64) -> Result<Vec<f64>> {
        match self.color {
            NoiseColor::White => gen_white_noise(length, 1.0, seed),
            NoiseColor::Pink => gen_pink_noise(length, self.num_sources, seed),
        }
    }
}

/// Seed of the noise stream for one position and ear: the master seed
/// XOR a position/ear counter.
pub fn stream_seed(master: u64, position: usize, ear: Ear) -> u64 {
    master ^ (((position as u64) << 1) | ear.index() as u64)
}

/// I.i.d. Gaussian samples with standard deviation `sigma`.
pub fn gen_white_noise(length: usize, sigma: f64, seed: u64) -> Result<Vec<f64>> {
    if length == 0 {
        return Err(Error::InvalidArgument("noise length must be >= 1".into()));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma must be >= 0, got {sigma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..length)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sigma * z
        })
        .collect())
}

/// Voss–McCartney pink noise: the mean of `sources` rows, where row `i`
/// holds a Gaussian value redrawn every `2^i` samples.
pub fn gen_pink_noise(length: usize, sources: usize, seed: u64) -> Result<Vec<f64>> {
    if length == 0 {
        return Err(Error::InvalidArgument("noise length must be >= 1".into()));
    }
    if sources == 0 {
        return Err(Error::InvalidArgument("pink noise needs at least one source".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = vec![0.0f64; sources];
    let scale = 1.0 / sources as f64;
    let mut out = Vec::with_capacity(length);
    for t in 0..length {
        for (i, row) in rows.iter_mut().enumerate() {
            let due = match 1usize.checked_shl(i as u32) {
                Some(period) => t % period == 0,
                None => t == 0,
            };
            if due {
                *row = StandardNormal.sample(&mut rng);
            }
        }
        out.push(rows.iter().sum::<f64>() * scale);
    }
    Ok(out)
}

fn mean_power(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Gain applied to `noise` so that `signal + gain·noise` has the requested SNR.
pub fn snr_gain(signal: &[f64], noise: &[f64], snr_db: f64) -> Result<f64> {
    if signal.len() != noise.len() {
        return Err(Error::Shape(format!(
            "signal has {} samples, noise {}",
            signal.len(),
            noise.len()
        )));
    }
    if signal.is_empty() {
        return Err(Error::InvalidArgument("empty signal".into()));
    }
    if !snr_db.is_finite() {
        return Err(Error::InvalidArgument("SNR must be finite".into()));
    }
    let p_signal = mean_power(signal);
    let p_noise = mean_power(noise);
    if p_signal == 0.0 {
        return Err(Error::InvalidArgument("signal is all zero".into()));
    }
    if p_noise == 0.0 {
        return Err(Error::InvalidArgument("noise is all zero".into()));
    }
    let snr_linear = 10f64.powf(snr_db / 10.0);
    Ok((p_signal / (snr_linear * p_noise)).sqrt())
}

/// `signal + g·noise` with `g = √(P_signal / (SNR_linear · P_noise))`,
/// powers taken over the full length.
pub fn mix_at_snr(signal: &[f64], noise: &[f64], snr_db: f64) -> Result<Vec<f64>> {
    let g = snr_gain(signal, noise, snr_db)?;
    Ok(signal.iter().zip(noise).map(|(s, n)| s + g * n).collect())
}

/// Adds an independent noise realization to every position and ear.
pub fn degrade_set(set: &HrirSet, spec: &NoiseSpec) -> Result<HrirSet> {
    spec.validate()?;
    set.map_irs(|ear, p, ir| {
        let noise = spec.realize(ir.len(), stream_seed(spec.seed, p, ear))?;
        mix_at_snr(ir, &noise, spec.snr_db)
    })
}
