use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::Mode;
use super::models::reconstruction;
use super::{
    AdamConfig, AeGanConfig, Adam, Cascade, CoeffSample, DUNetConfig, DenoiserModel, Network, TrainingData,
    UpsamplerModel,
};
use crate::error::{Error, Result};

const SHUFFLE_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Optimization settings shared by all training entry points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainOptions {
    pub batch_size: usize,
    pub optimizer: AdamConfig,
    pub disc_optimizer: AdamConfig,
    /// Weight of the cosine term next to L1.
    pub lambda_cos: f64,
    /// Weight of the generator's adversarial term.
    pub lambda_adv: f64,
    /// Weight of the denoiser's own reconstruction loss in joint training.
    pub denoise_weight: f64,
    /// Train only the discriminator (AE-GAN training).
    pub freeze_generator: bool,
    /// Train only the U-Net (joint training).
    pub freeze_upsampler: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            batch_size: 8,
            optimizer: AdamConfig::default(),
            disc_optimizer: AdamConfig::default(),
            lambda_cos: 1.0,
            lambda_adv: 0.01,
            denoise_weight: 1.0,
            freeze_generator: false,
            freeze_upsampler: false,
        }
    }
}

impl TrainOptions {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        for (name, v) in [
            ("lambda_cos", self.lambda_cos),
            ("lambda_adv", self.lambda_adv),
            ("denoise_weight", self.denoise_weight),
            ("learning_rate", self.optimizer.learning_rate),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

/// Mean losses over one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub epoch: usize,
    pub l1: f64,
    pub cosine: f64,
    pub adv_g: f64,
    pub adv_d: f64,
}

impl LossRecord {
    pub fn total(&self, lambda_cos: f64, lambda_adv: f64) -> f64 {
        self.l1 + lambda_cos * self.cosine + lambda_adv * self.adv_g
    }
}

/// A model with its optimizer state and loss history.
#[derive(Debug, Clone)]
pub struct TrainState<M> {
    pub model: M,
    pub optimizers: Vec<Adam>,
    pub epoch: usize,
    pub history: Vec<LossRecord>,
    pub seed: u64,
}

fn batches(n: usize, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut out: Vec<Vec<usize>> = order.chunks(batch_size).map(|c| c.to_vec()).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() < 2) {
        let tail = out.pop().unwrap_or_default();
        if let Some(prev) = out.last_mut() {
            prev.extend(tail);
        }
    }
    out
}

fn first_epoch<D: TrainingData + ?Sized>(data: &D) -> Result<Vec<CoeffSample>> {
    let samples = data.epoch_samples(0)?;
    if samples.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    Ok(samples)
}

fn finite(values: &[f64], epoch: usize, what: &str) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalAbort(format!("{what} became non-finite in epoch {epoch}")));
    }
    Ok(())
}

fn samples_for<D: TrainingData + ?Sized>(data: &D, epoch: usize, first: &mut Option<Vec<CoeffSample>>) -> Result<Vec<CoeffSample>> {
    match first.take() {
        Some(s) => Ok(s),
        None => data.epoch_samples(epoch),
    }
}

#[derive(Default)]
struct Accum {
    l1: f64,
    cosine: f64,
    adv_g: f64,
    adv_d: f64,
    batches: usize,
}

impl Accum {
    fn add(&mut self, l1: f64, cosine: f64, adv_g: f64, adv_d: f64) {
        self.l1 += l1;
        self.cosine += cosine;
        self.adv_g += adv_g;
        self.adv_d += adv_d;
        self.batches += 1;
    }

    fn record(&self, epoch: usize) -> LossRecord {
        let n = self.batches.max(1) as f64;
        LossRecord {
            epoch,
            l1: self.l1 / n,
            cosine: self.cosine / n,
            adv_g: self.adv_g / n,
            adv_d: self.adv_d / n,
        }
    }
}

/// Trains the U-Net to map noisy low-order coefficients to clean ones with
/// loss `L1 + λ_cos·cosine`.
pub fn train_dunet<D: TrainingData + ?Sized>(
    data: &D,
    config: &DUNetConfig,
    opts: &TrainOptions,
    epochs: usize,
    seed: u64,
) -> Result<TrainState<DenoiserModel>> {
    opts.validate()?;
    let samples = first_epoch(data)?;
    let mut model = DenoiserModel::new(config.clone(), &samples, seed)?;
    let mut adam = Adam::new(opts.optimizer.clone(), &model.net.params());
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SHUFFLE_SALT);
    let mut history = Vec::with_capacity(epochs);
    let mut pending = Some(samples);
    for epoch in 0..epochs {
        let samples = samples_for(data, epoch, &mut pending)?;
        let mut acc = Accum::default();
        for batch in batches(samples.len(), opts.batch_size, &mut rng) {
            let noisy: Vec<&[f64]> = batch.iter().map(|&i| samples[i].noisy_low.as_slice()).collect();
            let clean: Vec<&[f64]> = batch.iter().map(|&i| samples[i].clean_low.as_slice()).collect();
            let pred = model.forward(&noisy, Mode::Train)?;
            let (l1, cos, grad) = reconstruction(&pred, &clean, opts.lambda_cos)?;
            finite(&[l1, cos], epoch, "U-Net loss")?;
            model.net.zero_grad();
            model.backward(&grad)?;
            adam.update(model.net.params_mut());
            acc.add(l1, cos, 0.0, 0.0);
        }
        finite(&model.net.flat_params(), epoch, "U-Net parameters")?;
        history.push(acc.record(epoch));
    }
    Ok(TrainState {
        model,
        optimizers: vec![adam],
        epoch: epochs,
        history,
        seed,
    })
}

/// Trains the AE-GAN on clean low → clean high coefficients, alternating a
/// discriminator step and a generator step per batch.
pub fn train_aegan<D: TrainingData + ?Sized>(
    data: &D,
    config: &AeGanConfig,
    opts: &TrainOptions,
    epochs: usize,
    seed: u64,
) -> Result<TrainState<UpsamplerModel>> {
    opts.validate()?;
    let samples = first_epoch(data)?;
    let mut model = UpsamplerModel::new(config.clone(), &samples, seed)?;
    let mut adam_g = Adam::new(opts.optimizer.clone(), &model.generator.params());
    let mut adam_d = Adam::new(opts.disc_optimizer.clone(), &model.discriminator.params());
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SHUFFLE_SALT);
    let mut history = Vec::with_capacity(epochs);
    let mut pending = Some(samples);
    for epoch in 0..epochs {
        let samples = samples_for(data, epoch, &mut pending)?;
        let mut acc = Accum::default();
        for batch in batches(samples.len(), opts.batch_size, &mut rng) {
            let low: Vec<&[f64]> = batch.iter().map(|&i| samples[i].clean_low.as_slice()).collect();
            let high: Vec<&[f64]> = batch.iter().map(|&i| samples[i].clean_high.as_slice()).collect();
            let (fake, pred) = model.forward(&low, Mode::Train)?;
            let real = model.real_batch(&high)?;
            let adv_d = if batch.len() >= 2 {
                let loss = model.discriminator_gradients(&real, &fake)?;
                adam_d.update(model.discriminator.params_mut());
                loss
            } else {
                0.0
            };
            let (l1, cos, grad) = reconstruction(&pred, &high, opts.lambda_cos)?;
            let mut adv_g = 0.0;
            if !opts.freeze_generator {
                let mut g_norm = model.output_grad_to_normalized(&grad)?;
                if opts.lambda_adv > 0.0 && batch.len() >= 2 {
                    let (adv, g_adv) = model.adversarial_gradient(&fake)?;
                    adv_g = adv;
                    g_norm
                        .data_mut()
                        .iter_mut()
                        .zip(g_adv.data())
                        .for_each(|(a, b)| *a += opts.lambda_adv * b);
                }
                model.generator.zero_grad();
                model.backward(&g_norm)?;
                adam_g.update(model.generator.params_mut());
            }
            finite(&[l1, cos, adv_g, adv_d], epoch, "AE-GAN loss")?;
            acc.add(l1, cos, adv_g, adv_d);
        }
        finite(&model.generator.flat_params(), epoch, "generator parameters")?;
        finite(&model.discriminator.flat_params(), epoch, "discriminator parameters")?;
        history.push(acc.record(epoch));
    }
    Ok(TrainState {
        model,
        optimizers: vec![adam_g, adam_d],
        epoch: epochs,
        history,
        seed,
    })
}

/// Fraction of real and generated stacks the discriminator labels correctly,
/// scored in eval mode over batches of `batch_size` (at least 2).
pub fn discriminator_accuracy(model: &mut UpsamplerModel, samples: &[CoeffSample], batch_size: usize) -> Result<f64> {
    let mut correct = 0usize;
    let mut total = 0usize;
    for chunk in samples.chunks(batch_size.max(2)) {
        if chunk.len() < 2 {
            continue;
        }
        let low: Vec<&[f64]> = chunk.iter().map(|s| s.clean_low.as_slice()).collect();
        let high: Vec<&[f64]> = chunk.iter().map(|s| s.clean_high.as_slice()).collect();
        let (fake, _) = model.forward(&low, Mode::Eval)?;
        let real = model.real_batch(&high)?;
        let lr = super::Layer::forward(&mut model.discriminator, &real, Mode::Eval)?;
        let lf = super::Layer::forward(&mut model.discriminator, &fake, Mode::Eval)?;
        correct += lr.data().iter().filter(|&&z| z > 0.0).count();
        correct += lf.data().iter().filter(|&&z| z < 0.0).count();
        total += 2 * chunk.len();
    }
    if total == 0 {
        return Err(Error::InvalidArgument("need at least two samples to score".into()));
    }
    Ok(correct as f64 / total as f64)
}

/// Builds a fresh U-Net and AE-GAN and trains them jointly.
pub fn train_end_to_end<D: TrainingData + ?Sized>(
    data: &D,
    dunet: &DUNetConfig,
    aegan: &AeGanConfig,
    opts: &TrainOptions,
    epochs: usize,
    seed: u64,
) -> Result<TrainState<Cascade>> {
    let samples = first_epoch(data)?;
    let cascade = Cascade::new(
        DenoiserModel::new(dunet.clone(), &samples, seed)?,
        UpsamplerModel::new(aegan.clone(), &samples, seed.wrapping_add(1))?,
    )?;
    fine_tune_end_to_end(data, cascade, opts, epochs, seed)
}

/// Joint training of an existing cascade. Each batch updates the
/// discriminator, then the U-Net and (unless frozen) the generator from
/// gradients that flow from the upsampler's losses back through the U-Net.
pub fn fine_tune_end_to_end<D: TrainingData + ?Sized>(
    data: &D,
    mut cascade: Cascade,
    opts: &TrainOptions,
    epochs: usize,
    seed: u64,
) -> Result<TrainState<Cascade>> {
    opts.validate()?;
    let samples = first_epoch(data)?;
    let mut adam_u = Adam::new(opts.optimizer.clone(), &cascade.denoiser.net.params());
    let mut adam_g = Adam::new(opts.optimizer.clone(), &cascade.upsampler.generator.params());
    let mut adam_d = Adam::new(opts.disc_optimizer.clone(), &cascade.upsampler.discriminator.params());
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SHUFFLE_SALT);
    let mut history = Vec::with_capacity(epochs);
    let mut pending = Some(samples);
    for epoch in 0..epochs {
        let samples = samples_for(data, epoch, &mut pending)?;
        let mut acc = Accum::default();
        for batch in batches(samples.len(), opts.batch_size, &mut rng) {
            let batch: Vec<CoeffSample> = batch.iter().map(|&i| samples[i].clone()).collect();
            let fwd = cascade.forward(&batch, Mode::Train)?;
            let high: Vec<&[f64]> = batch.iter().map(|s| s.clean_high.as_slice()).collect();
            let real = cascade.upsampler.real_batch(&high)?;
            let pairs = batch.len() >= 2;
            let adv_d = if pairs {
                let loss = cascade.upsampler.discriminator_gradients(&real, &fwd.high_normalized)?;
                adam_d.update(cascade.upsampler.discriminator.params_mut());
                loss
            } else {
                0.0
            };
            let lambda_adv = if pairs { opts.lambda_adv } else { 0.0 };
            let losses = cascade.joint_gradients(&fwd, &batch, opts.lambda_cos, lambda_adv, opts.denoise_weight)?;
            finite(&[losses.l1, losses.cosine, losses.adversarial, adv_d], epoch, "joint loss")?;
            adam_u.update(cascade.denoiser.net.params_mut());
            if !opts.freeze_upsampler {
                adam_g.update(cascade.upsampler.generator.params_mut());
            }
            acc.add(losses.l1, losses.cosine, losses.adversarial, adv_d);
        }
        finite(&cascade.denoiser.net.flat_params(), epoch, "U-Net parameters")?;
        finite(&cascade.upsampler.generator.flat_params(), epoch, "generator parameters")?;
        history.push(acc.record(epoch));
    }
    Ok(TrainState {
        model: cascade,
        optimizers: vec![adam_u, adam_g, adam_d],
        epoch: epochs,
        history,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batches_cover_every_sample_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = batches(17, 8, &mut rng);
        let mut all: Vec<usize> = b.concat();
        all.sort_unstable();
        assert_eq!(all, (0..17).collect::<Vec<_>>());
        assert!(b.iter().all(|x| x.len() >= 2));
    }
}
