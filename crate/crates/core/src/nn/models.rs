use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{Layer, Mode};
use super::loss::{adversarial_loss_grad, cosine_loss_grad, l1_loss_grad};
use super::{AeGanConfig, DUNet, DUNetConfig, Discriminator, Generator, Network, Tensor};
use crate::error::{Error, Result};
use crate::sh::{num_coefficients, ShCoeffTensor};

/// One training example in network layout (`[channels, bins]`, flattened).
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffSample {
    pub noisy_low: Vec<f64>,
    pub clean_low: Vec<f64>,
    pub clean_high: Vec<f64>,
}

/// Source of training examples; may return fresh noise realizations per epoch.
pub trait TrainingData {
    fn epoch_samples(&self, epoch: usize) -> Result<Vec<CoeffSample>>;
}

impl TrainingData for Vec<CoeffSample> {
    fn epoch_samples(&self, _epoch: usize) -> Result<Vec<CoeffSample>> {
        Ok(self.clone())
    }
}

impl TrainingData for [CoeffSample] {
    fn epoch_samples(&self, _epoch: usize) -> Result<Vec<CoeffSample>> {
        Ok(self.to_vec())
    }
}

/// Drops the DC bin and lays coefficients out as `[harmonic·2 + ear][bin − 1]`.
pub fn coeffs_to_features(coeffs: &ShCoeffTensor) -> Vec<f64> {
    let (nsh, nb) = (coeffs.num_sh(), coeffs.num_bins());
    let len = nb.saturating_sub(1);
    let mut out = Vec::with_capacity(nsh * 2 * len);
    for n in 0..nsh {
        for ear in 0..2 {
            out.extend((1..nb).map(|b| coeffs.get(n, b, ear)));
        }
    }
    out
}

/// Inverse of [`coeffs_to_features`]. The DC bin is copied from `dc_source`
/// for the harmonics it has and is zero otherwise.
pub fn features_to_coeffs(features: &[f64], order: usize, dc_source: &ShCoeffTensor) -> Result<ShCoeffTensor> {
    let nsh = num_coefficients(order);
    let nb = dc_source.num_bins();
    let len = nb - 1;
    if features.len() != nsh * 2 * len {
        return Err(Error::Shape(format!(
            "{} features do not match order {order} over {len} bins",
            features.len()
        )));
    }
    let mut out = ShCoeffTensor::zeros(order, nb);
    for n in 0..nsh {
        for ear in 0..2 {
            if n < dc_source.num_sh() {
                out.set(n, 0, ear, dc_source.get(n, 0, ear));
            }
            let row = &features[(n * 2 + ear) * len..][..len];
            for (b, &v) in row.iter().enumerate() {
                out.set(n, b + 1, ear, v);
            }
        }
    }
    Ok(out)
}

/// Stacks equally sized `[channels, length]` samples into `[batch, channels, length]`.
pub fn stack_batch(samples: &[&[f64]], channels: usize) -> Result<Tensor> {
    let first = samples.first().ok_or_else(|| Error::Shape("empty batch".into()))?;
    if channels == 0 || first.len() % channels != 0 {
        return Err(Error::Shape(format!("sample of {} values is not {channels} channels", first.len())));
    }
    let mut data = Vec::with_capacity(first.len() * samples.len());
    for s in samples {
        if s.len() != first.len() {
            return Err(Error::Shape("samples in a batch differ in size".into()));
        }
        data.extend_from_slice(s);
    }
    Tensor::new(vec![samples.len(), channels, first.len() / channels], data)
}

pub fn unstack_batch(t: &Tensor) -> Vec<Vec<f64>> {
    let n = t.shape()[0];
    t.data().chunks(t.len() / n.max(1)).map(|c| c.to_vec()).collect()
}

/// Elementwise z-scoring with statistics fitted over a sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        let first = rows.first().ok_or_else(|| Error::InvalidArgument("no samples to standardize".into()))?;
        let (d, n) = (first.len(), rows.len() as f64);
        let mut mean = vec![0.0; d];
        for r in &rows {
            if r.len() != d {
                return Err(Error::Shape("samples differ in size".into()));
            }
            mean.iter_mut().zip(*r).for_each(|(m, v)| *m += v / n);
        }
        let mut var = vec![0.0; d];
        for r in &rows {
            var.iter_mut().zip(*r).zip(&mean).for_each(|((s, v), m)| *s += (v - m).powi(2) / n);
        }
        let std = var.into_iter().map(|v| v.sqrt().max(1e-6)).collect();
        Ok(Standardizer { mean, std })
    }

    pub fn identity(len: usize) -> Self {
        Standardizer {
            mean: vec![0.0; len],
            std: vec![1.0; len],
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| (v - m) / s).collect()
    }

    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| v * s + m).collect()
    }
}

fn check_lengths(rows: &[&[f64]], len: usize, what: &str) -> Result<()> {
    if let Some(r) = rows.iter().find(|r| r.len() != len) {
        return Err(Error::Shape(format!("{what}: expected {len} values, got {}", r.len())));
    }
    Ok(())
}

/// The U-Net wrapped with input standardization. It predicts a standardized
/// correction that is added back onto the noisy input.
#[derive(Debug, Clone)]
pub struct DenoiserModel {
    pub net: DUNet,
    pub input_norm: Standardizer,
    pub residual_norm: Standardizer,
}

impl DenoiserModel {
    pub fn new(config: DUNetConfig, samples: &[CoeffSample], seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = DUNet::new(config, &mut rng)?;
        let c = net.config().coefficient_channels();
        let first = samples.first().ok_or_else(|| Error::InvalidArgument("empty training set".into()))?;
        if first.noisy_low.len() % c != 0 || first.clean_low.len() != first.noisy_low.len() {
            return Err(Error::Shape(format!(
                "denoiser with {c} channels cannot take samples of {} values",
                first.noisy_low.len()
            )));
        }
        let input_norm = Standardizer::fit(samples.iter().map(|s| s.noisy_low.as_slice()))?;
        let residuals: Vec<Vec<f64>> = samples
            .iter()
            .map(|s| s.clean_low.iter().zip(&s.noisy_low).map(|(c, n)| c - n).collect())
            .collect();
        let residual_norm = Standardizer::fit(residuals.iter().map(|r| r.as_slice()))?;
        Ok(DenoiserModel {
            net,
            input_norm,
            residual_norm,
        })
    }

    pub fn sample_len(&self) -> usize {
        self.input_norm.mean.len()
    }

    pub fn forward(&mut self, noisy: &[&[f64]], mode: Mode) -> Result<Vec<Vec<f64>>> {
        check_lengths(noisy, self.sample_len(), "denoiser input")?;
        let normed: Vec<Vec<f64>> = noisy.iter().map(|x| self.input_norm.apply(x)).collect();
        let refs: Vec<&[f64]> = normed.iter().map(|v| v.as_slice()).collect();
        let x = stack_batch(&refs, self.net.config().coefficient_channels())?;
        let out = self.net.forward(&x, mode)?;
        Ok(unstack_batch(&out)
            .iter()
            .zip(noisy)
            .map(|(o, n)| self.residual_norm.invert(o).iter().zip(*n).map(|(r, v)| r + v).collect())
            .collect())
    }

    /// Backpropagates a gradient on the denoised output; returns the gradient
    /// on the noisy input.
    pub fn backward(&mut self, grad: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let scaled: Vec<Vec<f64>> = grad
            .iter()
            .map(|g| g.iter().zip(&self.residual_norm.std).map(|(a, s)| a * s).collect())
            .collect();
        let refs: Vec<&[f64]> = scaled.iter().map(|v| v.as_slice()).collect();
        let g_out = stack_batch(&refs, self.net.config().coefficient_channels())?;
        let g_in = self.net.backward(&g_out)?;
        Ok(unstack_batch(&g_in)
            .iter()
            .zip(grad)
            .map(|(gi, g)| {
                gi.iter()
                    .zip(&self.input_norm.std)
                    .zip(g)
                    .map(|((a, s), d)| a / s + d)
                    .collect()
            })
            .collect())
    }

    /// Inference in eval mode.
    pub fn denoise(&mut self, noisy: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let refs: Vec<&[f64]> = noisy.iter().map(|v| v.as_slice()).collect();
        self.forward(&refs, Mode::Eval)
    }
}

/// The AE-GAN generator and discriminator with coefficient standardization.
/// The discriminator scores standardized high-order stacks.
#[derive(Debug, Clone)]
pub struct UpsamplerModel {
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub input_norm: Standardizer,
    pub target_norm: Standardizer,
}

impl UpsamplerModel {
    pub fn new(config: AeGanConfig, samples: &[CoeffSample], seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let first = samples.first().ok_or_else(|| Error::InvalidArgument("empty training set".into()))?;
        let (cin, cout) = (config.input_channels(), config.output_channels());
        if first.clean_low.len() % cin != 0 || first.clean_high.len() % cout != 0 {
            return Err(Error::Shape(format!(
                "AE-GAN {cin}->{cout} channels cannot take samples of {}/{} values",
                first.clean_low.len(),
                first.clean_high.len()
            )));
        }
        let bins = first.clean_low.len() / cin;
        if first.clean_high.len() / cout != bins {
            return Err(Error::Shape("low and high samples differ in bin count".into()));
        }
        let generator = Generator::new(config.clone(), &mut rng)?;
        let discriminator = Discriminator::new(&config, bins, &mut rng)?;
        Ok(UpsamplerModel {
            generator,
            discriminator,
            input_norm: Standardizer::fit(samples.iter().map(|s| s.clean_low.as_slice()))?,
            target_norm: Standardizer::fit(samples.iter().map(|s| s.clean_high.as_slice()))?,
        })
    }

    pub fn config(&self) -> &AeGanConfig {
        self.generator.config()
    }

    /// Returns the standardized generator output and the coefficients.
    pub fn forward(&mut self, low: &[&[f64]], mode: Mode) -> Result<(Tensor, Vec<Vec<f64>>)> {
        check_lengths(low, self.input_norm.mean.len(), "upsampler input")?;
        let normed: Vec<Vec<f64>> = low.iter().map(|x| self.input_norm.apply(x)).collect();
        let refs: Vec<&[f64]> = normed.iter().map(|v| v.as_slice()).collect();
        let x = stack_batch(&refs, self.config().input_channels())?;
        let out = self.generator.forward(&x, mode)?;
        let raw = unstack_batch(&out).iter().map(|o| self.target_norm.invert(o)).collect();
        Ok((out, raw))
    }

    /// Gradient on the standardized generator output in, gradient on the
    /// unstandardized input out.
    pub fn backward(&mut self, grad_normalized: &Tensor) -> Result<Vec<Vec<f64>>> {
        let g = self.generator.backward(grad_normalized)?;
        Ok(unstack_batch(&g)
            .iter()
            .map(|gi| gi.iter().zip(&self.input_norm.std).map(|(a, s)| a / s).collect())
            .collect())
    }

    /// Converts a gradient on the output coefficients to one on the
    /// standardized output.
    pub fn output_grad_to_normalized(&self, grad: &[Vec<f64>]) -> Result<Tensor> {
        let scaled: Vec<Vec<f64>> = grad
            .iter()
            .map(|g| g.iter().zip(&self.target_norm.std).map(|(a, s)| a * s).collect())
            .collect();
        let refs: Vec<&[f64]> = scaled.iter().map(|v| v.as_slice()).collect();
        stack_batch(&refs, self.config().output_channels())
    }

    /// Standardized real high-order stacks for the discriminator.
    pub fn real_batch(&self, high: &[&[f64]]) -> Result<Tensor> {
        let normed: Vec<Vec<f64>> = high.iter().map(|x| self.target_norm.apply(x)).collect();
        let refs: Vec<&[f64]> = normed.iter().map(|v| v.as_slice()).collect();
        stack_batch(&refs, self.config().output_channels())
    }

    /// One discriminator update direction: accumulates gradients of the
    /// real/fake cross-entropy and returns its value.
    pub fn discriminator_gradients(&mut self, real: &Tensor, fake: &Tensor) -> Result<f64> {
        self.discriminator.zero_grad();
        let logits = self.discriminator.forward(real, Mode::Train)?;
        let (lr, g) = adversarial_loss_grad(logits.data(), true)?;
        self.discriminator.backward(&Tensor::new(logits.shape().to_vec(), g)?)?;
        let logits = self.discriminator.forward(fake, Mode::Train)?;
        let (lf, g) = adversarial_loss_grad(logits.data(), false)?;
        self.discriminator.backward(&Tensor::new(logits.shape().to_vec(), g)?)?;
        Ok(lr + lf)
    }

    /// Non-saturating generator loss on `fake` and its gradient on `fake`.
    /// Discriminator parameter gradients are disturbed.
    pub fn adversarial_gradient(&mut self, fake: &Tensor) -> Result<(f64, Tensor)> {
        let logits = self.discriminator.forward(fake, Mode::Train)?;
        let (loss, g) = adversarial_loss_grad(logits.data(), true)?;
        let grad = self.discriminator.backward(&Tensor::new(logits.shape().to_vec(), g)?)?;
        Ok((loss, grad))
    }

    /// Inference in eval mode.
    pub fn upsample(&mut self, low: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let refs: Vec<&[f64]> = low.iter().map(|v| v.as_slice()).collect();
        Ok(self.forward(&refs, Mode::Eval)?.1)
    }
}

/// Batch-mean L1 plus weighted per-sample cosine loss, with gradients.
pub(crate) fn reconstruction(pred: &[Vec<f64>], target: &[&[f64]], lambda_cos: f64) -> Result<(f64, f64, Vec<Vec<f64>>)> {
    let n = pred.len() as f64;
    let (mut l1, mut cos) = (0.0, 0.0);
    let mut grads = Vec::with_capacity(pred.len());
    for (p, t) in pred.iter().zip(target) {
        let (a, ga) = l1_loss_grad(p, t)?;
        let (b, gb) = cosine_loss_grad(p, t)?;
        l1 += a / n;
        cos += b / n;
        grads.push(ga.iter().zip(&gb).map(|(x, y)| (x + lambda_cos * y) / n).collect());
    }
    Ok((l1, cos, grads))
}

/// Denoiser followed by upsampler, trained jointly.
#[derive(Debug, Clone)]
pub struct Cascade {
    pub denoiser: DenoiserModel,
    pub upsampler: UpsamplerModel,
}

/// Activations of one joint forward pass.
#[derive(Debug, Clone)]
pub struct JointForward {
    pub denoised: Vec<Vec<f64>>,
    pub high_normalized: Tensor,
    pub high: Vec<Vec<f64>>,
}

/// Losses of one joint backward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointLosses {
    pub denoise_l1: f64,
    pub denoise_cosine: f64,
    pub l1: f64,
    pub cosine: f64,
    pub adversarial: f64,
}

impl Cascade {
    pub fn new(denoiser: DenoiserModel, upsampler: UpsamplerModel) -> Result<Self> {
        if denoiser.net.config().sh_order != upsampler.config().low_order {
            return Err(Error::Config(format!(
                "denoiser order {} does not feed upsampler low order {}",
                denoiser.net.config().sh_order,
                upsampler.config().low_order
            )));
        }
        if denoiser.sample_len() != upsampler.input_norm.mean.len() {
            return Err(Error::Shape("denoiser output and upsampler input differ in size".into()));
        }
        Ok(Cascade { denoiser, upsampler })
    }

    pub fn forward(&mut self, batch: &[CoeffSample], mode: Mode) -> Result<JointForward> {
        let noisy: Vec<&[f64]> = batch.iter().map(|s| s.noisy_low.as_slice()).collect();
        let denoised = self.denoiser.forward(&noisy, mode)?;
        let refs: Vec<&[f64]> = denoised.iter().map(|v| v.as_slice()).collect();
        let (high_normalized, high) = self.upsampler.forward(&refs, mode)?;
        Ok(JointForward {
            denoised,
            high_normalized,
            high,
        })
    }

    /// Zeroes and accumulates gradients of
    /// `w·(L1 + λ_cos·cos)(denoised) + (L1 + λ_cos·cos)(high) + λ_adv·adv`
    /// into the U-Net and generator, flowing the upsampler's loss back
    /// through the denoiser.
    pub fn joint_gradients(
        &mut self,
        fwd: &JointForward,
        batch: &[CoeffSample],
        lambda_cos: f64,
        lambda_adv: f64,
        denoise_weight: f64,
    ) -> Result<JointLosses> {
        self.denoiser.net.zero_grad();
        self.upsampler.generator.zero_grad();
        let high_t: Vec<&[f64]> = batch.iter().map(|s| s.clean_high.as_slice()).collect();
        let low_t: Vec<&[f64]> = batch.iter().map(|s| s.clean_low.as_slice()).collect();
        let (l1, cosine, g_high) = reconstruction(&fwd.high, &high_t, lambda_cos)?;
        let mut g_norm = self.upsampler.output_grad_to_normalized(&g_high)?;
        let mut adversarial = 0.0;
        if lambda_adv > 0.0 {
            let (adv, g_adv) = self.upsampler.adversarial_gradient(&fwd.high_normalized)?;
            adversarial = adv;
            g_norm
                .data_mut()
                .iter_mut()
                .zip(g_adv.data())
                .for_each(|(a, b)| *a += lambda_adv * b);
        }
        let g_denoised = self.upsampler.backward(&g_norm)?;
        let (dl1, dcos, g_low) = reconstruction(&fwd.denoised, &low_t, lambda_cos)?;
        let total: Vec<Vec<f64>> = g_denoised
            .iter()
            .zip(&g_low)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + denoise_weight * y).collect())
            .collect();
        self.denoiser.backward(&total)?;
        Ok(JointLosses {
            denoise_l1: dl1,
            denoise_cosine: dcos,
            l1,
            cosine,
            adversarial,
        })
    }

    /// Inference in eval mode: `(denoised low-order, upsampled high-order)`.
    pub fn infer(&mut self, noisy: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let denoised = self.denoiser.denoise(noisy)?;
        let high = self.upsampler.upsample(&denoised)?;
        Ok((denoised, high))
    }
}
