use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{
    add, avg_pool2, avg_pool2_backward, BatchNorm1d, ChannelAttention, Conv1d, Dense, Layer,
    MinibatchDiscrimination, Mode, Param, Relu,
};
use super::{Network, Tensor};
use crate::error::{Error, Result};
use crate::sh::num_coefficients;

/// AE-GAN layout: a residual convolutional autoencoder mapping low-order
/// coefficient stacks to high-order ones, plus its discriminator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AeGanConfig {
    pub low_order: usize,
    pub high_order: usize,
    /// Latent channels `|z|`.
    pub latent: usize,
    /// Width of the residual trunk.
    pub features: usize,
    pub res_blocks: usize,
    pub attention_reduction: usize,
    pub kernel_size: usize,
    pub disc_channels: usize,
    /// Minibatch-discrimination input features `A`, kernels `B`, kernel dimension `C`.
    pub mbd_features: usize,
    pub mbd_kernels: usize,
    pub mbd_kernel_dim: usize,
}

impl Default for AeGanConfig {
    fn default() -> Self {
        AeGanConfig {
            low_order: 1,
            high_order: 5,
            latent: 32,
            features: 32,
            res_blocks: 2,
            attention_reduction: 4,
            kernel_size: 3,
            disc_channels: 16,
            mbd_features: 16,
            mbd_kernels: 8,
            mbd_kernel_dim: 4,
        }
    }
}

impl AeGanConfig {
    pub fn input_channels(&self) -> usize {
        num_coefficients(self.low_order) * 2
    }

    pub fn output_channels(&self) -> usize {
        num_coefficients(self.high_order) * 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.high_order <= self.low_order {
            return Err(Error::Config(format!(
                "high order {} must exceed low order {}",
                self.high_order, self.low_order
            )));
        }
        if self.latent == 0 || self.features == 0 || self.disc_channels == 0 || self.mbd_features == 0 {
            return Err(Error::Config("AE-GAN widths must be non-zero".into()));
        }
        if self.attention_reduction == 0 || self.features % self.attention_reduction != 0 {
            return Err(Error::Config(format!(
                "features {} not divisible by attention reduction {}",
                self.features, self.attention_reduction
            )));
        }
        if self.kernel_size % 2 == 0 {
            return Err(Error::Config(format!("kernel size {} must be odd", self.kernel_size)));
        }
        Ok(())
    }
}

/// `x + attention(bn(conv(relu(bn(conv(x))))))`; attention is optional.
#[derive(Debug, Clone)]
pub struct ResBlock {
    pub conv1: Conv1d,
    pub norm1: BatchNorm1d,
    relu: Relu,
    pub conv2: Conv1d,
    pub norm2: BatchNorm1d,
    pub attention: Option<ChannelAttention>,
}

impl ResBlock {
    pub fn new(channels: usize, kernel: usize, reduction: Option<usize>, rng: &mut impl Rng) -> Result<Self> {
        let conv1 = Conv1d::new(channels, channels, kernel, rng)?;
        let conv2 = Conv1d::new(channels, channels, kernel, rng)?;
        let attention = match reduction {
            Some(r) => Some(ChannelAttention::new(channels, r, rng)?),
            None => None,
        };
        Ok(ResBlock {
            conv1,
            norm1: BatchNorm1d::new(channels),
            relu: Relu::new(),
            conv2,
            norm2: BatchNorm1d::new(channels),
            attention,
        })
    }
}

impl Layer for ResBlock {
    fn forward(&mut self, input: &Tensor, mode: Mode) -> Result<Tensor> {
        let h = self.conv1.forward(input, mode)?;
        let h = self.norm1.forward(&h, mode)?;
        let h = self.relu.forward(&h, mode)?;
        let h = self.conv2.forward(&h, mode)?;
        let mut h = self.norm2.forward(&h, mode)?;
        if let Some(att) = &mut self.attention {
            h = att.forward(&h, mode)?;
        }
        add(input, &h)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let mut g = grad_output.clone();
        if let Some(att) = &mut self.attention {
            g = att.backward(&g)?;
        }
        let g = self.norm2.backward(&g)?;
        let g = self.conv2.backward(&g)?;
        let g = self.relu.backward(&g)?;
        let g = self.norm1.backward(&g)?;
        let g = self.conv1.backward(&g)?;
        add(grad_output, &g)
    }

    fn params(&self) -> Vec<&Param> {
        let mut p = self.conv1.params();
        p.extend(self.norm1.params());
        p.extend(self.conv2.params());
        p.extend(self.norm2.params());
        if let Some(att) = &self.attention {
            p.extend(att.params());
        }
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.conv1.params_mut();
        p.extend(self.norm1.params_mut());
        p.extend(self.conv2.params_mut());
        p.extend(self.norm2.params_mut());
        if let Some(att) = &mut self.attention {
            p.extend(att.params_mut());
        }
        p
    }

    fn buffers(&self) -> Vec<&Vec<f64>> {
        let mut b = self.norm1.buffers();
        b.extend(self.norm2.buffers());
        b
    }

    fn buffers_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut b = self.norm1.buffers_mut();
        b.extend(self.norm2.buffers_mut());
        b
    }
}

/// Autoencoder generator. The encoder's residual blocks carry channel
/// attention; the output projection starts at zero.
#[derive(Debug, Clone)]
pub struct Generator {
    config: AeGanConfig,
    pub stem: Conv1d,
    pub encoder: Vec<ResBlock>,
    pub to_latent: Conv1d,
    pub from_latent: Conv1d,
    pub decoder: Vec<ResBlock>,
    pub head: Conv1d,
    latent: Option<Tensor>,
}

impl Generator {
    pub fn new(config: AeGanConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let (f, k) = (config.features, config.kernel_size);
        let stem = Conv1d::new(config.input_channels(), f, k, rng)?;
        let encoder = (0..config.res_blocks)
            .map(|_| ResBlock::new(f, k, Some(config.attention_reduction), rng))
            .collect::<Result<Vec<_>>>()?;
        let to_latent = Conv1d::new(f, config.latent, 1, rng)?;
        let from_latent = Conv1d::new(config.latent, f, k, rng)?;
        let decoder = (0..config.res_blocks)
            .map(|_| ResBlock::new(f, k, None, rng))
            .collect::<Result<Vec<_>>>()?;
        let head = Conv1d::zeroed(f, config.output_channels(), 1)?;
        Ok(Generator {
            config,
            stem,
            encoder,
            to_latent,
            from_latent,
            decoder,
            head,
            latent: None,
        })
    }

    pub fn config(&self) -> &AeGanConfig {
        &self.config
    }

    /// Latent code `z` of the last forward pass, `[batch, latent, length]`.
    pub fn latent(&self) -> Option<&Tensor> {
        self.latent.as_ref()
    }

    /// Rewires the codec so the low-order input channels pass straight to the
    /// matching output channels: identity linear maps and silenced residual
    /// branches. Needs `latent` and `features` at least the input width.
    pub fn set_identity(&mut self) -> Result<()> {
        let cin = self.config.input_channels();
        if self.config.latent < cin || self.config.features < cin {
            return Err(Error::Config(format!(
                "identity codec needs latent and features >= {cin}"
            )));
        }
        for conv in [&mut self.stem, &mut self.to_latent, &mut self.from_latent, &mut self.head] {
            let (i_ch, k) = (conv.in_channels(), conv.kernel_size());
            conv.weight.value.iter_mut().for_each(|w| *w = 0.0);
            conv.bias.value.iter_mut().for_each(|b| *b = 0.0);
            for c in 0..cin {
                conv.weight.value[(c * i_ch + c) * k + k / 2] = 1.0;
            }
        }
        for block in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
            block.norm2.gamma.value.iter_mut().for_each(|g| *g = 0.0);
            block.norm2.beta.value.iter_mut().for_each(|b| *b = 0.0);
        }
        Ok(())
    }
}

impl Layer for Generator {
    fn forward(&mut self, input: &Tensor, mode: Mode) -> Result<Tensor> {
        let (_, c, _) = input.dims3()?;
        if c != self.config.input_channels() {
            return Err(Error::Shape(format!(
                "generator expects {} channels, got {c}",
                self.config.input_channels()
            )));
        }
        let mut h = self.stem.forward(input, mode)?;
        for b in &mut self.encoder {
            h = b.forward(&h, mode)?;
        }
        let z = self.to_latent.forward(&h, mode)?;
        let mut h = self.from_latent.forward(&z, mode)?;
        self.latent = Some(z);
        for b in &mut self.decoder {
            h = b.forward(&h, mode)?;
        }
        self.head.forward(&h, mode)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let mut g = self.head.backward(grad_output)?;
        for b in self.decoder.iter_mut().rev() {
            g = b.backward(&g)?;
        }
        g = self.from_latent.backward(&g)?;
        g = self.to_latent.backward(&g)?;
        for b in self.encoder.iter_mut().rev() {
            g = b.backward(&g)?;
        }
        self.stem.backward(&g)
    }
}

impl Network for Generator {
    fn params(&self) -> Vec<&Param> {
        let mut p = self.stem.params();
        self.encoder.iter().for_each(|b| p.extend(b.params()));
        p.extend(self.to_latent.params());
        p.extend(self.from_latent.params());
        self.decoder.iter().for_each(|b| p.extend(b.params()));
        p.extend(self.head.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.stem.params_mut();
        self.encoder.iter_mut().for_each(|b| p.extend(b.params_mut()));
        p.extend(self.to_latent.params_mut());
        p.extend(self.from_latent.params_mut());
        self.decoder.iter_mut().for_each(|b| p.extend(b.params_mut()));
        p.extend(self.head.params_mut());
        p
    }

    fn buffers(&self) -> Vec<&Vec<f64>> {
        self.encoder.iter().chain(&self.decoder).flat_map(|b| b.buffers()).collect()
    }

    fn buffers_mut(&mut self) -> Vec<&mut Vec<f64>> {
        self.encoder
            .iter_mut()
            .chain(self.decoder.iter_mut())
            .flat_map(|b| b.buffers_mut())
            .collect()
    }
}

/// Scores a whole high-order coefficient stack: two conv/ReLU/pool stages,
/// a dense layer, minibatch discrimination, and a single logit.
#[derive(Debug, Clone)]
pub struct Discriminator {
    pub conv1: Conv1d,
    relu1: Relu,
    pub conv2: Conv1d,
    relu2: Relu,
    pub dense: Dense,
    relu3: Relu,
    pub mbd: MinibatchDiscrimination,
    pub out: Dense,
    lengths: (usize, usize),
}

impl Discriminator {
    pub fn new(config: &AeGanConfig, num_bins: usize, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        if num_bins < 4 {
            return Err(Error::Config(format!("discriminator needs at least 4 bins, got {num_bins}")));
        }
        let (d, k) = (config.disc_channels, config.kernel_size);
        let flat = d * (num_bins / 2 / 2);
        let mbd = MinibatchDiscrimination::new(config.mbd_features, config.mbd_kernels, config.mbd_kernel_dim, rng);
        Ok(Discriminator {
            conv1: Conv1d::new(config.output_channels(), d, k, rng)?,
            relu1: Relu::new(),
            conv2: Conv1d::new(d, d, k, rng)?,
            relu2: Relu::new(),
            dense: Dense::new(flat, config.mbd_features, rng),
            relu3: Relu::new(),
            out: Dense::new(mbd.out_features(), 1, rng),
            mbd,
            lengths: (0, 0),
        })
    }
}

impl Layer for Discriminator {
    /// Returns logits of shape `[batch, 1]`.
    fn forward(&mut self, input: &Tensor, mode: Mode) -> Result<Tensor> {
        let (n, _, l) = input.dims3()?;
        let h = self.relu1.forward(&self.conv1.forward(input, mode)?, mode)?;
        let h = avg_pool2(&h)?;
        let l2 = h.shape()[2];
        let h = self.relu2.forward(&self.conv2.forward(&h, mode)?, mode)?;
        let h = avg_pool2(&h)?;
        self.lengths = (l, l2);
        let flat = h.len() / n;
        let h = h.reshape(vec![n, flat])?;
        let h = self.relu3.forward(&self.dense.forward(&h, mode)?, mode)?;
        let h = self.mbd.forward(&h, mode)?;
        self.out.forward(&h, mode)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let g = self.out.backward(grad_output)?;
        let g = self.mbd.backward(&g)?;
        let g = self.relu3.backward(&g)?;
        let g = self.dense.backward(&g)?;
        let n = g.shape()[0];
        let d = self.conv2.out_channels();
        let g = g.reshape(vec![n, d, self.lengths.1 / 2])?;
        let g = avg_pool2_backward(&g, self.lengths.1)?;
        let g = self.conv2.backward(&self.relu2.backward(&g)?)?;
        let g = avg_pool2_backward(&g, self.lengths.0)?;
        self.conv1.backward(&self.relu1.backward(&g)?)
    }
}

impl Network for Discriminator {
    fn params(&self) -> Vec<&Param> {
        let mut p = self.conv1.params();
        p.extend(self.conv2.params());
        p.extend(self.dense.params());
        p.extend(self.mbd.params());
        p.extend(self.out.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.conv1.params_mut();
        p.extend(self.conv2.params_mut());
        p.extend(self.dense.params_mut());
        p.extend(self.mbd.params_mut());
        p.extend(self.out.params_mut());
        p
    }

    fn buffers(&self) -> Vec<&Vec<f64>> {
        Vec::new()
    }

    fn buffers_mut(&mut self) -> Vec<&mut Vec<f64>> {
        Vec::new()
    }
}
