use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{
    add, avg_pool2, avg_pool2_backward, concat_channels, split_channels, upsample2, upsample2_backward,
    BatchNorm1d, Conv1d, Layer, Mode, Param, Relu,
};
use super::{Network, Tensor};
use crate::error::{Error, Result};
use crate::sh::num_coefficients;

/// Conv → batch norm → ReLU.
#[derive(Debug, Clone)]
pub struct ConvBlock {
    pub conv: Conv1d,
    pub norm: BatchNorm1d,
    relu: Relu,
}

impl ConvBlock {
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize, rng: &mut impl Rng) -> Result<Self> {
        Ok(ConvBlock {
            conv: Conv1d::new(in_channels, out_channels, kernel, rng)?,
            norm: BatchNorm1d::new(out_channels),
            relu: Relu::new(),
        })
    }
}

impl Layer for ConvBlock {
    fn forward(&mut self, input: &Tensor, mode: Mode) -> Result<Tensor> {
        let h = self.conv.forward(input, mode)?;
        let h = self.norm.forward(&h, mode)?;
        self.relu.forward(&h, mode)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let g = self.relu.backward(grad_output)?;
        let g = self.norm.backward(&g)?;
        self.conv.backward(&g)
    }

    fn params(&self) -> Vec<&Param> {
        let mut p = self.conv.params();
        p.extend(self.norm.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.conv.params_mut();
        p.extend(self.norm.params_mut());
        p
    }

    fn buffers(&self) -> Vec<&Vec<f64>> {
        self.norm.buffers()
    }

    fn buffers_mut(&mut self) -> Vec<&mut Vec<f64>> {
        self.norm.buffers_mut()
    }
}

/// Denoisy U-Net layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DUNetConfig {
    /// SH order of the coefficients; the network sees `(L+1)²·2` channels.
    pub sh_order: usize,
    /// Channels per encoder level; its length is the depth.
    pub channels: Vec<usize>,
    pub kernel_size: usize,
}

impl Default for DUNetConfig {
    fn default() -> Self {
        DUNetConfig {
            sh_order: 1,
            channels: vec![16, 32, 64],
            kernel_size: 3,
        }
    }
}

impl DUNetConfig {
    pub fn coefficient_channels(&self) -> usize {
        num_coefficients(self.sh_order) * 2
    }

    /// Default layout for `order`, with the first level at least as wide
    /// as the coefficient stack.
    pub fn for_order(order: usize) -> Self {
        let mut cfg = DUNetConfig {
            sh_order: order,
            ..Default::default()
        };
        cfg.channels[0] = cfg.channels[0].max(cfg.coefficient_channels());
        cfg
    }

    pub fn depth(&self) -> usize {
        self.channels.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() || self.channels.contains(&0) {
            return Err(Error::Config("U-Net needs at least one level of non-zero width".into()));
        }
        if self.kernel_size % 2 == 0 {
            return Err(Error::Config(format!("kernel size {} must be odd", self.kernel_size)));
        }
        Ok(())
    }
}

/// Encoder–decoder over the frequency axis with skip connections joining
/// encoder level `i` to the decoder level of the same resolution. The final
/// 1×1 projection starts at zero.
#[derive(Debug, Clone)]
pub struct DUNet {
    config: DUNetConfig,
    pub encoder: Vec<ConvBlock>,
    pub decoder: Vec<ConvBlock>,
    pub head: Conv1d,
    pooled_from: Vec<usize>,
}

impl DUNet {
    pub fn new(config: DUNetConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let (ch, k) = (&config.channels, config.kernel_size);
        let mut encoder = Vec::with_capacity(ch.len());
        let mut prev = config.coefficient_channels();
        for &c in ch {
            encoder.push(ConvBlock::new(prev, c, k, rng)?);
            prev = c;
        }
        let mut decoder = Vec::with_capacity(ch.len() - 1);
        for i in 0..ch.len() - 1 {
            decoder.push(ConvBlock::new(ch[i + 1] + ch[i], ch[i], k, rng)?);
        }
        let head = Conv1d::zeroed(ch[0], config.coefficient_channels(), 1)?;
        Ok(DUNet {
            config,
            encoder,
            decoder,
            head,
            pooled_from: Vec::new(),
        })
    }

    pub fn config(&self) -> &DUNetConfig {
        &self.config
    }

    /// Bin counts must be divisible by this.
    pub fn length_multiple(&self) -> usize {
        1 << (self.config.depth() - 1)
    }
}

impl Layer for DUNet {
    fn forward(&mut self, input: &Tensor, mode: Mode) -> Result<Tensor> {
        let (_, c, l) = input.dims3()?;
        if c != self.config.coefficient_channels() {
            return Err(Error::Shape(format!(
                "U-Net expects {} channels, got {c}",
                self.config.coefficient_channels()
            )));
        }
        if l == 0 || l % self.length_multiple() != 0 {
            return Err(Error::Shape(format!(
                "U-Net length {l} is not a multiple of {}",
                self.length_multiple()
            )));
        }
        let depth = self.config.depth();
        self.pooled_from.clear();
        let mut skips = Vec::with_capacity(depth);
        let mut h = input.clone();
        for i in 0..depth {
            if i > 0 {
                self.pooled_from.push(h.shape()[2]);
                h = avg_pool2(&h)?;
            }
            h = self.encoder[i].forward(&h, mode)?;
            if i + 1 < depth {
                skips.push(h.clone());
            }
        }
        for i in (0..depth - 1).rev() {
            h = concat_channels(&upsample2(&h)?, &skips[i])?;
            h = self.decoder[i].forward(&h, mode)?;
        }
        self.head.forward(&h, mode)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let depth = self.config.depth();
        let ch = self.config.channels.clone();
        let mut g = self.head.backward(grad_output)?;
        let mut skip_grads = Vec::with_capacity(depth);
        for i in 0..depth - 1 {
            g = self.decoder[i].backward(&g)?;
            let (up, skip) = split_channels(&g, ch[i + 1])?;
            skip_grads.push(skip);
            g = upsample2_backward(&up)?;
        }
        for i in (0..depth).rev() {
            if i + 1 < depth {
                g = add(&g, &skip_grads[i])?;
            }
            g = self.encoder[i].backward(&g)?;
            if i > 0 {
                g = avg_pool2_backward(&g, self.pooled_from[i - 1])?;
            }
        }
        Ok(g)
    }

    fn params(&self) -> Vec<&Param> {
        Network::params(self)
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        Network::params_mut(self)
    }
}

impl Network for DUNet {
    fn params(&self) -> Vec<&Param> {
        let mut p: Vec<&Param> = Vec::new();
        for b in self.encoder.iter().chain(&self.decoder) {
            p.extend(b.params());
        }
        p.extend(self.head.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p: Vec<&mut Param> = Vec::new();
        for b in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
            p.extend(b.params_mut());
        }
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
