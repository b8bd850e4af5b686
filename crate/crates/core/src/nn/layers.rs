use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Tensor;
use crate::error::{Error, Result};

/// Whether batch statistics (training) or running statistics (inference)
/// drive batch normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// A trainable array and its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
}

impl Param {
    pub fn new(value: Vec<f64>) -> Self {
        let grad = vec![0.0; value.len()];
        Param { value, grad }
    }

    pub fn zeros(len: usize) -> Self {
        Param::new(vec![0.0; len])
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

fn he_uniform(len: usize, fan_in: usize, rng: &mut impl Rng) -> Param {
    let bound = (6.0 / fan_in as f64).sqrt();
    Param::new((0..len).map(|_| rng.random_range(-bound..bound)).collect())
}

/// A differentiable operation that caches what its backward pass needs.
///
/// `backward` must follow the matching `forward`; it accumulates into the
/// parameter gradients and returns the gradient with respect to the input.
pub trait Layer {
    fn forward(&mut self, input: &Tensor, mode: Mode) -> Result<Tensor>;
    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor>;

    fn params(&self) -> Vec<&Param> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        Vec::new()
    }

    /// Non-trained state such as running statistics.
    fn buffers(&self) -> Vec<&Vec<f64>> {
        Vec::new()
    }

    fn buffers_mut(&mut self) -> Vec<&mut Vec<f64>> {
        Vec::new()
    }
}

fn missing_forward(name: &str) -> Error {
    Error::InvalidArgument(format!("{name}: backward called before forward"))
}

/// Same-padded 1-D convolution over the last axis of `[batch, channels, length]`.
#[derive(Debug, Clone)]
pub struct Conv1d {
    in_channels: usize,
    out_channels: usize,
    kernel_size: usize,
    /// `[out][in][tap]`
    pub weight: Param,
    pub bias: Param,
    input: Option<Tensor>,
}

impl Conv1d {
    pub fn new(in_channels: usize, out_channels: usize, kernel_size: usize, rng: &mut impl Rng) -> Result<Self> {
        let mut conv = Conv1d::zeroed(in_channels, out_channels, kernel_size)?;
        conv.weight = he_uniform(conv.weight.len(), in_channels * kernel_size, rng);
        Ok(conv)
    }

    /// All weights and biases zero.
    pub fn zeroed(in_channels: usize, out_channels: usize, kernel_size: usize) -> Result<Self> {
        if kernel_size % 2 == 0 || in_channels == 0 || out_channels == 0 {
            return Err(Error::Config(format!(
                "conv1d needs an odd kernel and non-zero channels, got {in_channels}->{out_channels} k{kernel_size}"
            )));
        }
        Ok(Conv1d {
            in_channels,
            out_channels,
            kernel_size,
            weight: Param::zeros(out_channels * in_channels * kernel_size),
            bias: Param::zeros(out_channels),
            input: None,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }

    fn tap_range(&self, tap: usize, len: usize) -> (isize, usize, usize) {
        let shift = tap as isize - (self.kernel_size / 2) as isize;
        let lo = (-shift).max(0) as usize;
        let hi = (len as isize - shift).min(len as isize).max(0) as usize;
        (shift, lo, hi.max(lo))
    }
}

impl Layer for Conv1d {
    fn forward(&mut self, input: &Tensor, _mode: Mode) -> Result<Tensor> {
        let (n, c, l) = input.dims3()?;
        if c != self.in_channels {
            return Err(Error::Shape(format!("conv1d expects {} channels, got {c}", self.in_channels)));
        }
        let (k, x) = (self.kernel_size, input.data());
        let mut out = vec![0.0; n * self.out_channels * l];
        for b in 0..n {
            for o in 0..self.out_channels {
                let y = &mut out[(b * self.out_channels + o) * l..][..l];
                y.iter_mut().for_each(|v| *v = self.bias.value[o]);
                for i in 0..c {
                    let xr = &x[(b * c + i) * l..][..l];
                    for t in 0..k {
                        let w = self.weight.value[(o * c + i) * k + t];
                        let (s, lo, hi) = self.tap_range(t, l);
                        let src = &xr[(lo as isize + s) as usize..(hi as isize + s) as usize];
                        for (yv, xv) in y[lo..hi].iter_mut().zip(src) {
                            *yv += w * xv;
                        }
                    }
                }
            }
        }
        self.input = Some(input.clone());
        Tensor::new(vec![n, self.out_channels, l], out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let input = self.input.as_ref().ok_or_else(|| missing_forward("conv1d"))?;
        let (n, c, l) = input.dims3()?;
        grad_output.expect_shape(&[n, self.out_channels, l], "conv1d gradient")?;
        let (k, x, g) = (self.kernel_size, input.data(), grad_output.data());
        let mut dx = vec![0.0; x.len()];
        for b in 0..n {
            for o in 0..self.out_channels {
                let gr = &g[(b * self.out_channels + o) * l..][..l];
                self.bias.grad[o] += gr.iter().sum::<f64>();
                for i in 0..c {
                    let xr = &x[(b * c + i) * l..][..l];
                    let dxr = &mut dx[(b * c + i) * l..][..l];
                    for t in 0..k {
                        let wi = (o * c + i) * k + t;
                        let w = self.weight.value[wi];
                        let (s, lo, hi) = self.tap_range(t, l);
                        let (a, z) = ((lo as isize + s) as usize, (hi as isize + s) as usize);
                        let mut acc = 0.0;
                        for ((gv, xv), dv) in gr[lo..hi].iter().zip(&xr[a..z]).zip(&mut dxr[a..z]) {
                            acc += gv * xv;
                            *dv += w * gv;
                        }
                        self.weight.grad[wi] += acc;
                    }
                }
            }
        }
        Tensor::new(input.shape().to_vec(), dx)
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Per-channel batch normalization of `[batch, channels]` or
/// `[batch, channels, length]`, with statistics over every axis but the
/// channel axis.
#[derive(Debug, Clone)]
pub struct BatchNorm1d {
    channels: usize,
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
    cache: Option<BnCache>,
}

#[derive(Debug, Clone)]
struct BnCache {
    shape: Vec<usize>,
    x_hat: Vec<f64>,
    inv_std: Vec<f64>,
    mode: Mode,
}

fn ncl(t: &Tensor) -> Result<(usize, usize, usize)> {
    match t.shape() {
        [n, c] => Ok((*n, *c, 1)),
        [n, c, l] => Ok((*n, *c, *l)),
        s => Err(Error::Shape(format!("expected rank 2 or 3, got {s:?}"))),
    }
}

impl BatchNorm1d {
    pub fn new(channels: usize) -> Self {
        BatchNorm1d {
            channels,
            gamma: Param::new(vec![1.0; channels]),
            beta: Param::zeros(channels),
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            momentum: 0.1,
            eps: 1e-5,
            cache: None,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }
}

impl Layer for BatchNorm1d {
    fn forward(&mut self, input: &Tensor, mode: Mode) -> Result<Tensor> {
        let (n, c, l) = ncl(input)?;
        if c != self.channels {
            return Err(Error::Shape(format!("batch norm expects {} channels, got {c}", self.channels)));
        }
        let x = input.data();
        let m = (n * l) as f64;
        let mut x_hat = vec![0.0; x.len()];
        let mut inv_std = vec![0.0; c];
        let mut out = vec![0.0; x.len()];
        for ch in 0..c {
            let rows = (0..n).map(|b| (b * c + ch) * l);
            let (mean, var) = match mode {
                Mode::Train => {
                    let mean = rows.clone().map(|r| x[r..r + l].iter().sum::<f64>()).sum::<f64>() / m;
                    let var = rows
                        .clone()
                        .map(|r| x[r..r + l].iter().map(|v| (v - mean).powi(2)).sum::<f64>())
                        .sum::<f64>()
                        / m;
                    self.running_mean[ch] = (1.0 - self.momentum) * self.running_mean[ch] + self.momentum * mean;
                    self.running_var[ch] = (1.0 - self.momentum) * self.running_var[ch] + self.momentum * var;
                    (mean, var)
                }
                Mode::Eval => (self.running_mean[ch], self.running_var[ch]),
            };
            let is = 1.0 / (var + self.eps).sqrt();
            inv_std[ch] = is;
            let (g, bt) = (self.gamma.value[ch], self.beta.value[ch]);
            for r in rows {
                for j in r..r + l {
                    let h = (x[j] - mean) * is;
                    x_hat[j] = h;
                    out[j] = g * h + bt;
                }
            }
        }
        self.cache = Some(BnCache {
            shape: input.shape().to_vec(),
            x_hat,
            inv_std,
            mode,
        });
        Tensor::new(input.shape().to_vec(), out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let cache = self.cache.as_ref().ok_or_else(|| missing_forward("batch norm"))?;
        grad_output.expect_shape(&cache.shape, "batch norm gradient")?;
        let (n, c, l) = ncl(grad_output)?;
        let g = grad_output.data();
        let m = (n * l) as f64;
        let mut dx = vec![0.0; g.len()];
        for ch in 0..c {
            let rows: Vec<usize> = (0..n).map(|b| (b * c + ch) * l).collect();
            let (mut sum_g, mut sum_gh) = (0.0, 0.0);
            for &r in &rows {
                for j in r..r + l {
                    sum_g += g[j];
                    sum_gh += g[j] * cache.x_hat[j];
                }
            }
            self.gamma.grad[ch] += sum_gh;
            self.beta.grad[ch] += sum_g;
            let scale = self.gamma.value[ch] * cache.inv_std[ch];
            for &r in &rows {
                for j in r..r + l {
                    dx[j] = match cache.mode {
                        Mode::Train => scale * (g[j] - sum_g / m - cache.x_hat[j] * sum_gh / m),
                        Mode::Eval => scale * g[j],
                    };
                }
            }
        }
        Tensor::new(cache.shape.clone(), dx)
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.gamma, &self.beta]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.gamma, &mut self.beta]
    }

    fn buffers(&self) -> Vec<&Vec<f64>> {
        vec![&self.running_mean, &self.running_var]
    }

    fn buffers_mut(&mut self) -> Vec<&mut Vec<f64>> {
        vec![&mut self.running_mean, &mut self.running_var]
    }
}

#[derive(Debug, Clone, Default)]
pub struct Relu {
    mask: Option<(Vec<usize>, Vec<bool>)>,
}

impl Relu {
    pub fn new() -> Self {
        Relu::default()
    }
}

impl Layer for Relu {
    fn forward(&mut self, input: &Tensor, _mode: Mode) -> Result<Tensor> {
        let mask: Vec<bool> = input.data().iter().map(|&v| v > 0.0).collect();
        let out = input.data().iter().map(|&v| v.max(0.0)).collect();
        self.mask = Some((input.shape().to_vec(), mask));
        Tensor::new(input.shape().to_vec(), out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let (shape, mask) = self.mask.as_ref().ok_or_else(|| missing_forward("relu"))?;
        grad_output.expect_shape(shape, "relu gradient")?;
        let dx = grad_output
            .data()
            .iter()
            .zip(mask)
            .map(|(&g, &on)| if on { g } else { 0.0 })
            .collect();
        Tensor::new(shape.clone(), dx)
    }
}

/// Fully connected layer on `[batch, features]`.
#[derive(Debug, Clone)]
pub struct Dense {
    in_features: usize,
    out_features: usize,
    /// `[out][in]`
    pub weight: Param,
    pub bias: Param,
    input: Option<Tensor>,
}

impl Dense {
    pub fn new(in_features: usize, out_features: usize, rng: &mut impl Rng) -> Self {
        Dense {
            in_features,
            out_features,
            weight: he_uniform(in_features * out_features, in_features, rng),
            bias: Param::zeros(out_features),
            input: None,
        }
    }

    pub fn in_features(&self) -> usize {
        self.in_features
    }

    pub fn out_features(&self) -> usize {
        self.out_features
    }
}

impl Layer for Dense {
    fn forward(&mut self, input: &Tensor, _mode: Mode) -> Result<Tensor> {
        let (n, f) = input.dims2()?;
        if f != self.in_features {
            return Err(Error::Shape(format!("dense expects {} features, got {f}", self.in_features)));
        }
        let x = input.data();
        let mut out = vec![0.0; n * self.out_features];
        for b in 0..n {
            let xr = &x[b * f..][..f];
            for o in 0..self.out_features {
                let w = &self.weight.value[o * f..][..f];
                out[b * self.out_features + o] =
                    self.bias.value[o] + w.iter().zip(xr).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        self.input = Some(input.clone());
        Tensor::new(vec![n, self.out_features], out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let input = self.input.as_ref().ok_or_else(|| missing_forward("dense"))?;
        let (n, f) = input.dims2()?;
        grad_output.expect_shape(&[n, self.out_features], "dense gradient")?;
        let (x, g) = (input.data(), grad_output.data());
        let mut dx = vec![0.0; x.len()];
        for b in 0..n {
            for o in 0..self.out_features {
                let gv = g[b * self.out_features + o];
                self.bias.grad[o] += gv;
                for i in 0..f {
                    self.weight.grad[o * f + i] += gv * x[b * f + i];
                    dx[b * f + i] += gv * self.weight.value[o * f + i];
                }
            }
        }
        Tensor::new(vec![n, f], dx)
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Squeeze-and-excitation channel reweighting of `[batch, channels, length]`:
/// global average over length, dense → ReLU → dense → sigmoid, then a
/// per-channel scale.
#[derive(Debug, Clone)]
pub struct ChannelAttention {
    channels: usize,
    pub squeeze: Dense,
    pub excite: Dense,
    cache: Option<(Tensor, Vec<f64>, Vec<bool>)>,
}

impl ChannelAttention {
    pub fn new(channels: usize, reduction: usize, rng: &mut impl Rng) -> Result<Self> {
        if reduction == 0 || channels % reduction != 0 || channels / reduction == 0 {
            return Err(Error::Config(format!(
                "channel attention: {channels} channels not divisible by reduction {reduction}"
            )));
        }
        let hidden = channels / reduction;
        Ok(ChannelAttention {
            channels,
            squeeze: Dense::new(channels, hidden, rng),
            excite: Dense::new(hidden, channels, rng),
            cache: None,
        })
    }

    /// Per-sample, per-channel scales from the last forward pass.
    pub fn scales(&self) -> Option<&[f64]> {
        self.cache.as_ref().map(|c| c.1.as_slice())
    }
}

impl Layer for ChannelAttention {
    fn forward(&mut self, input: &Tensor, mode: Mode) -> Result<Tensor> {
        let (n, c, l) = input.dims3()?;
        if c != self.channels {
            return Err(Error::Shape(format!("attention expects {} channels, got {c}", self.channels)));
        }
        let x = input.data();
        let pooled: Vec<f64> = x.chunks(l).map(|r| r.iter().sum::<f64>() / l as f64).collect();
        let h = self.squeeze.forward(&Tensor::new(vec![n, c], pooled)?, mode)?;
        let mask: Vec<bool> = h.data().iter().map(|&v| v > 0.0).collect();
        let h = Tensor::new(h.shape().to_vec(), h.data().iter().map(|v| v.max(0.0)).collect())?;
        let z = self.excite.forward(&h, mode)?;
        let scale: Vec<f64> = z.data().iter().map(|&v| sigmoid(v)).collect();
        let out = x
            .chunks(l)
            .zip(&scale)
            .flat_map(|(r, s)| r.iter().map(move |v| v * s))
            .collect();
        self.cache = Some((input.clone(), scale, mask));
        Tensor::new(vec![n, c, l], out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let (input, scale, mask) = self.cache.take().ok_or_else(|| missing_forward("channel attention"))?;
        let (n, c, l) = input.dims3()?;
        grad_output.expect_shape(input.shape(), "attention gradient")?;
        let (x, g) = (input.data(), grad_output.data());
        let mut dz = vec![0.0; n * c];
        for (row, (s, d)) in scale.iter().zip(dz.iter_mut()).enumerate() {
            let ds: f64 = x[row * l..][..l].iter().zip(&g[row * l..][..l]).map(|(a, b)| a * b).sum();
            *d = ds * s * (1.0 - s);
        }
        let dh = self.excite.backward(&Tensor::new(vec![n, c], dz)?)?;
        let dh: Vec<f64> = dh.data().iter().zip(&mask).map(|(&v, &on)| if on { v } else { 0.0 }).collect();
        let dpool = self.squeeze.backward(&Tensor::new(vec![n, dh.len() / n], dh)?)?;
        let mut dx = vec![0.0; x.len()];
        for row in 0..n * c {
            let back = dpool.data()[row] / l as f64;
            for j in 0..l {
                dx[row * l + j] = g[row * l + j] * scale[row] + back;
            }
        }
        self.cache = Some((input, scale, mask));
        Tensor::new(vec![n, c, l], dx)
    }

    fn params(&self) -> Vec<&Param> {
        let mut p = self.squeeze.params();
        p.extend(self.excite.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.squeeze.params_mut();
        p.extend(self.excite.params_mut());
        p
    }
}

/// Minibatch discrimination: for features `x_i` (`[batch, A]`) computes
/// `M_i = x_i·T` reshaped to `B × C` and appends
/// `o_ib = Σ_{j≠i} exp(−‖M_ib − M_jb‖₁)`, giving `[batch, A + B]`.
#[derive(Debug, Clone)]
pub struct MinibatchDiscrimination {
    in_features: usize,
    kernels: usize,
    kernel_dim: usize,
    /// `[A][B·C]`
    pub t: Param,
    cache: Option<(Tensor, Vec<f64>)>,
}

impl MinibatchDiscrimination {
    pub fn new(in_features: usize, kernels: usize, kernel_dim: usize, rng: &mut impl Rng) -> Self {
        let len = in_features * kernels * kernel_dim;
        let t = (0..len)
            .map(|_| {
                let v: f64 = StandardNormal.sample(rng);
                0.1 * v
            })
            .collect::<Vec<f64>>();
        MinibatchDiscrimination {
            in_features,
            kernels,
            kernel_dim,
            t: Param::new(t),
            cache: None,
        }
    }

    pub fn with_kernel(in_features: usize, kernels: usize, kernel_dim: usize, t: Vec<f64>) -> Result<Self> {
        if t.len() != in_features * kernels * kernel_dim {
            return Err(Error::Shape(format!(
                "kernel tensor needs {} values, got {}",
                in_features * kernels * kernel_dim,
                t.len()
            )));
        }
        Ok(MinibatchDiscrimination {
            in_features,
            kernels,
            kernel_dim,
            t: Param::new(t),
            cache: None,
        })
    }

    pub fn out_features(&self) -> usize {
        self.in_features + self.kernels
    }

    fn project(&self, x: &[f64], n: usize) -> Vec<f64> {
        let (a, bc) = (self.in_features, self.kernels * self.kernel_dim);
        let mut m = vec![0.0; n * bc];
        for i in 0..n {
            for f in 0..a {
                let xv = x[i * a + f];
                for (mv, tv) in m[i * bc..][..bc].iter_mut().zip(&self.t.value[f * bc..][..bc]) {
                    *mv += xv * tv;
                }
            }
        }
        m
    }
}

impl Layer for MinibatchDiscrimination {
    fn forward(&mut self, input: &Tensor, _mode: Mode) -> Result<Tensor> {
        let (n, a) = input.dims2()?;
        if a != self.in_features {
            return Err(Error::Shape(format!(
                "minibatch discrimination expects {} features, got {a}",
                self.in_features
            )));
        }
        if n < 2 {
            return Err(Error::InvalidArgument("minibatch discrimination needs a batch of at least 2".into()));
        }
        let (b, c) = (self.kernels, self.kernel_dim);
        let m = self.project(input.data(), n);
        let width = a + b;
        let mut out = vec![0.0; n * width];
        for i in 0..n {
            out[i * width..][..a].copy_from_slice(&input.data()[i * a..][..a]);
            for j in 0..n {
                if i == j {
                    continue;
                }
                for k in 0..b {
                    let mi = &m[(i * b + k) * c..][..c];
                    let mj = &m[(j * b + k) * c..][..c];
                    let dist: f64 = mi.iter().zip(mj).map(|(p, q)| (p - q).abs()).sum();
                    out[i * width + a + k] += (-dist).exp();
                }
            }
        }
        self.cache = Some((input.clone(), m));
        Tensor::new(vec![n, width], out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let (input, m) = self.cache.as_ref().ok_or_else(|| missing_forward("minibatch discrimination"))?;
        let (n, a) = input.dims2()?;
        let (b, c) = (self.kernels, self.kernel_dim);
        let width = a + b;
        grad_output.expect_shape(&[n, width], "minibatch discrimination gradient")?;
        let g = grad_output.data();
        let mut dm = vec![0.0; m.len()];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                for k in 0..b {
                    let gik = g[i * width + a + k];
                    let (ri, rj) = ((i * b + k) * c, (j * b + k) * c);
                    let dist: f64 = (0..c).map(|q| (m[ri + q] - m[rj + q]).abs()).sum();
                    let e = gik * (-dist).exp();
                    for q in 0..c {
                        let sign = (m[ri + q] - m[rj + q]).signum();
                        let sign = if m[ri + q] == m[rj + q] { 0.0 } else { sign };
                        dm[ri + q] -= e * sign;
                        dm[rj + q] += e * sign;
                    }
                }
            }
        }
        let bc = b * c;
        let x = input.data();
        let mut dx = vec![0.0; n * a];
        for i in 0..n {
            for f in 0..a {
                dx[i * a + f] = g[i * width + f];
                let trow = &self.t.value[f * bc..][..bc];
                let drow = &dm[i * bc..][..bc];
                dx[i * a + f] += trow.iter().zip(drow).map(|(p, q)| p * q).sum::<f64>();
                let xv = x[i * a + f];
                for (tg, dv) in self.t.grad[f * bc..][..bc].iter_mut().zip(drow) {
                    *tg += xv * dv;
                }
            }
        }
        Tensor::new(vec![n, a], dx)
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.t]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.t]
    }
}

/// Average pooling by two along the last axis (odd tails are dropped).
pub fn avg_pool2(input: &Tensor) -> Result<Tensor> {
    let (n, c, l) = input.dims3()?;
    let half = l / 2;
    let x = input.data();
    let mut out = vec![0.0; n * c * half];
    for (row, o) in out.chunks_mut(half.max(1)).enumerate().take(n * c) {
        for (j, v) in o.iter_mut().enumerate().take(half) {
            *v = 0.5 * (x[row * l + 2 * j] + x[row * l + 2 * j + 1]);
        }
    }
    Tensor::new(vec![n, c, half], out)
}

pub fn avg_pool2_backward(grad_output: &Tensor, input_len: usize) -> Result<Tensor> {
    let (n, c, half) = grad_output.dims3()?;
    if input_len / 2 != half {
        return Err(Error::Shape(format!("pool gradient of length {half} does not match input {input_len}")));
    }
    let g = grad_output.data();
    let mut dx = vec![0.0; n * c * input_len];
    for row in 0..n * c {
        for j in 0..half {
            let v = 0.5 * g[row * half + j];
            dx[row * input_len + 2 * j] = v;
            dx[row * input_len + 2 * j + 1] = v;
        }
    }
    Tensor::new(vec![n, c, input_len], dx)
}

/// Nearest-neighbour upsampling by two along the last axis.
pub fn upsample2(input: &Tensor) -> Result<Tensor> {
    let (n, c, l) = input.dims3()?;
    let out = input.data().iter().flat_map(|&v| [v, v]).collect();
    Tensor::new(vec![n, c, 2 * l], out)
}

pub fn upsample2_backward(grad_output: &Tensor) -> Result<Tensor> {
    let (n, c, l2) = grad_output.dims3()?;
    if l2 % 2 != 0 {
        return Err(Error::Shape(format!("upsample gradient has odd length {l2}")));
    }
    let dx = grad_output.data().chunks(2).map(|p| p[0] + p[1]).collect();
    Tensor::new(vec![n, c, l2 / 2], dx)
}

/// Stacks `a` and `b` along the channel axis.
pub fn concat_channels(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (n, ca, l) = a.dims3()?;
    let (nb, cb, lb) = b.dims3()?;
    if n != nb || l != lb {
        return Err(Error::Shape(format!("cannot concatenate {:?} and {:?}", a.shape(), b.shape())));
    }
    let mut out = Vec::with_capacity(a.len() + b.len());
    for s in 0..n {
        out.extend_from_slice(&a.data()[s * ca * l..][..ca * l]);
        out.extend_from_slice(&b.data()[s * cb * l..][..cb * l]);
    }
    Tensor::new(vec![n, ca + cb, l], out)
}

/// Inverse of [`concat_channels`]: splits after the first `channels_a`.
pub fn split_channels(t: &Tensor, channels_a: usize) -> Result<(Tensor, Tensor)> {
    let (n, c, l) = t.dims3()?;
    if channels_a > c {
        return Err(Error::Shape(format!("cannot split {c} channels at {channels_a}")));
    }
    let cb = c - channels_a;
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for s in 0..n {
        let row = &t.data()[s * c * l..][..c * l];
        a.extend_from_slice(&row[..channels_a * l]);
        b.extend_from_slice(&row[channels_a * l..]);
    }
    Ok((Tensor::new(vec![n, channels_a, l], a)?, Tensor::new(vec![n, cb, l], b)?))
}

pub(crate) fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    b.expect_shape(a.shape(), "elementwise add")?;
    Tensor::new(a.shape().to_vec(), a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect())
}
