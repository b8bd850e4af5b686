//! Central finite-difference checks (step 1e-4, relative tolerance 1e-4)
//! of every layer, loss and tensor op on ten random shapes each.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsehrtf::nn::gradcheck::{check_function, check_layer, GradCheck};
use sparsehrtf::nn::loss::{adversarial_loss_grad, cosine_loss_grad, l1_loss_grad};
use sparsehrtf::nn::{
    avg_pool2, avg_pool2_backward, concat_channels, split_channels, upsample2, upsample2_backward, AeGanConfig,
    BatchNorm1d, ChannelAttention, Conv1d, ConvBlock, DUNet, DUNetConfig, Dense, Discriminator, Generator, Layer,
    MinibatchDiscrimination, Mode, Relu, ResBlock, Tensor,
};

const TOL: f64 = 1e-4;
const SHAPES: u64 = 10;
const LIMIT: usize = 24;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random(shape: &[usize], r: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap()
}

fn jitter<L: Layer>(layer: &mut L, r: &mut ChaCha8Rng) {
    for p in layer.params_mut() {
        p.value.iter_mut().for_each(|v| *v += r.random_range(-0.3..0.3));
    }
}

fn assert_ok(name: &str, case: u64, check: GradCheck) {
    assert!(
        check.passes(TOL),
        "{name} shape {case}: max relative error {:.3e} over {} entries",
        check.max_relative_error,
        check.checked
    );
}

fn check<L: Layer>(name: &str, case: u64, layer: &mut L, input: &Tensor, mode: Mode, r: &mut ChaCha8Rng) {
    let out = layer.forward(input, mode).unwrap();
    let upstream = random(out.shape(), r);
    assert_ok(name, case, check_layer(layer, input, &upstream, mode, LIMIT).unwrap());
}

pub fn conv1d() {
    for case in 0..SHAPES {
        let mut r = rng(100 + case);
        let (n, cin, cout, l) = (r.random_range(1..4), r.random_range(1..5), r.random_range(1..5), r.random_range(3..12));
        let k = [1, 3, 5][r.random_range(0..3)];
        let mut conv = Conv1d::new(cin, cout, k, &mut r).unwrap();
        let x = random(&[n, cin, l], &mut r);
        check("conv1d", case, &mut conv, &x, Mode::Train, &mut r);
    }
}

pub fn batch_norm_train_and_eval() {
    for case in 0..SHAPES {
        let mut r = rng(200 + case);
        let (n, c) = (r.random_range(2..5), r.random_range(1..5));
        let shape: Vec<usize> = if case % 2 == 0 { vec![n, c] } else { vec![n, c, r.random_range(2..7)] };
        let mut bn = BatchNorm1d::new(c);
        jitter(&mut bn, &mut r);
        let x = random(&shape, &mut r);
        check("batch norm (train)", case, &mut bn, &x, Mode::Train, &mut r);
        bn.running_mean.iter_mut().for_each(|m| *m = r.random_range(-0.5..0.5));
        bn.running_var.iter_mut().for_each(|v| *v = r.random_range(0.5..2.0));
        check("batch norm (eval)", case, &mut bn, &x, Mode::Eval, &mut r);
    }
}

pub fn relu() {
    for case in 0..SHAPES {
        let mut r = rng(300 + case);
        let shape = [r.random_range(1..4), r.random_range(1..4), r.random_range(1..9)];
        let mut x = random(&shape, &mut r);
        x.data_mut().iter_mut().for_each(|v| {
            if v.abs() < 0.01 {
                *v += 0.05;
            }
        });
        check("relu", case, &mut Relu::new(), &x, Mode::Train, &mut r);
    }
}

pub fn dense() {
    for case in 0..SHAPES {
        let mut r = rng(400 + case);
        let (n, i, o) = (r.random_range(1..5), r.random_range(1..8), r.random_range(1..6));
        let mut d = Dense::new(i, o, &mut r);
        let x = random(&[n, i], &mut r);
        check("dense", case, &mut d, &x, Mode::Train, &mut r);
    }
}

pub fn channel_attention() {
    for case in 0..SHAPES {
        let mut r = rng(500 + case);
        let red = r.random_range(1..3);
        let c = red * r.random_range(1..4);
        let mut a = ChannelAttention::new(c, red, &mut r).unwrap();
        let x = random(&[r.random_range(1..4), c, r.random_range(2..8)], &mut r);
        check("channel attention", case, &mut a, &x, Mode::Train, &mut r);
    }
}

pub fn minibatch_discrimination() {
    for case in 0..SHAPES {
        let mut r = rng(600 + case);
        let (n, a, b, c) = (r.random_range(2..6), r.random_range(1..6), r.random_range(1..5), r.random_range(1..4));
        let mut m = MinibatchDiscrimination::new(a, b, c, &mut r);
        let x = random(&[n, a], &mut r);
        check("minibatch discrimination", case, &mut m, &x, Mode::Train, &mut r);
    }
}

pub fn conv_and_residual_blocks() {
    for case in 0..SHAPES {
        let mut r = rng(700 + case);
        let (n, c, l) = (r.random_range(2..4), 2 * r.random_range(1..3), r.random_range(4..9));
        let mut block = ConvBlock::new(c, r.random_range(1..5), 3, &mut r).unwrap();
        jitter(&mut block, &mut r);
        let x = random(&[n, c, l], &mut r);
        check("conv block", case, &mut block, &x, Mode::Train, &mut r);
        let reduction = if case % 2 == 0 { Some(2) } else { None };
        let mut res = ResBlock::new(c, 3, reduction, &mut r).unwrap();
        jitter(&mut res, &mut r);
        check("residual block", case, &mut res, &x, Mode::Train, &mut r);
    }
}

fn small_aegan(r: &mut ChaCha8Rng) -> AeGanConfig {
    let low = r.random_range(0..2);
    AeGanConfig {
        low_order: low,
        high_order: low + r.random_range(1..3),
        latent: r.random_range(2..5),
        features: 4,
        res_blocks: r.random_range(1..3),
        attention_reduction: 2,
        kernel_size: 3,
        disc_channels: r.random_range(2..4),
        mbd_features: r.random_range(2..5),
        mbd_kernels: r.random_range(1..4),
        mbd_kernel_dim: r.random_range(1..3),
    }
}

pub fn generator_and_discriminator() {
    for case in 0..SHAPES {
        let mut r = rng(800 + case);
        let cfg = small_aegan(&mut r);
        let (n, l) = (r.random_range(2..4), 4 * r.random_range(1..3));
        let mut g = Generator::new(cfg.clone(), &mut r).unwrap();
        jitter(&mut g, &mut r);
        let x = random(&[n, cfg.input_channels(), l], &mut r);
        check("generator", case, &mut g, &x, Mode::Train, &mut r);
        let mut d = Discriminator::new(&cfg, l, &mut r).unwrap();
        jitter(&mut d, &mut r);
        let y = random(&[n, cfg.output_channels(), l], &mut r);
        check("discriminator", case, &mut d, &y, Mode::Train, &mut r);
    }
}

pub fn dunet() {
    for case in 0..SHAPES {
        let mut r = rng(900 + case);
        let depth = r.random_range(1..4);
        let cfg = DUNetConfig {
            sh_order: r.random_range(0..2),
            channels: (0..depth).map(|_| r.random_range(2..5)).collect(),
            kernel_size: 3,
        };
        let l = (1 << (depth - 1)) * r.random_range(2..4);
        let mut net = DUNet::new(cfg.clone(), &mut r).unwrap();
        jitter(&mut net, &mut r);
        let x = random(&[r.random_range(2..4), cfg.coefficient_channels(), l], &mut r);
        check("U-Net", case, &mut net, &x, Mode::Train, &mut r);
    }
}

fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

pub fn tensor_ops() {
    for case in 0..SHAPES {
        let mut r = rng(1000 + case);
        let (n, c, l) = (r.random_range(1..3), r.random_range(1..4), r.random_range(2..9));
        let shape = [n, c, l];
        let x = random(&shape, &mut r);

        let up = random(avg_pool2(&x).unwrap().shape(), &mut r);
        let analytic = avg_pool2_backward(&up, l).unwrap();
        let f = |v: &[f64]| Ok(dot(&avg_pool2(&Tensor::new(shape.to_vec(), v.to_vec())?)?, &up));
        assert_ok("avg_pool2", case, check_function(f, x.data(), analytic.data(), LIMIT).unwrap());

        let up = random(upsample2(&x).unwrap().shape(), &mut r);
        let analytic = upsample2_backward(&up).unwrap();
        let f = |v: &[f64]| Ok(dot(&upsample2(&Tensor::new(shape.to_vec(), v.to_vec())?)?, &up));
        assert_ok("upsample2", case, check_function(f, x.data(), analytic.data(), LIMIT).unwrap());

        let cb = r.random_range(1..4);
        let b = random(&[n, cb, l], &mut r);
        let up = random(&[n, c + cb, l], &mut r);
        let (ga, _) = split_channels(&up, c).unwrap();
        let f = |v: &[f64]| Ok(dot(&concat_channels(&Tensor::new(shape.to_vec(), v.to_vec())?, &b)?, &up));
        assert_ok("concat_channels", case, check_function(f, x.data(), ga.data(), LIMIT).unwrap());
    }
}

pub fn losses() {
    for case in 0..SHAPES {
        let mut r = rng(1100 + case);
        let len = r.random_range(1..30);
        let pred: Vec<f64> = (0..len).map(|_| r.random_range(-2.0..2.0)).collect();
        let target: Vec<f64> = (0..len).map(|_| r.random_range(-2.0..2.0)).collect();

        let (_, g) = l1_loss_grad(&pred, &target).unwrap();
        let f = |v: &[f64]| Ok(l1_loss_grad(v, &target)?.0);
        assert_ok("L1 loss", case, check_function(f, &pred, &g, LIMIT).unwrap());

        let (_, g) = cosine_loss_grad(&pred, &target).unwrap();
        let f = |v: &[f64]| Ok(cosine_loss_grad(v, &target)?.0);
        assert_ok("cosine loss", case, check_function(f, &pred, &g, LIMIT).unwrap());

        for real in [true, false] {
            let logits: Vec<f64> = (0..len).map(|_| r.random_range(-6.0..6.0)).collect();
            let (_, g) = adversarial_loss_grad(&logits, real).unwrap();
            let f = |v: &[f64]| Ok(adversarial_loss_grad(v, real)?.0);
            assert_ok("adversarial loss", case, check_function(f, &logits, &g, LIMIT).unwrap());
        }
    }
}
