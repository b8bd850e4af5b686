//! Network oracles: minibatch discrimination against a double loop and
//! cascaded gradients against a hand-composed chain rule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsehrtf::experiment::{Cohort, CohortData, ExperimentConfig, TrainingTask};
use sparsehrtf::nn::loss::{cosine_loss_grad, l1_loss_grad};
use sparsehrtf::nn::{
    AeGanConfig, Cascade, CoeffSample, DUNetConfig, DenoiserModel, Layer, MinibatchDiscrimination, Mode, Network,
    Tensor, TrainingData, UpsamplerModel,
};

fn random_vec(n: usize, r: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-1.0..1.0)).collect()
}

fn upsample_samples(subjects: usize) -> Vec<CoeffSample> {
    let cohort = Cohort::new(&ExperimentConfig::default());
    let task = TrainingTask::Upsample {
        indices: cohort.sparse_indices(4).unwrap(),
        high_order: 2,
    };
    CohortData::new(&cohort, subjects, task).unwrap().epoch_samples(0).unwrap()
}

fn small_aegan() -> AeGanConfig {
    AeGanConfig {
        low_order: 1,
        high_order: 2,
        latent: 8,
        features: 8,
        res_blocks: 1,
        attention_reduction: 2,
        ..AeGanConfig::default()
    }
}


/// `o_ib = Σ_{j≠i} exp(−Σ_c |M_ibc − M_jbc|)` with `M_ibc = Σ_f x_if T_f,(b,c)`.
fn mbd_oracle(x: &[Vec<f64>], t: &[f64], kernels: usize, dim: usize) -> Vec<Vec<f64>> {
    let m: Vec<Vec<Vec<f64>>> = x
        .iter()
        .map(|xi| {
            (0..kernels)
                .map(|b| {
                    (0..dim)
                        .map(|c| (0..xi.len()).map(|f| xi[f] * t[f * kernels * dim + b * dim + c]).sum())
                        .collect()
                })
                .collect()
        })
        .collect();
    (0..x.len())
        .map(|i| {
            let mut row = x[i].clone();
            for b in 0..kernels {
                let mut o = 0.0;
                for j in 0..x.len() {
                    if j != i {
                        let d: f64 = (0..dim).map(|c| (m[i][b][c] - m[j][b][c]).abs()).sum();
                        o += (-d).exp();
                    }
                }
                row.push(o);
            }
            row
        })
        .collect()
}

fn mbd_forward(layer: &mut MinibatchDiscrimination, x: &[Vec<f64>]) -> Vec<f64> {
    let a = x[0].len();
    let t = Tensor::new(vec![x.len(), a], x.concat()).unwrap();
    layer.forward(&t, Mode::Eval).unwrap().into_data()
}

pub fn minibatch_discrimination_matches_double_loop() {
    for n in 2..=8 {
        let mut r = ChaCha8Rng::seed_from_u64(n as u64);
        let (a, b, c) = (5, 4, 3);
        let t = random_vec(a * b * c, &mut r);
        let x: Vec<Vec<f64>> = (0..n).map(|_| random_vec(a, &mut r)).collect();
        let mut layer = MinibatchDiscrimination::with_kernel(a, b, c, t.clone()).unwrap();
        let got = mbd_forward(&mut layer, &x);
        let want = mbd_oracle(&x, &t, b, c).concat();
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12, "batch {n}: {g} vs {w}");
        }
    }
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

fn grads(net: &impl Network) -> Vec<f64> {
    net.params().iter().flat_map(|p| p.grad.iter().copied()).collect()
}

/// Batch-mean reconstruction gradient `(∂L1 + λ·∂cos)/n` per sample.
fn manual_reconstruction(pred: &[Vec<f64>], target: &[&[f64]], lambda: f64) -> Vec<Vec<f64>> {
    let n = pred.len() as f64;
    pred.iter()
        .zip(target)
        .map(|(p, t)| {
            let (_, a) = l1_loss_grad(p, t).unwrap();
            let (_, b) = cosine_loss_grad(p, t).unwrap();
            a.iter().zip(&b).map(|(x, y)| (x + lambda * y) / n).collect()
        })
        .collect()
}

pub fn cascaded_gradients_match_two_stage_chain_rule() {
    let data = upsample_samples(4);
    let (lambda_cos, lambda_adv, w) = (1.0, 0.01, 0.5);
    let build = || {
        Cascade::new(
            DenoiserModel::new(DUNetConfig::for_order(1), &data, 1).unwrap(),
            UpsamplerModel::new(small_aegan(), &data, 2).unwrap(),
        )
        .unwrap()
    };
    let mut joint = build();
    let fwd = joint.forward(&data, Mode::Train).unwrap();
    joint.joint_gradients(&fwd, &data, lambda_cos, lambda_adv, w).unwrap();

    let mut c = build();
    c.denoiser.net.zero_grad();
    c.upsampler.generator.zero_grad();
    let noisy: Vec<&[f64]> = data.iter().map(|s| s.noisy_low.as_slice()).collect();
    let denoised = c.denoiser.forward(&noisy, Mode::Train).unwrap();
    let refs: Vec<&[f64]> = denoised.iter().map(|v| v.as_slice()).collect();
    let (high_norm, high) = c.upsampler.forward(&refs, Mode::Train).unwrap();
    let targets: Vec<&[f64]> = data.iter().map(|s| s.clean_high.as_slice()).collect();
    let mut g = c
        .upsampler
        .output_grad_to_normalized(&manual_reconstruction(&high, &targets, lambda_cos))
        .unwrap();
    let (_, g_adv) = c.upsampler.adversarial_gradient(&high_norm).unwrap();
    g.data_mut().iter_mut().zip(g_adv.data()).for_each(|(a, b)| *a += lambda_adv * b);
    let through = c.upsampler.backward(&g).unwrap();
    let low_targets: Vec<&[f64]> = data.iter().map(|s| s.clean_low.as_slice()).collect();
    let own = manual_reconstruction(&denoised, &low_targets, lambda_cos);
    let total: Vec<Vec<f64>> = through
        .iter()
        .zip(&own)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + w * y).collect())
        .collect();
    c.denoiser.backward(&total).unwrap();

    let (gj, gm) = (grads(&joint.denoiser.net), grads(&c.denoiser.net));
    assert_eq!(gj.len(), gm.len());
    assert!(gm.iter().any(|v| *v != 0.0));
    for (a, b) in gj.iter().zip(&gm) {
        assert!(relative(*a, *b) < 1e-6, "{a} vs {b}");
    }
    for (a, b) in grads(&joint.upsampler.generator).iter().zip(&grads(&c.upsampler.generator)) {
        assert!(relative(*a, *b) < 1e-6);
    }
}
