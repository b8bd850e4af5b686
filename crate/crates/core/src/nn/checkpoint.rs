use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{
    Adam, AdamConfig, AeGanConfig, Cascade, DUNet, DUNetConfig, DenoiserModel, Discriminator, Generator,
    LossRecord, Network, Standardizer, TrainState, UpsamplerModel,
};
use crate::data::container::{read_container, write_container};
use crate::error::{Error, Result};

/// Callback over mutable state arrays.
pub type Visitor<'v> = dyn FnMut(&mut [f64]) -> Result<()> + 'v;

/// A model that can be rebuilt from its config and a flat list of arrays.
pub trait Checkpointable: Sized {
    const KIND: &'static str;

    fn config_json(&self) -> Result<Value>;
    /// Frequency bins per sample.
    fn num_bins(&self) -> usize;
    /// A model of the right shapes whose values are about to be overwritten.
    fn skeleton(config: &Value, num_bins: usize) -> Result<Self>;
    fn state(&self) -> Vec<&[f64]>;
    /// Visits the arrays of [`Checkpointable::state`] mutably, in order.
    fn visit_state_mut(&mut self, f: &mut Visitor) -> Result<()>;
}

fn parse<T: serde::de::DeserializeOwned>(v: &Value) -> Result<T> {
    serde_json::from_value(v.clone()).map_err(|e| Error::Config(format!("checkpoint config: {e}")))
}

fn json<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Config(e.to_string()))
}

fn net_state<'a, N: Network>(net: &'a N, out: &mut Vec<&'a [f64]>) {
    out.extend(net.params().into_iter().map(|p| p.value.as_slice()));
    out.extend(net.buffers().into_iter().map(|b| b.as_slice()));
}

fn visit_net<N: Network>(net: &mut N, f: &mut Visitor) -> Result<()> {
    for p in net.params_mut() {
        f(&mut p.value)?;
    }
    for b in net.buffers_mut() {
        f(b)?;
    }
    Ok(())
}

fn norm_state<'a>(n: &'a Standardizer, out: &mut Vec<&'a [f64]>) {
    out.push(&n.mean);
    out.push(&n.std);
}

fn visit_norm(n: &mut Standardizer, f: &mut Visitor) -> Result<()> {
    f(&mut n.mean)?;
    f(&mut n.std)
}

impl Checkpointable for DenoiserModel {
    const KIND: &'static str = "denoiser";

    fn config_json(&self) -> Result<Value> {
        json(self.net.config())
    }

    fn num_bins(&self) -> usize {
        self.sample_len() / self.net.config().coefficient_channels()
    }

    fn skeleton(config: &Value, num_bins: usize) -> Result<Self> {
        let cfg: DUNetConfig = parse(config)?;
        let len = cfg.coefficient_channels() * num_bins;
        Ok(DenoiserModel {
            net: DUNet::new(cfg, &mut ChaCha8Rng::seed_from_u64(0))?,
            input_norm: Standardizer::identity(len),
            residual_norm: Standardizer::identity(len),
        })
    }

    fn state(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        net_state(&self.net, &mut out);
        norm_state(&self.input_norm, &mut out);
        norm_state(&self.residual_norm, &mut out);
        out
    }

    fn visit_state_mut(&mut self, f: &mut Visitor) -> Result<()> {
        visit_net(&mut self.net, f)?;
        visit_norm(&mut self.input_norm, f)?;
        visit_norm(&mut self.residual_norm, f)
    }
}

impl Checkpointable for UpsamplerModel {
    const KIND: &'static str = "upsampler";

    fn config_json(&self) -> Result<Value> {
        json(self.config())
    }

    fn num_bins(&self) -> usize {
        self.input_norm.mean.len() / self.config().input_channels()
    }

    fn skeleton(config: &Value, num_bins: usize) -> Result<Self> {
        let cfg: AeGanConfig = parse(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        Ok(UpsamplerModel {
            generator: Generator::new(cfg.clone(), &mut rng)?,
            discriminator: Discriminator::new(&cfg, num_bins, &mut rng)?,
            input_norm: Standardizer::identity(cfg.input_channels() * num_bins),
            target_norm: Standardizer::identity(cfg.output_channels() * num_bins),
        })
    }

    fn state(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        net_state(&self.generator, &mut out);
        net_state(&self.discriminator, &mut out);
        norm_state(&self.input_norm, &mut out);
        norm_state(&self.target_norm, &mut out);
        out
    }

    fn visit_state_mut(&mut self, f: &mut Visitor) -> Result<()> {
        visit_net(&mut self.generator, f)?;
        visit_net(&mut self.discriminator, f)?;
        visit_norm(&mut self.input_norm, f)?;
        visit_norm(&mut self.target_norm, f)
    }
}

impl Checkpointable for Cascade {
    const KIND: &'static str = "cascade";

    fn config_json(&self) -> Result<Value> {
        Ok(serde_json::json!({
            "denoiser": self.denoiser.config_json()?,
            "upsampler": self.upsampler.config_json()?,
        }))
    }

    fn num_bins(&self) -> usize {
        self.denoiser.num_bins()
    }

    fn skeleton(config: &Value, num_bins: usize) -> Result<Self> {
        let part = |k: &str| config.get(k).ok_or_else(|| Error::Config(format!("cascade checkpoint lacks {k}")));
        Cascade::new(
            DenoiserModel::skeleton(part("denoiser")?, num_bins)?,
            UpsamplerModel::skeleton(part("upsampler")?, num_bins)?,
        )
    }

    fn state(&self) -> Vec<&[f64]> {
        let mut out = self.denoiser.state();
        out.extend(self.upsampler.state());
        out
    }

    fn visit_state_mut(&mut self, f: &mut Visitor) -> Result<()> {
        self.denoiser.visit_state_mut(f)?;
        self.upsampler.visit_state_mut(f)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointManifest {
    kind: String,
    model: String,
    config: Value,
    num_bins: usize,
    epoch: usize,
    seed: u64,
    history: Vec<LossRecord>,
    optimizers: Vec<OptimizerEntry>,
    arrays: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimizerEntry {
    config: AdamConfig,
    step: u64,
    moments: Vec<usize>,
}

impl<M: Checkpointable> TrainState<M> {
    /// Writes parameters, running statistics, standardizers and optimizer
    /// moments as one container (values stored as f32).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut arrays: Vec<&[f64]> = self.model.state();
        let mut optimizers = Vec::new();
        for opt in &self.optimizers {
            let moments: Vec<usize> = opt.first_moment.iter().map(|m| m.len()).collect();
            arrays.extend(opt.first_moment.iter().map(|m| m.as_slice()));
            arrays.extend(opt.second_moment.iter().map(|m| m.as_slice()));
            optimizers.push(OptimizerEntry {
                config: opt.config.clone(),
                step: opt.step,
                moments,
            });
        }
        let manifest = CheckpointManifest {
            kind: "train_state".into(),
            model: M::KIND.into(),
            config: self.model.config_json()?,
            num_bins: self.model.num_bins(),
            epoch: self.epoch,
            seed: self.seed,
            history: self.history.clone(),
            optimizers,
            arrays: self.model.state().iter().map(|a| a.len()).collect(),
        };
        let payload: Vec<f32> = arrays.iter().flat_map(|a| a.iter().map(|&v| v as f32)).collect();
        write_container(path.as_ref(), &manifest, &payload)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let (manifest, payload): (CheckpointManifest, Vec<f32>) = read_container(path)?;
        if manifest.kind != "train_state" || manifest.model != M::KIND {
            return Err(Error::container(
                path,
                format!("holds a {} {}, not a {} checkpoint", manifest.model, manifest.kind, M::KIND),
            ));
        }
        let mut model = M::skeleton(&manifest.config, manifest.num_bins)?;
        let mut values = payload.iter().map(|&v| v as f64);
        let mut fill = |dst: &mut [f64]| -> Result<()> {
            for d in dst.iter_mut() {
                *d = values
                    .next()
                    .ok_or_else(|| Error::container(path, "payload shorter than its arrays"))?;
            }
            Ok(())
        };
        let lens: Vec<usize> = model.state().iter().map(|a| a.len()).collect();
        if lens != manifest.arrays {
            return Err(Error::container(path, "array layout does not match the model config"));
        }
        model.visit_state_mut(&mut fill)?;
        let mut optimizers = Vec::new();
        for entry in manifest.optimizers {
            let mut first: Vec<Vec<f64>> = entry.moments.iter().map(|&n| vec![0.0; n]).collect();
            let mut second = first.clone();
            for m in first.iter_mut().chain(second.iter_mut()) {
                fill(m)?;
            }
            optimizers.push(Adam {
                config: entry.config,
                step: entry.step,
                first_moment: first,
                second_moment: second,
            });
        }
        if values.next().is_some() {
            return Err(Error::container(path, "payload longer than its arrays"));
        }
        Ok(TrainState {
            model,
            optimizers,
            epoch: manifest.epoch,
            history: manifest.history,
            seed: manifest.seed,
        })
    }

    pub fn write_history_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_history_csv(path, &self.history)
    }
}

/// Loss history as CSV with columns `epoch,l1,cosine,adv_g,adv_d`.
pub fn write_history_csv(path: impl AsRef<Path>, history: &[LossRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("epoch,l1,cosine,adv_g,adv_d\n");
    for r in history {
        out.push_str(&format!("{},{},{},{},{}\n", r.epoch, r.l1, r.cosine, r.adv_g, r.adv_d));
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}
