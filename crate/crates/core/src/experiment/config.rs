use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::SynthConfig;
use crate::error::{Error, Result};
use crate::metrics::MetricConfig;
use crate::nn::{AeGanConfig, TrainOptions};
use crate::noise::NoiseSpec;
use crate::sh::max_order_for_points;

/// A processing method evaluated by the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// The noisy full-grid input, unprocessed.
    Identity,
    /// Denoisy U-Net on the full grid.
    Dunet,
    SpectralSubtraction,
    Wavelet,
    Kalman,
    /// Jointly trained U-Net and AE-GAN on sparse noisy input.
    HrtfDunet,
    /// AE-GAN alone on sparse noisy input.
    Aegan,
    Barycentric,
    Sh,
    /// Training subject with the smallest mean LSD to the others.
    SelectionGeneric,
    /// Training subject with the largest mean LSD to the others.
    SelectionDistinct,
}

impl Method {
    pub const ALL: [Method; 11] = [
        Method::Identity,
        Method::Dunet,
        Method::SpectralSubtraction,
        Method::Wavelet,
        Method::Kalman,
        Method::HrtfDunet,
        Method::Aegan,
        Method::Barycentric,
        Method::Sh,
        Method::SelectionGeneric,
        Method::SelectionDistinct,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Identity => "identity",
            Method::Dunet => "dunet",
            Method::SpectralSubtraction => "spectral-subtraction",
            Method::Wavelet => "wavelet",
            Method::Kalman => "kalman",
            Method::HrtfDunet => "hrtf-dunet",
            Method::Aegan => "aegan",
            Method::Barycentric => "barycentric",
            Method::Sh => "sh",
            Method::SelectionGeneric => "selection-generic",
            Method::SelectionDistinct => "selection-distinct",
        }
    }

    /// Denoisers run on the full noisy grid; their rows carry the grid
    /// size as sparsity.
    pub fn is_denoiser(self) -> bool {
        matches!(
            self,
            Method::Identity | Method::Dunet | Method::SpectralSubtraction | Method::Wavelet | Method::Kalman
        )
    }

    pub fn is_neural(self) -> bool {
        matches!(self, Method::Dunet | Method::HrtfDunet | Method::Aegan)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Lsd,
    Ild,
    Itd,
    Csl,
}

impl MetricKind {
    pub const ALL: [MetricKind; 4] = [MetricKind::Lsd, MetricKind::Ild, MetricKind::Itd, MetricKind::Csl];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Lsd => "lsd",
            MetricKind::Ild => "ild",
            MetricKind::Itd => "itd",
            MetricKind::Csl => "csl",
        }
    }

    /// Axis label for plots.
    pub fn label(self) -> &'static str {
        match self {
            MetricKind::Lsd => "LSD (dB)",
            MetricKind::Ild => "ILD error (dB)",
            MetricKind::Itd => "ITD error (s)",
            MetricKind::Csl => "CSL",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricKind::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown metric {s:?}")))
    }
}

/// Training budget and settings for the neural methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    /// Synthetic subjects in the training cohort (also the selection pool).
    pub subjects: usize,
    pub dunet_epochs: usize,
    pub cascade_epochs: usize,
    pub aegan_epochs: usize,
    pub options: TrainOptions,
    /// Upsampler layout; its orders are set per sparsity.
    pub aegan: AeGanConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            subjects: 16,
            dunet_epochs: 20,
            cascade_epochs: 10,
            aegan_epochs: 10,
            options: TrainOptions {
                batch_size: 4,
                ..TrainOptions::default()
            },
            aegan: AeGanConfig::default(),
        }
    }
}

/// Everything that defines an experiment run. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub test_subjects: usize,
    /// Size of the dense Fibonacci evaluation grid.
    pub grid_size: usize,
    /// Subject generator settings; the seed is replaced per subject.
    pub synth: SynthConfig,
    /// `null` evaluates clean inputs; the seed is replaced per subject.
    pub noise: Option<NoiseSpec>,
    pub sparsity: Vec<usize>,
    pub methods: Vec<Method>,
    pub metrics: Vec<MetricKind>,
    pub metric_config: MetricConfig,
    /// SH order of upsampled outputs and of the CSL comparison.
    pub high_order: usize,
    pub training: TrainingConfig,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Grid index drawn in the magnitude plots (of test subject 0, left ear).
    pub plot_position: usize,
    /// Also write every noisy and processed test set as a container.
    pub save_sets: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            test_subjects: 41,
            grid_size: 100,
            synth: SynthConfig::default(),
            noise: Some(NoiseSpec::white(5.0, 0)),
            sparsity: crate::data::EXPERIMENT_SPARSITY_LEVELS.to_vec(),
            methods: Method::ALL.to_vec(),
            metrics: MetricKind::ALL.to_vec(),
            metric_config: MetricConfig::default(),
            high_order: 5,
            training: TrainingConfig::default(),
            seed: 0,
            output_dir: PathBuf::from("results"),
            plot_position: 0,
            save_sets: false,
        }
    }
}

impl ExperimentConfig {
    /// Parses JSON; missing keys take defaults, unknown keys are errors.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid experiment config: {e}")))?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: String| Err(Error::Config(m));
        if self.methods.is_empty() {
            return cfg_err("at least one method is required".into());
        }
        if self.metrics.is_empty() {
            return cfg_err("at least one metric is required".into());
        }
        if self.test_subjects == 0 {
            return cfg_err("at least one test subject is required".into());
        }
        if self.grid_size == 0 {
            return cfg_err("grid size must be positive".into());
        }
        let grid_order = max_order_for_points(self.grid_size);
        if self.high_order > grid_order || self.synth.true_sh_order > grid_order {
            return cfg_err(format!(
                "a {}-point grid supports SH order {grid_order}, below the configured orders",
                self.grid_size
            ));
        }
        if let Some(noise) = &self.noise {
            noise.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.plot_position >= self.grid_size {
            return cfg_err(format!("plot position {} outside the grid", self.plot_position));
        }
        let upsamplers: Vec<Method> = self.methods.iter().copied().filter(|m| !m.is_denoiser()).collect();
        if !upsamplers.is_empty() && self.sparsity.is_empty() {
            return cfg_err("upsampling methods need at least one sparsity level".into());
        }
        for &s in &self.sparsity {
            if s == 0 || s > self.grid_size {
                return cfg_err(format!("sparsity {s} is outside 1..={}", self.grid_size));
            }
            if max_order_for_points(s) >= self.high_order
                && upsamplers.iter().any(|m| matches!(m, Method::HrtfDunet | Method::Aegan))
            {
                return cfg_err(format!(
                    "{s} points give SH order {}, not below the output order {}",
                    max_order_for_points(s),
                    self.high_order
                ));
            }
            if s < 3 && upsamplers.contains(&Method::Barycentric) {
                return cfg_err(format!("barycentric interpolation needs at least 3 points, got {s}"));
            }
        }
        let needs_training = self.methods.iter().any(|m| m.is_neural());
        if needs_training {
            self.training.options.validate()?;
            self.training.aegan.validate()?;
            if self.training.subjects == 0 {
                return cfg_err("neural methods need training subjects".into());
            }
        }
        let selects = self
            .methods
            .iter()
            .any(|m| matches!(m, Method::SelectionGeneric | Method::SelectionDistinct));
        if selects && self.training.subjects < 2 {
            return cfg_err("HRTF selection needs at least two training subjects".into());
        }
        Ok(())
    }

    /// Sparsity values a method is evaluated at.
    pub fn sparsities_for(&self, method: Method) -> Vec<usize> {
        if method.is_denoiser() {
            vec![self.grid_size]
        } else {
            self.sparsity.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.name()));
        }
        for k in MetricKind::ALL {
            assert_eq!(k.name().parse::<MetricKind>().unwrap(), k);
        }
        assert!("fancy".parse::<Method>().is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"seed": 3}"#).is_ok());
        assert!(matches!(
            ExperimentConfig::from_json(r#"{"seeed": 3}"#),
            Err(Error::Config(_))
        ));
        assert!(ExperimentConfig::from_json(r#"{"training": {"epochs": 3}}"#).is_err());
    }

    #[test]
    fn incompatible_sparsity() {
        let cfg = ExperimentConfig {
            sparsity: vec![2],
            methods: vec![Method::Barycentric],
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg = ExperimentConfig {
            sparsity: vec![101],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        ExperimentConfig::default().validate().unwrap();
    }
}
