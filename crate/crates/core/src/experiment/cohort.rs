use crate::data::{hrir_to_hrtf, subsample_indices, synth_subject, HrirSet, SphericalDirection, SynthConfig};
use crate::error::Result;
use crate::nn::{coeffs_to_features, CoeffSample, TrainingData};
use crate::noise::{degrade_set, NoiseSpec};
use crate::sh::{fibonacci_grid, fit_magnitude_db, max_order_for_points};

use super::ExperimentConfig;

/// Which split a subject belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Train,
    Test,
    /// The held-out subject used to tune classical parameters.
    Tune,
}

impl Role {
    fn salt(self) -> u64 {
        match self {
            Role::Train => 0x7452_4149_4e00_0000,
            Role::Test => 0x5445_5354_0000_0000,
            Role::Tune => 0x5455_4e45_0000_0000,
        }
    }
}

pub(crate) fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Synthetic subjects and their noisy measurements, all derived from one
/// master seed.
#[derive(Debug, Clone)]
pub struct Cohort {
    grid: Vec<SphericalDirection>,
    synth: SynthConfig,
    noise: Option<NoiseSpec>,
    seed: u64,
}

impl Cohort {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        Cohort {
            grid: fibonacci_grid(cfg.grid_size),
            synth: cfg.synth.clone(),
            noise: cfg.noise.clone(),
            seed: cfg.seed,
        }
    }

    pub fn grid(&self) -> &[SphericalDirection] {
        &self.grid
    }

    pub fn subject_seed(&self, role: Role, index: usize) -> u64 {
        splitmix(splitmix(self.seed ^ role.salt()) ^ index as u64)
    }

    pub fn clean(&self, role: Role, index: usize) -> Result<HrirSet> {
        let cfg = SynthConfig {
            seed: self.subject_seed(role, index),
            ..self.synth.clone()
        };
        synth_subject(&cfg, &self.grid)
    }

    /// Realization 0 is the evaluated measurement; training draws fresh
    /// realizations per epoch.
    pub fn degrade(&self, clean: &HrirSet, role: Role, index: usize, realization: u64) -> Result<HrirSet> {
        match &self.noise {
            None => Ok(clean.clone()),
            Some(spec) => {
                let spec = NoiseSpec {
                    seed: splitmix(self.subject_seed(role, index) ^ splitmix(realization)),
                    ..spec.clone()
                };
                degrade_set(clean, &spec)
            }
        }
    }

    /// Measured positions kept at a sparsity level; shared by all subjects.
    pub fn sparse_indices(&self, count: usize) -> Result<Vec<usize>> {
        subsample_indices(&self.grid, count, splitmix(self.seed ^ 0x5350_4152_5345))
    }
}

/// What a training set maps from and to.
#[derive(Debug, Clone)]
pub enum TrainingTask {
    /// Noisy dense coefficients to clean ones at one order.
    Denoise { order: usize },
    /// Noisy sparse low-order coefficients to clean dense high-order ones.
    Upsample { indices: Vec<usize>, high_order: usize },
    /// As `Upsample`, but the upsampler input is the noisy fit itself.
    UpsampleNoisy { indices: Vec<usize>, high_order: usize },
}

/// Training subjects with a fresh noise realization every epoch.
pub struct CohortData<'a> {
    cohort: &'a Cohort,
    clean: Vec<HrirSet>,
    clean_low: Vec<Vec<f64>>,
    clean_high: Vec<Vec<f64>>,
    task: TrainingTask,
}

fn features(set: &HrirSet, order: usize) -> Result<Vec<f64>> {
    Ok(coeffs_to_features(&fit_magnitude_db(&hrir_to_hrtf(set)?, order, None)?))
}

impl<'a> CohortData<'a> {
    pub fn new(cohort: &'a Cohort, subjects: usize, task: TrainingTask) -> Result<Self> {
        let clean: Vec<HrirSet> = (0..subjects).map(|i| cohort.clean(Role::Train, i)).collect::<Result<_>>()?;
        let (low, high) = match &task {
            TrainingTask::Denoise { order } => (*order, *order),
            TrainingTask::Upsample { indices, high_order } | TrainingTask::UpsampleNoisy { indices, high_order } => {
                (max_order_for_points(indices.len()), *high_order)
            }
        };
        let mut clean_low = Vec::with_capacity(subjects);
        let mut clean_high = Vec::with_capacity(subjects);
        for c in &clean {
            let h = features(c, high)?;
            clean_low.push(match &task {
                TrainingTask::Denoise { .. } => h.clone(),
                TrainingTask::Upsample { indices, .. } | TrainingTask::UpsampleNoisy { indices, .. } => {
                    features(&c.select(indices)?, low)?
                }
            });
            clean_high.push(h);
        }
        Ok(CohortData {
            cohort,
            clean,
            clean_low,
            clean_high,
            task,
        })
    }

    pub fn clean_sets(&self) -> &[HrirSet] {
        &self.clean
    }
}

impl TrainingData for CohortData<'_> {
    fn epoch_samples(&self, epoch: usize) -> Result<Vec<CoeffSample>> {
        let mut out = Vec::with_capacity(self.clean.len());
        for (i, c) in self.clean.iter().enumerate() {
            let noisy = self.cohort.degrade(c, Role::Train, i, epoch as u64 + 1)?;
            let noisy_low = match &self.task {
                TrainingTask::Denoise { order } => features(&noisy, *order)?,
                TrainingTask::Upsample { indices, .. } | TrainingTask::UpsampleNoisy { indices, .. } => {
                    features(&noisy.select(indices)?, max_order_for_points(indices.len()))?
                }
            };
            let clean_low = match self.task {
                TrainingTask::UpsampleNoisy { .. } => noisy_low.clone(),
                _ => self.clean_low[i].clone(),
            };
            out.push(CoeffSample {
                noisy_low,
                clean_low,
                clean_high: self.clean_high[i].clone(),
            });
        }
        Ok(out)
    }
}
