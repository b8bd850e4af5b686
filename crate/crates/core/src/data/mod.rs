//! HRIR/HRTF data model, container I/O, grid subsampling and synthetic
//! subjects.

pub mod container;
mod direction;
mod set;
pub mod spectrum;
mod subsample;
mod synth;

pub use container::{load_container, save_container, save_container_dir};
pub use direction::SphericalDirection;
pub(crate) use direction::angle_between;
pub use set::{bin_frequencies, Ear, EarSpectra, HrirSet, HrtfSet};
pub use spectrum::{hrir_to_hrtf, hrtf_to_hrir};
pub use subsample::{
    farthest_point_indices, subsample_indices, subsample_positions, EXPERIMENT_SPARSITY_LEVELS,
};
pub use synth::{
    magnitude_coefficients, synth_subject, synth_subject_detailed, woodworth_itd, SynthConfig,
    SyntheticSubject,
};
