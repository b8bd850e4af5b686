//! End-to-end experiments on synthetic cohorts: train the neural methods,
//! run every method on every test subject and sparsity level, score the
//! outputs and write metric tables and plots.

mod cohort;
mod config;
mod plot;
mod report;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub use cohort::{Cohort, CohortData, Role, TrainingTask};
pub use config::{ExperimentConfig, Method, MetricKind, TrainingConfig};
pub use plot::{magnitude_plot_svg, Series};
pub use report::{
    box_geometry, box_plot_svg, quantile, read_metrics_csv, summarize, table_csv, write_metrics_csv,
    write_report, write_summary_csv, BoxGeometry, MetricRow, SummaryRow,
};

use crate::data::{hrir_to_hrtf, hrtf_to_hrir, save_container, Ear, HrirSet, HrtfSet, SphericalDirection};
use crate::denoise::{kalman_ratio_grid, tune_kalman, ClassicalDenoiser, SpectralSubtraction};
use crate::error::{Error, Result};
use crate::metrics::{csl_error, ild_error, itd_error, lsd_error};
use crate::nn::{
    coeffs_to_features, features_to_coeffs, train_aegan, train_dunet, train_end_to_end, AeGanConfig, Cascade,
    DUNetConfig, DenoiserModel, TrainState, UpsamplerModel,
};
use crate::sh::{fit_magnitude_db, max_order_for_points, sht_eval, ShCoeffTensor};
use crate::upsample::{barycentric_upsample, render_db_field, select_hrtf, sh_upsample, SelectionMode};
use cohort::splitmix;

/// Trained models and tuned parameters of one run.
pub struct TrainedMethods {
    pub dunet: Option<TrainState<DenoiserModel>>,
    pub cascades: BTreeMap<usize, TrainState<Cascade>>,
    pub aegans: BTreeMap<usize, TrainState<UpsamplerModel>>,
    pub kalman: Option<ClassicalDenoiser>,
    /// Training-subject index chosen by each selection mode.
    pub selection: BTreeMap<Method, usize>,
    selection_sets: BTreeMap<Method, HrtfSet>,
}

#[derive(Serialize)]
struct Parameters<'a> {
    kalman: Option<&'a ClassicalDenoiser>,
    selection: BTreeMap<&'static str, usize>,
    sparse_indices: BTreeMap<usize, Vec<usize>>,
}

fn model_seed(seed: u64, tag: u64) -> u64 {
    splitmix(seed ^ splitmix(tag))
}

/// Trains or tunes whatever the configured methods need.
pub fn train_methods(cfg: &ExperimentConfig, cohort: &Cohort) -> Result<TrainedMethods> {
    let t = &cfg.training;
    let has = |m: Method| cfg.methods.contains(&m);
    let mut out = TrainedMethods {
        dunet: None,
        cascades: BTreeMap::new(),
        aegans: BTreeMap::new(),
        kalman: None,
        selection: BTreeMap::new(),
        selection_sets: BTreeMap::new(),
    };
    if has(Method::Dunet) {
        let data = CohortData::new(cohort, t.subjects, TrainingTask::Denoise { order: cfg.high_order })?;
        let dunet = DUNetConfig::for_order(cfg.high_order);
        out.dunet = Some(train_dunet(&data, &dunet, &t.options, t.dunet_epochs, model_seed(cfg.seed, 1))?);
    }
    for &s in &cfg.sparsity {
        let indices = cohort.sparse_indices(s)?;
        let low = max_order_for_points(s);
        let aegan = AeGanConfig {
            low_order: low,
            high_order: cfg.high_order,
            ..t.aegan.clone()
        };
        if has(Method::HrtfDunet) {
            let task = TrainingTask::Upsample {
                indices: indices.clone(),
                high_order: cfg.high_order,
            };
            let data = CohortData::new(cohort, t.subjects, task)?;
            let state = train_end_to_end(
                &data,
                &DUNetConfig::for_order(low),
                &aegan,
                &t.options,
                t.cascade_epochs,
                model_seed(cfg.seed, 0x100 + s as u64),
            )?;
            out.cascades.insert(s, state);
        }
        if has(Method::Aegan) {
            let task = TrainingTask::UpsampleNoisy {
                indices,
                high_order: cfg.high_order,
            };
            let data = CohortData::new(cohort, t.subjects, task)?;
            let state = train_aegan(&data, &aegan, &t.options, t.aegan_epochs, model_seed(cfg.seed, 0x200 + s as u64))?;
            out.aegans.insert(s, state);
        }
    }
    if has(Method::Kalman) {
        let clean = cohort.clean(Role::Tune, 0)?;
        let noisy = cohort.degrade(&clean, Role::Tune, 0, 0)?;
        out.kalman = Some(tune_kalman(&clean, &noisy, &kalman_ratio_grid())?);
    }
    let modes = [
        (Method::SelectionGeneric, SelectionMode::Generic),
        (Method::SelectionDistinct, SelectionMode::Distinct),
    ];
    if modes.iter().any(|(m, _)| has(*m)) {
        let pool: Vec<HrtfSet> = (0..t.subjects)
            .map(|i| hrir_to_hrtf(&cohort.clean(Role::Train, i)?))
            .collect::<Result<_>>()?;
        for (method, mode) in modes {
            if has(method) {
                let k = select_hrtf(&pool, mode)?;
                out.selection.insert(method, k);
                out.selection_sets.insert(method, pool[k].clone());
            }
        }
    }
    Ok(out)
}

/// One test subject with its measurement, in both domains.
pub struct TestSubject {
    pub index: usize,
    pub clean: HrtfSet,
    pub noisy_ir: HrirSet,
    pub noisy: HrtfSet,
}

impl TestSubject {
    pub fn new(cohort: &Cohort, index: usize) -> Result<Self> {
        let clean_ir = cohort.clean(Role::Test, index)?;
        let noisy_ir = cohort.degrade(&clean_ir, Role::Test, index, 0)?;
        Ok(TestSubject {
            index,
            clean: hrir_to_hrtf(&clean_ir)?,
            noisy: hrir_to_hrtf(&noisy_ir)?,
            noisy_ir,
        })
    }
}

fn render_coeffs(coeffs: &ShCoeffTensor, targets: &[SphericalDirection], phase_source: &HrtfSet) -> Result<HrtfSet> {
    render_db_field(&sht_eval(coeffs, targets), targets, phase_source)
}

/// Denoises a dense set with a trained U-Net: fit at the model's order,
/// denoise the coefficients, re-synthesize on the same grid. Phase is kept.
pub fn neural_denoise(model: &mut DenoiserModel, noisy: &HrtfSet) -> Result<HrtfSet> {
    let order = model.net.config().sh_order;
    let fit = fit_magnitude_db(noisy, order, None)?;
    let out = model.denoise(&[coeffs_to_features(&fit)])?;
    render_coeffs(&features_to_coeffs(&out[0], order, &fit)?, noisy.positions(), noisy)
}

/// A trained sparse-to-dense network.
pub enum NeuralUpsampler<'a> {
    Cascade(&'a mut Cascade),
    AeGan(&'a mut UpsamplerModel),
}

/// Upsamples a sparse measurement onto `targets`. Magnitudes come from the
/// network, phase from the nearest measured position.
pub fn neural_upsample(net: NeuralUpsampler<'_>, sparse: &HrtfSet, targets: &[SphericalDirection]) -> Result<HrtfSet> {
    let cfg = match &net {
        NeuralUpsampler::Cascade(c) => c.upsampler.config().clone(),
        NeuralUpsampler::AeGan(m) => m.config().clone(),
    };
    let fit = fit_magnitude_db(sparse, cfg.low_order, None)?;
    let features = [coeffs_to_features(&fit)];
    let high = match net {
        NeuralUpsampler::Cascade(c) => c.infer(&features)?.1,
        NeuralUpsampler::AeGan(m) => m.upsample(&features)?,
    };
    render_coeffs(&features_to_coeffs(&high[0], cfg.high_order, &fit)?, targets, sparse)
}

fn classical(method: Method, models: &TrainedMethods) -> Result<ClassicalDenoiser> {
    Ok(match method {
        Method::SpectralSubtraction => ClassicalDenoiser::SpectralSubtraction(SpectralSubtraction::default()),
        Method::Wavelet => ClassicalDenoiser::wavelet(),
        Method::Kalman => models
            .kalman
            .clone()
            .ok_or_else(|| Error::InvalidArgument("Kalman filter was not tuned".into()))?,
        _ => unreachable!("not a classical denoiser"),
    })
}

/// Output of `method` on one subject at `sparsity` measured positions,
/// on the dense grid.
pub fn process(
    cohort: &Cohort,
    models: &mut TrainedMethods,
    subject: &TestSubject,
    method: Method,
    sparsity: usize,
) -> Result<HrtfSet> {
    let missing = |what: &str| Error::InvalidArgument(format!("{what} was not trained"));
    let noisy = &subject.noisy;
    let sparse = || -> Result<HrtfSet> { noisy.select(&cohort.sparse_indices(sparsity)?) };
    match method {
        Method::Identity => Ok(noisy.clone()),
        Method::SpectralSubtraction | Method::Wavelet | Method::Kalman => {
            hrir_to_hrtf(&classical(method, models)?.apply(&subject.noisy_ir)?)
        }
        Method::Dunet => {
            let state = models.dunet.as_mut().ok_or_else(|| missing("the U-Net"))?;
            neural_denoise(&mut state.model, noisy)
        }
        Method::HrtfDunet => {
            let state = models.cascades.get_mut(&sparsity).ok_or_else(|| missing("the cascade"))?;
            neural_upsample(NeuralUpsampler::Cascade(&mut state.model), &sparse()?, noisy.positions())
        }
        Method::Aegan => {
            let state = models.aegans.get_mut(&sparsity).ok_or_else(|| missing("the AE-GAN"))?;
            neural_upsample(NeuralUpsampler::AeGan(&mut state.model), &sparse()?, noisy.positions())
        }
        Method::Barycentric => barycentric_upsample(&sparse()?, noisy.positions()),
        Method::Sh => sh_upsample(&sparse()?, None, None, noisy.positions()),
        Method::SelectionGeneric | Method::SelectionDistinct => models
            .selection_sets
            .get(&method)
            .cloned()
            .ok_or_else(|| missing("HRTF selection")),
    }
}

/// Metric values of one processed set against the clean reference.
/// `reference_fit` is the clean dB fit at the output order.
pub fn score(
    cfg: &ExperimentConfig,
    reference: &HrtfSet,
    reference_fit: &ShCoeffTensor,
    processed: &HrtfSet,
) -> Result<Vec<(MetricKind, f64)>> {
    let mc = &cfg.metric_config;
    cfg.metrics
        .iter()
        .map(|&kind| {
            let v = match kind {
                MetricKind::Lsd => lsd_error(reference, processed, mc)?.value,
                MetricKind::Ild => ild_error(reference, processed, mc)?.value,
                MetricKind::Itd => itd_error(reference, processed, mc)?.value,
                MetricKind::Csl => {
                    let fit = fit_magnitude_db(processed, cfg.high_order, None)?;
                    csl_error(reference_fit, &fit, reference.frequencies(), mc)?
                }
            };
            if !v.is_finite() {
                return Err(Error::NumericalAbort(format!("{kind} is not finite")));
            }
            Ok((kind, v))
        })
        .collect()
}

/// Trains, processes and scores, returning metric rows sorted by subject,
/// method name and sparsity. Writes nothing.
pub fn evaluate(cfg: &ExperimentConfig) -> Result<(Vec<MetricRow>, TrainedMethods)> {
    evaluate_with(cfg, |_, _, _, _| Ok(()))
}

fn evaluate_with<F>(cfg: &ExperimentConfig, mut visit: F) -> Result<(Vec<MetricRow>, TrainedMethods)>
where
    F: FnMut(&TestSubject, Method, usize, &HrtfSet) -> Result<()>,
{
    cfg.validate()?;
    let cohort = Cohort::new(cfg);
    let mut models = train_methods(cfg, &cohort)?;
    let mut rows = Vec::new();
    for i in 0..cfg.test_subjects {
        let subject = TestSubject::new(&cohort, i)?;
        let reference_fit = fit_magnitude_db(&subject.clean, cfg.high_order, None)?;
        for &method in &cfg.methods {
            for s in cfg.sparsities_for(method) {
                let processed = process(&cohort, &mut models, &subject, method, s)?;
                for (kind, value) in score(cfg, &subject.clean, &reference_fit, &processed)? {
                    rows.push(MetricRow {
                        subject_id: i,
                        method: method.name().to_string(),
                        sparsity: s,
                        metric: kind.name().to_string(),
                        value,
                    });
                }
                visit(&subject, method, s, &processed)?;
            }
        }
    }
    rows.sort_by(|a, b| {
        (a.subject_id, &a.method, a.sparsity).cmp(&(b.subject_id, &b.method, b.sparsity))
    });
    Ok((rows, models))
}

/// Files written by [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub rows: Vec<MetricRow>,
    pub summary: Vec<SummaryRow>,
    pub files: Vec<PathBuf>,
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>, files: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))?;
    files.push(path.to_path_buf());
    Ok(())
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn db(values: &[f64]) -> Vec<f64> {
    values.iter().map(|m| 20.0 * m.max(crate::sh::DB_FLOOR).log10()).collect()
}

/// Runs the whole experiment and writes into `cfg.output_dir`:
///
/// - `config.json`: the resolved configuration
/// - `metrics.csv`: `subject_id,method,sparsity,metric,value`
/// - `summary.csv`, `table_<metric>.csv`, `boxplot_<metric>.svg`
/// - `plots/<method>_<sparsity>.svg`: test subject 0, left ear
/// - `models/`: checkpoints and loss histories, `parameters.json`
/// - `sets/` (with `save_sets`): noisy and processed test sets
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let out = cfg.output_dir.as_path();
    let plots = out.join("plots");
    let sets = out.join("sets");
    create_dir(&plots)?;
    if cfg.save_sets {
        create_dir(&sets)?;
    }
    let mut files = Vec::new();
    write_file(&out.join("config.json"), cfg.to_json()?, &mut files)?;

    let (rows, models) = evaluate_with(cfg, |subject, method, s, processed| {
        if cfg.save_sets {
            let dir = sets.join(format!("subject_{:03}", subject.index));
            create_dir(&dir)?;
            if method == cfg.methods[0] && s == cfg.sparsities_for(method)[0] {
                let path = dir.join("noisy.hrir");
                save_container(&subject.noisy_ir, &path)?;
                files.push(path);
            }
            let path = dir.join(format!("{}_{s}.hrir", method.name()));
            save_container(&hrtf_to_hrir(processed)?, &path)?;
            files.push(path);
        }
        if subject.index == 0 {
            let p = cfg.plot_position;
            let series = [
                (Ear::Left, &subject.clean, "reference", "#000000"),
                (Ear::Left, &subject.noisy, "noisy", "#999999"),
                (Ear::Left, processed, method.name(), "#d62728"),
            ];
            let values: Vec<Vec<f64>> = series.iter().map(|(ear, set, _, _)| db(set.magnitude(*ear, p))).collect();
            let curves: Vec<Series> = series
                .iter()
                .zip(&values)
                .map(|((_, _, label, color), v)| Series {
                    label,
                    color,
                    values: v,
                })
                .collect();
            let title = format!("{} at {s} positions, position {p}, left ear", method.name());
            let svg = magnitude_plot_svg(&title, subject.clean.frequencies(), &curves);
            write_file(&plots.join(format!("{}_{s}.svg", method.name())), svg, &mut files)?;
        }
        Ok(())
    })?;

    let metrics_path = out.join("metrics.csv");
    write_metrics_csv(&metrics_path, &rows)?;
    files.push(metrics_path);
    files.extend(write_report(&rows, out)?);
    files.extend(write_models(cfg, &models, &out.join("models"))?);
    let summary = summarize(&rows)?;
    Ok(ExperimentOutput { rows, summary, files })
}

/// Writes checkpoints, loss histories and `parameters.json` (tuned Kalman
/// filter, selected subjects, sparse position indices) into `dir`.
pub fn write_models(cfg: &ExperimentConfig, models: &TrainedMethods, dir: &Path) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let mut files = Vec::new();
    let mut save = |name: String, ckpt: &dyn Fn(&Path) -> Result<()>, hist: &dyn Fn(&Path) -> Result<()>| -> Result<()> {
        let (c, h) = (dir.join(format!("{name}.ckpt")), dir.join(format!("{name}_history.csv")));
        ckpt(&c)?;
        hist(&h)?;
        files.extend([c, h]);
        Ok(())
    };
    if let Some(s) = &models.dunet {
        save("dunet".into(), &|p| s.save(p), &|p| s.write_history_csv(p))?;
    }
    for (k, s) in &models.cascades {
        save(format!("hrtf-dunet_{k}"), &|p| s.save(p), &|p| s.write_history_csv(p))?;
    }
    for (k, s) in &models.aegans {
        save(format!("aegan_{k}"), &|p| s.save(p), &|p| s.write_history_csv(p))?;
    }
    let cohort = Cohort::new(cfg);
    let params = Parameters {
        kalman: models.kalman.as_ref(),
        selection: models.selection.iter().map(|(m, k)| (m.name(), *k)).collect(),
        sparse_indices: cfg
            .sparsity
            .iter()
            .map(|&s| Ok((s, cohort.sparse_indices(s)?)))
            .collect::<Result<_>>()?,
    };
    let text = serde_json::to_string_pretty(&params)
        .map_err(|e| Error::Config(format!("cannot serialize parameters: {e}")))?;
    let path = dir.join("parameters.json");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    files.push(path);
    Ok(files)
}
