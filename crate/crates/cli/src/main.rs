//! `sparsehrtf`: staged command-line driver. Each stage reads and writes
//! container files; `run` executes a whole experiment.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sparsehrtf::data::{hrir_to_hrtf, hrtf_to_hrir, load_container, save_container, synth_subject, HrtfSet, SynthConfig};
use sparsehrtf::denoise::{kalman_ratio_grid, tune_kalman, ClassicalDenoiser, SpectralSubtraction};
use sparsehrtf::error::ErrorKind;
use sparsehrtf::experiment::{
    neural_denoise, neural_upsample, read_metrics_csv, run_experiment, score, train_methods, write_metrics_csv,
    write_models, write_report, Cohort, ExperimentConfig, Method, MetricRow, NeuralUpsampler, Role,
};
use sparsehrtf::nn::{Cascade, DenoiserModel, TrainState, UpsamplerModel};
use sparsehrtf::noise::{degrade_set, NoiseColor, NoiseSpec};
use sparsehrtf::sh::{fibonacci_grid, fit_magnitude_db, max_order_for_points};
use sparsehrtf::upsample::{barycentric_upsample, sh_upsample};
use sparsehrtf::{Error, Result};

#[derive(Parser)]
#[command(name = "sparsehrtf", version, about = "HRTF denoising and sparse-to-dense upsampling")]
struct Cli {
    /// JSON experiment config; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file for single-set stages, output directory otherwise.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long, global = true, value_delimiter = ',')]
    sparsity: Option<Vec<usize>>,
    #[arg(long, global = true)]
    snr_db: Option<f64>,
    /// Noise colour: white or pink.
    #[arg(long, global = true)]
    noise: Option<NoiseColor>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize one subject on the config grid.
    Synth {
        /// Test-cohort index of the subject.
        #[arg(long, default_value_t = 0)]
        subject: usize,
    },
    /// Add measurement noise to a set.
    Degrade { input: PathBuf },
    /// Fit dB magnitudes with spherical harmonics.
    FitSh {
        input: PathBuf,
        /// Defaults to the largest order the grid supports.
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Denoise a dense set with one method.
    Denoise {
        input: PathBuf,
        /// U-Net checkpoint, for `dunet`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Upsample a sparse set onto the config grid with one method.
    Upsample {
        input: PathBuf,
        /// Network checkpoint, for `hrtf-dunet` and `aegan`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train the configured neural methods and tune classical parameters.
    Train,
    /// Score a processed set against a reference into a metrics CSV.
    Evaluate {
        #[arg(long)]
        reference: PathBuf,
        processed: PathBuf,
        #[arg(long, default_value_t = 0)]
        subject: usize,
    },
    /// Summarize a metrics CSV into tables and box plots.
    Report { metrics: PathBuf },
    /// Run a complete experiment.
    Run,
}

fn config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(m) = &cli.methods {
        cfg.methods = m.clone();
    }
    if let Some(s) = &cli.sparsity {
        cfg.sparsity = s.clone();
    }
    if cli.snr_db.is_some() || cli.noise.is_some() {
        let mut spec = cfg.noise.take().unwrap_or_else(|| NoiseSpec::white(5.0, 0));
        if let Some(snr) = cli.snr_db {
            spec.snr_db = snr;
        }
        if let Some(color) = cli.noise {
            spec.color = color;
        }
        cfg.noise = Some(spec);
    }
    Ok(cfg)
}

fn out_path(cli: &Cli) -> Result<&Path> {
    cli.out
        .as_deref()
        .ok_or_else(|| Error::Config("--out is required for this command".into()))
}

fn single_method(cli: &Cli) -> Result<Method> {
    match cli.methods.as_deref() {
        Some([m]) => Ok(*m),
        _ => Err(Error::Config("pass exactly one method with --methods".into())),
    }
}

fn checkpoint(path: &Option<PathBuf>, method: Method) -> Result<&Path> {
    path.as_deref()
        .ok_or_else(|| Error::Config(format!("{method} needs --checkpoint")))
}

fn save_hrtf(set: &HrtfSet, path: &Path) -> Result<()> {
    save_container(&hrtf_to_hrir(set)?, path)
}

fn denoise(cli: &Cli, input: &Path, ckpt: &Option<PathBuf>) -> Result<()> {
    let cfg = config(cli)?;
    let method = single_method(cli)?;
    let noisy = load_container(input)?;
    let classical = |d: ClassicalDenoiser| -> Result<HrtfSet> { hrir_to_hrtf(&d.apply(&noisy)?) };
    let out = match method {
        Method::Identity => hrir_to_hrtf(&noisy)?,
        Method::SpectralSubtraction => classical(ClassicalDenoiser::SpectralSubtraction(SpectralSubtraction::default()))?,
        Method::Wavelet => classical(ClassicalDenoiser::wavelet())?,
        Method::Kalman => {
            let cohort = Cohort::new(&cfg);
            let clean = cohort.clean(Role::Tune, 0)?;
            let tuning = cohort.degrade(&clean, Role::Tune, 0, 0)?;
            classical(tune_kalman(&clean, &tuning, &kalman_ratio_grid())?)?
        }
        Method::Dunet => {
            let mut state = TrainState::<DenoiserModel>::load(checkpoint(ckpt, method)?)?;
            neural_denoise(&mut state.model, &hrir_to_hrtf(&noisy)?)?
        }
        other => return Err(Error::Config(format!("{other} is not a denoiser"))),
    };
    save_hrtf(&out, out_path(cli)?)
}

fn upsample(cli: &Cli, input: &Path, ckpt: &Option<PathBuf>) -> Result<()> {
    let cfg = config(cli)?;
    let method = single_method(cli)?;
    let sparse = hrir_to_hrtf(&load_container(input)?)?;
    let targets = fibonacci_grid(cfg.grid_size);
    let out = match method {
        Method::Barycentric => barycentric_upsample(&sparse, &targets)?,
        Method::Sh => sh_upsample(&sparse, None, None, &targets)?,
        Method::HrtfDunet => {
            let mut state = TrainState::<Cascade>::load(checkpoint(ckpt, method)?)?;
            neural_upsample(NeuralUpsampler::Cascade(&mut state.model), &sparse, &targets)?
        }
        Method::Aegan => {
            let mut state = TrainState::<UpsamplerModel>::load(checkpoint(ckpt, method)?)?;
            neural_upsample(NeuralUpsampler::AeGan(&mut state.model), &sparse, &targets)?
        }
        other => return Err(Error::Config(format!("{other} is not available as an upsampling stage"))),
    };
    save_hrtf(&out, out_path(cli)?)
}

fn evaluate(cli: &Cli, reference: &Path, processed: &Path, subject: usize) -> Result<()> {
    let cfg = config(cli)?;
    let reference = hrir_to_hrtf(&load_container(reference)?)?;
    let processed = hrir_to_hrtf(&load_container(processed)?)?;
    let method = cli
        .methods
        .as_deref()
        .and_then(|m| m.first())
        .map_or("processed".to_string(), |m| m.name().to_string());
    let sparsity = cli
        .sparsity
        .as_deref()
        .and_then(|s| s.first().copied())
        .unwrap_or(processed.num_positions());
    let fit = fit_magnitude_db(&reference, cfg.high_order, None)?;
    let rows: Vec<MetricRow> = score(&cfg, &reference, &fit, &processed)?
        .into_iter()
        .map(|(kind, value)| MetricRow {
            subject_id: subject,
            method: method.clone(),
            sparsity,
            metric: kind.name().to_string(),
            value,
        })
        .collect();
    write_metrics_csv(out_path(cli)?, &rows)
}

fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth { subject } => {
            let cfg = config(cli)?;
            cfg.validate()?;
            let cohort = Cohort::new(&cfg);
            let synth = SynthConfig {
                seed: cohort.subject_seed(Role::Test, *subject),
                ..cfg.synth.clone()
            };
            save_container(&synth_subject(&synth, cohort.grid())?, out_path(cli)?)
        }
        Command::Degrade { input } => {
            let cfg = config(cli)?;
            let mut spec = cfg.noise.clone().unwrap_or_else(|| NoiseSpec::white(5.0, 0));
            spec.seed = cfg.seed;
            save_container(&degrade_set(&load_container(input)?, &spec)?, out_path(cli)?)
        }
        Command::FitSh { input, order, lambda } => {
            let set = hrir_to_hrtf(&load_container(input)?)?;
            let order = order.unwrap_or(max_order_for_points(set.num_positions()));
            fit_magnitude_db(&set, order, *lambda)?.save(out_path(cli)?)
        }
        Command::Denoise { input, checkpoint } => denoise(cli, input, checkpoint),
        Command::Upsample { input, checkpoint } => upsample(cli, input, checkpoint),
        Command::Train => {
            let cfg = config(cli)?;
            cfg.validate()?;
            let models = train_methods(&cfg, &Cohort::new(&cfg))?;
            for f in write_models(&cfg, &models, &cfg.output_dir)? {
                println!("{}", f.display());
            }
            Ok(())
        }
        Command::Evaluate {
            reference,
            processed,
            subject,
        } => evaluate(cli, reference, processed, *subject),
        Command::Report { metrics } => {
            let rows = read_metrics_csv(metrics)?;
            let dir = match &cli.out {
                Some(d) => d.clone(),
                None => metrics.parent().map(Path::to_path_buf).unwrap_or_default(),
            };
            for f in write_report(&rows, dir)? {
                println!("{}", f.display());
            }
            Ok(())
        }
        Command::Run => {
            let out = run_experiment(&config(cli)?)?;
            for f in out.files {
                println!("{}", f.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Data => 3,
                ErrorKind::Numerical => 4,
            })
        }
    }
}
