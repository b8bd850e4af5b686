//! Experiment-level criteria on the synthetic cohort.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use sha2::{Digest, Sha256};
use sparsehrtf::experiment::{evaluate, run_experiment, ExperimentConfig, Method, MetricKind, MetricRow};

pub const DENOISE_EPOCHS: usize = 60;

fn cohort_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.test_subjects = 16;
    cfg.training.subjects = 16;
    cfg.training.dunet_epochs = DENOISE_EPOCHS;
    cfg.methods = vec![
        Method::Identity,
        Method::Dunet,
        Method::SpectralSubtraction,
        Method::Wavelet,
        Method::Kalman,
        Method::HrtfDunet,
        Method::Sh,
        Method::Barycentric,
    ];
    cfg.metrics = vec![MetricKind::Csl, MetricKind::Lsd];
    cfg
}

/// Rows of one evaluation shared by the denoising and upsampling criteria.
fn cohort_rows() -> &'static [MetricRow] {
    static ROWS: OnceLock<Vec<MetricRow>> = OnceLock::new();
    ROWS.get_or_init(|| evaluate(&cohort_config()).unwrap().0)
}

pub fn mean(method: Method, sparsity: usize, metric: MetricKind) -> f64 {
    let v: Vec<f64> = cohort_rows()
        .iter()
        .filter(|r| r.method == method.name() && r.sparsity == sparsity && r.metric == metric.name())
        .map(|r| r.value)
        .collect();
    assert!(!v.is_empty(), "no rows for {method} at {sparsity}");
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn denoising_ordering() -> String {
    let dense = cohort_config().grid_size;
    let csl = |m| mean(m, dense, MetricKind::Csl);
    let (unet, noisy) = (csl(Method::Dunet), csl(Method::Identity));
    let mut detail = format!("U-Net {unet:.4}, noisy {noisy:.4}");
    for m in [Method::SpectralSubtraction, Method::Wavelet, Method::Kalman] {
        detail += &format!(", {m} {:.4}", csl(m));
    }
    for m in [Method::SpectralSubtraction, Method::Wavelet, Method::Kalman] {
        assert!(unet < csl(m), "{detail}");
    }
    assert!(unet <= 0.5 * noisy, "{detail}");
    detail
}

fn lsd(method: Method, sparsity: usize) -> f64 {
    mean(method, sparsity, MetricKind::Lsd)
}

pub fn upsampling_crossover() -> String {
    let mut detail = Vec::new();
    for s in [4, 3] {
        let (net, sh, bary) = (lsd(Method::HrtfDunet, s), lsd(Method::Sh, s), lsd(Method::Barycentric, s));
        detail.push(format!("{s} points: HRTF-DUNet {net:.2}, SH {sh:.2}, barycentric {bary:.2} dB"));
        assert!(net < sh && net < bary, "{}", detail.join("; "));
    }
    detail.join("; ")
}

pub fn sh_monotone() -> String {
    let levels = [27, 18, 8, 4, 3];
    let values: Vec<f64> = levels.iter().map(|&s| lsd(Method::Sh, s)).collect();
    let detail = levels
        .iter()
        .zip(&values)
        .map(|(s, v)| format!("{s}: {v:.2}"))
        .collect::<Vec<_>>()
        .join(", ");
    assert!(values.windows(2).all(|w| w[1] > w[0]), "SH LSD {detail}");
    format!("SH LSD {detail}")
}

fn csv_digests(dir: &Path) -> BTreeMap<PathBuf, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "csv") {
                let digest = Sha256::digest(std::fs::read(&path).unwrap());
                let hex = digest.iter().map(|b| format!("{b:02x}")).collect();
                out.insert(path.strip_prefix(dir).unwrap().to_path_buf(), hex);
            }
        }
    }
    out
}

pub fn determinism() -> String {
    let runs: Vec<BTreeMap<PathBuf, String>> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let cfg = ExperimentConfig {
                output_dir: dir.path().to_path_buf(),
                ..ExperimentConfig::default()
            };
            run_experiment(&cfg).unwrap();
            csv_digests(dir.path())
        })
        .collect();
    assert!(runs[0].len() > 1, "{:?}", runs[0].keys());
    assert_eq!(runs[0], runs[1]);
    format!("{} CSV files identical", runs[0].len())
}
