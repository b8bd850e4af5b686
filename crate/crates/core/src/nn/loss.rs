//! Reconstruction and adversarial losses with their gradients.

use crate::error::{Error, Result};

fn same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Shape(format!(
            "loss arguments must be equal, non-empty lengths ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Mean absolute error `(1/N)·Σ|d_i − t_i|`.
///
/// ```
/// use sparsehrtf::nn::loss::l1_loss;
/// assert_eq!(l1_loss(&[1.0, 2.0], &[0.0, 0.0]).unwrap(), 1.5);
/// ```
pub fn l1_loss(denoised: &[f64], target: &[f64]) -> Result<f64> {
    same_len(denoised, target)?;
    Ok(denoised.iter().zip(target).map(|(d, t)| (d - t).abs()).sum::<f64>() / denoised.len() as f64)
}

/// [`l1_loss`] and its gradient with respect to `denoised`.
pub fn l1_loss_grad(denoised: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    let loss = l1_loss(denoised, target)?;
    let n = denoised.len() as f64;
    let grad = denoised
        .iter()
        .zip(target)
        .map(|(d, t)| if d == t { 0.0 } else { (d - t).signum() / n })
        .collect();
    Ok((loss, grad))
}

fn norms(d: &[f64], t: &[f64]) -> Result<(f64, f64, f64)> {
    same_len(d, t)?;
    let dot: f64 = d.iter().zip(t).map(|(a, b)| a * b).sum();
    let nd = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nt = t.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nd == 0.0 || nt == 0.0 {
        return Err(Error::InvalidArgument("cosine loss of a zero-norm vector".into()));
    }
    Ok((dot, nd, nt))
}

/// Cosine similarity loss `1 − d·t/(‖d‖·‖t‖)`, in `[0, 2]`.
///
/// ```
/// use sparsehrtf::nn::loss::cosine_loss;
/// assert!((cosine_loss(&[1.0, 0.0], &[0.0, 3.0]).unwrap() - 1.0).abs() < 1e-15);
/// assert!((cosine_loss(&[1.0, 2.0], &[-1.0, -2.0]).unwrap() - 2.0).abs() < 1e-15);
/// ```
pub fn cosine_loss(denoised: &[f64], target: &[f64]) -> Result<f64> {
    let (dot, nd, nt) = norms(denoised, target)?;
    Ok((1.0 - dot / (nd * nt)).clamp(0.0, 2.0))
}

/// [`cosine_loss`] and its gradient with respect to `denoised`.
pub fn cosine_loss_grad(denoised: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    let (dot, nd, nt) = norms(denoised, target)?;
    let cos = dot / (nd * nt);
    let grad = denoised
        .iter()
        .zip(target)
        .map(|(d, t)| -(t / (nd * nt) - cos * d / (nd * nd)))
        .collect();
    Ok(((1.0 - cos).clamp(0.0, 2.0), grad))
}

/// `ln(1 + eˣ)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
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

/// Binary cross-entropy on discriminator logits against a constant label,
/// averaged over the batch. With `real = true` on generated samples this is
/// the non-saturating generator loss `−log D(G(x))`.
pub fn adversarial_loss_grad(logits: &[f64], real: bool) -> Result<(f64, Vec<f64>)> {
    if logits.is_empty() {
        return Err(Error::Shape("adversarial loss of an empty batch".into()));
    }
    let n = logits.len() as f64;
    let (mut loss, mut grad) = (0.0, Vec::with_capacity(logits.len()));
    for &z in logits {
        if real {
            loss += softplus(-z);
            grad.push((sigmoid(z) - 1.0) / n);
        } else {
            loss += softplus(z);
            grad.push(sigmoid(z) / n);
        }
    }
    Ok((loss / n, grad))
}
