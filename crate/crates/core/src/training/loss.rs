//! Losses and metrics. Gradients are taken with respect to the output
//! pre-activation of each step.

use crate::error::{check_dim, Error, Result};

/// Mean squared error over all steps and channels, together with the
/// gradient of the per-sequence objective `½ Σ_t ‖y_t − d_t‖²`.
///
/// The objective is summed over the sequence rather than averaged, so one
/// full-sequence update moves the weights by the accumulated error of every
/// step.
pub fn mse_loss(outputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<(f64, Vec<Vec<f64>>)> {
    check_dim("mse_loss steps", targets.len(), outputs.len())?;
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut grads = Vec::with_capacity(outputs.len());
    for (y, d) in outputs.iter().zip(targets) {
        check_dim("mse_loss channels", d.len(), y.len())?;
        let g: Vec<f64> = y.iter().zip(d).map(|(a, b)| a - b).collect();
        sum += g.iter().map(|e| e * e).sum::<f64>();
        count += g.len();
        grads.push(g);
    }
    let mse = if count == 0 { 0.0 } else { sum / count as f64 };
    Ok((mse, grads))
}

/// `-ln p[class]` for a softmax output, with gradient `p − onehot(class)`.
pub fn xent_loss(probs: &[f64], class: usize) -> Result<(f64, Vec<f64>)> {
    if class >= probs.len() {
        return Err(Error::InvalidData(format!(
            "class index {class} out of range for {} outputs",
            probs.len()
        )));
    }
    let loss = -probs[class].max(f64::MIN_POSITIVE).ln();
    let mut grad = probs.to_vec();
    grad[class] -= 1.0;
    Ok((loss, grad))
}

/// Population variance.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

/// Mean squared error divided by the (population) variance of the target,
/// so that predicting the target mean scores exactly 1.
pub fn nmse(predicted: &[f64], target: &[f64]) -> Result<f64> {
    check_dim("nmse", target.len(), predicted.len())?;
    if target.len() < 2 {
        return Err(Error::InvalidData("nmse needs at least two samples".into()));
    }
    let var = variance(target);
    if var == 0.0 {
        return Err(Error::InvalidData("nmse undefined for a constant target".into()));
    }
    let mse = predicted.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / target.len() as f64;
    Ok(mse / var)
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
