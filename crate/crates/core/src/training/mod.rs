//! Training protocols: full-sequence generation and per-sequence
//! classification, both driven by Nesterov-momentum SGD over full BPTT.

pub mod loss;
pub mod optimizer;

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{format_real, LabeledSequence};
use crate::error::{Error, Result};
use crate::model::SequenceModel;
use crate::numerics::Rng;

pub use loss::{argmax, mse_loss, nmse, variance, xent_loss};
pub use optimizer::{nesterov_step, Nesterov};

/// How a classifier turns a sequence of softmax outputs into one decision.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Readout {
    /// Output at the final timestep.
    #[default]
    Final,
    /// Average of the per-step output distributions.
    Mean,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    /// Exact count for generation; upper bound for classification.
    pub epochs: usize,
    pub noise_std: f64,
    /// Non-improving epochs tolerated before stopping (classification).
    pub patience: usize,
    pub seed: u64,
    pub readout: Readout,
    pub clip: Option<f64>,
}

impl TrainConfig {
    /// Sequence generation defaults: lr 3e-4, momentum 0.95, 2000 epochs.
    pub fn generation() -> Self {
        TrainConfig {
            learning_rate: 3e-4,
            momentum: 0.95,
            epochs: 2000,
            noise_std: 0.0,
            patience: 0,
            seed: 0,
            readout: Readout::Final,
            clip: None,
        }
    }

    /// Classification defaults: lr 3e-4, momentum 0.9, input noise 0.6,
    /// patience 5.
    pub fn classification() -> Self {
        TrainConfig {
            learning_rate: 3e-4,
            momentum: 0.9,
            epochs: 500,
            noise_std: 0.6,
            patience: 5,
            seed: 0,
            readout: Readout::Final,
            clip: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "noise_std must be >= 0, got {}",
                self.noise_std
            )));
        }
        if let Some(c) = self.clip {
            if !(c > 0.0) {
                return Err(Error::InvalidConfig(format!("clip must be > 0, got {c}")));
            }
        }
        Ok(())
    }

    fn optimizer<M: SequenceModel>(&self, model: &M) -> Result<Nesterov<M>> {
        Ok(Nesterov::new(model, self.learning_rate, self.momentum)?.with_clip(self.clip))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub noise_free_loss: Option<f64>,
    pub test_metric: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Metrics {
    pub epochs: Vec<EpochRecord>,
    /// Generation: NMSE of the returned model on its training target.
    pub final_nmse: Option<f64>,
    /// Classification: error rate of the returned model on the training set.
    pub train_error: Option<f64>,
    /// Classification: error rate on the test split.
    pub test_error: Option<f64>,
    pub stopped_early: bool,
}

impl Metrics {
    pub const CSV_HEADER: &'static str = "epoch,train_loss,noise_free_loss,test_metric";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        let opt = |v: Option<f64>| v.map(format_real).unwrap_or_default();
        for r in &self.epochs {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                r.epoch,
                format_real(r.train_loss),
                opt(r.noise_free_loss),
                opt(r.test_metric)
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::data::write_file(path, self.to_csv().as_bytes())
    }
}

fn check_finite<M: SequenceModel>(model: &M, epoch: usize) -> Result<()> {
    if model.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidData(format!("training diverged at epoch {epoch}")))
    }
}

/// Fits a no-input network to reproduce `target` (values in `[-1, 1]`).
///
/// Each epoch is one Nesterov update from full-sequence BPTT. The epoch row
/// records the loss at the lookahead point, then the MSE and NMSE of the
/// updated weights.
pub fn train_generation<M: SequenceModel>(mut model: M, target: &[f64], cfg: &TrainConfig) -> Result<(M, Metrics)> {
    cfg.validate()?;
    if model.input_size() != 0 || model.output_size() != 1 {
        return Err(Error::InvalidConfig(format!(
            "generation needs a model with 0 inputs and 1 output, got {} and {}",
            model.input_size(),
            model.output_size()
        )));
    }
    if target.len() < 2 {
        return Err(Error::InvalidData(
            "generation target needs at least two samples".into(),
        ));
    }
    if let Some(x) = target.iter().find(|x| !(x.abs() <= 1.0)) {
        return Err(Error::InvalidData(format!(
            "generation target must lie in [-1, 1], found {x}"
        )));
    }
    let inputs = vec![Vec::new(); target.len()];
    let targets: Vec<Vec<f64>> = target.iter().map(|&x| vec![x]).collect();
    let mut opt = cfg.optimizer(&model)?;
    let mut metrics = Metrics::default();

    for epoch in 1..=cfg.epochs {
        let ahead = opt.lookahead(&model);
        let (outputs, tape) = ahead.forward_sequence(&inputs, true)?;
        let (train_loss, output_grads) = mse_loss(&outputs, &targets)?;
        let grads = ahead.backward_sequence(&tape.expect("recorded"), &output_grads)?;
        opt.apply(&mut model, &grads)?;
        check_finite(&model, epoch)?;

        let (mse, score) = generation_scores(&model, &inputs, &targets, target)?;
        metrics.epochs.push(EpochRecord {
            epoch,
            train_loss,
            noise_free_loss: Some(mse),
            test_metric: Some(score),
        });
    }
    metrics.final_nmse = Some(match metrics.epochs.last() {
        Some(r) => r.test_metric.expect("set above"),
        None => generation_scores(&model, &inputs, &targets, target)?.1,
    });
    Ok((model, metrics))
}

fn generation_scores<M: SequenceModel>(
    model: &M,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    target: &[f64],
) -> Result<(f64, f64)> {
    let outputs = model.outputs(inputs)?;
    let (mse, _) = mse_loss(&outputs, targets)?;
    let predicted: Vec<f64> = outputs.iter().map(|y| y[0]).collect();
    Ok((mse, nmse(&predicted, target)?))
}

/// NMSE of a generator's free-running output against `target`.
pub fn evaluate_generation<M: SequenceModel>(model: &M, target: &[f64]) -> Result<f64> {
    let inputs = vec![Vec::new(); target.len()];
    let targets: Vec<Vec<f64>> = target.iter().map(|&x| vec![x]).collect();
    Ok(generation_scores(model, &inputs, &targets, target)?.1)
}

#[derive(Clone, Debug)]
pub struct ClassificationData {
    pub classes: usize,
    pub train: Vec<LabeledSequence>,
    pub test: Vec<LabeledSequence>,
}

/// Loss and output gradients for one sequence under the chosen readout.
fn readout_loss(outputs: &[Vec<f64>], label: usize, readout: Readout) -> Result<(f64, Vec<Vec<f64>>, usize)> {
    let steps = outputs.len();
    if steps == 0 {
        return Err(Error::InvalidData("cannot classify an empty sequence".into()));
    }
    let width = outputs[0].len();
    let mut grads = vec![vec![0.0; width]; steps];
    match readout {
        Readout::Final => {
            let (loss, g) = xent_loss(&outputs[steps - 1], label)?;
            let decision = argmax(&outputs[steps - 1]);
            grads[steps - 1] = g;
            Ok((loss, grads, decision))
        }
        Readout::Mean => {
            let mut mean = vec![0.0; width];
            for y in outputs {
                for (m, p) in mean.iter_mut().zip(y) {
                    *m += p / steps as f64;
                }
            }
            let (loss, _) = xent_loss(&mean, label)?;
            let decision = argmax(&mean);
            // d(-ln p̄_c)/dz_t = p_{t,c} / (T p̄_c) · (p_t − onehot_c)
            let denom = steps as f64 * mean[label].max(f64::MIN_POSITIVE);
            for (g, y) in grads.iter_mut().zip(outputs) {
                let w = y[label] / denom;
                for (j, (gj, p)) in g.iter_mut().zip(y).enumerate() {
                    *gj = w * (p - if j == label { 1.0 } else { 0.0 });
                }
            }
            Ok((loss, grads, decision))
        }
    }
}

/// Mean cross-entropy and error rate of a classifier over `data`.
pub fn evaluate_classification<M: SequenceModel>(
    model: &M,
    data: &[LabeledSequence],
    readout: Readout,
) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Err(Error::InvalidData("empty evaluation set".into()));
    }
    let mut loss = 0.0;
    let mut wrong = 0usize;
    for example in data {
        let outputs = model.outputs(&example.inputs)?;
        let (l, _, decision) = readout_loss(&outputs, example.label, readout)?;
        loss += l;
        wrong += usize::from(decision != example.label);
    }
    Ok((loss / data.len() as f64, wrong as f64 / data.len() as f64))
}

/// Per-sequence SGD with Gaussian input noise and early stopping on the
/// noise-free training loss. The test split is touched only once, after
/// training has stopped.
pub fn train_classification<M: SequenceModel>(
    mut model: M,
    data: &ClassificationData,
    cfg: &TrainConfig,
) -> Result<(M, Metrics)> {
    cfg.validate()?;
    if data.train.is_empty() {
        return Err(Error::InvalidData(
            "classification needs at least one training sequence".into(),
        ));
    }
    if model.output_size() != data.classes {
        return Err(Error::InvalidConfig(format!(
            "model has {} outputs but the dataset has {} classes",
            model.output_size(),
            data.classes
        )));
    }
    // a separate stream from the one that initialised the weights
    let mut rng = Rng::with_stream(cfg.seed, 1);
    let mut opt = cfg.optimizer(&model)?;
    let mut metrics = Metrics::default();
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut best = f64::INFINITY;
    let mut stale = 0usize;
    let mut noisy: Vec<Vec<f64>> = Vec::new();

    for epoch in 1..=cfg.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for &idx in &order {
            let example = &data.train[idx];
            noisy.clear();
            for x in &example.inputs {
                noisy.push(
                    x.iter()
                        .map(|&v| {
                            if cfg.noise_std > 0.0 {
                                v + cfg.noise_std * rng.standard_normal()
                            } else {
                                v
                            }
                        })
                        .collect(),
                );
            }
            let ahead = opt.lookahead(&model);
            let (outputs, tape) = ahead.forward_sequence(&noisy, true)?;
            let (loss, output_grads, _) = readout_loss(&outputs, example.label, cfg.readout)?;
            let grads = ahead.backward_sequence(&tape.expect("recorded"), &output_grads)?;
            opt.apply(&mut model, &grads)?;
            epoch_loss += loss;
        }
        check_finite(&model, epoch)?;

        let (clean_loss, _) = evaluate_classification(&model, &data.train, cfg.readout)?;
        metrics.epochs.push(EpochRecord {
            epoch,
            train_loss: epoch_loss / data.train.len() as f64,
            noise_free_loss: Some(clean_loss),
            test_metric: None,
        });
        if clean_loss < best {
            best = clean_loss;
            stale = 0;
        } else {
            stale += 1;
            if stale > cfg.patience {
                metrics.stopped_early = true;
                break;
            }
        }
    }

    metrics.train_error = Some(evaluate_classification(&model, &data.train, cfg.readout)?.1);
    if !data.test.is_empty() {
        let (_, err) = evaluate_classification(&model, &data.test, cfg.readout)?;
        metrics.test_error = Some(err);
        if let Some(last) = metrics.epochs.last_mut() {
            last.test_metric = Some(err);
        }
    }
    Ok((model, metrics))
}
