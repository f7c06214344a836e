//! Central finite-difference gradient checking.
//!
//! The numeric side only ever calls `forward_sequence`, so it is independent
//! of the backward passes it checks.

use crate::baselines::{LstmParams, SrnParams};
use crate::clock::ClockSpec;
use crate::cwrnn::CwRnnParams;
use crate::error::Result;
use crate::model::{Model, ModelKind, OutputActivation, SequenceModel};
use crate::numerics::Rng;
use crate::training::loss::xent_loss;

pub const DEFAULT_STEP: f64 = 1e-5;
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

/// Denominator floor for the relative error. Central differences at
/// `h = 1e-5` carry about 1e-11 of absolute round-off, so entries smaller
/// than this are judged on an absolute scale of `floor * tolerance`.
pub const RELATIVE_FLOOR: f64 = 1e-4;

/// Loss evaluated on forward outputs. Returns the scalar loss and its
/// gradient with respect to each step's output pre-activation.
pub type LossFn<'a> = dyn Fn(&[Vec<f64>]) -> Result<(f64, Vec<Vec<f64>>)> + 'a;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff == 0.0 {
        return 0.0;
    }
    diff / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

pub fn analytic_gradient<M: SequenceModel>(model: &M, inputs: &[Vec<f64>], loss: &LossFn<'_>) -> Result<M> {
    let (outputs, tape) = model.forward_sequence(inputs, true)?;
    let (_, grads) = loss(&outputs)?;
    model.backward_sequence(&tape.expect("tape requested"), &grads)
}

/// Central differences for every trainable entry; structural zeros are
/// left at zero.
pub fn numeric_gradient<M: SequenceModel>(model: &M, inputs: &[Vec<f64>], loss: &LossFn<'_>, h: f64) -> Result<M> {
    let mut grads = model.zeros_like();
    let mut probe = model.clone();
    let sizes: Vec<usize> = model.blocks().iter().map(|b| b.values.len()).collect();
    for (b, &len) in sizes.iter().enumerate() {
        for i in 0..len {
            if !model.is_trainable(b, i) {
                continue;
            }
            let orig = probe.blocks()[b].values[i];
            probe.blocks_mut()[b].values[i] = orig + h;
            let plus = loss(&probe.outputs(inputs)?)?.0;
            probe.blocks_mut()[b].values[i] = orig - h;
            let minus = loss(&probe.outputs(inputs)?)?.0;
            probe.blocks_mut()[b].values[i] = orig;
            grads.blocks_mut()[b].values[i] = (plus - minus) / (2.0 * h);
        }
    }
    Ok(grads)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockReport {
    pub name: &'static str,
    pub max_relative_error: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

pub fn compare<M: SequenceModel>(analytic: &M, numeric: &M) -> Vec<BlockReport> {
    analytic
        .blocks()
        .iter()
        .zip(numeric.blocks())
        .map(|(a, n)| {
            let mut report = BlockReport {
                name: a.name,
                max_relative_error: 0.0,
                worst_index: 0,
                analytic: 0.0,
                numeric: 0.0,
            };
            for (i, (&x, &y)) in a.values.iter().zip(n.values).enumerate() {
                let err = relative_error(x, y);
                if err > report.max_relative_error {
                    report = BlockReport {
                        name: a.name,
                        max_relative_error: err,
                        worst_index: i,
                        analytic: x,
                        numeric: y,
                    };
                }
            }
            report
        })
        .collect()
}

/// A small random network, input sequence and loss for checking.
pub struct Problem {
    pub model: Model,
    pub inputs: Vec<Vec<f64>>,
    /// Per-step projection vectors for the linear-output loss, or the class
    /// for the softmax loss.
    pub target: ProblemTarget,
}

pub enum ProblemTarget {
    Projection(Vec<Vec<f64>>),
    Class(usize),
}

#[derive(Clone, Debug)]
pub struct ProblemShape {
    pub hidden: usize,
    pub inputs: usize,
    pub outputs: usize,
    pub steps: usize,
    /// Clockwork only; `None` picks random increasing periods.
    pub groups: Option<usize>,
    pub softmax: bool,
}

impl ProblemShape {
    /// Random shape within `hidden <= 12, inputs <= 4, outputs <= 3, steps <= 10`.
    pub fn random(rng: &mut Rng) -> Self {
        ProblemShape {
            hidden: 2 + rng.below(11),
            inputs: rng.below(5),
            outputs: 1 + rng.below(3),
            steps: 1 + rng.below(10),
            groups: None,
            softmax: false,
        }
    }
}

impl Problem {
    pub fn new(kind: ModelKind, shape: &ProblemShape, rng: &mut Rng) -> Result<Self> {
        const STD: f64 = 0.5;
        let output = if shape.softmax {
            OutputActivation::Softmax
        } else {
            OutputActivation::Linear
        };
        let mut model: Model = match kind {
            ModelKind::Srn => SrnParams::init(shape.hidden, shape.inputs, shape.outputs, rng, STD)?
                .with_output(output)
                .into(),
            ModelKind::Lstm => LstmParams::init(shape.hidden, shape.inputs, shape.outputs, rng, STD, 1.0)?
                .with_output(output)
                .into(),
            ModelKind::Cwrnn => {
                let spec = match shape.groups {
                    Some(g) => ClockSpec::exponential(shape.hidden, g)?,
                    None => random_spec(shape.hidden, rng)?,
                };
                CwRnnParams::init(spec, shape.inputs, shape.outputs, rng, STD)?
                    .with_output(output)
                    .into()
            }
        };
        // nonzero biases so their gradients are exercised
        for block in model.blocks_mut() {
            if block.name.starts_with('b') {
                for v in block.values.iter_mut() {
                    *v += 0.3 * rng.standard_normal();
                }
            }
        }
        let inputs = (0..shape.steps)
            .map(|_| (0..shape.inputs).map(|_| rng.standard_normal()).collect())
            .collect();
        let target = if shape.softmax {
            ProblemTarget::Class(rng.below(shape.outputs))
        } else {
            ProblemTarget::Projection(
                (0..shape.steps)
                    .map(|_| (0..shape.outputs).map(|_| rng.standard_normal()).collect())
                    .collect(),
            )
        };
        Ok(Problem { model, inputs, target })
    }

    pub fn loss(&self) -> Box<LossFn<'_>> {
        match &self.target {
            ProblemTarget::Projection(r) => Box::new(move |outputs: &[Vec<f64>]| {
                let loss = outputs
                    .iter()
                    .zip(r)
                    .map(|(y, w)| y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>())
                    .sum();
                Ok((loss, r.clone()))
            }),
            ProblemTarget::Class(class) => {
                let class = *class;
                Box::new(move |outputs: &[Vec<f64>]| {
                    let last = outputs.len() - 1;
                    let (loss, g) = xent_loss(&outputs[last], class)?;
                    let mut grads = vec![vec![0.0; g.len()]; outputs.len()];
                    grads[last] = g;
                    Ok((loss, grads))
                })
            }
        }
    }

    pub fn check(&self, h: f64) -> Result<Vec<BlockReport>> {
        let loss = self.loss();
        let analytic = analytic_gradient(&self.model, &self.inputs, &*loss)?;
        let numeric = numeric_gradient(&self.model, &self.inputs, &*loss, h)?;
        Ok(compare(&analytic, &numeric))
    }
}

/// Strictly increasing periods drawn from 1..=8 over a random number of groups.
fn random_spec(hidden: usize, rng: &mut Rng) -> Result<ClockSpec> {
    let max_groups = hidden.min(4);
    let groups = 1 + rng.below(max_groups);
    let mut candidates: Vec<u64> = (2..=8).collect();
    rng.shuffle(&mut candidates);
    let mut periods: Vec<u64> = candidates[..groups - 1].to_vec();
    periods.push(1);
    periods.sort_unstable();
    ClockSpec::with_periods(hidden, periods)
}
