//! The interface shared by all three recurrent models, plus a tagged union
//! used wherever the model kind is only known at runtime.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{LstmParams, LstmTape, SrnParams, SrnTape};
use crate::cwrnn::{CwRnnParams, Tape};
use crate::error::{Error, Result};
use crate::numerics::softmax_vec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Cwrnn,
    Srn,
    Lstm,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Cwrnn => "cwrnn",
            ModelKind::Srn => "srn",
            ModelKind::Lstm => "lstm",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cwrnn" => Ok(ModelKind::Cwrnn),
            "srn" | "rnn" => Ok(ModelKind::Srn),
            "lstm" => Ok(ModelKind::Lstm),
            other => Err(Error::InvalidConfig(format!("unknown model kind {other:?}"))),
        }
    }
}

/// Output nonlinearity `f_O`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    #[default]
    Linear,
    Softmax,
}

impl OutputActivation {
    pub fn apply(self, z: Vec<f64>) -> Vec<f64> {
        match self {
            OutputActivation::Linear => z,
            OutputActivation::Softmax => softmax_vec(&z),
        }
    }
}

pub struct ParamBlock<'a> {
    pub name: &'static str,
    pub values: &'a [f64],
}

pub struct ParamBlockMut<'a> {
    pub name: &'static str,
    pub values: &'a mut [f64],
}

/// A recurrent network trainable by BPTT.
///
/// Gradients are returned as a value of the model type itself, so the
/// optimizer can walk params, velocity and gradients block by block.
pub trait SequenceModel: Clone + Send + Sync {
    type Tape;

    fn kind(&self) -> ModelKind;
    fn input_size(&self) -> usize;
    fn output_size(&self) -> usize;
    fn output_activation(&self) -> OutputActivation;

    /// Runs from the zero state with the first input at t = 1. Returns
    /// `f_O` applied outputs for every step.
    #[allow(clippy::type_complexity)]
    fn forward_sequence(&self, inputs: &[Vec<f64>], record: bool) -> Result<(Vec<Vec<f64>>, Option<Self::Tape>)>;

    /// `output_grads[t]` is the loss gradient with respect to the output
    /// pre-activation `W_O y_t + b_O` (for softmax + cross-entropy that is
    /// `p - onehot`).
    fn backward_sequence(&self, tape: &Self::Tape, output_grads: &[Vec<f64>]) -> Result<Self>;

    fn zeros_like(&self) -> Self;
    fn blocks(&self) -> Vec<ParamBlock<'_>>;
    fn blocks_mut(&mut self) -> Vec<ParamBlockMut<'_>>;

    /// Whether entry `index` of block `block` is a free parameter. Entries
    /// that are structurally zero return false.
    fn is_trainable(&self, _block: usize, _index: usize) -> bool {
        true
    }

    fn outputs(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        Ok(self.forward_sequence(inputs, false)?.0)
    }

    fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.values.iter().all(|v| v.is_finite()))
    }
}

/// Any of the three models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Model {
    Cwrnn(CwRnnParams),
    Srn(SrnParams),
    Lstm(LstmParams),
}

pub enum ModelTape {
    Cwrnn(Tape),
    Srn(SrnTape),
    Lstm(LstmTape),
}

macro_rules! dispatch {
    ($self:expr, $m:ident => $body:expr) => {
        match $self {
            Model::Cwrnn($m) => $body,
            Model::Srn($m) => $body,
            Model::Lstm($m) => $body,
        }
    };
}

impl SequenceModel for Model {
    type Tape = ModelTape;

    fn kind(&self) -> ModelKind {
        dispatch!(self, m => m.kind())
    }

    fn input_size(&self) -> usize {
        dispatch!(self, m => m.input_size())
    }

    fn output_size(&self) -> usize {
        dispatch!(self, m => m.output_size())
    }

    fn output_activation(&self) -> OutputActivation {
        dispatch!(self, m => m.output_activation())
    }

    fn forward_sequence(&self, inputs: &[Vec<f64>], record: bool) -> Result<(Vec<Vec<f64>>, Option<ModelTape>)> {
        Ok(match self {
            Model::Cwrnn(m) => {
                let (out, tape) = m.forward_sequence(inputs, record)?;
                (out, tape.map(ModelTape::Cwrnn))
            }
            Model::Srn(m) => {
                let (out, tape) = m.forward_sequence(inputs, record)?;
                (out, tape.map(ModelTape::Srn))
            }
            Model::Lstm(m) => {
                let (out, tape) = m.forward_sequence(inputs, record)?;
                (out, tape.map(ModelTape::Lstm))
            }
        })
    }

    fn backward_sequence(&self, tape: &ModelTape, output_grads: &[Vec<f64>]) -> Result<Self> {
        match (self, tape) {
            (Model::Cwrnn(m), ModelTape::Cwrnn(t)) => Ok(Model::Cwrnn(m.backward_sequence(t, output_grads)?)),
            (Model::Srn(m), ModelTape::Srn(t)) => Ok(Model::Srn(m.backward_sequence(t, output_grads)?)),
            (Model::Lstm(m), ModelTape::Lstm(t)) => Ok(Model::Lstm(m.backward_sequence(t, output_grads)?)),
            _ => Err(Error::InvalidConfig(
                "tape was recorded by a different model kind".into(),
            )),
        }
    }

    fn zeros_like(&self) -> Self {
        match self {
            Model::Cwrnn(m) => Model::Cwrnn(m.zeros_like()),
            Model::Srn(m) => Model::Srn(m.zeros_like()),
            Model::Lstm(m) => Model::Lstm(m.zeros_like()),
        }
    }

    fn blocks(&self) -> Vec<ParamBlock<'_>> {
        dispatch!(self, m => m.blocks())
    }

    fn blocks_mut(&mut self) -> Vec<ParamBlockMut<'_>> {
        dispatch!(self, m => m.blocks_mut())
    }

    fn is_trainable(&self, block: usize, index: usize) -> bool {
        dispatch!(self, m => m.is_trainable(block, index))
    }
}

impl From<CwRnnParams> for Model {
    fn from(m: CwRnnParams) -> Self {
        Model::Cwrnn(m)
    }
}

impl From<SrnParams> for Model {
    fn from(m: SrnParams) -> Self {
        Model::Srn(m)
    }
}

impl From<LstmParams> for Model {
    fn from(m: LstmParams) -> Self {
        Model::Lstm(m)
    }
}
