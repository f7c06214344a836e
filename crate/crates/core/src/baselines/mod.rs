//! Reference models: the simple RNN and an LSTM, sharing the
//! [`SequenceModel`](crate::model::SequenceModel) interface with the
//! clockwork network.

mod lstm;
mod srn;

pub use lstm::{LstmParams, LstmState, LstmTape};
pub use srn::{SrnParams, SrnTape};

use crate::analysis::recurrent_param_count;
use crate::clock::ClockSpec;
use crate::error::{Error, Result};
use crate::model::ModelKind;

/// Total parameter count of a model, biases included.
///
/// `hidden` is the number of hidden units (cells for the LSTM). For the
/// clockwork network `groups` exponential clock groups are assumed and each
/// clock period counts as one parameter.
pub fn param_count(kind: ModelKind, inputs: usize, hidden: usize, outputs: usize, groups: usize) -> Result<usize> {
    if hidden == 0 {
        return Err(Error::InvalidConfig("hidden size must be >= 1".into()));
    }
    let head = outputs * hidden + outputs;
    Ok(match kind {
        ModelKind::Srn => hidden * hidden + hidden * inputs + hidden + head,
        ModelKind::Lstm => 4 * (hidden * inputs + hidden * hidden + hidden) + head,
        ModelKind::Cwrnn => {
            let spec = ClockSpec::exponential(hidden, groups)?;
            recurrent_param_count(&spec) + hidden * inputs + hidden + head + groups
        }
    })
}

/// Largest hidden size whose parameter count does not exceed `budget`.
pub fn largest_within_budget(
    kind: ModelKind,
    inputs: usize,
    outputs: usize,
    groups: usize,
    budget: usize,
) -> Option<usize> {
    let min = if kind == ModelKind::Cwrnn { groups } else { 1 };
    let mut best = None;
    for hidden in min.. {
        match param_count(kind, inputs, hidden, outputs, groups) {
            Ok(count) if count <= budget => best = Some(hidden),
            _ => break,
        }
    }
    best
}
