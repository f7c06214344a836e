//! Clockwork recurrent networks: hidden units split into groups that update
//! on their own clock periods, with slower groups feeding faster ones.
//!
//! The crate also carries the comparison baselines (simple recurrent network
//! and LSTM), gradient-based training, operation-count analysis and the
//! dataset and checkpoint formats used by the command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod baselines;
pub mod clock;
pub mod cwrnn;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod model;
pub mod numerics;
pub mod run;
pub mod training;

pub use baselines::{LstmParams, SrnParams};
pub use clock::{active_modules, ClockSpec};
pub use cwrnn::{CwRnnParams, NetState, Tape};
pub use error::{Error, Result};
pub use model::{Model, ModelKind, OutputActivation, SequenceModel};
pub use numerics::{Matrix, Rng};
pub use run::RunConfig;
pub use training::{Metrics, Readout, TrainConfig};
