//! Clockwork RNN: forward pass with output retention and the masked
//! backward pass.
//!
//! At step `t` only groups with `t mod T_i == 0` recompute their
//! activations, each from its own block-row of `W_I`/`W_H` restricted to
//! block-columns of groups at least as slow. Idle groups copy their
//! previous activations forward; in the backward pass their error is copied
//! back unchanged and added to the error arriving at `t - 1`.

use serde::{Deserialize, Serialize};

use crate::analysis::OpCount;
use crate::clock::ClockSpec;
use crate::error::{check_dim, Error, Result};
use crate::model::{ModelKind, OutputActivation, ParamBlock, ParamBlockMut, SequenceModel};
use crate::numerics::{axpy, dot, gaussian, Matrix, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CwRnnParams {
    pub spec: ClockSpec,
    /// n × m
    pub w_i: Matrix,
    /// n × n, block-upper triangular under `spec`
    pub w_h: Matrix,
    /// o × n
    pub w_o: Matrix,
    pub b_h: Vec<f64>,
    pub b_o: Vec<f64>,
    #[serde(default)]
    pub output: OutputActivation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetState {
    pub y_h: Vec<f64>,
    /// Timestep the next `forward_step` will execute.
    pub t: u64,
}

impl NetState {
    pub fn zeros(hidden: usize) -> Self {
        NetState {
            y_h: vec![0.0; hidden],
            t: 1,
        }
    }
}

/// BPTT record of one forward run.
#[derive(Clone, Debug)]
pub struct Tape {
    pub inputs: Vec<Vec<f64>>,
    /// `hidden[0]` is the initial zero state, `hidden[t]` the state after step t.
    pub hidden: Vec<Vec<f64>>,
    /// Pre-activations of the units that fired (zero for idle units).
    pub pre_activations: Vec<Vec<f64>>,
    pub active: Vec<Vec<bool>>,
}

impl Tape {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

impl CwRnnParams {
    pub fn zeros(spec: ClockSpec, inputs: usize, outputs: usize) -> Self {
        let n = spec.hidden();
        CwRnnParams {
            w_i: Matrix::zeros(n, inputs),
            w_h: Matrix::zeros(n, n),
            w_o: Matrix::zeros(outputs, n),
            b_h: vec![0.0; n],
            b_o: vec![0.0; outputs],
            output: OutputActivation::Linear,
            spec,
        }
    }

    /// Weights of connected blocks drawn from N(0, std²); structural zeros
    /// and biases are 0.
    pub fn init(spec: ClockSpec, inputs: usize, outputs: usize, rng: &mut Rng, std: f64) -> Result<Self> {
        if !(std > 0.0) {
            return Err(Error::InvalidConfig(format!("init std must be positive, got {std}")));
        }
        let mut p = CwRnnParams::zeros(spec, inputs, outputs);
        let n = p.hidden();
        for v in p.w_i.as_mut_slice() {
            *v = gaussian(rng, 0.0, std)?;
        }
        for g in 0..p.spec.groups() {
            let start = p.spec.offset(g);
            for r in p.spec.range(g) {
                for c in start..n {
                    p.w_h.set(r, c, gaussian(rng, 0.0, std)?);
                }
            }
        }
        for v in p.w_o.as_mut_slice() {
            *v = gaussian(rng, 0.0, std)?;
        }
        Ok(p)
    }

    pub fn with_output(mut self, output: OutputActivation) -> Self {
        self.output = output;
        self
    }

    pub fn hidden(&self) -> usize {
        self.spec.hidden()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.hidden();
        check_dim("W_I rows", n, self.w_i.rows())?;
        check_dim("W_H rows", n, self.w_h.rows())?;
        check_dim("W_H cols", n, self.w_h.cols())?;
        check_dim("W_O cols", n, self.w_o.cols())?;
        check_dim("b_H", n, self.b_h.len())?;
        check_dim("b_O", self.w_o.rows(), self.b_o.len())?;
        for r in 0..n {
            for c in 0..n {
                if !self.spec.is_connected(r, c) && self.w_h.get(r, c) != 0.0 {
                    return Err(Error::InvalidData(format!(
                        "W_H[{r},{c}] links a faster group to a slower one but is nonzero"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Number of trainable weights and biases plus one per clock period.
    pub fn param_count(&self) -> usize {
        crate::analysis::recurrent_param_count(&self.spec)
            + self.w_i.rows() * self.w_i.cols()
            + self.w_o.rows() * self.w_o.cols()
            + self.b_h.len()
            + self.b_o.len()
            + self.spec.groups()
    }

    #[allow(clippy::too_many_arguments)]
    fn step_into(
        &self,
        prev: &[f64],
        x: &[f64],
        t: u64,
        next: &mut [f64],
        pre: &mut [f64],
        active: &mut [bool],
        mut counter: Option<&mut OpCount>,
    ) {
        let n = self.hidden();
        let m = self.w_i.cols();
        for g in 0..self.spec.groups() {
            let range = self.spec.range(g);
            if !self.spec.is_active(g, t) {
                next[range.clone()].copy_from_slice(&prev[range.clone()]);
                pre[range.clone()].fill(0.0);
                active[range].fill(false);
                continue;
            }
            let start = range.start;
            if let Some(c) = counter.as_deref_mut() {
                c.recurrent += (range.len() * (n - start)) as u64;
                c.input += (range.len() * m) as u64;
                c.bias += range.len() as u64;
            }
            for r in range {
                let z = dot(&self.w_h.row(r)[start..], &prev[start..]) + dot(self.w_i.row(r), x) + self.b_h[r];
                pre[r] = z;
                next[r] = z.tanh();
                active[r] = true;
            }
        }
    }

    fn readout(&self, y_h: &[f64], counter: Option<&mut OpCount>) -> Vec<f64> {
        if let Some(c) = counter {
            c.output += (self.w_o.rows() * self.w_o.cols()) as u64;
        }
        let z = (0..self.w_o.rows())
            .map(|r| dot(self.w_o.row(r), y_h) + self.b_o[r])
            .collect();
        self.output.apply(z)
    }

    pub fn forward_step(&self, state: &NetState, x: &[f64]) -> Result<(NetState, Vec<f64>)> {
        self.forward_step_inner(state, x, None)
    }

    /// `forward_step` that also tallies the multiply-accumulates it performs.
    pub fn forward_step_counted(
        &self,
        state: &NetState,
        x: &[f64],
        counter: &mut OpCount,
    ) -> Result<(NetState, Vec<f64>)> {
        self.forward_step_inner(state, x, Some(counter))
    }

    fn forward_step_inner(
        &self,
        state: &NetState,
        x: &[f64],
        mut counter: Option<&mut OpCount>,
    ) -> Result<(NetState, Vec<f64>)> {
        let n = self.hidden();
        if state.t == 0 {
            return Err(Error::InvalidConfig("timesteps start at 1".into()));
        }
        check_dim("forward_step state", n, state.y_h.len())?;
        check_dim("forward_step input", self.w_i.cols(), x.len())?;
        let mut next = vec![0.0; n];
        let mut pre = vec![0.0; n];
        let mut active = vec![false; n];
        self.step_into(
            &state.y_h,
            x,
            state.t,
            &mut next,
            &mut pre,
            &mut active,
            counter.as_deref_mut(),
        );
        let y = self.readout(&next, counter);
        Ok((
            NetState {
                y_h: next,
                t: state.t + 1,
            },
            y,
        ))
    }

    pub fn forward_sequence(&self, inputs: &[Vec<f64>], record: bool) -> Result<(Vec<Vec<f64>>, Option<Tape>)> {
        let n = self.hidden();
        let m = self.w_i.cols();
        for x in inputs {
            check_dim("forward_sequence input", m, x.len())?;
        }
        let mut outputs = Vec::with_capacity(inputs.len());
        let mut tape = record.then(|| Tape {
            inputs: inputs.to_vec(),
            hidden: vec![vec![0.0; n]],
            pre_activations: Vec::with_capacity(inputs.len()),
            active: Vec::with_capacity(inputs.len()),
        });
        let mut prev = vec![0.0; n];
        let mut next = vec![0.0; n];
        let mut pre = vec![0.0; n];
        let mut active = vec![false; n];
        for (i, x) in inputs.iter().enumerate() {
            self.step_into(&prev, x, i as u64 + 1, &mut next, &mut pre, &mut active, None);
            outputs.push(self.readout(&next, None));
            if let Some(tape) = tape.as_mut() {
                tape.hidden.push(next.clone());
                tape.pre_activations.push(pre.clone());
                tape.active.push(active.clone());
            }
            std::mem::swap(&mut prev, &mut next);
        }
        Ok((outputs, tape))
    }

    pub fn backward_sequence(&self, tape: &Tape, output_grads: &[Vec<f64>]) -> Result<Self> {
        let n = self.hidden();
        let o = self.w_o.rows();
        check_dim("backward_sequence output grads", tape.len(), output_grads.len())?;
        check_dim("backward_sequence tape", tape.len() + 1, tape.hidden.len())?;
        let mut grads = self.zeros_like();
        // error w.r.t. y_H at the step being processed
        let mut carry = vec![0.0; n];
        let mut back = vec![0.0; n];
        let mut dz = vec![0.0; n];
        for t in (0..tape.len()).rev() {
            let dy = &output_grads[t];
            check_dim("backward_sequence output grad", o, dy.len())?;
            let y = &tape.hidden[t + 1];
            let y_prev = &tape.hidden[t];
            let x = &tape.inputs[t];

            for (r, &d) in dy.iter().enumerate() {
                if d != 0.0 {
                    axpy(d, y, grads.w_o.row_mut(r));
                    axpy(d, self.w_o.row(r), &mut carry);
                }
                grads.b_o[r] += d;
            }

            back.fill(0.0);
            for g in 0..self.spec.groups() {
                let range = self.spec.range(g);
                if !tape.active[t][range.start] {
                    // idle: error passes straight to the previous step
                    for r in range {
                        back[r] += carry[r];
                    }
                    continue;
                }
                let start = range.start;
                for r in range {
                    dz[r] = carry[r] * (1.0 - y[r] * y[r]);
                    let d = dz[r];
                    if d == 0.0 {
                        continue;
                    }
                    axpy(d, &y_prev[start..], &mut grads.w_h.row_mut(r)[start..]);
                    axpy(d, x, grads.w_i.row_mut(r));
                    grads.b_h[r] += d;
                    axpy(d, &self.w_h.row(r)[start..], &mut back[start..]);
                }
            }
            std::mem::swap(&mut carry, &mut back);
        }
        Ok(grads)
    }
}

impl SequenceModel for CwRnnParams {
    type Tape = Tape;

    fn kind(&self) -> ModelKind {
        ModelKind::Cwrnn
    }

    fn input_size(&self) -> usize {
        self.w_i.cols()
    }

    fn output_size(&self) -> usize {
        self.w_o.rows()
    }

    fn output_activation(&self) -> OutputActivation {
        self.output
    }

    fn forward_sequence(&self, inputs: &[Vec<f64>], record: bool) -> Result<(Vec<Vec<f64>>, Option<Tape>)> {
        CwRnnParams::forward_sequence(self, inputs, record)
    }

    fn backward_sequence(&self, tape: &Tape, output_grads: &[Vec<f64>]) -> Result<Self> {
        CwRnnParams::backward_sequence(self, tape, output_grads)
    }

    fn zeros_like(&self) -> Self {
        CwRnnParams::zeros(self.spec.clone(), self.w_i.cols(), self.w_o.rows()).with_output(self.output)
    }

    fn blocks(&self) -> Vec<ParamBlock<'_>> {
        vec![
            ParamBlock {
                name: "w_i",
                values: self.w_i.as_slice(),
            },
            ParamBlock {
                name: "w_h",
                values: self.w_h.as_slice(),
            },
            ParamBlock {
                name: "w_o",
                values: self.w_o.as_slice(),
            },
            ParamBlock {
                name: "b_h",
                values: &self.b_h,
            },
            ParamBlock {
                name: "b_o",
                values: &self.b_o,
            },
        ]
    }

    fn blocks_mut(&mut self) -> Vec<ParamBlockMut<'_>> {
        vec![
            ParamBlockMut {
                name: "w_i",
                values: self.w_i.as_mut_slice(),
            },
            ParamBlockMut {
                name: "w_h",
                values: self.w_h.as_mut_slice(),
            },
            ParamBlockMut {
                name: "w_o",
                values: self.w_o.as_mut_slice(),
            },
            ParamBlockMut {
                name: "b_h",
                values: &mut self.b_h,
            },
            ParamBlockMut {
                name: "b_o",
                values: &mut self.b_o,
            },
        ]
    }

    fn is_trainable(&self, block: usize, index: usize) -> bool {
        if block != 1 {
            return true;
        }
        let n = self.hidden();
        self.spec.is_connected(index / n, index % n)
    }
}
