use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::model::{ModelKind, OutputActivation, ParamBlock, ParamBlockMut, SequenceModel};
use crate::numerics::{axpy, dot, gaussian, sigmoid, Matrix, Rng};

/// LSTM with forget gates and no peepholes.
///
/// Gate rows are stacked in the order input, forget, cell candidate,
/// output; each slab has `cells` rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    /// 4c × m
    pub w_x: Matrix,
    /// 4c × c
    pub w_h: Matrix,
    /// 4c
    pub b: Vec<f64>,
    /// o × c
    pub w_o: Matrix,
    pub b_o: Vec<f64>,
    #[serde(default)]
    pub output: OutputActivation,
}

const INPUT: usize = 0;
const FORGET: usize = 1;
const CELL: usize = 2;
const OUTPUT: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(cells: usize) -> Self {
        LstmState {
            h: vec![0.0; cells],
            c: vec![0.0; cells],
        }
    }
}

#[derive(Clone, Debug)]
pub struct LstmTape {
    pub inputs: Vec<Vec<f64>>,
    /// `states[0]` is the zero state.
    pub states: Vec<LstmState>,
    /// Gate activations per step, laid out like the rows of `w_x`.
    pub gates: Vec<Vec<f64>>,
}

impl LstmParams {
    pub fn zeros(cells: usize, inputs: usize, outputs: usize) -> Self {
        LstmParams {
            w_x: Matrix::zeros(4 * cells, inputs),
            w_h: Matrix::zeros(4 * cells, cells),
            b: vec![0.0; 4 * cells],
            w_o: Matrix::zeros(outputs, cells),
            b_o: vec![0.0; outputs],
            output: OutputActivation::Linear,
        }
    }

    /// Gaussian weights, zero biases except the forget gates.
    pub fn init(
        cells: usize,
        inputs: usize,
        outputs: usize,
        rng: &mut Rng,
        std: f64,
        forget_bias: f64,
    ) -> Result<Self> {
        if !(std > 0.0) {
            return Err(Error::InvalidConfig(format!("init std must be positive, got {std}")));
        }
        let mut p = LstmParams::zeros(cells, inputs, outputs);
        for m in [&mut p.w_x, &mut p.w_h, &mut p.w_o] {
            for v in m.as_mut_slice() {
                *v = gaussian(rng, 0.0, std)?;
            }
        }
        p.b[FORGET * cells..(FORGET + 1) * cells].fill(forget_bias);
        Ok(p)
    }

    pub fn with_output(mut self, output: OutputActivation) -> Self {
        self.output = output;
        self
    }

    pub fn cells(&self) -> usize {
        self.w_h.cols()
    }

    pub fn param_count(&self) -> usize {
        self.blocks().iter().map(|b| b.values.len()).sum()
    }

    fn step_into(&self, prev: &LstmState, x: &[f64], next: &mut LstmState, gates: &mut [f64]) {
        let c = self.cells();
        for (r, gate) in gates.iter_mut().enumerate() {
            let a = dot(self.w_h.row(r), &prev.h) + dot(self.w_x.row(r), x) + self.b[r];
            *gate = if r / c == CELL { a.tanh() } else { sigmoid(a) };
        }
        for u in 0..c {
            let i = gates[INPUT * c + u];
            let f = gates[FORGET * c + u];
            let g = gates[CELL * c + u];
            let o = gates[OUTPUT * c + u];
            next.c[u] = f * prev.c[u] + i * g;
            next.h[u] = o * next.c[u].tanh();
        }
    }

    fn readout(&self, h: &[f64]) -> Vec<f64> {
        let z = (0..self.w_o.rows())
            .map(|r| dot(self.w_o.row(r), h) + self.b_o[r])
            .collect();
        self.output.apply(z)
    }

    pub fn forward_step(&self, state: &LstmState, x: &[f64]) -> Result<(LstmState, Vec<f64>)> {
        let c = self.cells();
        check_dim("lstm state", c, state.h.len())?;
        check_dim("lstm cell state", c, state.c.len())?;
        check_dim("lstm input", self.w_x.cols(), x.len())?;
        let mut next = LstmState::zeros(c);
        let mut gates = vec![0.0; 4 * c];
        self.step_into(state, x, &mut next, &mut gates);
        let y = self.readout(&next.h);
        Ok((next, y))
    }

    pub fn forward_sequence(&self, inputs: &[Vec<f64>], record: bool) -> Result<(Vec<Vec<f64>>, Option<LstmTape>)> {
        let c = self.cells();
        for x in inputs {
            check_dim("lstm input", self.w_x.cols(), x.len())?;
        }
        let mut outputs = Vec::with_capacity(inputs.len());
        let mut tape = record.then(|| LstmTape {
            inputs: inputs.to_vec(),
            states: vec![LstmState::zeros(c)],
            gates: Vec::with_capacity(inputs.len()),
        });
        let mut prev = LstmState::zeros(c);
        let mut next = LstmState::zeros(c);
        let mut gates = vec![0.0; 4 * c];
        for x in inputs {
            self.step_into(&prev, x, &mut next, &mut gates);
            outputs.push(self.readout(&next.h));
            if let Some(tape) = tape.as_mut() {
                tape.states.push(next.clone());
                tape.gates.push(gates.clone());
            }
            std::mem::swap(&mut prev, &mut next);
        }
        Ok((outputs, tape))
    }

    pub fn backward_sequence(&self, tape: &LstmTape, output_grads: &[Vec<f64>]) -> Result<Self> {
        let c = self.cells();
        let steps = tape.inputs.len();
        check_dim("lstm backward output grads", steps, output_grads.len())?;
        check_dim("lstm backward tape", steps + 1, tape.states.len())?;
        let mut grads = self.zeros_like();
        let mut dh = vec![0.0; c];
        let mut dc = vec![0.0; c];
        let mut dh_prev = vec![0.0; c];
        let mut da = vec![0.0; 4 * c];
        for t in (0..steps).rev() {
            let dy = &output_grads[t];
            check_dim("lstm backward output grad", self.w_o.rows(), dy.len())?;
            let state = &tape.states[t + 1];
            let prev = &tape.states[t];
            let gates = &tape.gates[t];
            for (r, &d) in dy.iter().enumerate() {
                if d != 0.0 {
                    axpy(d, &state.h, grads.w_o.row_mut(r));
                    axpy(d, self.w_o.row(r), &mut dh);
                }
                grads.b_o[r] += d;
            }
            for u in 0..c {
                let i = gates[INPUT * c + u];
                let f = gates[FORGET * c + u];
                let g = gates[CELL * c + u];
                let o = gates[OUTPUT * c + u];
                let tc = state.c[u].tanh();
                let d_o = dh[u] * tc;
                let d_c = dc[u] + dh[u] * o * (1.0 - tc * tc);
                da[INPUT * c + u] = d_c * g * i * (1.0 - i);
                da[FORGET * c + u] = d_c * prev.c[u] * f * (1.0 - f);
                da[CELL * c + u] = d_c * i * (1.0 - g * g);
                da[OUTPUT * c + u] = d_o * o * (1.0 - o);
                dc[u] = d_c * f;
            }
            dh_prev.fill(0.0);
            for (r, &d) in da.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                axpy(d, &tape.inputs[t], grads.w_x.row_mut(r));
                axpy(d, &prev.h, grads.w_h.row_mut(r));
                grads.b[r] += d;
                axpy(d, self.w_h.row(r), &mut dh_prev);
            }
            std::mem::swap(&mut dh, &mut dh_prev);
        }
        Ok(grads)
    }
}

impl SequenceModel for LstmParams {
    type Tape = LstmTape;

    fn kind(&self) -> ModelKind {
        ModelKind::Lstm
    }

    fn input_size(&self) -> usize {
        self.w_x.cols()
    }

    fn output_size(&self) -> usize {
        self.w_o.rows()
    }

    fn output_activation(&self) -> OutputActivation {
        self.output
    }

    fn forward_sequence(&self, inputs: &[Vec<f64>], record: bool) -> Result<(Vec<Vec<f64>>, Option<LstmTape>)> {
        LstmParams::forward_sequence(self, inputs, record)
    }

    fn backward_sequence(&self, tape: &LstmTape, output_grads: &[Vec<f64>]) -> Result<Self> {
        LstmParams::backward_sequence(self, tape, output_grads)
    }

    fn zeros_like(&self) -> Self {
        LstmParams::zeros(self.cells(), self.w_x.cols(), self.w_o.rows()).with_output(self.output)
    }

    fn blocks(&self) -> Vec<ParamBlock<'_>> {
        vec![
            ParamBlock {
                name: "w_x",
                values: self.w_x.as_slice(),
            },
            ParamBlock {
                name: "w_h",
                values: self.w_h.as_slice(),
            },
            ParamBlock {
                name: "b",
                values: &self.b,
            },
            ParamBlock {
                name: "w_o",
                values: self.w_o.as_slice(),
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
                name: "w_x",
                values: self.w_x.as_mut_slice(),
            },
            ParamBlockMut {
                name: "w_h",
                values: self.w_h.as_mut_slice(),
            },
            ParamBlockMut {
                name: "b",
                values: &mut self.b,
            },
            ParamBlockMut {
                name: "w_o",
                values: self.w_o.as_mut_slice(),
            },
            ParamBlockMut {
                name: "b_o",
                values: &mut self.b_o,
            },
        ]
    }
}
