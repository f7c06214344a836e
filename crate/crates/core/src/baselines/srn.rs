use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::model::{ModelKind, OutputActivation, ParamBlock, ParamBlockMut, SequenceModel};
use crate::numerics::{axpy, dot, gaussian, Matrix, Rng};

/// Simple (Elman) recurrent network with a dense recurrent matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SrnParams {
    pub w_i: Matrix,
    pub w_h: Matrix,
    pub w_o: Matrix,
    pub b_h: Vec<f64>,
    pub b_o: Vec<f64>,
    #[serde(default)]
    pub output: OutputActivation,
}

#[derive(Clone, Debug)]
pub struct SrnTape {
    pub inputs: Vec<Vec<f64>>,
    /// `hidden[0]` is the zero state.
    pub hidden: Vec<Vec<f64>>,
}

impl SrnParams {
    pub fn zeros(hidden: usize, inputs: usize, outputs: usize) -> Self {
        SrnParams {
            w_i: Matrix::zeros(hidden, inputs),
            w_h: Matrix::zeros(hidden, hidden),
            w_o: Matrix::zeros(outputs, hidden),
            b_h: vec![0.0; hidden],
            b_o: vec![0.0; outputs],
            output: OutputActivation::Linear,
        }
    }

    pub fn init(hidden: usize, inputs: usize, outputs: usize, rng: &mut Rng, std: f64) -> Result<Self> {
        if !(std > 0.0) {
            return Err(Error::InvalidConfig(format!("init std must be positive, got {std}")));
        }
        let mut p = SrnParams::zeros(hidden, inputs, outputs);
        for m in [&mut p.w_i, &mut p.w_h, &mut p.w_o] {
            for v in m.as_mut_slice() {
                *v = gaussian(rng, 0.0, std)?;
            }
        }
        Ok(p)
    }

    pub fn with_output(mut self, output: OutputActivation) -> Self {
        self.output = output;
        self
    }

    pub fn hidden(&self) -> usize {
        self.w_h.rows()
    }

    pub fn forward_step(&self, y_prev: &[f64], x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_dim("srn state", self.hidden(), y_prev.len())?;
        check_dim("srn input", self.w_i.cols(), x.len())?;
        let mut next = vec![0.0; self.hidden()];
        self.step_into(y_prev, x, &mut next);
        let y = self.readout(&next);
        Ok((next, y))
    }

    fn step_into(&self, prev: &[f64], x: &[f64], next: &mut [f64]) {
        for (r, out) in next.iter_mut().enumerate() {
            let z = dot(self.w_h.row(r), prev) + dot(self.w_i.row(r), x) + self.b_h[r];
            *out = z.tanh();
        }
    }

    fn readout(&self, y_h: &[f64]) -> Vec<f64> {
        let z = (0..self.w_o.rows())
            .map(|r| dot(self.w_o.row(r), y_h) + self.b_o[r])
            .collect();
        self.output.apply(z)
    }

    pub fn forward_sequence(&self, inputs: &[Vec<f64>], record: bool) -> Result<(Vec<Vec<f64>>, Option<SrnTape>)> {
        let n = self.hidden();
        for x in inputs {
            check_dim("srn input", self.w_i.cols(), x.len())?;
        }
        let mut hidden = vec![vec![0.0; n]];
        let mut outputs = Vec::with_capacity(inputs.len());
        let mut prev = vec![0.0; n];
        let mut next = vec![0.0; n];
        for x in inputs {
            self.step_into(&prev, x, &mut next);
            outputs.push(self.readout(&next));
            if record {
                hidden.push(next.clone());
            }
            std::mem::swap(&mut prev, &mut next);
        }
        let tape = record.then(|| SrnTape {
            inputs: inputs.to_vec(),
            hidden,
        });
        Ok((outputs, tape))
    }

    pub fn backward_sequence(&self, tape: &SrnTape, output_grads: &[Vec<f64>]) -> Result<Self> {
        let n = self.hidden();
        let steps = tape.inputs.len();
        check_dim("srn backward output grads", steps, output_grads.len())?;
        check_dim("srn backward tape", steps + 1, tape.hidden.len())?;
        let mut grads = self.zeros_like();
        let mut carry = vec![0.0; n];
        let mut back = vec![0.0; n];
        for t in (0..steps).rev() {
            let dy = &output_grads[t];
            check_dim("srn backward output grad", self.w_o.rows(), dy.len())?;
            let y = &tape.hidden[t + 1];
            let y_prev = &tape.hidden[t];
            for (r, &d) in dy.iter().enumerate() {
                if d != 0.0 {
                    axpy(d, y, grads.w_o.row_mut(r));
                    axpy(d, self.w_o.row(r), &mut carry);
                }
                grads.b_o[r] += d;
            }
            back.fill(0.0);
            for r in 0..n {
                let d = carry[r] * (1.0 - y[r] * y[r]);
                if d == 0.0 {
                    continue;
                }
                axpy(d, y_prev, grads.w_h.row_mut(r));
                axpy(d, &tape.inputs[t], grads.w_i.row_mut(r));
                grads.b_h[r] += d;
                axpy(d, self.w_h.row(r), &mut back);
            }
            std::mem::swap(&mut carry, &mut back);
        }
        Ok(grads)
    }

    pub fn param_count(&self) -> usize {
        self.blocks().iter().map(|b| b.values.len()).sum()
    }
}

impl SequenceModel for SrnParams {
    type Tape = SrnTape;

    fn kind(&self) -> ModelKind {
        ModelKind::Srn
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

    fn forward_sequence(&self, inputs: &[Vec<f64>], record: bool) -> Result<(Vec<Vec<f64>>, Option<SrnTape>)> {
        SrnParams::forward_sequence(self, inputs, record)
    }

    fn backward_sequence(&self, tape: &SrnTape, output_grads: &[Vec<f64>]) -> Result<Self> {
        SrnParams::backward_sequence(self, tape, output_grads)
    }

    fn zeros_like(&self) -> Self {
        SrnParams::zeros(self.hidden(), self.w_i.cols(), self.w_o.rows()).with_output(self.output)
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
}
