//! Structural accounting for the clockwork network: recurrent parameter
//! counts, per-step multiply-accumulate counts, and the speed-up over a
//! dense RNN of the same width. Everything is enumerated block by block
//! from the [`ClockSpec`]; the closed forms are only used as checks.

use std::fmt;

use crate::clock::ClockSpec;

/// Multiply-accumulates of weight applications at one step (or summed over
/// a window).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCount {
    /// `W_H` entries applied.
    pub recurrent: u64,
    /// `W_I` entries applied.
    pub input: u64,
    /// Hidden biases added, one per executed unit.
    pub bias: u64,
    /// `W_O` entries applied.
    pub output: u64,
}

impl std::ops::AddAssign for OpCount {
    fn add_assign(&mut self, rhs: Self) {
        self.recurrent += rhs.recurrent;
        self.input += rhs.input;
        self.bias += rhs.bias;
        self.output += rhs.output;
    }
}

/// Per-step averages over a window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AvgOps {
    pub window: u64,
    pub recurrent: f64,
    pub input: f64,
    pub bias: f64,
    pub output: f64,
}

/// Nonzero entries of the block-upper-triangular `W_H`, by enumerating
/// every (destination group, source group) block.
pub fn recurrent_param_count(spec: &ClockSpec) -> usize {
    let sizes = spec.sizes();
    let mut total = 0;
    for (i, &rows) in sizes.iter().enumerate() {
        for &cols in &sizes[i..] {
            total += rows * cols;
        }
    }
    total
}

/// `n²/2 + nk/2` for `g` equal groups of size `k`; always an integer since
/// `n(n + k) = k²g(g + 1)`.
pub fn recurrent_param_closed_form(groups: usize, group_size: usize) -> usize {
    let n = groups * group_size;
    n * (n + group_size) / 2
}

/// Operations `forward_step` performs at timestep `t`.
pub fn ops_per_step(spec: &ClockSpec, inputs: usize, outputs: usize, t: u64) -> OpCount {
    let n = spec.hidden();
    let mut count = OpCount {
        output: (outputs * n) as u64,
        ..OpCount::default()
    };
    for g in 0..spec.groups() {
        if !spec.is_active(g, t) {
            continue;
        }
        let k = spec.sizes()[g];
        // block-row g spans every block-column from g onwards
        let width: usize = spec.sizes()[g..].iter().sum();
        count.recurrent += (k * width) as u64;
        count.input += (k * inputs) as u64;
        count.bias += k as u64;
    }
    count
}

/// Totals over `t = 1..=window`.
pub fn total_ops(spec: &ClockSpec, inputs: usize, outputs: usize, window: u64) -> OpCount {
    let mut total = OpCount::default();
    for t in 1..=window {
        total += ops_per_step(spec, inputs, outputs, t);
    }
    total
}

/// Per-step averages over `t = 1..=window`. Use a multiple of
/// [`ClockSpec::hyperperiod`] for steady-state figures.
pub fn avg_ops(spec: &ClockSpec, inputs: usize, outputs: usize, window: u64) -> AvgOps {
    let window = window.max(1);
    let total = total_ops(spec, inputs, outputs, window);
    let w = window as f64;
    AvgOps {
        window,
        recurrent: total.recurrent as f64 / w,
        input: total.input as f64 / w,
        bias: total.bias as f64 / w,
        output: total.output as f64 / w,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Speedup {
    pub ratio: f64,
    /// `g / 4`, claimed only for exponential periods with `g >= 2`.
    pub bound: Option<f64>,
}

impl Speedup {
    pub fn holds(&self) -> bool {
        self.bound.is_none_or(|b| self.ratio >= b)
    }
}

/// `(n² + nm + n) / (avg O_H + avg O_I + 2n)` with the averages enumerated
/// over one hyperperiod.
pub fn speedup_vs_rnn(spec: &ClockSpec, inputs: usize) -> Speedup {
    speedup_over_window(spec, inputs, spec.hyperperiod())
}

pub fn speedup_over_window(spec: &ClockSpec, inputs: usize, window: u64) -> Speedup {
    let n = spec.hidden() as f64;
    let m = inputs as f64;
    let avg = avg_ops(spec, inputs, 0, window);
    let ratio = (n * n + n * m + n) / (avg.recurrent + avg.input + 2.0 * n);
    let g = spec.groups();
    let bound = (spec.is_exponential() && g >= 2).then(|| g as f64 / 4.0);
    Speedup { ratio, bound }
}

/// One row of the `bench` table.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub groups: usize,
    pub group_size: usize,
    pub inputs: usize,
    pub window: u64,
    pub recurrent_params: usize,
    pub avg_recurrent: f64,
    pub avg_input: f64,
    pub speedup: Speedup,
    /// `avg O_H <= 2nk` and `avg O_I <= 2km`.
    pub within_op_bounds: bool,
}

impl BenchRow {
    pub fn compute(groups: usize, group_size: usize, inputs: usize, window: Option<u64>) -> crate::Result<Self> {
        let spec = ClockSpec::exponential(groups * group_size, groups)?;
        let window = window.unwrap_or_else(|| spec.hyperperiod());
        let avg = avg_ops(&spec, inputs, 0, window);
        let n = spec.hidden() as f64;
        let k = group_size as f64;
        let m = inputs as f64;
        Ok(BenchRow {
            groups,
            group_size,
            inputs,
            window,
            recurrent_params: recurrent_param_count(&spec),
            avg_recurrent: avg.recurrent,
            avg_input: avg.input,
            speedup: speedup_over_window(&spec, inputs, window),
            within_op_bounds: avg.recurrent <= 2.0 * n * k && avg.input <= 2.0 * k * m,
        })
    }

    pub fn passes(&self) -> bool {
        self.speedup.holds() && (self.groups < 2 || self.within_op_bounds)
    }

    pub const CSV_HEADER: &'static str = "groups,group_size,inputs,window,n_h,avg_o_h,avg_o_i,speedup,bound,result";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.groups,
            self.group_size,
            self.inputs,
            self.window,
            self.recurrent_params,
            self.avg_recurrent,
            self.avg_input,
            self.speedup.ratio,
            self.speedup.bound.map(|b| b.to_string()).unwrap_or_default(),
            self.verdict()
        )
    }

    pub fn verdict(&self) -> &'static str {
        match (self.speedup.bound, self.passes()) {
            (None, _) => "N/A",
            (Some(_), true) => "PASS",
            (Some(_), false) => "FAIL",
        }
    }
}

impl fmt::Display for BenchRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "g={:<2} k={:<3} m={:<3} window={:<5} N_H={:<7} avg O_H={:<10.3} avg O_I={:<10.3} speedup={:<8.4} bound={:<6} {}",
            self.groups,
            self.group_size,
            self.inputs,
            self.window,
            self.recurrent_params,
            self.avg_recurrent,
            self.avg_input,
            self.speedup.ratio,
            self.speedup.bound.map(|b| format!("{b:.2}")).unwrap_or_else(|| "-".into()),
            self.verdict()
        )
    }
}
