//! Fixtures shared by the criterion benchmarks.

use cwrnn_core::{ClockSpec, CwRnnParams, Rng, SrnParams};

/// Random inputs of width `m` for `steps` steps.
pub fn inputs(m: usize, steps: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = Rng::new(seed);
    (0..steps)
        .map(|_| (0..m).map(|_| rng.standard_normal()).collect())
        .collect()
}

/// A clockwork net with `g` groups of `k` units and exponential periods.
pub fn cwrnn(g: usize, k: usize, m: usize, o: usize) -> CwRnnParams {
    let mut rng = Rng::new(1);
    CwRnnParams::init(
        ClockSpec::exponential(g * k, g).expect("valid spec"),
        m,
        o,
        &mut rng,
        0.1,
    )
    .expect("valid init")
}

/// A dense network with the same hidden width as `cwrnn(g, k, ..)`.
pub fn srn(n: usize, m: usize, o: usize) -> SrnParams {
    let mut rng = Rng::new(1);
    SrnParams::init(n, m, o, &mut rng, 0.1).expect("valid init")
}
