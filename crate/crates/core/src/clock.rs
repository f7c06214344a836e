//! Clock schedule: how the hidden layer is split into modules and when each
//! module fires.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Partition of the hidden layer into groups, sorted by increasing period.
///
/// Group `i` owns the contiguous hidden units
/// `offset(i) .. offset(i) + sizes[i]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawClockSpec", into = "RawClockSpec")]
pub struct ClockSpec {
    sizes: Vec<usize>,
    periods: Vec<u64>,
    offsets: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClockSpec {
    sizes: Vec<usize>,
    periods: Vec<u64>,
}

impl TryFrom<RawClockSpec> for ClockSpec {
    type Error = Error;

    fn try_from(raw: RawClockSpec) -> Result<Self> {
        ClockSpec::new(raw.sizes, raw.periods)
    }
}

impl From<ClockSpec> for RawClockSpec {
    fn from(spec: ClockSpec) -> Self {
        RawClockSpec {
            sizes: spec.sizes,
            periods: spec.periods,
        }
    }
}

impl ClockSpec {
    pub fn new(sizes: Vec<usize>, periods: Vec<u64>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidConfig("clock spec needs at least one group".into()));
        }
        if sizes.len() != periods.len() {
            return Err(Error::InvalidConfig(format!(
                "{} group sizes but {} periods",
                sizes.len(),
                periods.len()
            )));
        }
        if sizes.contains(&0) {
            return Err(Error::InvalidConfig("group sizes must be >= 1".into()));
        }
        if periods[0] == 0 {
            return Err(Error::InvalidConfig("periods must be positive".into()));
        }
        if periods.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(format!(
                "periods must be strictly increasing, got {periods:?}"
            )));
        }
        let offsets = sizes
            .iter()
            .scan(0, |acc, &k| {
                let start = *acc;
                *acc += k;
                Some(start)
            })
            .collect();
        Ok(ClockSpec {
            sizes,
            periods,
            offsets,
        })
    }

    /// `n` hidden units in `g` groups with periods `1, 2, 4, ..., 2^(g-1)`.
    ///
    /// When `g` does not divide `n`, the remainder goes one unit per group
    /// starting from the fastest.
    pub fn exponential(n: usize, g: usize) -> Result<Self> {
        if g == 0 || g > 63 {
            return Err(Error::InvalidConfig(format!("group count {g} out of range 1..=63")));
        }
        let periods = (0..g).map(|i| 1u64 << i).collect();
        ClockSpec::with_periods(n, periods)
    }

    /// `n` hidden units split as evenly as possible over the given periods.
    pub fn with_periods(n: usize, periods: Vec<u64>) -> Result<Self> {
        let g = periods.len();
        if g == 0 || n < g {
            return Err(Error::InvalidConfig(format!(
                "cannot split {n} hidden units into {g} non-empty groups"
            )));
        }
        let (base, extra) = (n / g, n % g);
        let sizes = (0..g).map(|i| base + usize::from(i < extra)).collect();
        ClockSpec::new(sizes, periods)
    }

    pub fn groups(&self) -> usize {
        self.sizes.len()
    }

    pub fn hidden(&self) -> usize {
        self.offsets[self.groups() - 1] + self.sizes[self.groups() - 1]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn periods(&self) -> &[u64] {
        &self.periods
    }

    pub fn offset(&self, group: usize) -> usize {
        self.offsets[group]
    }

    pub fn range(&self, group: usize) -> std::ops::Range<usize> {
        self.offsets[group]..self.offsets[group] + self.sizes[group]
    }

    /// Index of the group that owns hidden unit `unit`.
    pub fn group_of(&self, unit: usize) -> usize {
        self.offsets.partition_point(|&o| o <= unit) - 1
    }

    pub fn is_exponential(&self) -> bool {
        self.periods.iter().enumerate().all(|(i, &p)| p == 1u64 << i)
    }

    pub fn is_active(&self, group: usize, t: u64) -> bool {
        t.is_multiple_of(self.periods[group])
    }

    /// Whether `W_H[row, col]` is a trainable weight: the source unit's
    /// group must be at least as slow as the destination's.
    pub fn is_connected(&self, row: usize, col: usize) -> bool {
        self.group_of(col) >= self.group_of(row)
    }

    /// Least common multiple of all periods.
    pub fn hyperperiod(&self) -> u64 {
        self.periods.iter().fold(1, |acc, &p| lcm(acc, p))
    }
}

/// Zero-based indices of the groups that execute at timestep `t` (t >= 1).
pub fn active_modules(spec: &ClockSpec, t: u64) -> Vec<usize> {
    debug_assert!(t >= 1, "timesteps start at 1");
    (0..spec.groups()).filter(|&i| spec.is_active(i, t)).collect()
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}
