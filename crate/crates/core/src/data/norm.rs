use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Per-channel mean and population standard deviation of a training pool.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    /// Statistics over every frame of every sequence in `sequences`.
    pub fn fit<'a, I>(sequences: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [Vec<f64>]>,
    {
        let mut sum: Vec<f64> = Vec::new();
        let mut frames: Vec<&[f64]> = Vec::new();
        for seq in sequences {
            for frame in seq {
                if frames.is_empty() {
                    sum = vec![0.0; frame.len()];
                }
                check_dim("normalization channels", sum.len(), frame.len())?;
                for (s, v) in sum.iter_mut().zip(frame) {
                    *s += v;
                }
                frames.push(frame);
            }
        }
        if frames.len() < 2 {
            return Err(Error::InvalidData("normalization needs at least two frames".into()));
        }
        let count = frames.len() as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / count).collect();
        let mut var = vec![0.0; mean.len()];
        for frame in &frames {
            for ((acc, v), m) in var.iter_mut().zip(frame.iter()).zip(&mean) {
                *acc += (v - m) * (v - m);
            }
        }
        let std: Vec<f64> = var.iter().map(|v| (v / count).sqrt()).collect();
        if let Some(ch) = std.iter().position(|&s| !(s > 0.0)) {
            return Err(Error::InvalidData(format!(
                "channel {ch} is constant over the training set"
            )));
        }
        Ok(NormStats { mean, std })
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, sequence: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        sequence
            .iter()
            .map(|frame| {
                check_dim("normalization channels", self.channels(), frame.len())?;
                Ok(frame
                    .iter()
                    .zip(self.mean.iter().zip(&self.std))
                    .map(|(v, (m, s))| (v - m) / s)
                    .collect())
            })
            .collect()
    }
}
