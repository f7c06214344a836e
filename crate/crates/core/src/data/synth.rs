use std::f64::consts::PI;
use std::path::Path;

use super::{save_sequence, DatasetManifest, LabeledSequence, ManifestEntry, TaskKind};
use crate::error::Result;
use crate::numerics::Rng;
use crate::training::ClassificationData;

pub const WAVEFORM_LENGTH: usize = 320;
pub const WAVEFORM_SEED: u64 = 0;
pub const WORDS_SEED: u64 = 0;

pub const WORD_CHANNELS: usize = 13;
pub const WORD_CLUSTERS: usize = 5;
pub const CLASSES_PER_CLUSTER: usize = 5;
pub const TRAIN_PER_CLASS: usize = 5;
pub const TEST_PER_CLASS: usize = 2;

const PREFIX_KNOTS: usize = 5;
const SUFFIX_KNOTS: usize = 7;
const PREFIX_STEPS: f64 = 16.0;
const SUFFIX_STEPS: f64 = 25.0;
const WARP: f64 = 0.15;
const JITTER_STD: f64 = 0.15;

/// A sum of 3 to 5 sinusoids under a slow envelope, scaled so the largest
/// magnitude is exactly 1.
pub fn synth_waveform(seed: u64, length: usize) -> Vec<f64> {
    let mut rng = Rng::new(seed);
    let components = 3 + rng.below(3);
    let max_period = (length.max(16)) as f64;
    let waves: Vec<(f64, f64, f64)> = (0..components)
        .map(|_| {
            let period = (rng.uniform_range(8f64.ln(), max_period.ln())).exp();
            let amplitude = rng.uniform_range(0.3, 1.0);
            let phase = rng.uniform_range(0.0, 2.0 * PI);
            (period, amplitude, phase)
        })
        .collect();
    let env_depth = rng.uniform_range(0.1, 0.3);
    let env_phase = rng.uniform_range(0.0, 2.0 * PI);
    let mut x: Vec<f64> = (0..length)
        .map(|t| {
            let t = t as f64;
            let sum: f64 = waves
                .iter()
                .map(|&(p, a, phi)| a * (2.0 * PI * t / p + phi).sin())
                .sum();
            let envelope = 1.0 + env_depth * (2.0 * PI * t / max_period + env_phase).sin();
            sum * envelope
        })
        .collect();
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        for v in &mut x {
            *v = (*v / peak).clamp(-1.0, 1.0);
        }
    }
    x
}

/// A smooth multichannel trajectory: random knots joined by cosine
/// interpolation.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    knots: Vec<Vec<f64>>,
    nominal_steps: f64,
}

impl Segment {
    fn random(rng: &mut Rng, knots: usize, nominal_steps: f64) -> Self {
        let knots = (0..knots)
            .map(|_| (0..WORD_CHANNELS).map(|_| rng.standard_normal()).collect())
            .collect();
        Segment { knots, nominal_steps }
    }

    /// One spoken instance: time-warped, amplitude-scaled and jittered.
    fn render(&self, rng: &mut Rng, out: &mut Vec<Vec<f64>>) {
        let warp = rng.uniform_range(1.0 - WARP, 1.0 + WARP);
        let steps = ((self.nominal_steps * warp).round() as usize).max(2);
        let gain = rng.uniform_range(0.8, 1.2);
        let spans = (self.knots.len() - 1) as f64;
        for s in 0..steps {
            let pos = s as f64 / (steps - 1) as f64 * spans;
            let k = (pos.floor() as usize).min(self.knots.len() - 2);
            let frac = pos - k as f64;
            let w = 0.5 - 0.5 * (PI * frac).cos();
            let frame = self.knots[k]
                .iter()
                .zip(&self.knots[k + 1])
                .map(|(a, b)| gain * (a + w * (b - a)) + JITTER_STD * rng.standard_normal())
                .collect();
            out.push(frame);
        }
    }
}

/// Classes whose endings coincide within a cluster, so only the start of a
/// sequence identifies the class.
#[derive(Clone, Debug, PartialEq)]
pub struct WordDataset {
    pub class_names: Vec<String>,
    /// Cluster index of each class.
    pub cluster_of: Vec<usize>,
    pub prefixes: Vec<Segment>,
    /// One suffix generator per cluster.
    pub suffixes: Vec<Segment>,
    pub train: Vec<LabeledSequence>,
    pub test: Vec<LabeledSequence>,
}

impl WordDataset {
    pub fn classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn suffix_of(&self, class: usize) -> &Segment {
        &self.suffixes[self.cluster_of[class]]
    }

    pub fn to_classification(&self) -> ClassificationData {
        ClassificationData {
            classes: self.classes(),
            train: self.train.clone(),
            test: self.test.clone(),
        }
    }
}

pub fn synth_wordlike_dataset(seed: u64) -> WordDataset {
    let mut rng = Rng::new(seed);
    let classes = WORD_CLUSTERS * CLASSES_PER_CLUSTER;
    let suffixes: Vec<Segment> = (0..WORD_CLUSTERS)
        .map(|_| Segment::random(&mut rng, SUFFIX_KNOTS, SUFFIX_STEPS))
        .collect();
    let prefixes: Vec<Segment> = (0..classes)
        .map(|_| Segment::random(&mut rng, PREFIX_KNOTS, PREFIX_STEPS))
        .collect();
    let cluster_of: Vec<usize> = (0..classes).map(|c| c / CLASSES_PER_CLUSTER).collect();
    let class_names = (0..classes)
        .map(|c| format!("w{}{}", cluster_of[c], c % CLASSES_PER_CLUSTER))
        .collect();

    let instance = |class: usize, rng: &mut Rng| {
        let mut inputs = Vec::new();
        prefixes[class].render(rng, &mut inputs);
        suffixes[cluster_of[class]].render(rng, &mut inputs);
        LabeledSequence { inputs, label: class }
    };
    let mut train = Vec::with_capacity(classes * TRAIN_PER_CLASS);
    let mut test = Vec::with_capacity(classes * TEST_PER_CLASS);
    for class in 0..classes {
        for _ in 0..TRAIN_PER_CLASS {
            train.push(instance(class, &mut rng));
        }
        for _ in 0..TEST_PER_CLASS {
            test.push(instance(class, &mut rng));
        }
    }
    WordDataset {
        class_names,
        cluster_of,
        prefixes,
        suffixes,
        train,
        test,
    }
}

/// Writes every sequence as CSV under `dir` plus `dir/manifest.json`.
pub fn write_wordlike_dataset(seed: u64, dir: &Path) -> Result<DatasetManifest> {
    let data = synth_wordlike_dataset(seed);
    let write_split = |name: &str, split: &[LabeledSequence]| -> Result<Vec<ManifestEntry>> {
        split
            .iter()
            .enumerate()
            .map(|(i, seq)| {
                let rel = format!("{name}/{i:03}.csv");
                save_sequence(&dir.join(&rel), &seq.inputs)?;
                Ok(ManifestEntry {
                    path: rel,
                    label: Some(data.class_names[seq.label].clone()),
                })
            })
            .collect()
    };
    let manifest = DatasetManifest {
        task: TaskKind::Classification,
        train: write_split("train", &data.train)?,
        test: write_split("test", &data.test)?,
        classes: Some(data.class_names.clone()),
    };
    manifest.validate()?;
    manifest.save(&dir.join("manifest.json"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ManifestLoader, Phase};
    use crate::training::variance;

    #[test]
    fn waveform_shape() {
        for seed in 0..20 {
            let x = synth_waveform(seed, WAVEFORM_LENGTH);
            assert_eq!(x.len(), WAVEFORM_LENGTH);
            assert!(x.iter().all(|v| (-1.0..=1.0).contains(v)));
            let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert_eq!(peak, 1.0);
            assert!(variance(&x) > 0.01, "seed {seed}");
            assert_eq!(x, synth_waveform(seed, WAVEFORM_LENGTH));
        }
        assert_ne!(synth_waveform(0, 64), synth_waveform(1, 64));
        assert_eq!(synth_waveform(3, 1).len(), 1);
    }

    #[test]
    fn word_counts() {
        let d = synth_wordlike_dataset(WORDS_SEED);
        assert_eq!(d.classes(), 25);
        assert_eq!(d.train.len(), 125);
        assert_eq!(d.test.len(), 50);
        for c in 0..25 {
            let n = d.train.iter().chain(&d.test).filter(|s| s.label == c).count();
            assert_eq!(n, 7);
        }
        for s in d.train.iter().chain(&d.test) {
            assert!(s.inputs.len() >= 30 && s.inputs.len() <= 50, "{}", s.inputs.len());
            assert!(s.inputs.iter().all(|f| f.len() == WORD_CHANNELS));
        }
        assert_eq!(d, synth_wordlike_dataset(WORDS_SEED));
    }

    #[test]
    fn cluster_mates_share_suffix_generator() {
        let d = synth_wordlike_dataset(5);
        assert_eq!(d.suffix_of(0), d.suffix_of(4));
        assert_eq!(d.suffix_of(20), d.suffix_of(22));
        assert_ne!(d.suffix_of(0), d.suffix_of(5));
        assert_ne!(d.prefixes[0], d.prefixes[1]);
    }

    #[test]
    fn cluster_oracle_caps_at_one_fifth() {
        // A classifier that sees only the cluster predicts the majority
        // training class of that cluster; the split is balanced so ties go
        // to the lowest index.
        let d = synth_wordlike_dataset(WORDS_SEED);
        let mut counts = vec![0usize; d.classes()];
        for s in &d.train {
            counts[s.label] += 1;
        }
        let majority: Vec<usize> = (0..WORD_CLUSTERS)
            .map(|k| {
                (0..d.classes())
                    .filter(|&c| d.cluster_of[c] == k)
                    .max_by_key(|&c| (counts[c], std::cmp::Reverse(c)))
                    .unwrap()
            })
            .collect();
        let correct = d
            .test
            .iter()
            .filter(|s| majority[d.cluster_of[s.label]] == s.label)
            .count();
        assert_eq!(correct as f64 / d.test.len() as f64, 0.2);
    }

    #[test]
    fn written_dataset_loads_back() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = write_wordlike_dataset(WORDS_SEED, dir.path()).unwrap();
        assert_eq!(manifest.train.len(), 125);
        let mut loader = ManifestLoader::open(&dir.path().join("manifest.json"), Phase::Training).unwrap();
        let train = loader.load_train().unwrap();
        let d = synth_wordlike_dataset(WORDS_SEED);
        assert_eq!(train.sequences[17], d.train[17].inputs);
        assert_eq!(train.labels[17], d.train[17].label);
        loader.enter_evaluation();
        assert_eq!(loader.load_test().unwrap().labels.len(), 50);
    }
}
