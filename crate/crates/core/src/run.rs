//! JSON run configurations and the end-to-end train/evaluate pipeline they
//! describe.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{LstmParams, SrnParams};
use crate::clock::ClockSpec;
use crate::cwrnn::CwRnnParams;
use crate::data::{
    synth_waveform, synth_wordlike_dataset, Checkpoint, LabeledSequence, ManifestLoader, NormStats, Phase, TaskKind,
    WAVEFORM_LENGTH, WAVEFORM_SEED, WORDS_SEED,
};
use crate::error::{Error, Result};
use crate::model::{Model, ModelKind, OutputActivation, SequenceModel};
use crate::numerics::Rng;
use crate::training::{
    evaluate_classification, evaluate_generation, train_classification, train_generation, ClassificationData, Metrics,
    Readout, TrainConfig,
};

pub const SYNTH_WAVEFORM: &str = "synth:waveform";
pub const SYNTH_WORDS: &str = "synth:words";

pub const DEFAULT_INIT_STD: f64 = 0.1;
pub const DEFAULT_FORGET_BIAS: f64 = 5.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub task: TaskConfig,
    pub train: TrainSection,
    pub out: OutConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PeriodsConfig {
    Named(String),
    List(Vec<u64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(rename = "type")]
    pub kind: ModelKind,
    pub hidden: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periods: Option<PeriodsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forget_bias: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_std: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    #[serde(rename = "type")]
    pub kind: TaskKind,
    /// A manifest path, `synth:waveform` or `synth:words`.
    pub data: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub readout: Option<Readout>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub lr: f64,
    pub momentum: f64,
    pub epochs: usize,
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default)]
    pub patience: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutConfig {
    pub metrics_csv: PathBuf,
    pub checkpoint: PathBuf,
}

/// Training data resolved from a `task.data` string.
pub enum TaskData {
    Generation(Vec<f64>),
    Classification { data: ClassificationData, norm: NormStats },
}

/// Result of one configured run, before anything is written.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub metrics: Metrics,
    pub checkpoint: Checkpoint,
}

impl RunConfig {
    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Parses and validates; every failure here is a configuration error.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = RunConfig::from_json(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        if m.hidden == 0 {
            return Err(Error::InvalidConfig("model.hidden must be at least 1".into()));
        }
        if m.kind != ModelKind::Cwrnn && (m.groups.is_some() || m.periods.is_some()) {
            return Err(Error::InvalidConfig(format!(
                "model.groups and model.periods apply to cwrnn only, not {}",
                m.kind
            )));
        }
        if m.kind != ModelKind::Lstm && m.forget_bias.is_some() {
            return Err(Error::InvalidConfig("model.forget_bias applies to lstm only".into()));
        }
        if let Some(std) = m.init_std {
            if !(std >= 0.0 && std.is_finite()) {
                return Err(Error::InvalidConfig(format!("model.init_std must be >= 0, got {std}")));
            }
        }
        if m.kind == ModelKind::Cwrnn {
            self.clock_spec()?;
        }
        match (self.task.kind, self.task.data.as_str()) {
            (TaskKind::Generation, SYNTH_WORDS) | (TaskKind::Classification, SYNTH_WAVEFORM) => {
                return Err(Error::InvalidConfig(format!(
                    "task.data {:?} does not fit a {:?} task",
                    self.task.data, self.task.kind
                )));
            }
            (_, d) if d.starts_with("synth:") && d != SYNTH_WORDS && d != SYNTH_WAVEFORM => {
                return Err(Error::InvalidConfig(format!("unknown synthetic dataset {d:?}")));
            }
            _ => {}
        }
        if self.task.kind == TaskKind::Generation && self.task.readout.is_some() {
            return Err(Error::InvalidConfig(
                "task.readout applies to classification only".into(),
            ));
        }
        self.train_config().validate()
    }

    pub fn clock_spec(&self) -> Result<ClockSpec> {
        let m = &self.model;
        match &m.periods {
            Some(PeriodsConfig::List(periods)) => {
                if let Some(g) = m.groups {
                    if g != periods.len() {
                        return Err(Error::InvalidConfig(format!(
                            "model.groups is {g} but {} periods are listed",
                            periods.len()
                        )));
                    }
                }
                ClockSpec::with_periods(m.hidden, periods.clone())
            }
            Some(PeriodsConfig::Named(name)) if name != "exponential" => Err(Error::InvalidConfig(format!(
                "model.periods must be \"exponential\" or a list, got {name:?}"
            ))),
            _ => {
                let g = m
                    .groups
                    .ok_or_else(|| Error::InvalidConfig("cwrnn with exponential periods needs model.groups".into()))?;
                ClockSpec::exponential(m.hidden, g)
            }
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            learning_rate: t.lr,
            momentum: t.momentum,
            epochs: t.epochs,
            noise_std: t.noise_std,
            patience: t.patience,
            seed: t.seed,
            readout: self.task.readout.unwrap_or_default(),
            clip: t.clip,
        }
    }

    pub fn readout(&self) -> Readout {
        self.task.readout.unwrap_or_default()
    }

    /// A copy with a different seed whose output files carry a `.seedN`
    /// suffix before their extension.
    pub fn for_seed(&self, seed: u64) -> Self {
        let mut cfg = self.clone();
        cfg.train.seed = seed;
        cfg.out.metrics_csv = seeded_path(&self.out.metrics_csv, seed);
        cfg.out.checkpoint = seeded_path(&self.out.checkpoint, seed);
        cfg
    }

    /// Freshly initialised weights for the given data shape, drawn from
    /// `Rng::new(train.seed)`.
    pub fn build_model(&self, inputs: usize, outputs: usize, output: OutputActivation) -> Result<Model> {
        let mut rng = Rng::new(self.train.seed);
        let std = self.model.init_std.unwrap_or(DEFAULT_INIT_STD);
        let n = self.model.hidden;
        Ok(match self.model.kind {
            ModelKind::Cwrnn => CwRnnParams::init(self.clock_spec()?, inputs, outputs, &mut rng, std)?
                .with_output(output)
                .into(),
            ModelKind::Srn => SrnParams::init(n, inputs, outputs, &mut rng, std)?
                .with_output(output)
                .into(),
            ModelKind::Lstm => {
                let fb = self.model.forget_bias.unwrap_or(DEFAULT_FORGET_BIAS);
                LstmParams::init(n, inputs, outputs, &mut rng, std, fb)?
                    .with_output(output)
                    .into()
            }
        })
    }

    /// Loads the training data only; a manifest's test split stays unread.
    pub fn load_training_data(&self) -> Result<TaskData> {
        match (self.task.kind, self.task.data.as_str()) {
            (TaskKind::Generation, SYNTH_WAVEFORM) => {
                Ok(TaskData::Generation(synth_waveform(WAVEFORM_SEED, WAVEFORM_LENGTH)))
            }
            (TaskKind::Classification, SYNTH_WORDS) => {
                let words = synth_wordlike_dataset(WORDS_SEED);
                let norm = NormStats::fit(words.train.iter().map(|s| s.inputs.as_slice()))?;
                let data = ClassificationData {
                    classes: words.classes(),
                    train: normalize_all(&norm, &words.train)?,
                    test: Vec::new(),
                };
                Ok(TaskData::Classification { data, norm })
            }
            (kind, path) => {
                let loader = open_manifest(Path::new(path), kind)?;
                let split = loader.load_train()?;
                match kind {
                    TaskKind::Generation => {
                        Ok(TaskData::Generation(generation_target(&split.sequences, &split.paths)?))
                    }
                    TaskKind::Classification => {
                        let norm = NormStats::fit(split.sequences.iter().map(|s| s.as_slice()))?;
                        let classes = loader.manifest().classes.as_ref().map_or(0, Vec::len);
                        let train = labeled(split.sequences, split.labels);
                        Ok(TaskData::Classification {
                            data: ClassificationData {
                                classes,
                                train: normalize_all(&norm, &train)?,
                                test: Vec::new(),
                            },
                            norm,
                        })
                    }
                }
            }
        }
    }

    /// Trains, then (classification only) scores the test split once.
    pub fn run(&self) -> Result<RunOutcome> {
        self.validate()?;
        let cfg = self.train_config();
        match self.load_training_data()? {
            TaskData::Generation(target) => {
                let model = self.build_model(0, 1, OutputActivation::Linear)?;
                let (model, metrics) = train_generation(model, &target, &cfg)?;
                Ok(RunOutcome {
                    metrics,
                    checkpoint: self.checkpoint(model, None),
                })
            }
            TaskData::Classification { data, norm } => {
                let inputs = norm.channels();
                let model = self.build_model(inputs, data.classes, OutputActivation::Softmax)?;
                let (model, mut metrics) = train_classification(model, &data, &cfg)?;
                let test = load_test_split(&self.task.data, TaskKind::Classification, &norm)?;
                if !test.is_empty() {
                    let (_, err) = evaluate_classification(&model, &test, cfg.readout)?;
                    metrics.test_error = Some(err);
                    if let Some(last) = metrics.epochs.last_mut() {
                        last.test_metric = Some(err);
                    }
                }
                Ok(RunOutcome {
                    metrics,
                    checkpoint: self.checkpoint(model, Some(norm)),
                })
            }
        }
    }

    /// Runs and writes the metrics CSV and checkpoint named in `out`.
    pub fn execute(&self) -> Result<RunOutcome> {
        let outcome = self.run()?;
        outcome.metrics.write_csv(&self.out.metrics_csv)?;
        outcome.checkpoint.save(&self.out.checkpoint)?;
        Ok(outcome)
    }

    fn checkpoint(&self, model: Model, norm: Option<NormStats>) -> Checkpoint {
        Checkpoint {
            task: self.task.kind,
            model,
            norm,
            readout: self.readout(),
            seed: self.train.seed,
        }
    }
}

fn seeded_path(path: &Path, seed: u64) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.seed{seed}.{}", ext.to_string_lossy()),
        None => format!("{stem}.seed{seed}"),
    };
    path.with_file_name(name)
}

fn open_manifest(path: &Path, kind: TaskKind) -> Result<ManifestLoader> {
    let loader = ManifestLoader::open(path, Phase::Training)?;
    if loader.manifest().task != kind {
        return Err(Error::InvalidConfig(format!(
            "{} describes a {:?} dataset, expected {:?}",
            path.display(),
            loader.manifest().task,
            kind
        )));
    }
    Ok(loader)
}

fn generation_target(sequences: &[Vec<Vec<f64>>], paths: &[PathBuf]) -> Result<Vec<f64>> {
    let (seq, path) = match (sequences.first(), paths.first()) {
        (Some(s), Some(p)) => (s, p),
        _ => return Err(Error::InvalidData("generation manifest lists no sequence".into())),
    };
    seq.iter()
        .map(|row| match row.as_slice() {
            [x] => Ok(*x),
            _ => Err(Error::InvalidData(format!(
                "{}: generation targets need exactly one column, found {}",
                path.display(),
                row.len()
            ))),
        })
        .collect()
}

fn labeled(sequences: Vec<Vec<Vec<f64>>>, labels: Vec<usize>) -> Vec<LabeledSequence> {
    sequences
        .into_iter()
        .zip(labels)
        .map(|(inputs, label)| LabeledSequence { inputs, label })
        .collect()
}

fn normalize_all(norm: &NormStats, data: &[LabeledSequence]) -> Result<Vec<LabeledSequence>> {
    data.iter()
        .map(|s| {
            Ok(LabeledSequence {
                inputs: norm.apply(&s.inputs)?,
                label: s.label,
            })
        })
        .collect()
}

/// The held-out split of `data`, normalized with training statistics.
pub fn load_test_split(data: &str, kind: TaskKind, norm: &NormStats) -> Result<Vec<LabeledSequence>> {
    match data {
        SYNTH_WORDS => normalize_all(norm, &synth_wordlike_dataset(WORDS_SEED).test),
        SYNTH_WAVEFORM => Err(Error::InvalidConfig("the synthetic waveform has no test split".into())),
        path => {
            let mut loader = open_manifest(Path::new(path), kind)?;
            loader.enter_evaluation();
            let split = loader.load_test()?;
            normalize_all(norm, &labeled(split.sequences, split.labels))
        }
    }
}

/// What `eval` reports for a checkpoint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Evaluation {
    Nmse(f64),
    ErrorRate(f64),
}

/// Scores a checkpoint on `data`: NMSE on the generation target, or error
/// rate on the classification test split.
pub fn evaluate_checkpoint(checkpoint: &Checkpoint, data: &str) -> Result<Evaluation> {
    let model = &checkpoint.model;
    match checkpoint.task {
        TaskKind::Generation => {
            if model.input_size() != 0 || model.output_size() != 1 {
                return Err(Error::InvalidConfig(
                    "generation checkpoint must have 0 inputs and 1 output".into(),
                ));
            }
            let target = match data {
                SYNTH_WAVEFORM => synth_waveform(WAVEFORM_SEED, WAVEFORM_LENGTH),
                SYNTH_WORDS => {
                    return Err(Error::InvalidConfig(
                        "a generation checkpoint cannot be scored on words".into(),
                    ))
                }
                path => {
                    let loader = open_manifest(Path::new(path), TaskKind::Generation)?;
                    let split = loader.load_train()?;
                    generation_target(&split.sequences, &split.paths)?
                }
            };
            Ok(Evaluation::Nmse(evaluate_generation(model, &target)?))
        }
        TaskKind::Classification => {
            let norm = checkpoint
                .norm
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("classification checkpoint lacks normalization stats".into()))?;
            if norm.channels() != model.input_size() {
                return Err(Error::InvalidConfig(format!(
                    "checkpoint normalizes {} channels but the model takes {}",
                    norm.channels(),
                    model.input_size()
                )));
            }
            let test = load_test_split(data, TaskKind::Classification, norm)?;
            if test.is_empty() {
                return Err(Error::InvalidData(format!("{data} has an empty test split")));
            }
            if let Some(bad) = test.iter().find(|s| s.label >= model.output_size()) {
                return Err(Error::InvalidConfig(format!(
                    "label {} exceeds the checkpoint's {} classes",
                    bad.label,
                    model.output_size()
                )));
            }
            let (_, err) = evaluate_classification(model, &test, checkpoint.readout)?;
            Ok(Evaluation::ErrorRate(err))
        }
    }
}

/// Free-running output of a generation checkpoint for `steps` steps.
pub fn generate(checkpoint: &Checkpoint, steps: usize) -> Result<Vec<Vec<f64>>> {
    let model = &checkpoint.model;
    if checkpoint.task != TaskKind::Generation || model.input_size() != 0 {
        return Err(Error::InvalidConfig(
            "generate needs a generation checkpoint whose model takes no input".into(),
        ));
    }
    model.outputs(&vec![Vec::new(); steps])
}
