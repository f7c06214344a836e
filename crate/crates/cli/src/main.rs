use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use cwrnn_core::analysis::BenchRow;
use cwrnn_core::baselines::param_count;
use cwrnn_core::data::{save_sequence, Checkpoint};
use cwrnn_core::gradcheck::{
    analytic_gradient, compare, numeric_gradient, Problem, ProblemShape, DEFAULT_STEP, DEFAULT_TOLERANCE,
};
use cwrnn_core::model::SequenceModel;
use cwrnn_core::run::{evaluate_checkpoint, generate, Evaluation};
use cwrnn_core::{Error, ModelKind, Rng, RunConfig};

#[derive(Parser)]
#[command(
    name = "cwrnn",
    version,
    about = "Train, check and analyse Clockwork RNNs and their baselines"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a JSON run configuration
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Run seeds A..B (inclusive) instead of the configured one; outputs
        /// get a `.seedN` suffix
        #[arg(long, value_parser = parse_seed_range)]
        seeds: Option<RangeInclusive<u64>>,
    },
    /// Score a checkpoint: NMSE for generation, test error for classification
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Manifest path, `synth:waveform` or `synth:words`
        #[arg(long)]
        data: String,
    },
    /// Write the free-running output of a generation checkpoint as CSV
    Generate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare BPTT gradients with central finite differences
    Gradcheck {
        #[arg(long, value_parser = parse_kind)]
        model: ModelKind,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long)]
        groups: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, hide = true)]
        corrupt: bool,
    },
    /// Count parameters and operations of an exponential-clock network
    Bench {
        #[arg(long)]
        groups: usize,
        #[arg(long)]
        group_size: usize,
        #[arg(long, default_value_t = 0)]
        inputs: usize,
        /// Steps to average over; defaults to the hyperperiod
        #[arg(long)]
        window: Option<u64>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Count the trainable parameters of a model
    Params {
        #[arg(long, value_parser = parse_kind)]
        model: ModelKind,
        #[arg(long)]
        hidden: usize,
        #[arg(long, default_value_t = 0)]
        inputs: usize,
        #[arg(long, default_value_t = 1)]
        outputs: usize,
        #[arg(long, default_value_t = 1)]
        groups: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
}

fn parse_kind(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_seed_range(s: &str) -> Result<RangeInclusive<u64>, String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected A..B, got {s:?}"))?;
    let a: u64 = a.trim().parse().map_err(|e| format!("bad seed {a:?}: {e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("bad seed {b:?}: {e}"))?;
    if a > b {
        return Err(format!("empty seed range {s}"));
    }
    Ok(a..=b)
}

/// A failed command and the exit status it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) => Failure::usage(e.to_string()),
            _ => Failure::runtime(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { config, seeds } => cmd_train(config, seeds),
        Command::Eval { checkpoint, data } => cmd_eval(checkpoint, &data),
        Command::Generate { checkpoint, steps, out } => cmd_generate(checkpoint, steps, out),
        Command::Gradcheck {
            model,
            seed,
            hidden,
            groups,
            steps,
            corrupt,
        } => cmd_gradcheck(model, seed, hidden, groups, steps, corrupt),
        Command::Bench {
            groups,
            group_size,
            inputs,
            window,
            format,
        } => cmd_bench(groups, group_size, inputs, window, format),
        Command::Params {
            model,
            hidden,
            inputs,
            outputs,
            groups,
        } => param_count(model, inputs, hidden, outputs, groups)
            .map(|n| println!("{n}"))
            .map_err(Failure::from),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn cmd_train(config: PathBuf, seeds: Option<RangeInclusive<u64>>) -> Result<(), Failure> {
    let cfg = RunConfig::load(&config).map_err(|e| Failure::usage(e.to_string()))?;
    let Some(seeds) = seeds else {
        let outcome = cfg.execute()?;
        println!("{}", summary(cfg.train.seed, &outcome.metrics));
        return Ok(());
    };
    let runs: Vec<RunConfig> = seeds.map(|s| cfg.for_seed(s)).collect();
    let threads = worker_count(runs.len());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::runtime(e.to_string()))?;
    let results: Vec<_> = pool.install(|| {
        use rayon::prelude::*;
        runs.par_iter().map(|c| c.execute().map(|o| o.metrics)).collect()
    });
    let mut failed = 0;
    for (run, result) in runs.iter().zip(results) {
        match result {
            Ok(metrics) => println!("{}", summary(run.train.seed, &metrics)),
            Err(e) => {
                failed += 1;
                eprintln!("seed {}: {e}", run.train.seed);
            }
        }
    }
    if failed > 0 {
        return Err(Failure::runtime(format!("{failed} of {} runs failed", runs.len())));
    }
    Ok(())
}

fn worker_count(jobs: usize) -> usize {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    let cap = std::env::var("CWRNN_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(available);
    cap.min(jobs).max(1)
}

fn summary(seed: u64, m: &cwrnn_core::Metrics) -> String {
    let mut line = format!("seed={seed} epochs={}", m.epochs.len());
    if let Some(v) = m.final_nmse {
        line.push_str(&format!(" nmse={v:.6e}"));
    }
    if let Some(v) = m.train_error {
        line.push_str(&format!(" train_error={v:.4}"));
    }
    if let Some(v) = m.test_error {
        line.push_str(&format!(" test_error={v:.4}"));
    }
    if m.stopped_early {
        line.push_str(" stopped_early");
    }
    line
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint, Failure> {
    Checkpoint::load(path).map_err(|e| match e {
        Error::Io { .. } => Failure::runtime(e.to_string()),
        _ => Failure::usage(e.to_string()),
    })
}

fn cmd_eval(checkpoint: PathBuf, data: &str) -> Result<(), Failure> {
    let ck = load_checkpoint(&checkpoint)?;
    match evaluate_checkpoint(&ck, data)? {
        Evaluation::Nmse(v) => println!("nmse,{}", cwrnn_core::data::format_real(v)),
        Evaluation::ErrorRate(v) => println!("error,{}", cwrnn_core::data::format_real(v)),
    }
    Ok(())
}

fn cmd_generate(checkpoint: PathBuf, steps: usize, out: PathBuf) -> Result<(), Failure> {
    let ck = load_checkpoint(&checkpoint)?;
    let rows = generate(&ck, steps)?;
    save_sequence(&out, &rows)?;
    Ok(())
}

const GRADCHECK_MAX_HIDDEN: usize = 16;

fn cmd_gradcheck(
    kind: ModelKind,
    seed: u64,
    hidden: Option<usize>,
    groups: Option<usize>,
    steps: Option<usize>,
    corrupt: bool,
) -> Result<(), Failure> {
    let mut rng = Rng::new(seed);
    let mut shape = ProblemShape::random(&mut rng);
    if let Some(n) = hidden {
        shape.hidden = n;
    }
    if let Some(t) = steps {
        shape.steps = t;
    }
    if groups.is_some() && kind != ModelKind::Cwrnn {
        return Err(Failure::usage("--groups applies to cwrnn only"));
    }
    shape.groups = groups;
    if shape.hidden == 0 || shape.hidden > GRADCHECK_MAX_HIDDEN {
        return Err(Failure::usage(format!(
            "--hidden must lie in 1..={GRADCHECK_MAX_HIDDEN} for finite differences"
        )));
    }
    if shape.steps == 0 {
        return Err(Failure::usage("--steps must be at least 1"));
    }
    let problem = Problem::new(kind, &shape, &mut rng)?;
    let loss = problem.loss();
    let mut analytic = analytic_gradient(&problem.model, &problem.inputs, &*loss)?;
    if corrupt {
        if let Some(v) = analytic.blocks_mut().into_iter().find_map(|b| b.values.first_mut()) {
            *v += 1e-3;
        }
    }
    let numeric = numeric_gradient(&problem.model, &problem.inputs, &*loss, DEFAULT_STEP)?;
    println!(
        "{kind} hidden={} inputs={} outputs={} steps={}",
        shape.hidden, shape.inputs, shape.outputs, shape.steps
    );
    let mut bad = Vec::new();
    for r in compare(&analytic, &numeric) {
        let ok = r.max_relative_error < DEFAULT_TOLERANCE;
        println!(
            "{:<4} max_rel_err={:.3e} {}",
            r.name,
            r.max_relative_error,
            if ok { "ok" } else { "FAIL" }
        );
        if !ok {
            bad.push(r.name);
        }
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Failure::runtime(format!("gradient mismatch in {}", bad.join(", "))))
    }
}

fn cmd_bench(
    groups: usize,
    group_size: usize,
    inputs: usize,
    window: Option<u64>,
    format: Format,
) -> Result<(), Failure> {
    if groups == 0 || group_size == 0 {
        return Err(Failure::usage("--groups and --group-size must be at least 1"));
    }
    if window == Some(0) {
        return Err(Failure::usage("--window must be at least 1"));
    }
    let row = BenchRow::compute(groups, group_size, inputs, window)?;
    match format {
        Format::Text => println!("{row}"),
        Format::Csv => {
            println!("{}", BenchRow::CSV_HEADER);
            println!("{}", row.to_csv());
        }
    }
    if row.verdict() == "FAIL" {
        return Err(Failure::runtime("speed-up bound violated"));
    }
    Ok(())
}
