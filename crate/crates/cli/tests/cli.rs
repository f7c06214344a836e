use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cwrnn_core::data::{load_sequence, Checkpoint, TaskKind};
use cwrnn_core::{ClockSpec, CwRnnParams, Readout};

fn cwrnn(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cwrnn"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, model: &str, task: &str, train: &str) -> String {
    let text = format!(
        r#"{{"model":{model},"task":{task},"train":{train},
            "out":{{"metrics_csv":"out/{name}.csv","checkpoint":"out/{name}.json"}}}}"#
    );
    let path = dir.join(format!("{name}.config.json"));
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn small_gen_config(dir: &Path) -> String {
    write_config(
        dir,
        "gen",
        r#"{"type":"cwrnn","hidden":9,"groups":3,"periods":"exponential"}"#,
        r#"{"type":"generation","data":"synth:waveform"}"#,
        r#"{"lr":3e-4,"momentum":0.95,"epochs":30,"seed":4}"#,
    )
}

#[test]
fn every_subcommand_has_help() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["train", "eval", "generate", "gradcheck", "bench", "params"] {
        let out = cwrnn(&[sub, "--help"], dir.path());
        assert!(out.status.success(), "{sub}");
        assert!(stdout(&out).contains("Usage"), "{sub}");
    }
    assert_eq!(cwrnn(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(cwrnn(&["bench"], dir.path()).status.code(), Some(2));
}

#[test]
fn gradcheck_passes_for_twenty_seeds() {
    let dir = tempfile::tempdir().unwrap();
    for model in ["cwrnn", "srn", "lstm"] {
        for seed in 1..=20 {
            let s = seed.to_string();
            let out = cwrnn(&["gradcheck", "--model", model, "--seed", &s], dir.path());
            assert!(
                out.status.success(),
                "{model} seed {seed}: {}{}",
                stdout(&out),
                stderr(&out)
            );
        }
    }
    let out = cwrnn(
        &[
            "gradcheck",
            "--model",
            "cwrnn",
            "--seed",
            "3",
            "--hidden",
            "12",
            "--groups",
            "4",
            "--steps",
            "10",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stdout(&out));
}

#[test]
fn corrupted_gradient_is_caught() {
    let dir = tempfile::tempdir().unwrap();
    let out = cwrnn(&["gradcheck", "--model", "srn", "--seed", "2", "--corrupt"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("FAIL"));
    assert!(stderr(&out).contains("gradient mismatch in"));
    let out = cwrnn(
        &["gradcheck", "--model", "srn", "--seed", "2", "--hidden", "40"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = cwrnn(
        &["bench", "--groups", "9", "--group-size", "4", "--format", "csv"],
        dir.path(),
    );
    assert!(out.status.success());
    let text = stdout(&out);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[9], "PASS");
    assert!(row[7].parse::<f64>().unwrap() >= 2.25);

    let out = cwrnn(&["bench", "--groups", "1", "--group-size", "5"], dir.path());
    assert!(out.status.success());
    assert!(stdout(&out).contains("N/A"));

    let out = cwrnn(
        &["bench", "--groups", "4", "--group-size", "2", "--inputs", "3"],
        dir.path(),
    );
    assert!(stdout(&out).contains("N_H=40 "));
}

#[test]
fn params_command() {
    let dir = tempfile::tempdir().unwrap();
    let out = cwrnn(&["params", "--model", "srn", "--hidden", "31"], dir.path());
    assert_eq!(stdout(&out).trim(), "1024");
    let out = cwrnn(&["params", "--model", "lstm", "--hidden", "15"], dir.path());
    assert_eq!(stdout(&out).trim(), "976");
}

#[test]
fn train_is_reproducible_and_eval_matches_log() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_gen_config(dir.path());
    let out = cwrnn(&["train", "--config", &cfg], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let metrics = fs::read(dir.path().join("out/gen.csv")).unwrap();
    let checkpoint = fs::read(dir.path().join("out/gen.json")).unwrap();

    let out = cwrnn(&["train", "--config", &cfg], dir.path());
    assert!(out.status.success());
    assert_eq!(fs::read(dir.path().join("out/gen.csv")).unwrap(), metrics);
    assert_eq!(fs::read(dir.path().join("out/gen.json")).unwrap(), checkpoint);

    let text = String::from_utf8(metrics).unwrap();
    assert!(text.starts_with("epoch,train_loss,noise_free_loss,test_metric\n"));
    let logged: f64 = text
        .lines()
        .last()
        .unwrap()
        .rsplit(',')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    let out = cwrnn(
        &["eval", "--checkpoint", "out/gen.json", "--data", "synth:waveform"],
        dir.path(),
    );
    assert!(out.status.success());
    let line = stdout(&out);
    let (name, value) = line.trim().split_once(',').unwrap();
    assert_eq!(name, "nmse");
    assert!((value.parse::<f64>().unwrap() - logged).abs() <= 1e-12);

    let out = cwrnn(
        &["eval", "--checkpoint", "out/gen.json", "--data", "synth:words"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));

    let out = cwrnn(
        &[
            "generate",
            "--checkpoint",
            "out/gen.json",
            "--steps",
            "25",
            "--out",
            "gen.csv",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    assert_eq!(load_sequence(&dir.path().join("gen.csv")).unwrap().len(), 25);
}

#[test]
fn seed_range_writes_per_seed_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_gen_config(dir.path());
    let out = Command::new(env!("CARGO_BIN_EXE_cwrnn"))
        .args(["train", "--config", &cfg, "--seeds", "2..3"])
        .current_dir(dir.path())
        .env("CWRNN_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    for seed in [2, 3] {
        assert!(dir.path().join(format!("out/gen.seed{seed}.csv")).exists());
        assert!(dir.path().join(format!("out/gen.seed{seed}.json")).exists());
    }
    assert_eq!(stdout(&out).lines().count(), 2);
}

#[test]
fn generate_from_zero_weights_is_silent() {
    let dir = tempfile::tempdir().unwrap();
    let ck = Checkpoint {
        task: TaskKind::Generation,
        model: CwRnnParams::zeros(ClockSpec::exponential(6, 3).unwrap(), 0, 1).into(),
        norm: None,
        readout: Readout::Final,
        seed: 0,
    };
    ck.save(&dir.path().join("zero.json")).unwrap();
    let out = cwrnn(
        &[
            "generate",
            "--checkpoint",
            "zero.json",
            "--steps",
            "40",
            "--out",
            "z.csv",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = load_sequence(&dir.path().join("z.csv")).unwrap();
    assert_eq!(rows.len(), 40);
    assert!(rows.iter().all(|r| r == &vec![0.0]));
}

#[test]
fn words_eval_prints_error_rate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "words",
        r#"{"type":"srn","hidden":6}"#,
        r#"{"type":"classification","data":"synth:words"}"#,
        r#"{"lr":3e-4,"momentum":0.9,"epochs":2,"noise_std":0.6,"patience":5,"seed":1}"#,
    );
    let out = cwrnn(&["train", "--config", &cfg], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let out = cwrnn(
        &["eval", "--checkpoint", "out/words.json", "--data", "synth:words"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let line = stdout(&out);
    let (name, value) = line.trim().split_once(',').unwrap();
    assert_eq!(name, "error");
    let v: f64 = value.parse().unwrap();
    assert!((0.0..=1.0).contains(&v));
}

#[test]
fn config_and_data_errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write_config(
        dir.path(),
        "bad",
        r#"{"type":"srn","hidden":6,"depth":2}"#,
        r#"{"type":"generation","data":"synth:waveform"}"#,
        r#"{"lr":3e-4,"momentum":0.95,"epochs":2,"seed":1}"#,
    );
    let out = cwrnn(&["train", "--config", &unknown], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("depth"));

    let missing = write_config(
        dir.path(),
        "missing",
        r#"{"type":"srn","hidden":6}"#,
        r#"{"type":"generation","data":"nowhere/manifest.json"}"#,
        r#"{"lr":3e-4,"momentum":0.95,"epochs":2,"seed":1}"#,
    );
    let out = cwrnn(&["train", "--config", &missing], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("nowhere/manifest.json"));
}

#[test]
fn manifest_dataset_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    cwrnn_core::data::write_wordlike_dataset(3, &dir.path().join("words")).unwrap();
    let cfg = write_config(
        dir.path(),
        "m",
        r#"{"type":"cwrnn","hidden":7,"groups":7,"periods":[1,2,4,8,16,32,64]}"#,
        r#"{"type":"classification","data":"words/manifest.json","readout":"mean"}"#,
        r#"{"lr":3e-4,"momentum":0.9,"epochs":1,"noise_std":0.6,"patience":5,"seed":1}"#,
    );
    let out = cwrnn(&["train", "--config", &cfg], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("test_error="));
    let out = cwrnn(
        &["eval", "--checkpoint", "out/m.json", "--data", "words/manifest.json"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).starts_with("error,"));
}
