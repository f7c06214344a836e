//! File formats, synthetic datasets, normalization and checkpoints.
//!
//! Sequences are CSV (one row per timestep, `#` lines are comments);
//! manifests and checkpoints are canonical JSON: sorted keys, no
//! insignificant whitespace, reals written with 17 significant digits.

mod checkpoint;
mod manifest;
mod norm;
mod synth;

use std::fs;
use std::path::Path;

use serde_json::Value;

use crate::error::{Error, Result};

pub use checkpoint::Checkpoint;
pub use manifest::{DatasetManifest, LoadedSplit, ManifestEntry, ManifestLoader, Phase, TaskKind};
pub use norm::NormStats;
pub use synth::{
    synth_waveform, synth_wordlike_dataset, write_wordlike_dataset, WordDataset, WAVEFORM_LENGTH, WAVEFORM_SEED,
    WORDS_SEED,
};

/// One input sequence with its class index.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSequence {
    pub inputs: Vec<Vec<f64>>,
    pub label: usize,
}

/// A real printed with 17 significant digits, which round-trips `f64`.
pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads a rectangular CSV of reals. Lines starting with `#` are skipped.
pub fn load_sequence(path: &Path) -> Result<Vec<Vec<f64>>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .iter()
            .map(|field| match field.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("not a finite real: {field:?}"),
                }),
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line());
    match err.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("expected {expected_len} columns, found {len}"),
        },
        csv::ErrorKind::Io(_) => Error::io(path, std::io::Error::other(err.to_string())),
        _ => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: err.to_string(),
        },
    }
}

pub fn save_sequence(path: &Path, rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row.iter().map(|&v| format_real(v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

/// Serializes a JSON value canonically: object keys sorted, no whitespace,
/// floats as 17 significant digits, integers verbatim.
pub fn canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_canonical(value, &mut out);
    out
}

fn write_canonical(value: &Value, out: &mut String) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&format_real(n.as_f64().expect("f64 number")));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(key.clone()).to_string());
                out.push(':');
                write_canonical(&map[key], out);
            }
            out.push('}');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    #[test]
    fn sequence_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seq.csv");
        let mut rng = Rng::new(1);
        let rows: Vec<Vec<f64>> = (0..320).map(|_| vec![rng.standard_normal() * 1e-3]).collect();
        save_sequence(&path, &rows).unwrap();
        assert_eq!(load_sequence(&path).unwrap(), rows);
    }

    #[test]
    fn header_is_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        fs::write(&path, "# a,b\n1,2\n3,4\n").unwrap();
        assert_eq!(load_sequence(&path).unwrap(), vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
    }

    #[test]
    fn ragged_row_names_its_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        fs::write(&path, "# header\n1,2\n3,4\n5\n").unwrap();
        match load_sequence(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
        fs::write(&path, "1,2\n3,x\n").unwrap();
        match load_sequence(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_sequence(Path::new("/nonexistent/x.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/x.csv"));
    }

    #[test]
    fn canonical_json_layout() {
        let v: Value = serde_json::from_str(r#"{"b": [1, 2.5, -0.0], "a": {"z": null, "y": "q\"s"}}"#).unwrap();
        assert_eq!(
            canonical_json(&v),
            r#"{"a":{"y":"q\"s","z":null},"b":[1,2.5000000000000000e0,-0.0000000000000000e0]}"#
        );
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn canonical_reals_round_trip(x in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
                let text = canonical_json(&serde_json::json!([x]));
                let back: Vec<f64> = serde_json::from_str(&text).unwrap();
                prop_assert_eq!(back[0].to_bits(), x.to_bits());
            }
        }
    }
}
