//! Line-delimited JSON files: one object per line, newline-terminated.

use serde::de::DeserializeOwned;
use serde::Serialize;
use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::record::{Field, PreferenceRecord};
use super::DatasetError;

/// Reads every nonblank line of `path` as a `T`. Parse errors carry the
/// 1-based line number.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>, DatasetError> {
    let file = File::open(path).map_err(|e| DatasetError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| DatasetError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| DatasetError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push((i + 1, value));
    }
    Ok(out)
}

pub fn to_jsonl_bytes<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).expect("in-memory serialization");
        out.push(b'\n');
    }
    out
}

pub fn write_jsonl<T: Serialize>(items: &[T], path: &Path) -> Result<(), DatasetError> {
    let file = File::create(path).map_err(|e| DatasetError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item)
            .map_err(|e| DatasetError::io(path, std::io::Error::other(e)))?;
        w.write_all(b"\n").map_err(|e| DatasetError::io(path, e))?;
    }
    w.flush().map_err(|e| DatasetError::io(path, e))
}

fn check_unique_ids<'a>(
    records: impl Iterator<Item = &'a PreferenceRecord>,
) -> Result<(), DatasetError> {
    let mut seen = HashSet::new();
    for r in records {
        if !seen.insert(r.id.as_str()) {
            return Err(DatasetError::Validation {
                id: r.id.clone(),
                field: Field::Id,
                message: "duplicate id within file".into(),
            });
        }
    }
    Ok(())
}

/// Loads and validates a record file.
pub fn load_records(path: &Path) -> Result<Vec<PreferenceRecord>, DatasetError> {
    let rows: Vec<(usize, PreferenceRecord)> = read_jsonl(path)?;
    for (line, r) in &rows {
        r.validate().map_err(|e| e.at_line(*line))?;
    }
    check_unique_ids(rows.iter().map(|(_, r)| r))?;
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

/// Validates every record, then writes them in the canonical field order.
/// Nothing is written when validation fails.
pub fn write_records(records: &[PreferenceRecord], path: &Path) -> Result<(), DatasetError> {
    for r in records {
        r.validate()?;
    }
    check_unique_ids(records.iter())?;
    fs::write(path, to_jsonl_bytes(records)).map_err(|e| DatasetError::io(path, e))
}
