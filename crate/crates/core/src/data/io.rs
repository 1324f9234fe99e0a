//! On-disk trial sets.
//!
//! A set directory holds `manifest.csv` (header `trial_id,subject_id,label,path`),
//! one headerless CSV per trial with a row per channel, an optional
//! `dataset.txt` sidecar (`class_names=` and `sample_rate=` lines) and an
//! optional `ground_truth_mask.csv`. Values are written with 17 significant
//! digits so a save/load round trip is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::trial::{EegTrial, TrialSet, DEFAULT_CLASS_NAMES, DEFAULT_SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const SIDECAR_FILE: &str = "dataset.txt";
pub const MASK_FILE: &str = "ground_truth_mask.csv";
const MANIFEST_HEADER: [&str; 4] = ["trial_id", "subject_id", "label", "path"];

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes a matrix as headerless CSV, one row per line.
pub fn write_matrix_csv(path: &Path, m: &Tensor) -> Result<()> {
    if m.ndim() != 2 {
        return Err(Error::Shape(format!("expected a matrix, got {:?}", m.shape())));
    }
    let cols = m.shape()[1];
    let mut out = String::with_capacity(m.len() * 24);
    for row in m.data().chunks(cols) {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write!(out, "{v:.16e}").expect("write to string");
        }
        out.push('\n');
    }
    write(path, &out)
}

/// Reads a headerless numeric CSV into `[rows, cols]`, rejecting ragged rows.
pub fn read_matrix_csv(path: &Path) -> Result<Tensor> {
    let text = read(path)?;
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut n = 0;
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::parse(path, i + 1, format!("not a number: {:?}", field.trim()))
            })?;
            data.push(v);
            n += 1;
        }
        match cols {
            None => cols = Some(n),
            Some(c) if c != n => {
                return Err(Error::parse(path, i + 1, format!("ragged row: {n} values, expected {c}")))
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::parse(path, 1, "file holds no values"))?;
    Tensor::new(&[rows, cols], data)
}

fn check_field(field: &str, what: &str) -> Result<()> {
    if field.contains([',', '\n', '\r']) || field.is_empty() {
        return Err(Error::Usage(format!("{what} {field:?} cannot be stored in the manifest")));
    }
    Ok(())
}

/// Writes `set` under `dir` (created if missing).
pub fn save_trialset(set: &TrialSet, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let trial_dir = dir.join("trials");
    fs::create_dir_all(&trial_dir).map_err(|e| Error::io(&trial_dir, e))?;
    let rate = set.trials.first().map_or(DEFAULT_SAMPLE_RATE, |t| t.sample_rate);
    if set.trials.iter().any(|t| t.sample_rate.to_bits() != rate.to_bits()) {
        return Err(Error::Usage("trials with different sample rates cannot share a set".into()));
    }
    for name in &set.class_names {
        check_field(name, "class name")?;
    }
    let mut manifest = MANIFEST_HEADER.join(",");
    manifest.push('\n');
    for (i, t) in set.trials.iter().enumerate() {
        check_field(&t.trial_id, "trial id")?;
        check_field(&t.subject_id, "subject id")?;
        let file = format!("trials/{:05}.csv", i);
        write_matrix_csv(&dir.join(&file), &t.data)?;
        writeln!(manifest, "{},{},{},{}", t.trial_id, t.subject_id, set.class_names[t.label], file)
            .expect("write to string");
    }
    write(&dir.join(MANIFEST_FILE), &manifest)?;
    let sidecar = format!("class_names={}\nsample_rate={rate:.16e}\n", set.class_names.join(","));
    write(&dir.join(SIDECAR_FILE), &sidecar)?;
    let mask_path = dir.join(MASK_FILE);
    match &set.ground_truth_mask {
        Some(mask) => write_matrix_csv(&mask_path, mask)?,
        None if mask_path.exists() => fs::remove_file(&mask_path).map_err(|e| Error::io(&mask_path, e))?,
        None => {}
    }
    Ok(())
}

fn read_sidecar(path: &Path) -> Result<(Vec<String>, f64)> {
    let mut names: Vec<String> = DEFAULT_CLASS_NAMES.iter().map(|s| s.to_string()).collect();
    let mut rate = DEFAULT_SAMPLE_RATE;
    if !path.exists() {
        return Ok((names, rate));
    }
    for (i, line) in read(path)?.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(path, i + 1, "expected key=value"))?;
        match key.trim() {
            "class_names" => names = value.split(',').map(|s| s.trim().to_string()).collect(),
            "sample_rate" => {
                rate = value
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(path, i + 1, format!("bad sample rate {value:?}")))?
            }
            other => return Err(Error::parse(path, i + 1, format!("unknown key {other:?}"))),
        }
    }
    Ok((names, rate))
}

/// Loads the set described by `manifest_path`. Trial paths are relative to
/// the manifest's directory. Labels are class names or integer indices.
pub fn load_trialset(manifest_path: &Path) -> Result<TrialSet> {
    let dir: PathBuf = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let (class_names, rate) = read_sidecar(&dir.join(SIDECAR_FILE))?;
    let text = read(manifest_path)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((_, header)) = lines.next() else {
        return Ok(TrialSet::empty(class_names));
    };
    let header: Vec<&str> = header.split(',').map(str::trim).collect();
    if header != MANIFEST_HEADER {
        return Err(Error::parse(
            manifest_path,
            1,
            format!("expected header {}, got {}", MANIFEST_HEADER.join(","), header.join(",")),
        ));
    }
    let mut trials = Vec::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::parse(manifest_path, i + 1, format!("expected 4 fields, got {}", fields.len())));
        }
        let label = match class_names.iter().position(|n| n == fields[2]) {
            Some(k) => k,
            None => match fields[2].parse::<usize>() {
                Ok(k) if k < class_names.len() => k,
                _ => {
                    return Err(Error::parse(
                        manifest_path,
                        i + 1,
                        format!("unknown label {:?} (classes: {})", fields[2], class_names.join(",")),
                    ))
                }
            },
        };
        let trial_path = dir.join(fields[3]);
        let data = read_matrix_csv(&trial_path)?;
        trials.push(EegTrial::new(data, label, fields[1], fields[0], rate)?);
    }
    let mask_path = dir.join(MASK_FILE);
    let mask = if mask_path.exists() { Some(read_matrix_csv(&mask_path)?) } else { None };
    TrialSet::new(trials, class_names, mask)
}
