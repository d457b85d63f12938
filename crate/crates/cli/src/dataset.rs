//! Iris ingestion and the stratified train/validation/test split.
//!
//! The canonical 150-row file is vendored under `data/` and verified by
//! SHA-256 on every load; user-supplied files skip the pinned checksum but
//! go through the same structural validation. Features are min-max
//! normalized per column to `[0, 1]` over the loaded set.

use std::path::Path;

use rand::{seq::SliceRandom, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use vqc_core::classifier::{DataSplits, Sample, NUM_CLASSES, NUM_FEATURES};
use vqc_core::{streams, Error, Result};

const IRIS_CSV: &str = include_str!("../data/iris.csv");
pub const IRIS_SHA256: &str = "9cc1c345c71bcc9b486b74cbf6063fa66f4bb5e0f603a4b3c3471ec2e5e8e355";

pub const TRAIN_PER_CLASS: usize = 20;
pub const VALID_PER_CLASS: usize = 15;
pub const TEST_PER_CLASS: usize = 15;
pub const SAMPLES_PER_CLASS: usize = 50;

/// Loads the vendored Iris file after checking its checksum.
pub fn vendored_iris() -> Result<Vec<Sample<f64>>> {
    let digest = hex_digest(IRIS_CSV.as_bytes());
    if digest != IRIS_SHA256 {
        return Err(Error::Parse(format!(
            "vendored Iris data corrupted: sha256 {digest}, expected {IRIS_SHA256}"
        )));
    }
    parse_iris(IRIS_CSV)
}

fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Loads Iris-shaped data: the vendored file when `path` is `None`,
/// otherwise the given CSV.
pub fn load_iris(path: Option<&Path>) -> Result<Vec<Sample<f64>>> {
    match path {
        None => vendored_iris(),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            parse_iris(&text)
        }
    }
}

/// Parses a 4-feature, 3-class CSV (optional header) and min-max
/// normalizes each feature column to `[0, 1]`.
pub fn parse_iris(text: &str) -> Result<Vec<Sample<f64>>> {
    let mut raw: Vec<([f64; NUM_FEATURES], u8)> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if idx == 0 && fields[0].trim().parse::<f64>().is_err() {
            continue; // header
        }
        if fields.len() != NUM_FEATURES + 1 {
            return Err(Error::Parse(format!(
                "line {line_no}: expected {} columns (4 features + label), got {}",
                NUM_FEATURES + 1,
                fields.len()
            )));
        }
        let mut features = [0.0f64; NUM_FEATURES];
        for (k, field) in fields[..NUM_FEATURES].iter().enumerate() {
            features[k] = field.trim().parse().map_err(|e| {
                Error::Parse(format!("line {line_no}: feature column {}: {e}", k + 1))
            })?;
        }
        let label = parse_label(fields[NUM_FEATURES])
            .ok_or_else(|| {
                Error::Parse(format!(
                    "line {line_no}: unknown class label `{}`",
                    fields[NUM_FEATURES].trim()
                ))
            })?;
        raw.push((features, label));
    }
    if raw.is_empty() {
        return Err(Error::Empty { what: "dataset" });
    }

    // Min-max per column.
    let mut lo = [f64::INFINITY; NUM_FEATURES];
    let mut hi = [f64::NEG_INFINITY; NUM_FEATURES];
    for (features, _) in &raw {
        for k in 0..NUM_FEATURES {
            lo[k] = lo[k].min(features[k]);
            hi[k] = hi[k].max(features[k]);
        }
    }
    raw.into_iter()
        .map(|(features, label)| {
            let mut normalized = [0.0f64; NUM_FEATURES];
            for k in 0..NUM_FEATURES {
                let span = hi[k] - lo[k];
                normalized[k] = if span > 0.0 {
                    (features[k] - lo[k]) / span
                } else {
                    0.0
                };
            }
            Sample::new(normalized, label)
        })
        .collect()
}

fn parse_label(field: &str) -> Option<u8> {
    let s = field.trim().to_ascii_lowercase();
    let s = s.strip_prefix("iris-").unwrap_or(&s);
    match s {
        "setosa" | "0" => Some(0),
        "versicolor" | "1" => Some(1),
        "virginica" | "2" => Some(2),
        _ => None,
    }
}

/// Stratified 20/15/15-per-class split with a seeded shuffle inside each
/// class; disjoint and exhaustive over the 150 samples.
pub fn split(samples: &[Sample<f64>], seed: u64) -> Result<DataSplits<f64>> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); NUM_CLASSES];
    for (i, s) in samples.iter().enumerate() {
        by_class[s.label as usize].push(i);
    }
    for (label, members) in by_class.iter().enumerate() {
        if members.len() != SAMPLES_PER_CLASS {
            return Err(Error::Config(format!(
                "class {label} has {} samples, expected {SAMPLES_PER_CLASS}",
                members.len()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(streams::DATASET_SPLIT);
    let mut splits = DataSplits::default();
    for members in by_class.iter_mut() {
        members.shuffle(&mut rng);
        for (k, &i) in members.iter().enumerate() {
            if k < TRAIN_PER_CLASS {
                splits.train.push(samples[i]);
            } else if k < TRAIN_PER_CLASS + VALID_PER_CLASS {
                splits.valid.push(samples[i]);
            } else {
                splits.test.push(samples[i]);
            }
        }
    }
    Ok(splits)
}
