//! Dataset directories: `labels.tsv` plus one orientation-field (`.of`) or
//! grayscale image (`.pgm`) file per sample.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use fpclass_core::orientation::{block_orientation, encode_features, load_pgm, parse_field, write_field};
use fpclass_core::synthgen::{self, SynthSpec};
use fpclass_core::{ClassLabel, OrientationField};
use ndarray::Array2;
use sha2::{Digest, Sha256};

pub const LABELS_FILE: &str = "labels.tsv";

#[derive(Debug, Clone)]
pub struct Sample {
    pub name: String,
    pub field: OrientationField,
    pub label: ClassLabel,
}

/// Reads one input as an orientation field; `.pgm` images go through block
/// orientation estimation.
pub fn load_field(path: &Path, block: usize) -> Result<OrientationField> {
    let is_pgm = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
    if is_pgm {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let img = load_pgm(&bytes).with_context(|| format!("decoding {}", path.display()))?;
        Ok(block_orientation(&img, block).with_context(|| format!("estimating orientation of {}", path.display()))?)
    } else {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        parse_field(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Parses `labels.tsv` into `(filename, label)` pairs.
pub fn read_labels(dir: &Path) -> Result<Vec<(String, ClassLabel)>> {
    let path = dir.join(LABELS_FILE);
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (name, label) = line
            .split_once('\t')
            .with_context(|| format!("{} line {}: expected filename<TAB>label", path.display(), i + 1))?;
        let label: ClassLabel = label
            .trim()
            .parse()
            .with_context(|| format!("{} line {}", path.display(), i + 1))?;
        out.push((name.to_string(), label));
    }
    Ok(out)
}

pub fn load_dataset(dir: &Path, block: usize) -> Result<Vec<Sample>> {
    let entries = read_labels(dir)?;
    let samples: Vec<Sample> = entries
        .into_iter()
        .map(|(name, label)| {
            let field = load_field(&dir.join(&name), block)?;
            Ok(Sample { name, field, label })
        })
        .collect::<Result<_>>()?;
    if let Some(first) = samples.first() {
        let shape = (first.field.rows(), first.field.cols());
        for s in &samples {
            ensure!(
                (s.field.rows(), s.field.cols()) == shape,
                "{} has a {}x{} grid but {} has {}x{}",
                s.name,
                s.field.rows(),
                s.field.cols(),
                first.name,
                shape.0,
                shape.1
            );
        }
    }
    Ok(samples)
}

fn split_key(seed: u64, name: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(name.as_bytes());
    h.finalize().into()
}

/// Deterministic split by salted filename hash: samples are ordered by
/// `sha256(seed ‖ name)` and the first `⌊fraction·N⌋` form the training set.
/// Both halves keep their original relative order.
pub fn split(samples: Vec<Sample>, fraction: f64, seed: u64) -> (Vec<Sample>, Vec<Sample>) {
    let n_train = (fraction * samples.len() as f64).floor() as usize;
    let mut order: Vec<(usize, [u8; 32])> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| (i, split_key(seed, &s.name)))
        .collect();
    order.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));
    let mut is_train = vec![false; samples.len()];
    for &(i, _) in &order[..n_train] {
        is_train[i] = true;
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (s, t) in samples.into_iter().zip(is_train) {
        if t {
            train.push(s);
        } else {
            test.push(s);
        }
    }
    (train, test)
}

/// Double-angle feature matrix, one sample per row.
pub fn feature_matrix(samples: &[Sample]) -> Array2<f64> {
    let width = samples.first().map_or(0, |s| 2 * s.field.len());
    let mut x = Array2::zeros((samples.len(), width));
    for (mut row, s) in x.rows_mut().into_iter().zip(samples) {
        row.assign(&ndarray::ArrayView1::from(encode_features(&s.field).as_slice()));
    }
    x
}

pub fn labels(samples: &[Sample]) -> Vec<ClassLabel> {
    samples.iter().map(|s| s.label).collect()
}

pub fn sample_name(label: ClassLabel, index: usize) -> String {
    format!("{label}_{index:05}.of")
}

/// Writes a synthetic dataset and returns the number of samples.
pub fn write_synthetic(dir: &Path, spec: &SynthSpec) -> Result<usize> {
    if spec.noise_sigma < 0.0 || !spec.noise_sigma.is_finite() {
        bail!("noise must be a finite non-negative number");
    }
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut index = String::new();
    for i in 0..spec.total() {
        let (field, label) = synthgen::generate_sample(spec, i)?;
        let name = sample_name(label, i);
        write(&dir.join(&name), &write_field(&field))?;
        index.push_str(&format!("{name}\t{label}\n"));
    }
    write(&dir.join(LABELS_FILE), &index)?;
    Ok(spec.total())
}

pub fn write(path: &PathBuf, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
