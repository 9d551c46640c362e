use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::HarnessError;

/// Cleartext samples with binary labels, before sharing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabeledDataset {
    features: Vec<Vec<f64>>,
    labels: Vec<bool>,
}

impl LabeledDataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<bool>) -> Result<Self, HarnessError> {
        let d = features.first().map_or(0, Vec::len);
        if features.is_empty() || d == 0 {
            return Err(HarnessError::Empty);
        }
        if labels.len() != features.len() {
            return Err(HarnessError::InvalidArgument(format!(
                "{} labels for {} samples",
                labels.len(),
                features.len()
            )));
        }
        if let Some(row) = features.iter().find(|r| r.len() != d) {
            return Err(HarnessError::InvalidArgument(format!("ragged rows: {d} and {} features", row.len())));
        }
        Ok(LabeledDataset { features, labels })
    }

    pub fn n(&self) -> usize {
        self.features.len()
    }

    pub fn d(&self) -> usize {
        self.features[0].len()
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    /// Labels as 0.0 / 1.0.
    pub fn label_values(&self) -> Vec<f64> {
        self.labels.iter().map(|y| if *y { 1.0 } else { 0.0 }).collect()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|y| **y).count()
    }

    pub fn negatives(&self) -> usize {
        self.n() - self.positives()
    }

    /// Samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self, HarnessError> {
        if let Some(bad) = indices.iter().find(|i| **i >= self.n()) {
            return Err(HarnessError::InvalidArgument(format!("sample index {bad} out of range")));
        }
        LabeledDataset::new(
            indices.iter().map(|i| self.features[*i].clone()).collect(),
            indices.iter().map(|i| self.labels[*i]).collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CsvOptions {
    /// `None` detects a header from non-numeric fields in the first line.
    pub header: Option<bool>,
    /// Lines are variables and columns samples: the first data line holds
    /// the labels, each later line one feature. A non-numeric first field on
    /// the label line marks a leading column of row names.
    pub transpose: bool,
}

type Row = (u64, Vec<String>);

fn is_number(field: &str) -> bool {
    field.parse::<f64>().is_ok()
}

fn parse_label(line: u64, field: &str) -> Result<bool, HarnessError> {
    match field.parse::<f64>() {
        Ok(v) if v == 0.0 => Ok(false),
        Ok(v) if v == 1.0 => Ok(true),
        _ => Err(HarnessError::NonBinaryLabel { line, value: field.to_string() }),
    }
}

fn parse_feature(line: u64, column: usize, field: &str) -> Result<f64, HarnessError> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(HarnessError::NonNumeric { line, column, value: field.to_string() }),
    }
}

fn check_width(rows: &[Row]) -> Result<usize, HarnessError> {
    let width = rows.first().map_or(0, |r| r.1.len());
    for (line, fields) in rows {
        if fields.len() != width {
            return Err(HarnessError::ColumnCount { line: *line, expected: width, found: fields.len() });
        }
    }
    Ok(width)
}

/// Read a dataset from any CSV source. Line numbers in errors are 1-based.
pub fn read_csv<R: Read>(source: R, options: &CsvOptions) -> Result<LabeledDataset, HarnessError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let mut rows: Vec<Row> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| HarnessError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        rows.push((line, record.iter().map(str::to_string).collect()));
    }
    let header = match (options.header, rows.first()) {
        (Some(h), _) => h,
        (None, Some((_, first))) => {
            let skip = usize::from(options.transpose);
            first.iter().skip(skip).any(|f| !is_number(f))
        }
        (None, None) => false,
    };
    if header && !rows.is_empty() {
        rows.remove(0);
    }
    if rows.is_empty() {
        return Err(HarnessError::Empty);
    }
    if options.transpose {
        read_transposed(rows)
    } else {
        read_rows(rows)
    }
}

fn read_rows(rows: Vec<Row>) -> Result<LabeledDataset, HarnessError> {
    let width = check_width(&rows)?;
    if width < 2 {
        return Err(HarnessError::Empty);
    }
    let mut features = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for (line, fields) in &rows {
        labels.push(parse_label(*line, &fields[0])?);
        let row = fields[1..]
            .iter()
            .enumerate()
            .map(|(j, v)| parse_feature(*line, j + 2, v))
            .collect::<Result<Vec<f64>, _>>()?;
        features.push(row);
    }
    LabeledDataset::new(features, labels)
}

fn read_transposed(rows: Vec<Row>) -> Result<LabeledDataset, HarnessError> {
    let width = check_width(&rows)?;
    let names = usize::from(!is_number(&rows[0].1[0]));
    if width <= names || rows.len() < 2 {
        return Err(HarnessError::Empty);
    }
    let (label_line, label_fields) = &rows[0];
    let labels = label_fields[names..]
        .iter()
        .map(|v| parse_label(*label_line, v))
        .collect::<Result<Vec<bool>, _>>()?;
    let mut features = vec![Vec::with_capacity(rows.len() - 1); labels.len()];
    for (line, fields) in &rows[1..] {
        for (sample, v) in fields[names..].iter().enumerate() {
            features[sample].push(parse_feature(*line, sample + names + 1, v)?);
        }
    }
    LabeledDataset::new(features, labels)
}

/// Load a dataset from a UTF-8 CSV file.
pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<LabeledDataset, HarnessError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
    read_csv(std::io::BufReader::new(file), options)
}

/// Parameters of the planted-direction generator.
///
/// Each sample is scale * (noise * g + s (margin + spread |h|) u) for a
/// random unit vector u, Gaussian g orthogonal to u, standard normal h and
/// sign s = 2y - 1. The classes are separated by a gap of 2 scale margin
/// across the hyperplane through the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub margin: f64,
    pub noise: f64,
    pub spread: f64,
    pub scale: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(n: usize, d: usize, seed: u64) -> Self {
        SyntheticSpec { n, d, margin: 0.5, noise: 0.5, spread: 2.0, scale: 4.0, seed }
    }
}

/// Linearly separable data with ceil(n/2) positives.
pub fn synthetic(spec: &SyntheticSpec) -> Result<LabeledDataset, HarnessError> {
    if spec.n == 0 || spec.d == 0 {
        return Err(HarnessError::Empty);
    }
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let mut gauss = |len: usize| -> Vec<f64> { (0..len).map(|_| StandardNormal.sample(&mut rng)).collect() };
    let mut direction = gauss(spec.d);
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    direction.iter_mut().for_each(|v| *v /= norm);

    let mut labels: Vec<bool> = (0..spec.n).map(|i| i < spec.n.div_ceil(2)).collect();
    let mut features = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let g = gauss(spec.d + 1);
        let along: f64 = g[..spec.d].iter().zip(&direction).map(|(a, b)| a * b).sum();
        features.push((g, along));
    }
    let mut shuffle_rng = ChaCha12Rng::seed_from_u64(spec.seed ^ 0x5eed);
    labels.shuffle(&mut shuffle_rng);
    let rows = features
        .into_iter()
        .zip(&labels)
        .map(|((g, along), y)| {
            let sign = if *y { 1.0 } else { -1.0 };
            let offset = sign * (spec.margin + spec.spread * g[spec.d].abs());
            (0..spec.d)
                .map(|j| spec.scale * (spec.noise * (g[j] - along * direction[j]) + offset * direction[j]))
                .collect()
        })
        .collect();
    LabeledDataset::new(rows, labels)
}

/// Four points in the plane, separable through the origin.
pub fn toy_dataset() -> LabeledDataset {
    LabeledDataset::new(
        vec![vec![4.0, 2.0], vec![2.0, 4.0], vec![-2.0, -4.0], vec![-4.0, -2.0]],
        vec![true, true, false, false],
    )
    .expect("toy dataset is well formed")
}
