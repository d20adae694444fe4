//! Desk-scale classification tasks: synthetic Gaussian blobs or a CSV file.

use std::io::Read;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};

use crate::error::{FortaError, Result};
use crate::rng::{self, purpose};

#[derive(Debug, Clone, PartialEq)]
pub struct BlobSpec {
    pub features: usize,
    pub classes: usize,
    /// Within-class standard deviation.
    pub spread: f64,
    /// Standard deviation of the class centres.
    pub center_scale: f64,
    pub samples_per_user: usize,
    pub test_samples: usize,
}

impl Default for BlobSpec {
    fn default() -> Self {
        Self {
            features: 16,
            classes: 4,
            spread: 1.0,
            center_scale: 1.0,
            samples_per_user: 200,
            test_samples: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvSpec {
    pub path: PathBuf,
    pub test_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TaskSpec {
    Blobs(BlobSpec),
    Csv(CsvSpec),
}

impl Default for TaskSpec {
    fn default() -> Self {
        TaskSpec::Blobs(BlobSpec::default())
    }
}

impl TaskSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            TaskSpec::Blobs(b) => {
                if b.features == 0 || b.classes < 2 || b.samples_per_user == 0 || b.test_samples == 0 {
                    return Err(FortaError::invalid_configuration(
                        "blob task needs features ≥ 1, classes ≥ 2 and non-empty splits",
                    ));
                }
                if !(b.spread > 0.0 && b.center_scale > 0.0) {
                    return Err(FortaError::invalid_configuration("blob spread and center_scale must be positive"));
                }
            }
            TaskSpec::Csv(c) => {
                if !(c.test_fraction > 0.0 && c.test_fraction < 1.0) {
                    return Err(FortaError::invalid_configuration("test_fraction must lie in (0, 1)"));
                }
            }
        }
        Ok(())
    }
}

/// Row-major feature matrix with integer labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub features: usize,
    pub x: Vec<f64>,
    pub y: Vec<usize>,
}

impl Dataset {
    pub fn new(features: usize) -> Self {
        Self {
            features,
            x: Vec::new(),
            y: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.features..(i + 1) * self.features]
    }

    pub fn push(&mut self, row: &[f64], label: usize) {
        debug_assert_eq!(row.len(), self.features);
        self.x.extend_from_slice(row);
        self.y.push(label);
    }

    fn subset(&self, rows: &[usize]) -> Dataset {
        let mut out = Dataset::new(self.features);
        for &r in rows {
            out.push(self.row(r), self.y[r]);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub classes: usize,
    pub features: usize,
    /// `users[i - 1]` is the local dataset of user `i`.
    pub users: Vec<Dataset>,
    pub test: Dataset,
}

impl Task {
    /// Every user's data stacked together.
    pub fn pooled_train(&self) -> Dataset {
        let mut out = Dataset::new(self.features);
        for u in &self.users {
            out.x.extend_from_slice(&u.x);
            out.y.extend_from_slice(&u.y);
        }
        out
    }
}

pub fn build_task(spec: &TaskSpec, n_users: usize, seed: u64) -> Result<Task> {
    spec.validate()?;
    match spec {
        TaskSpec::Blobs(b) => Ok(blobs(b, n_users, seed)),
        TaskSpec::Csv(c) => {
            let file = std::fs::File::open(&c.path).map_err(|e| {
                FortaError::invalid_configuration(format!("cannot open {}: {e}", c.path.display()))
            })?;
            let (data, classes) = read_csv(file)?;
            split_csv(data, classes, n_users, c.test_fraction, seed)
        }
    }
}

fn blobs(spec: &BlobSpec, n_users: usize, seed: u64) -> Task {
    let mut rng = rng::stream(seed, &[purpose::DATA]);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let centers: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| (0..spec.features).map(|_| spec.center_scale * unit.sample(&mut rng)).collect())
        .collect();
    let draw = |count: usize, rng: &mut rand_chacha::ChaCha8Rng| {
        let mut d = Dataset::new(spec.features);
        let mut row = vec![0.0; spec.features];
        for i in 0..count {
            // balanced classes
            let label = i % spec.classes;
            for (r, c) in row.iter_mut().zip(&centers[label]) {
                *r = c + spec.spread * unit.sample(rng);
            }
            d.push(&row, label);
        }
        d
    };
    let users = (0..n_users).map(|_| draw(spec.samples_per_user, &mut rng)).collect();
    let test = draw(spec.test_samples, &mut rng);
    Task {
        classes: spec.classes,
        features: spec.features,
        users,
        test,
    }
}

/// Reads a CSV with a header row, a `label` column of non-negative integers
/// and numeric features everywhere else. Returns the data and class count.
pub fn read_csv<R: Read>(reader: R) -> Result<(Dataset, usize)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| FortaError::Ingestion { line: 1, message: e.to_string() })?
        .clone();
    let label_col = headers
        .iter()
        .position(|h| h.trim() == "label")
        .ok_or_else(|| FortaError::Ingestion { line: 1, message: "no `label` column in header".into() })?;
    let features = headers.len() - 1;
    if features == 0 {
        return Err(FortaError::Ingestion { line: 1, message: "no feature columns".into() });
    }
    let mut data = Dataset::new(features);
    let mut row = Vec::with_capacity(features);
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| FortaError::Ingestion {
            line: e.position().map_or(i + 2, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(i + 2, |p| p.line() as usize);
        if record.len() != headers.len() {
            return Err(FortaError::Ingestion {
                line,
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        row.clear();
        let mut label = 0;
        for (c, field) in record.iter().enumerate() {
            let field = field.trim();
            if c == label_col {
                label = field.parse::<usize>().map_err(|_| FortaError::Ingestion {
                    line,
                    message: format!("label `{field}` is not a non-negative integer"),
                })?;
            } else {
                let v = field.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| FortaError::Ingestion {
                    line,
                    message: format!("column `{}`: `{field}` is not a finite number", &headers[c]),
                })?;
                row.push(v);
            }
        }
        data.push(&row, label);
    }
    if data.is_empty() {
        return Err(FortaError::Ingestion { line: 2, message: "no data rows".into() });
    }
    let classes = data.y.iter().copied().max().unwrap_or(0) + 1;
    if classes < 2 {
        return Err(FortaError::Ingestion { line: 2, message: "need at least two classes".into() });
    }
    Ok((data, classes))
}

fn split_csv(data: Dataset, classes: usize, n_users: usize, test_fraction: f64, seed: u64) -> Result<Task> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng::stream(seed, &[purpose::DATA]));
    let n_test = ((data.len() as f64 * test_fraction).round() as usize).max(1);
    let (test_rows, train_rows) = order.split_at(n_test.min(data.len()));
    if train_rows.len() < n_users {
        return Err(FortaError::InsufficientData(format!(
            "{} training rows cannot cover {n_users} users",
            train_rows.len()
        )));
    }
    let mut train = data.subset(train_rows);
    let mut test = data.subset(test_rows);
    standardize(&mut train, &mut test);
    let users = (0..n_users)
        .map(|u| {
            let rows: Vec<usize> = (u..train.len()).step_by(n_users).collect();
            train.subset(&rows)
        })
        .collect();
    Ok(Task {
        classes,
        features: data.features,
        users,
        test,
    })
}

/// Zero mean and unit variance per feature, using training statistics only.
pub fn standardize(train: &mut Dataset, test: &mut Dataset) {
    let f = train.features;
    let n = train.len() as f64;
    let mut mean = vec![0.0; f];
    for r in 0..train.len() {
        for (m, v) in mean.iter_mut().zip(train.row(r)) {
            *m += v / n;
        }
    }
    let mut var = vec![0.0; f];
    for r in 0..train.len() {
        for ((s, v), m) in var.iter_mut().zip(train.row(r)).zip(&mean) {
            *s += (v - m).powi(2) / n;
        }
    }
    let scale: Vec<f64> = var.iter().map(|v| if *v > 0.0 { 1.0 / v.sqrt() } else { 1.0 }).collect();
    for d in [train, test] {
        for row in d.x.chunks_mut(f) {
            for ((v, m), s) in row.iter_mut().zip(&mean).zip(&scale) {
                *v = (*v - m) * s;
            }
        }
    }
}
