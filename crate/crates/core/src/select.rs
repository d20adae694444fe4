//! Krum scoring, decoder-feedback confidences and user selection.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{FortaError, Result};
use crate::localizer::FrequencyProfile;

pub const DEFAULT_TEMPERATURE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationRule {
    #[serde(rename = "fedavg")]
    FedAvg,
    Krum,
    ModifiedKrum,
}

impl AggregationRule {
    pub const ALL: [AggregationRule; 3] = [Self::FedAvg, Self::Krum, Self::ModifiedKrum];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::FedAvg => "fedavg",
            Self::Krum => "krum",
            Self::ModifiedKrum => "modified_krum",
        }
    }
}

impl fmt::Display for AggregationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AggregationRule {
    type Err = FortaError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| FortaError::invalid_argument(format!("unknown aggregation rule `{s}`")))
    }
}

/// Symmetric matrix of squared distances, indexed by 1-based user ids.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    d: Vec<f64>,
}

impl DistanceMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, d: vec![0.0; n * n] }
    }

    /// Squared Euclidean distances between explicit points.
    pub fn from_points(points: &[Vec<f64>]) -> Self {
        let n = points.len();
        let mut m = Self::zeros(n);
        for j in 1..=n {
            for k in (j + 1)..=n {
                let v = points[j - 1]
                    .iter()
                    .zip(&points[k - 1])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                m.set(j, k, v);
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.d[(j - 1) * self.n + (k - 1)]
    }

    fn set(&mut self, j: usize, k: usize, v: f64) {
        self.d[(j - 1) * self.n + (k - 1)] = v;
        self.d[(k - 1) * self.n + (j - 1)] = v;
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            n: self.n,
            d: self.d.iter().map(|v| v * c).collect(),
        }
    }
}

/// Squared norms of the reconstructed pairwise differences.
pub fn distances(diffs: &BTreeMap<(usize, usize), Vec<f64>>, n_users: usize) -> Result<DistanceMatrix> {
    let mut m = DistanceMatrix::zeros(n_users);
    for j in 1..=n_users {
        for k in (j + 1)..=n_users {
            let v = diffs
                .get(&(j, k))
                .or_else(|| diffs.get(&(k, j)))
                .ok_or_else(|| FortaError::invalid_argument(format!("no reconstructed difference for pair ({j}, {k})")))?;
            m.set(j, k, v.iter().map(|x| x * x).sum());
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub scores: Vec<f64>,
    /// `neighbor_sets[i - 1]` is `M_i`, ascending.
    pub neighbor_sets: Vec<Vec<usize>>,
}

pub fn krum_scores(dist: &DistanceMatrix, byzantine: usize) -> Result<ScoreTable> {
    let n = dist.n();
    if n <= byzantine + 2 {
        return Err(FortaError::invalid_configuration(format!(
            "Krum needs N > A + 2 (N = {n}, A = {byzantine})"
        )));
    }
    let keep = n - byzantine - 2;
    let mut scores = Vec::with_capacity(n);
    let mut neighbor_sets = Vec::with_capacity(n);
    for i in 1..=n {
        let mut others: Vec<usize> = (1..=n).filter(|&j| j != i).collect();
        others.sort_by(|&a, &b| dist.get(i, a).total_cmp(&dist.get(i, b)).then(a.cmp(&b)));
        others.truncate(keep);
        others.sort_unstable();
        scores.push(others.iter().map(|&j| dist.get(i, j)).sum());
        neighbor_sets.push(others);
    }
    Ok(ScoreTable { scores, neighbor_sets })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceVector {
    pub lambda: Vec<f64>,
    pub temperature: f64,
}

pub fn soft_confidences(profile: &FrequencyProfile, temperature: f64) -> Result<ConfidenceVector> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(FortaError::invalid_argument(format!("temperature must be positive, got {temperature}")));
    }
    let max = profile.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let logits: Vec<f64> = profile.counts.iter().map(|&c| c as f64 / max / temperature).collect();
    let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = exp.iter().sum();
    Ok(ConfidenceVector {
        lambda: exp.into_iter().map(|e| e / total).collect(),
        temperature,
    })
}

/// `λ_i S_i + (1 − λ_i) S_min` with `S_min = min S / (N − A − 2)`.
pub fn modified_scores(table: &ScoreTable, conf: &ConfidenceVector, n_users: usize, byzantine: usize) -> Result<Vec<f64>> {
    if table.scores.len() != n_users || conf.lambda.len() != n_users {
        return Err(FortaError::invalid_argument("scores and confidences cover different user counts"));
    }
    if n_users <= byzantine + 2 {
        return Err(FortaError::invalid_configuration(format!(
            "Krum needs N > A + 2 (N = {n_users}, A = {byzantine})"
        )));
    }
    let s_min = table.scores.iter().copied().fold(f64::INFINITY, f64::min) / (n_users - byzantine - 2) as f64;
    Ok(table
        .scores
        .iter()
        .zip(&conf.lambda)
        .map(|(s, l)| l * s + (1.0 - l) * s_min)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionSet {
    /// Selected user ids, ascending.
    pub users: Vec<usize>,
    pub rule: AggregationRule,
}

/// The `m` lowest scores (ties to the lower index); FedAvg takes everyone.
pub fn select(scores: &[f64], m: usize, rule: AggregationRule) -> Result<SelectionSet> {
    let n = scores.len();
    if rule == AggregationRule::FedAvg {
        return Ok(SelectionSet {
            users: (1..=n).collect(),
            rule,
        });
    }
    if m == 0 || m > n {
        return Err(FortaError::invalid_argument(format!("cannot select {m} of {n} users")));
    }
    let mut order: Vec<usize> = (1..=n).collect();
    order.sort_by(|&a, &b| scores[a - 1].total_cmp(&scores[b - 1]).then(a.cmp(&b)));
    order.truncate(m);
    order.sort_unstable();
    Ok(SelectionSet { users: order, rule })
}
