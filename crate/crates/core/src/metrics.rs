//! Macro and micro evaluation metrics.
//!
//! Macro: per-round bias (signed mean) and diversity (population standard
//! deviation) averaged over time, their sim-vs-real deltas, and DTW/Pearson
//! over the mean-attitude series. Micro: accuracy, macro-F1, MAE and the
//! production/consumption homogeneity used for echo-chamber analysis.

use std::collections::BTreeMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate::{cosine, Embedder, SparseVector};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("empty input")]
    Empty,
    #[error("round {0} has no attitudes")]
    EmptyRound(usize),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("correlation undefined for constant series")]
    UndefinedCorrelation,
    #[error("at least two points are required")]
    TooShort,
}

/// Population attitudes per simulated round.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AttitudeTrace {
    pub rounds: Vec<Vec<f64>>,
}

impl AttitudeTrace {
    pub fn new(rounds: Vec<Vec<f64>>) -> Self {
        AttitudeTrace { rounds }
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn push(&mut self, round: Vec<f64>) {
        self.rounds.push(round);
    }

    /// Per-round (mean, population std).
    pub fn round_stats(&self) -> Result<Vec<(f64, f64)>, MetricError> {
        self.rounds
            .iter()
            .enumerate()
            .map(|(t, r)| mean_std(r).ok_or(MetricError::EmptyRound(t)))
            .collect()
    }

    pub fn mean_series(&self) -> Result<Vec<f64>, MetricError> {
        Ok(self.round_stats()?.into_iter().map(|(m, _)| m).collect())
    }
}

pub(crate) fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasDiversity {
    pub bias: f64,
    pub diversity: f64,
}

/// Time-averaged bias and diversity from per-round (mean, std) pairs.
pub fn bias_diversity_from_stats(stats: &[(f64, f64)]) -> Result<BiasDiversity, MetricError> {
    if stats.is_empty() {
        return Err(MetricError::Empty);
    }
    let n = stats.len() as f64;
    Ok(BiasDiversity {
        bias: stats.iter().map(|s| s.0).sum::<f64>() / n,
        diversity: stats.iter().map(|s| s.1).sum::<f64>() / n,
    })
}

pub fn bias_and_diversity(trace: &AttitudeTrace) -> Result<BiasDiversity, MetricError> {
    bias_diversity_from_stats(&trace.round_stats()?)
}

/// `(|bias_sim - bias_real|, |div_sim - div_real|)`.
pub fn deltas(sim: BiasDiversity, real: BiasDiversity) -> (f64, f64) {
    ((sim.bias - real.bias).abs(), (sim.diversity - real.diversity).abs())
}

/// Unconstrained dynamic time warping with absolute-difference cost.
pub fn dtw(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    if x.is_empty() || y.is_empty() {
        return Err(MetricError::Empty);
    }
    let m = y.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for &xi in x {
        cur[0] = f64::INFINITY;
        for j in 1..=m {
            let best = prev[j - 1].min(prev[j]).min(cur[j - 1]);
            cur[j] = (xi - y[j - 1]).abs() + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m])
}

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(MetricError::TooShort);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricError::UndefinedCorrelation);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub accuracy: f64,
    pub macro_f1: f64,
}

/// Accuracy and macro-F1 over the declared label set. Classes that never
/// occur in predictions or truth contribute an F1 of zero. Predictions
/// outside the label set only count as misses.
pub fn classification_metrics<L: Eq + Hash + Clone>(
    predicted: &[L],
    truth: &[L],
    labels: &[L],
) -> Result<Classification, MetricError> {
    if predicted.len() != truth.len() {
        return Err(MetricError::LengthMismatch(predicted.len(), truth.len()));
    }
    if truth.is_empty() {
        return Err(MetricError::Empty);
    }
    let correct = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    let accuracy = correct as f64 / truth.len() as f64;
    if labels.is_empty() {
        return Ok(Classification {
            accuracy,
            macro_f1: 0.0,
        });
    }
    let f1_sum: f64 = labels
        .iter()
        .map(|label| {
            let mut tp = 0usize;
            let mut fp = 0usize;
            let mut fn_ = 0usize;
            for (p, t) in predicted.iter().zip(truth) {
                match (p == label, t == label) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    _ => {}
                }
            }
            if tp == 0 {
                0.0
            } else {
                let precision = tp as f64 / (tp + fp) as f64;
                let recall = tp as f64 / (tp + fn_) as f64;
                2.0 * precision * recall / (precision + recall)
            }
        })
        .sum();
    Ok(Classification {
        accuracy,
        macro_f1: f1_sum / labels.len() as f64,
    })
}

pub fn mae(a: &[f64], b: &[f64]) -> Result<f64, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

fn mean_vector<'a>(vs: impl Iterator<Item = &'a SparseVector>, dim: usize) -> SparseVector {
    let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
    let mut n = 0usize;
    for v in vs {
        n += 1;
        for &(i, w) in v.entries() {
            *acc.entry(i).or_default() += f64::from(w);
        }
    }
    let n = n.max(1) as f64;
    SparseVector::from_entries(dim, acc.into_iter().map(|(i, w)| (i, (w / n) as f32)).collect())
}

/// Cosine between the mean production vector and the mean consumption vector.
/// `None` when either corpus is empty.
pub fn homogeneity<E: Embedder + ?Sized>(
    production: &[String],
    consumption: &[String],
    embedder: &E,
) -> Option<f64> {
    if production.is_empty() || consumption.is_empty() {
        return None;
    }
    let p: Vec<_> = production.iter().map(|t| embedder.embed(t)).collect();
    let c: Vec<_> = consumption.iter().map(|t| embedder.embed(t)).collect();
    let dim = embedder.dimension();
    Some(cosine(&mean_vector(p.iter(), dim), &mean_vector(c.iter(), dim)))
}

/// Mean homogeneity over agents that have both corpora.
pub fn population_homogeneity<E: Embedder + ?Sized>(
    corpora: &[(Vec<String>, Vec<String>)],
    embedder: &E,
) -> Option<f64> {
    let vals: Vec<f64> = corpora
        .iter()
        .filter_map(|(p, c)| homogeneity(p, c, embedder))
        .collect();
    if vals.is_empty() {
        None
    } else {
        Some(vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

/// Macro comparison of a simulated trace against an empirical one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MacroReport {
    pub sim: BiasDiversity,
    pub real: BiasDiversity,
    pub delta_bias: f64,
    pub delta_div: f64,
    pub dtw: f64,
    /// Absent when either mean series is constant.
    pub pearson: Option<f64>,
}

pub fn macro_report_from_stats(
    sim: &[(f64, f64)],
    real: &[(f64, f64)],
) -> Result<MacroReport, MetricError> {
    let s = bias_diversity_from_stats(sim)?;
    let r = bias_diversity_from_stats(real)?;
    let (delta_bias, delta_div) = deltas(s, r);
    let xs: Vec<f64> = sim.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = real.iter().map(|p| p.0).collect();
    let pearson = match pearson(&xs, &ys) {
        Ok(v) => Some(v),
        Err(MetricError::UndefinedCorrelation | MetricError::TooShort) => None,
        Err(MetricError::LengthMismatch(..)) => None,
        Err(e) => return Err(e),
    };
    Ok(MacroReport {
        sim: s,
        real: r,
        delta_bias,
        delta_div,
        dtw: dtw(&xs, &ys)?,
        pearson,
    })
}

pub fn macro_report(sim: &AttitudeTrace, real: &AttitudeTrace) -> Result<MacroReport, MetricError> {
    macro_report_from_stats(&sim.round_stats()?, &real.round_stats()?)
}
