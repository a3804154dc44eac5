use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PROB_CLIP: f64 = 1e-12;

pub fn clip(p: f64) -> f64 {
    p.clamp(PROB_CLIP, 1.0 - PROB_CLIP)
}

fn check(y: &[f64], p: &[f64]) -> Result<()> {
    if y.len() != p.len() {
        return Err(Error::Dimension(format!("{} labels vs {} predictions", y.len(), p.len())));
    }
    if y.is_empty() {
        return Err(Error::Empty("prediction set"));
    }
    Ok(())
}

/// Mean negative Bernoulli log-likelihood on clipped probabilities.
pub fn log_loss(y: &[f64], p: &[f64]) -> Result<f64> {
    check(y, p)?;
    let s: f64 = y
        .iter()
        .zip(p)
        .map(|(&yi, &pi)| {
            let q = clip(pi);
            -(yi * q.ln() + (1.0 - yi) * (1.0 - q).ln())
        })
        .sum();
    Ok(s / y.len() as f64)
}

/// Share of plays with `1{p >= 0.5} == y`.
pub fn accuracy(y: &[f64], p: &[f64]) -> Result<f64> {
    check(y, p)?;
    let hits = y.iter().zip(p).filter(|(&yi, &pi)| (pi >= 0.5) == (yi >= 0.5)).count();
    Ok(hits as f64 / y.len() as f64)
}

/// Midrank estimate of the area under the ROC curve.
pub fn auc(y: &[f64], p: &[f64]) -> Result<f64> {
    check(y, p)?;
    let n_pos = y.iter().filter(|&&v| v >= 0.5).count();
    let n_neg = y.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass(y[0]));
    }
    let mut idx: Vec<usize> = (0..y.len()).collect();
    idx.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && p[idx[j + 1]] == p[idx[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * idx[i..=j].iter().filter(|&&k| y[k] >= 0.5).count() as f64;
        i = j + 1;
    }
    let np = n_pos as f64;
    Ok((rank_sum - np * (np + 1.0) / 2.0) / (np * n_neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub auc: f64,
    pub logloss: f64,
}

impl Metrics {
    pub fn compute(y: &[f64], p: &[f64]) -> Result<Self> {
        Ok(Self { accuracy: accuracy(y, p)?, auc: auc(y, p)?, logloss: log_loss(y, p)? })
    }
}
