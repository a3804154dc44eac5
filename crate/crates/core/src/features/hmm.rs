use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FeatureRow, HMM_NAMES};
use crate::error::{Error, Result};
use crate::hmm::{argmax, DecodedPlay, PosteriorMatrix, N_STATES};

/// The four play-level features derived from decoded guarding sequences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HmmFeatures {
    pub total_switches: usize,
    pub n_switching_defenders: usize,
    /// Nats.
    pub mean_entropy: f64,
    pub per_play_re: f64,
}

impl HmmFeatures {
    /// Values in [`HMM_NAMES`] order.
    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.per_play_re, self.total_switches as f64, self.n_switching_defenders as f64, self.mean_entropy]
    }
}

/// Per-frame most probable state; ties go to the lowest index.
pub fn argmax_sequence(post: &PosteriorMatrix) -> Vec<usize> {
    post.probs.iter().map(|r| argmax(r)).collect()
}

/// `(total switches, defenders with at least one switch)`.
pub fn switch_stats(sequences: &[Vec<usize>]) -> (usize, usize) {
    let mut total = 0;
    let mut movers = 0;
    for s in sequences {
        let n = s.windows(2).filter(|w| w[0] != w[1]).count();
        total += n;
        movers += usize::from(n > 0);
    }
    (total, movers)
}

fn entropy(p: impl Iterator<Item = f64>) -> f64 {
    -p.filter(|&q| q > 0.0).map(|q| q * q.ln()).sum::<f64>()
}

/// Mean over defenders of the entropy of each defender's empirical state
/// distribution.
pub fn mean_entropy(sequences: &[Vec<usize>]) -> f64 {
    if sequences.is_empty() {
        return 0.0;
    }
    let total: f64 = sequences
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| {
            let mut counts = [0usize; N_STATES];
            for &k in s {
                counts[k] += 1;
            }
            let t = s.len() as f64;
            entropy(counts.iter().map(|&c| c as f64 / t))
        })
        .sum();
    total / sequences.len() as f64
}

/// Diagnostic: mean over defenders of the entropy of the time-averaged
/// posterior. Not used as a model feature.
pub fn soft_entropy(posteriors: &[PosteriorMatrix]) -> f64 {
    if posteriors.is_empty() {
        return 0.0;
    }
    let total: f64 = posteriors
        .iter()
        .filter(|p| p.n_frames() > 0)
        .map(|p| {
            let t = p.n_frames() as f64;
            let avg: [f64; N_STATES] = std::array::from_fn(|j| p.probs.iter().map(|r| r[j]).sum::<f64>() / t);
            entropy(avg.into_iter())
        })
        .sum();
    total / posteriors.len() as f64
}

pub fn play_features(decoded: &DecodedPlay, per_play_re: f64) -> HmmFeatures {
    let seqs: Vec<Vec<usize>> = decoded.posteriors.iter().map(argmax_sequence).collect();
    let (total_switches, n_switching_defenders) = switch_stats(&seqs);
    HmmFeatures { total_switches, n_switching_defenders, mean_entropy: mean_entropy(&seqs), per_play_re }
}

/// Fill `rows[i].hmm` from the decodes and the fitted play effects (keyed
/// `game/play`). Every row needs both.
pub fn attach_hmm_features(
    rows: &mut [FeatureRow],
    w_hat: &BTreeMap<String, f64>,
    decodes: &[DecodedPlay],
) -> Result<()> {
    let by_key: BTreeMap<_, _> = decodes.iter().map(|d| (&d.key, d)).collect();
    for row in rows.iter_mut() {
        let name = row.key.to_string();
        let w = *w_hat.get(&name).ok_or_else(|| Error::MissingPlayEffect(name.clone()))?;
        let d = by_key
            .get(&row.key)
            .ok_or_else(|| Error::InvalidData(format!("play {name} has no decoded posteriors")))?;
        row.hmm = Some(play_features(d, w).to_vec());
    }
    Ok(())
}

pub const SUMMARY_STATS: [&str; 6] = ["Min.", "1st Qu.", "Median", "Mean", "3rd Qu.", "Max."];
pub const SUMMARY_COLUMNS: [&str; 4] = ["Total switches", "# switching defenders", "avg. entropy", "RE/play"];

/// Linear-interpolation quantile of sorted data (`(n - 1) p` positions).
pub fn quantile_sorted(x: &[f64], p: f64) -> f64 {
    let h = (x.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    x[lo] + (h - lo as f64) * (x[hi] - x[lo])
}

/// Six summary statistics for each of the four HMM features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmSummary {
    /// `values[stat][column]`, rows in [`SUMMARY_STATS`] order and columns
    /// in [`SUMMARY_COLUMNS`] order.
    pub values: [[f64; 4]; 6],
    pub n_plays: usize,
}

impl HmmSummary {
    pub fn from_rows(rows: &[FeatureRow]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Empty("feature rows"));
        }
        let idx = |n: &str| HMM_NAMES.iter().position(|h| *h == n).expect("known name");
        let order = [idx("sum_switches"), idx("n_player_changes"), idx("avg_entropy"), idx("per_play_RE")];
        let mut cols: [Vec<f64>; 4] = Default::default();
        for r in rows {
            let h = r.hmm.as_ref().ok_or_else(|| Error::MissingPlayEffect(r.key.to_string()))?;
            for (c, &i) in order.iter().enumerate() {
                cols[c].push(h[i]);
            }
        }
        let mut values = [[0.0; 4]; 6];
        for (c, col) in cols.iter_mut().enumerate() {
            col.sort_by(f64::total_cmp);
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let stats = [
                col[0],
                quantile_sorted(col, 0.25),
                quantile_sorted(col, 0.5),
                mean,
                quantile_sorted(col, 0.75),
                col[col.len() - 1],
            ];
            for (s, v) in stats.into_iter().enumerate() {
                values[s][c] = v;
            }
        }
        Ok(Self { values, n_plays: rows.len() })
    }

    /// Fixed-width text table, two decimals.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<10}", "statistic");
        for c in SUMMARY_COLUMNS {
            let _ = write!(out, " | {c:>21}");
        }
        out.push('\n');
        for (s, name) in SUMMARY_STATS.iter().enumerate() {
            let _ = write!(out, "{name:<10}");
            for v in self.values[s] {
                let _ = write!(out, " | {:>21.2}", v + 0.0);
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut head = vec!["statistic"];
        head.extend(SUMMARY_COLUMNS);
        w.write_record(&head)?;
        for (s, name) in SUMMARY_STATS.iter().enumerate() {
            let mut rec = vec![name.to_string()];
            rec.extend(self.values[s].iter().map(|v| format!("{:.2}", v + 0.0)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}
