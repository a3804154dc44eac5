use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::harness::{design, fit_rows, EvalConfig};
use crate::classify::ModelKind;
use crate::error::Result;
use crate::features::{quantile_sorted, FeatureRow, FeatureSet};
use crate::rng;
use crate::tracking::PlayKey;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayDelta {
    pub key: PlayKey,
    pub label: u8,
    pub p_pre: f64,
    pub p_hmm: f64,
    /// `p_correct(hmm) - p_correct(pre)`.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamBenefit {
    pub team: String,
    pub plays: Vec<PlayDelta>,
    pub n_motion_plays: usize,
    pub n_improved: usize,
    pub pct_improved: f64,
    pub median_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamAnalysis {
    /// Sorted by median delta, largest first, then team id.
    pub teams: Vec<TeamBenefit>,
    /// Teams that could not be analysed, with the reason.
    pub skipped: Vec<(String, String)>,
}

/// Probability assigned to the observed coverage.
pub fn p_correct(p: f64, label: u8) -> f64 {
    if label == 1 {
        p
    } else {
        1.0 - p
    }
}

fn analyse(rows: &[FeatureRow], team: &str, cfg: &EvalConfig, seed: u64) -> Result<std::result::Result<TeamBenefit, String>> {
    let (held, rest): (Vec<FeatureRow>, Vec<FeatureRow>) = rows.iter().cloned().partition(|r| r.offense == team);
    if held.is_empty() {
        return Ok(Err("no motion plays".into()));
    }
    let rest_pos = rest.iter().filter(|r| r.label == Some(1)).count();
    if rest_pos == 0 || rest_pos == rest.len() {
        return Ok(Err("training plays hold a single coverage class".into()));
    }
    let pre = fit_rows(&rest, ModelKind::Gbt, FeatureSet::Pre, cfg, seed)?;
    let hmm = fit_rows(&rest, ModelKind::Gbt, FeatureSet::Hmm, cfg, seed)?;
    let (xp, y) = design(&held, FeatureSet::Pre)?;
    let (xh, _) = design(&held, FeatureSet::Hmm)?;
    let pp = pre.predict_proba(&xp)?;
    let ph = hmm.predict_proba(&xh)?;
    let plays: Vec<PlayDelta> = held
        .iter()
        .zip(y)
        .zip(pp.into_iter().zip(ph))
        .map(|((r, label), (a, b))| {
            let label = label as u8;
            PlayDelta { key: r.key.clone(), label, p_pre: a, p_hmm: b, delta: p_correct(b, label) - p_correct(a, label) }
        })
        .collect();
    let n = plays.len();
    let n_improved = plays.iter().filter(|d| d.delta > 0.0).count();
    let mut deltas: Vec<f64> = plays.iter().map(|d| d.delta).collect();
    deltas.sort_by(f64::total_cmp);
    Ok(Ok(TeamBenefit {
        team: team.to_string(),
        n_motion_plays: n,
        n_improved,
        pct_improved: n_improved as f64 / n as f64,
        median_delta: quantile_sorted(&deltas, 0.5),
        plays,
    }))
}

/// Leave-one-offense-out comparison of boosted models on pre-motion and
/// HMM feature sets.
pub fn team_benefit(rows: &[FeatureRow], cfg: &EvalConfig, seed: u64) -> Result<TeamAnalysis> {
    let mut teams: Vec<String> = rows.iter().map(|r| r.offense.clone()).collect();
    teams.sort();
    teams.dedup();
    let results: Vec<(String, std::result::Result<TeamBenefit, String>)> = teams
        .par_iter()
        .enumerate()
        .map(|(i, t)| Ok((t.clone(), analyse(rows, t, cfg, rng::derive_seed(seed, "eval.team", i as u64))?)))
        .collect::<Result<_>>()?;
    let mut out = TeamAnalysis { teams: Vec::new(), skipped: Vec::new() };
    for (t, r) in results {
        match r {
            Ok(b) => out.teams.push(b),
            Err(why) => {
                tracing::warn!(team = %t, reason = %why, "team skipped");
                out.skipped.push((t, why));
            }
        }
    }
    out.teams.sort_by(|a, b| b.median_delta.total_cmp(&a.median_delta).then_with(|| a.team.cmp(&b.team)));
    Ok(out)
}
