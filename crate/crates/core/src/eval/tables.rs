use std::path::Path;

use super::harness::{median_metrics, EvalRun, MetricRecord};
use super::team::TeamAnalysis;
use crate::error::Result;

fn write(path: &Path, comment: Option<&str>, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut out = Vec::new();
    if let Some(c) = comment {
        out.extend_from_slice(format!("# {c}\n").as_bytes());
    }
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// `metric, model, feature_set, run, value`.
pub fn write_metrics(path: impl AsRef<Path>, records: &[MetricRecord], comment: Option<&str>) -> Result<()> {
    write(
        path.as_ref(),
        comment,
        &["metric", "model", "feature_set", "run", "value"],
        records.iter().map(|r| {
            vec![r.metric.clone(), r.model.as_str().into(), r.feature_set.as_str().into(), r.run.to_string(), r.value.to_string()]
        }),
    )
}

/// Same layout with logloss replaced by its negation, for plotting.
pub fn write_metric_plot(path: impl AsRef<Path>, records: &[MetricRecord], comment: Option<&str>) -> Result<()> {
    let flipped: Vec<MetricRecord> = records
        .iter()
        .map(|r| {
            let mut r = r.clone();
            if r.metric == "logloss" {
                r.metric = "neg_logloss".into();
                r.value = -r.value;
            }
            r
        })
        .collect();
    write_metrics(path, &flipped, comment)
}

/// `metric, model, feature_set, median`.
pub fn write_metric_medians(path: impl AsRef<Path>, records: &[MetricRecord], comment: Option<&str>) -> Result<()> {
    write(
        path.as_ref(),
        comment,
        &["metric", "model", "feature_set", "median"],
        median_metrics(records).into_iter().map(|(m, k, s, v)| vec![m, k.as_str().into(), s.as_str().into(), v.to_string()]),
    )
}

/// `model, feature_set, run, seed, gameId, playId, fold, probability`.
pub fn write_predictions(path: impl AsRef<Path>, runs: &[EvalRun], comment: Option<&str>) -> Result<()> {
    let mut counter: std::collections::BTreeMap<(crate::classify::ModelKind, crate::features::FeatureSet), usize> =
        Default::default();
    let mut rows = Vec::new();
    for r in runs {
        let c = counter.entry((r.model, r.feature_set)).or_default();
        *c += 1;
        for ((k, f), p) in r.keys.iter().zip(&r.folds).zip(&r.oos_probs) {
            rows.push(vec![
                r.model.as_str().into(),
                r.feature_set.as_str().into(),
                c.to_string(),
                r.seed.to_string(),
                k.game_id.clone(),
                k.play_id.clone(),
                f.to_string(),
                p.to_string(),
            ]);
        }
    }
    write(
        path.as_ref(),
        comment,
        &["model", "feature_set", "run", "seed", "gameId", "playId", "fold", "probability"],
        rows,
    )
}

/// `team, gameId, playId, label, p_pre, p_hmm, delta`.
pub fn write_team_deltas(path: impl AsRef<Path>, a: &TeamAnalysis, comment: Option<&str>) -> Result<()> {
    write(
        path.as_ref(),
        comment,
        &["team", "gameId", "playId", "label", "p_pre", "p_hmm", "delta"],
        a.teams.iter().flat_map(|t| {
            t.plays.iter().map(move |d| {
                vec![
                    t.team.clone(),
                    d.key.game_id.clone(),
                    d.key.play_id.clone(),
                    d.label.to_string(),
                    d.p_pre.to_string(),
                    d.p_hmm.to_string(),
                    d.delta.to_string(),
                ]
            })
        }),
    )
}

/// `rank, team, n_motion_plays, n_improved, pct_improved, median_delta`,
/// followed by skipped teams with empty counts and a note.
pub fn write_team_summary(path: impl AsRef<Path>, a: &TeamAnalysis, comment: Option<&str>) -> Result<()> {
    let ranked = a.teams.iter().enumerate().map(|(i, t)| {
        vec![
            (i + 1).to_string(),
            t.team.clone(),
            t.n_motion_plays.to_string(),
            t.n_improved.to_string(),
            t.pct_improved.to_string(),
            t.median_delta.to_string(),
            String::new(),
        ]
    });
    let skipped = a.skipped.iter().map(|(t, why)| {
        vec![String::new(), t.clone(), String::new(), String::new(), String::new(), String::new(), why.clone()]
    });
    write(
        path.as_ref(),
        comment,
        &["rank", "team", "n_motion_plays", "n_improved", "pct_improved", "median_delta", "note"],
        ranked.chain(skipped),
    )
}
