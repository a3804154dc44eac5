use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{split, stratified_folds, Metrics};
use crate::classify::{train, EnetGrid, FeatureMatrix, GbtGrid, ModelKind, TrainedModel, TuneGrid};
use crate::error::{Error, Result};
use crate::features::{FeatureRow, FeatureSet};
use crate::rng;
use crate::tracking::PlayKey;

/// Attempts at drawing outer folds whose training parts hold both classes.
const FOLD_REDRAWS: u64 = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub outer_folds: usize,
    pub inner_folds: usize,
    pub enet: EnetGrid,
    pub gbt: GbtGrid,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { outer_folds: 5, inner_folds: 5, enet: EnetGrid::default(), gbt: GbtGrid::default() }
    }
}

impl EvalConfig {
    pub fn grid(&self, kind: ModelKind) -> TuneGrid {
        match kind {
            ModelKind::Enet => TuneGrid::ElasticNet(self.enet.clone()),
            ModelKind::Gbt => TuneGrid::Gbt(self.gbt.clone()),
        }
    }
}

/// Design matrix and 0/1 labels for `set`; every row must be labelled and
/// carry the requested features.
pub fn design(rows: &[FeatureRow], set: FeatureSet) -> Result<(FeatureMatrix, Vec<f64>)> {
    if rows.is_empty() {
        return Err(Error::Empty("feature rows"));
    }
    let mut data = Vec::with_capacity(rows.len());
    let mut y = Vec::with_capacity(rows.len());
    for r in rows {
        let label = r.label.ok_or_else(|| Error::InvalidData(format!("play {} has no coverage label", r.key)))?;
        y.push(f64::from(label));
        data.push(r.values(set).ok_or_else(|| Error::MissingPlayEffect(r.key.to_string()))?);
    }
    Ok((FeatureMatrix::new(set.names(), &data)?, y))
}

/// Tune on the given rows and refit.
pub fn fit_rows(rows: &[FeatureRow], kind: ModelKind, set: FeatureSet, cfg: &EvalConfig, seed: u64) -> Result<TrainedModel> {
    let (x, y) = design(rows, set)?;
    train(&x, &y, &cfg.grid(kind), cfg.inner_folds, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRun {
    pub seed: u64,
    pub model: ModelKind,
    pub feature_set: FeatureSet,
    pub keys: Vec<PlayKey>,
    /// Outer fold of each play, `1..=k`.
    pub folds: Vec<usize>,
    pub oos_probs: Vec<f64>,
    pub metrics: Metrics,
}

fn both_classes(y: &[f64], idx: &[usize]) -> bool {
    let pos = idx.iter().filter(|&&i| y[i] == 1.0).count();
    pos > 0 && pos < idx.len()
}

/// Stratified outer folds; redrawn when a training part or a training
/// part's inner split would hold a single class.
fn outer_folds(y: &[f64], k: usize, seed: u64) -> Result<Vec<usize>> {
    for attempt in 0..FOLD_REDRAWS {
        let ids = stratified_folds(y, k, rng::derive_seed(seed, "eval.outer", attempt))?;
        if (0..k).all(|f| both_classes(y, &split(&ids, f).0)) {
            return Ok(ids);
        }
        tracing::debug!(attempt, "outer folds redrawn");
    }
    Err(Error::SingleClass(y[0]))
}

/// Out-of-sample probabilities for every play from `k` outer folds, each
/// model tuned by inner cross-validation on its training part.
pub fn cross_fit(rows: &[FeatureRow], kind: ModelKind, set: FeatureSet, cfg: &EvalConfig, seed: u64) -> Result<EvalRun> {
    let (x, y) = design(rows, set)?;
    let k = cfg.outer_folds;
    let ids = outer_folds(&y, k, seed)?;
    let grid = cfg.grid(kind);
    let parts: Vec<(Vec<usize>, Vec<f64>)> = (0..k)
        .into_par_iter()
        .map(|f| {
            let (tr, te) = split(&ids, f);
            let yt: Vec<f64> = tr.iter().map(|&i| y[i]).collect();
            let model = train(&x.rows(&tr), &yt, &grid, cfg.inner_folds, rng::derive_seed(seed, "eval.inner", f as u64))?;
            Ok((te.clone(), model.predict_proba(&x.rows(&te))?))
        })
        .collect::<Result<_>>()?;
    let mut probs = vec![f64::NAN; y.len()];
    for (te, p) in parts {
        for (i, v) in te.into_iter().zip(p) {
            probs[i] = v;
        }
    }
    debug_assert!(probs.iter().all(|p| p.is_finite()));
    Ok(EvalRun {
        seed,
        model: kind,
        feature_set: set,
        keys: rows.iter().map(|r| r.key.clone()).collect(),
        folds: ids.iter().map(|f| f + 1).collect(),
        metrics: Metrics::compute(&y, &probs)?,
        oos_probs: probs,
    })
}

/// Seeds for `repeats` runs derived from one root seed.
pub fn run_seeds(root: u64, repeats: usize) -> Vec<u64> {
    (0..repeats as u64).map(|r| rng::derive_seed(root, "eval.run", r)).collect()
}

/// `cross_fit` for every `(seed, model, feature set)` combination. Runs are
/// ordered by model, feature set, then seed index.
pub fn repeated_eval(
    rows: &[FeatureRow],
    models: &[ModelKind],
    sets: &[FeatureSet],
    seeds: &[u64],
    cfg: &EvalConfig,
) -> Result<Vec<EvalRun>> {
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidParameter("evaluation seeds must be distinct".into()));
    }
    if seeds.is_empty() || models.is_empty() || sets.is_empty() {
        return Err(Error::Empty("evaluation grid"));
    }
    let jobs: Vec<(ModelKind, FeatureSet, u64)> = models
        .iter()
        .flat_map(|&m| sets.iter().flat_map(move |&s| seeds.iter().map(move |&r| (m, s, r))))
        .collect();
    jobs.par_iter().map(|&(m, s, r)| cross_fit(rows, m, s, cfg, r)).collect()
}

/// One row of the long metric table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub metric: String,
    pub model: ModelKind,
    pub feature_set: FeatureSet,
    pub run: usize,
    pub value: f64,
}

pub const METRIC_NAMES: [&str; 3] = ["accuracy", "auc", "logloss"];

/// Long-format metrics; `run` is the index of the seed within each
/// configuration, starting at 1.
pub fn metric_records(runs: &[EvalRun]) -> Vec<MetricRecord> {
    let mut out = Vec::with_capacity(runs.len() * 3);
    let mut counter: std::collections::BTreeMap<(ModelKind, FeatureSet), usize> = Default::default();
    for r in runs {
        let c = counter.entry((r.model, r.feature_set)).or_default();
        *c += 1;
        for (name, value) in METRIC_NAMES.iter().zip([r.metrics.accuracy, r.metrics.auc, r.metrics.logloss]) {
            out.push(MetricRecord { metric: name.to_string(), model: r.model, feature_set: r.feature_set, run: *c, value });
        }
    }
    out
}

/// Median of each metric per `(model, feature set)`.
pub fn median_metrics(records: &[MetricRecord]) -> Vec<(String, ModelKind, FeatureSet, f64)> {
    let mut groups: std::collections::BTreeMap<(String, ModelKind, FeatureSet), Vec<f64>> = Default::default();
    for r in records {
        groups.entry((r.metric.clone(), r.model, r.feature_set)).or_default().push(r.value);
    }
    groups
        .into_iter()
        .map(|((m, k, s), mut v)| {
            v.sort_by(f64::total_cmp);
            (m, k, s, crate::features::quantile_sorted(&v, 0.5))
        })
        .collect()
}
