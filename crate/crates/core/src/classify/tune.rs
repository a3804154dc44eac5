use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::enet::{lambda_grid, EnetPath};
use super::gbt::{GbtParams, GbtTrainer, Loss};
use super::{
    check_labels, fit_elastic_net, fit_gbt, sigmoid, FeatureMatrix, ModelKind, Predictor, TrainedModel, TrainingMeta,
    MODEL_SCHEMA,
};
use crate::error::{Error, Result};
use crate::eval::{log_loss, split, stratified_folds};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Hyper {
    ElasticNet { lambda: f64, alpha: f64 },
    Gbt { max_depth: usize, learning_rate: f64, n_rounds: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnetGrid {
    pub alphas: Vec<f64>,
    pub n_lambda: usize,
    pub lambda_min_ratio: f64,
}

impl Default for EnetGrid {
    fn default() -> Self {
        Self { alphas: vec![0.0, 0.25, 0.5, 0.75, 1.0], n_lambda: 12, lambda_min_ratio: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtGrid {
    pub depths: Vec<usize>,
    pub rates: Vec<f64>,
    /// Rounds are evaluated at multiples of `round_step` up to `max_rounds`.
    pub max_rounds: usize,
    pub round_step: usize,
    /// Stop a grid point after this many checkpoints without improvement.
    pub patience: usize,
}

impl Default for GbtGrid {
    fn default() -> Self {
        Self { depths: vec![2, 3, 4], rates: vec![0.05, 0.1, 0.3], max_rounds: 500, round_step: 50, patience: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum TuneGrid {
    ElasticNet(EnetGrid),
    Gbt(GbtGrid),
}

impl TuneGrid {
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Enet => Self::ElasticNet(EnetGrid::default()),
            ModelKind::Gbt => Self::Gbt(GbtGrid::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best: Hyper,
    pub cv_logloss: f64,
    /// Every evaluated grid point with its mean validation logloss.
    pub table: Vec<(Hyper, f64)>,
}

fn pick(table: Vec<(Hyper, f64)>) -> Result<TuneResult> {
    let mut best: Option<(Hyper, f64)> = None;
    for &(h, l) in &table {
        if l.is_finite() && best.map_or(true, |(_, b)| l < b) {
            best = Some((h, l));
        }
    }
    let (best, cv_logloss) = best.ok_or(Error::Empty("tuning grid"))?;
    Ok(TuneResult { best, cv_logloss, table })
}

type Fold = (FeatureMatrix, Vec<f64>, FeatureMatrix, Vec<f64>);

fn make_folds(x: &FeatureMatrix, y: &[f64], k: usize, seed: u64) -> Result<Vec<Fold>> {
    let ids = stratified_folds(y, k, seed)?;
    Ok((0..k)
        .map(|f| {
            let (tr, te) = split(&ids, f);
            (x.rows(&tr), tr.iter().map(|&i| y[i]).collect(), x.rows(&te), te.iter().map(|&i| y[i]).collect())
        })
        .collect())
}

fn tune_enet(x: &FeatureMatrix, y: &[f64], g: &EnetGrid, folds: &[Fold]) -> Result<TuneResult> {
    if g.alphas.is_empty() || g.n_lambda == 0 {
        return Err(Error::Empty("elastic-net grid"));
    }
    let lambdas: Vec<Vec<f64>> =
        g.alphas.iter().map(|&a| lambda_grid(x, y, a, g.n_lambda, g.lambda_min_ratio)).collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..g.alphas.len()).flat_map(|a| (0..folds.len()).map(move |f| (a, f))).collect();
    let losses: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(a, f)| {
            let (xt, yt, xv, yv) = &folds[f];
            let mut path = EnetPath::new(xt, yt)?;
            lambdas[a]
                .iter()
                .map(|&l| {
                    let m = path.solve(l, g.alphas[a])?;
                    log_loss(yv, &m.predict_proba(xv))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut table = Vec::new();
    for li in 0..g.n_lambda {
        for (a, &alpha) in g.alphas.iter().enumerate() {
            let mean = (0..folds.len()).map(|f| losses[a * folds.len() + f][li]).sum::<f64>() / folds.len() as f64;
            table.push((Hyper::ElasticNet { lambda: lambdas[a][li], alpha }, mean));
        }
    }
    pick(table)
}

fn tune_gbt(g: &GbtGrid, folds: &[Fold]) -> Result<TuneResult> {
    if g.depths.is_empty() || g.rates.is_empty() || g.max_rounds == 0 || g.round_step == 0 {
        return Err(Error::Empty("boosting grid"));
    }
    let points: Vec<(usize, f64)> = g.depths.iter().flat_map(|&d| g.rates.iter().map(move |&r| (d, r))).collect();
    let curves: Vec<Vec<(usize, f64)>> = points
        .par_iter()
        .map(|&(d, r)| {
            let params = GbtParams { max_depth: d, learning_rate: r, ..GbtParams::default() };
            let mut state = folds
                .iter()
                .map(|(xt, yt, xv, _)| {
                    let t = GbtTrainer::new(xt, yt, params)?;
                    let base = t.model().base_score;
                    Ok((t, vec![base; xv.n_rows]))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut curve = Vec::new();
            let mut best = f64::INFINITY;
            let mut stale = 0;
            let mut rounds = 0;
            while rounds < g.max_rounds {
                let target = (rounds + g.round_step).min(g.max_rounds);
                let mut total = 0.0;
                for ((t, vs), (_, _, xv, yv)) in state.iter_mut().zip(folds) {
                    while t.rounds() < target {
                        t.step();
                        let tree = t.model().trees.last().expect("tree");
                        for (i, s) in vs.iter_mut().enumerate() {
                            *s += r * tree.predict(xv.row(i));
                        }
                    }
                    total += log_loss(yv, &vs.iter().map(|&s| sigmoid(s)).collect::<Vec<_>>())?;
                }
                rounds = target;
                let mean = total / folds.len() as f64;
                curve.push((rounds, mean));
                if mean < best {
                    best = mean;
                    stale = 0;
                } else {
                    stale += 1;
                    if stale >= g.patience.max(1) {
                        break;
                    }
                }
            }
            Ok(curve)
        })
        .collect::<Result<_>>()?;
    let mut table: Vec<(Hyper, f64)> = points
        .iter()
        .zip(&curves)
        .flat_map(|(&(d, r), c)| c.iter().map(move |&(n, l)| (Hyper::Gbt { max_depth: d, learning_rate: r, n_rounds: n }, l)))
        .collect();
    table.sort_by(|a, b| match (a.0, b.0) {
        (
            Hyper::Gbt { max_depth: d1, learning_rate: r1, n_rounds: n1 },
            Hyper::Gbt { max_depth: d2, learning_rate: r2, n_rounds: n2 },
        ) => d1.cmp(&d2).then(n1.cmp(&n2)).then(r1.total_cmp(&r2)),
        _ => std::cmp::Ordering::Equal,
    });
    pick(table)
}

/// Grid search by `k`-fold cross-validated logloss. Ties go to the smaller
/// model: larger penalty, then shallower trees and fewer rounds.
pub fn tune(x: &FeatureMatrix, y: &[f64], grid: &TuneGrid, k: usize, seed: u64) -> Result<TuneResult> {
    check_labels(y, x.n_rows)?;
    let folds = make_folds(x, y, k, seed)?;
    match grid {
        TuneGrid::ElasticNet(g) => tune_enet(x, y, g, &folds),
        TuneGrid::Gbt(g) => tune_gbt(g, &folds),
    }
}

/// Fit with fixed hyperparameters.
pub fn fit_hyper(x: &FeatureMatrix, y: &[f64], hyper: Hyper) -> Result<Predictor> {
    Ok(match hyper {
        Hyper::ElasticNet { lambda, alpha } => Predictor::ElasticNet(fit_elastic_net(x, y, lambda, alpha)?),
        Hyper::Gbt { max_depth, learning_rate, n_rounds } => Predictor::Gbt(fit_gbt(
            x,
            y,
            GbtParams { max_depth, learning_rate, n_rounds, loss: Loss::Logistic, ..GbtParams::default() },
        )?),
    })
}

/// Tune on `(x, y)` and refit the winner on all of it.
pub fn train(x: &FeatureMatrix, y: &[f64], grid: &TuneGrid, k: usize, seed: u64) -> Result<TrainedModel> {
    let t = tune(x, y, grid, k, seed)?;
    let predictor = fit_hyper(x, y, t.best)?;
    Ok(TrainedModel {
        schema: MODEL_SCHEMA.to_string(),
        feature_names: x.names.clone(),
        hyper: t.best,
        predictor,
        meta: TrainingMeta {
            n_rows: x.n_rows,
            n_positive: y.iter().filter(|&&v| v == 1.0).count(),
            seed,
            folds: k,
            cv_logloss: Some(t.cv_logloss),
        },
    })
}
