//! Generalized covariance measure tests of `Y ⫫ X | Z` with cross-fitted
//! regressions, per feature and max-type over several targets.

mod learner;

use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use learner::{GbtLearner, Learner, OlsLearner};

use crate::classify::FeatureMatrix;
use crate::error::{Error, Result};
use crate::features::{FeatureRow, FeatureSet, HMM_NAMES, POST_MOTION_NAMES};
use crate::rng;

pub const CROSS_FIT_FOLDS: usize = 5;
pub const DEFAULT_DRAWS: usize = 10_000;
const DRAW_BLOCK: usize = 1_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcmResult {
    /// `sqrt(n) mean(R) / sd(R)`, or `max_j |T_j|` for the omnibus test.
    pub statistic: f64,
    pub p_value: f64,
    /// Mean residual product.
    pub mean_product: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub n: usize,
    pub target_features: Vec<String>,
    pub conditioning_features: Vec<String>,
}

/// Two-sided standard normal tail probability.
pub fn normal_two_sided(t: f64) -> f64 {
    statrs::function::erf::erfc(t.abs() / std::f64::consts::SQRT_2)
}

/// Seeded fold ids in `0..k` with sizes differing by at most one.
fn folds(n: usize, k: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed, "gcm.folds", 0));
    let mut f = vec![0; n];
    for (pos, i) in idx.into_iter().enumerate() {
        f[i] = pos % k;
    }
    f
}

/// Out-of-fold residuals `target - prediction(Z)`.
pub fn cross_fit_residuals(
    target: &[f64],
    z: &FeatureMatrix,
    learner: &dyn Learner,
    binary: bool,
    seed: u64,
) -> Result<Vec<f64>> {
    let n = target.len();
    if z.n_rows != n {
        return Err(Error::Dimension(format!("{n} responses for {} conditioning rows", z.n_rows)));
    }
    let k = CROSS_FIT_FOLDS.min(n);
    if k < 2 {
        return Err(Error::InvalidData(format!("need at least 2 observations, got {n}")));
    }
    let ids = folds(n, k, seed);
    let parts: Vec<(Vec<usize>, Vec<f64>)> = (0..k)
        .into_par_iter()
        .map(|f| {
            let (tr, te) = crate::eval::split(&ids, f);
            let yt: Vec<f64> = tr.iter().map(|&i| target[i]).collect();
            let pred = learner.fit_predict(&z.rows(&tr), &yt, &z.rows(&te), binary)?;
            Ok((te, pred))
        })
        .collect::<Result<_>>()?;
    let mut res = vec![0.0; n];
    for (te, pred) in parts {
        for (i, p) in te.into_iter().zip(pred) {
            res[i] = target[i] - p;
        }
    }
    Ok(res)
}

fn rms(v: impl Iterator<Item = f64>) -> f64 {
    let (s, c) = v.fold((0.0, 0usize), |(s, c), x| (s + x * x, c + 1));
    (s / c.max(1) as f64).sqrt()
}

/// `(T, mean, sd)` of residual products; `None` when the target is
/// perfectly predicted from the conditioning set.
fn product_stats(ry: &[f64], rx: &[f64], x: &[f64]) -> Result<Option<(f64, f64, f64)>> {
    let n = ry.len() as f64;
    let xbar = x.iter().sum::<f64>() / n;
    let scale = rms(ry.iter().copied()) * rms(x.iter().map(|v| v - xbar));
    if !(scale > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    let r: Vec<f64> = ry.iter().zip(rx).map(|(a, b)| a * b).collect();
    if rms(r.iter().copied()) <= 1e-8 * scale {
        return Ok(None);
    }
    let mean = r.iter().sum::<f64>() / n;
    let sd = (r.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    if !(sd > 1e-12 * scale) {
        return Err(Error::DegenerateVariance);
    }
    Ok(Some((n.sqrt() * mean / sd, mean, sd)))
}

fn check_binary(y: &[f64]) -> Result<()> {
    if let Some(v) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidData(format!("response {v} is not 0/1")));
    }
    Ok(())
}

/// Single-target test. A positive statistic points to a positive
/// coefficient of `X` in a partially linear logistic model.
pub fn gcm_single(
    y: &[f64],
    x: &[f64],
    x_name: &str,
    z: &FeatureMatrix,
    learner: &dyn Learner,
    seed: u64,
) -> Result<GcmResult> {
    check_binary(y)?;
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("{} responses vs {} target values", y.len(), x.len())));
    }
    let ry = cross_fit_residuals(y, z, learner, true, seed)?;
    let rx = cross_fit_residuals(x, z, learner, false, seed)?;
    let n = y.len();
    let (statistic, p_value, mean, lo, hi) = match product_stats(&ry, &rx, x)? {
        None => (0.0, 1.0, 0.0, 0.0, 0.0),
        Some((t, mean, sd)) => {
            let half = 1.96 * sd / (n as f64).sqrt();
            (t, normal_two_sided(t), mean, mean - half, mean + half)
        }
    };
    Ok(GcmResult {
        statistic,
        p_value,
        mean_product: Some(mean),
        ci_low: Some(lo),
        ci_high: Some(hi),
        n,
        target_features: vec![x_name.to_string()],
        conditioning_features: z.names.clone(),
    })
}

/// Max-type test over the columns of `x`; the p-value simulates the
/// Gaussian limit with the residual-product correlation matrix.
pub fn gcm_omnibus(
    y: &[f64],
    x: &FeatureMatrix,
    z: &FeatureMatrix,
    learner: &dyn Learner,
    n_draws: usize,
    seed: u64,
) -> Result<GcmResult> {
    check_binary(y)?;
    let (n, d) = (y.len(), x.n_cols());
    if x.n_rows != n {
        return Err(Error::Dimension(format!("{n} responses vs {} target rows", x.n_rows)));
    }
    if d == 0 {
        return Err(Error::Empty("target feature set"));
    }
    if n_draws == 0 {
        return Err(Error::InvalidParameter("need at least one multiplier draw".into()));
    }
    let ry = cross_fit_residuals(y, z, learner, true, seed)?;
    let mut prods = Vec::with_capacity(d);
    let mut t = Vec::with_capacity(d);
    for j in 0..d {
        let col = x.column(j);
        let rx = cross_fit_residuals(&col, z, learner, false, seed)?;
        let r: Vec<f64> = ry.iter().zip(&rx).map(|(a, b)| a * b).collect();
        let (tj, mean, sd) = product_stats(&ry, &rx, &col)?.ok_or(Error::RankDeficient)?;
        t.push(tj);
        prods.push(r.into_iter().map(|v| (v - mean) / sd).collect::<Vec<f64>>());
    }
    let corr = nalgebra::DMatrix::from_fn(d, d, |a, b| prods[a].iter().zip(&prods[b]).map(|(u, v)| u * v).sum::<f64>() / n as f64);
    let eig = corr.clone().symmetric_eigen();
    if eig.eigenvalues.min() <= 1e-10 * eig.eigenvalues.max() {
        return Err(Error::RankDeficient);
    }
    let chol = corr.cholesky().ok_or(Error::RankDeficient)?;
    let l = chol.l();
    let stat = t.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let blocks = n_draws.div_ceil(DRAW_BLOCK);
    let exceed: usize = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut r = rng::stream(seed, "gcm.multiplier", b as u64);
            let m = DRAW_BLOCK.min(n_draws - b * DRAW_BLOCK);
            let mut e = nalgebra::DVector::<f64>::zeros(d);
            (0..m)
                .filter(|_| {
                    for v in e.iter_mut() {
                        *v = StandardNormal.sample(&mut r);
                    }
                    let w = &l * &e;
                    w.amax() >= stat
                })
                .count()
        })
        .sum();
    Ok(GcmResult {
        statistic: stat,
        p_value: (1 + exceed) as f64 / (1 + n_draws) as f64,
        mean_product: None,
        ci_low: None,
        ci_high: None,
        n,
        target_features: x.names.clone(),
        conditioning_features: z.names.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcmSuite {
    pub per_feature: Vec<GcmResult>,
    pub omnibus: GcmResult,
}

fn matrix(rows: &[FeatureRow], names: &[String]) -> Result<FeatureMatrix> {
    let data: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            names
                .iter()
                .map(|n| r.get(n).ok_or_else(|| Error::MissingPlayEffect(r.key.to_string())))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    FeatureMatrix::new(names.to_vec(), &data)
}

/// Each feature added by `targets` tested given the previous stage's
/// features plus the other added ones, then all of them jointly given the
/// previous stage's features.
pub fn per_feature_suite(
    rows: &[FeatureRow],
    targets: FeatureSet,
    learner: &dyn Learner,
    n_draws: usize,
    seed: u64,
) -> Result<GcmSuite> {
    if rows.is_empty() {
        return Err(Error::Empty("feature rows"));
    }
    let (base, added): (Vec<String>, Vec<String>) = match targets {
        FeatureSet::Pre => return Err(Error::InvalidParameter("pre-motion features have no baseline stage".into())),
        FeatureSet::Naive => (FeatureSet::Pre.names(), POST_MOTION_NAMES.iter().map(|s| s.to_string()).collect()),
        FeatureSet::Hmm => (FeatureSet::Naive.names(), HMM_NAMES.iter().map(|s| s.to_string()).collect()),
    };
    let y: Vec<f64> = rows
        .iter()
        .map(|r| r.label.map(f64::from).ok_or_else(|| Error::InvalidData(format!("play {} has no label", r.key))))
        .collect::<Result<_>>()?;
    let per_feature = added
        .iter()
        .map(|target| {
            let mut cond = base.clone();
            cond.extend(added.iter().filter(|h| *h != target).cloned());
            let z = matrix(rows, &cond)?;
            let x: Vec<f64> = matrix(rows, std::slice::from_ref(target))?.data;
            gcm_single(&y, &x, target, &z, learner, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    let omnibus = gcm_omnibus(&y, &matrix(rows, &added)?, &matrix(rows, &base)?, learner, n_draws, seed)?;
    Ok(GcmSuite { per_feature, omnibus })
}

impl GcmSuite {
    /// `feature, statistic, p, ci_low, ci_high, neg_log10_p`; the omnibus row
    /// is labelled `omnibus` and has empty interval columns.
    pub fn write_csv(&self, path: impl AsRef<Path>, comment: Option<&str>) -> Result<()> {
        let mut out = Vec::new();
        if let Some(c) = comment {
            out.extend_from_slice(format!("# {c}\n").as_bytes());
        }
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(["feature", "statistic", "p", "ci_low", "ci_high", "neg_log10_p"])?;
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            for r in self.per_feature.iter().chain(std::iter::once(&self.omnibus)) {
                let name = if r.target_features.len() == 1 { r.target_features[0].clone() } else { "omnibus".into() };
                w.write_record([
                    name,
                    r.statistic.to_string(),
                    r.p_value.to_string(),
                    opt(r.ci_low),
                    opt(r.ci_high),
                    (0.0 - r.p_value.log10()).to_string(),
                ])?;
            }
            w.flush()?;
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}
