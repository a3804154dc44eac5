use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use super::Theta;
use crate::error::{Error, Result};
use crate::hmm::scalar::{Dual, Jet2};
use crate::hmm::{engine, DefenderSeries, LagBoundary, SeriesCache};
use crate::tracking::{PlayKey, PlaySeries};

/// Grouping factors of the transition random effects.
pub const FACTORS: [&str; 3] = ["role", "team", "play"];

/// Defender series prepared for likelihood evaluation, with the level of
/// each series in every grouping factor. Series are held in
/// (play, defender) order so that sums do not depend on input order.
#[derive(Debug, Clone)]
pub struct HmmDataset {
    pub(crate) caches: Vec<SeriesCache>,
    pub(crate) levels: Vec<[usize; 3]>,
    pub roles: Vec<String>,
    pub teams: Vec<String>,
    pub plays: Vec<PlayKey>,
    pub lag: usize,
    pub boundary: LagBoundary,
}

impl HmmDataset {
    pub fn from_plays(plays: &[PlaySeries], lag: usize, boundary: LagBoundary, alpha: f64) -> Result<Self> {
        let series: Vec<DefenderSeries> = plays.iter().flat_map(DefenderSeries::from_play).collect();
        Self::from_series(&series, lag, boundary, alpha)
    }

    pub fn from_series(series: &[DefenderSeries], lag: usize, boundary: LagBoundary, alpha: f64) -> Result<Self> {
        if series.is_empty() {
            return Err(Error::Empty("defender series set"));
        }
        let mut order: Vec<&DefenderSeries> = series.iter().collect();
        order.sort_by(|a, b| (&a.play_key, a.defender_index).cmp(&(&b.play_key, b.defender_index)));
        for s in &order {
            if s.len() < lag + 2 {
                return Err(Error::InvalidData(format!(
                    "play {} defender {}: {} frames, need at least lag + 2 = {}",
                    s.play_key,
                    s.defender_index,
                    s.len(),
                    lag + 2
                )));
            }
        }
        let index = |names: BTreeSet<String>| -> BTreeMap<String, usize> {
            names.into_iter().enumerate().map(|(i, n)| (n, i)).collect()
        };
        let roles = index(order.iter().map(|s| s.role.clone()).collect());
        let teams = index(order.iter().map(|s| s.defense.clone()).collect());
        let mut plays: Vec<PlayKey> = order.iter().map(|s| s.play_key.clone()).collect();
        plays.dedup();
        let play_idx: BTreeMap<&PlayKey, usize> = plays.iter().enumerate().map(|(i, k)| (k, i)).collect();

        let caches = order
            .par_iter()
            .map(|s| SeriesCache::new(s, lag, boundary, alpha))
            .collect::<Result<Vec<_>>>()?;
        let levels = order.iter().map(|s| [roles[&s.role], teams[&s.defense], play_idx[&s.play_key]]).collect();
        Ok(Self {
            caches,
            levels,
            roles: roles.into_keys().collect(),
            teams: teams.into_keys().collect(),
            plays,
            lag,
            boundary,
        })
    }

    pub fn n_series(&self) -> usize {
        self.caches.len()
    }

    pub fn n_levels(&self) -> [usize; 3] {
        [self.roles.len(), self.teams.len(), self.plays.len()]
    }

    /// Log-likelihood of series `i` as a function of its transition offset.
    pub(crate) fn unit_jet(&self, i: usize, offset: f64, beta1: f64, log_sigma: f64) -> Jet2 {
        engine::forward(&self.caches[i], Jet2::var(offset), Jet2 { v: beta1, d1: 0.0, d2: 0.0 }, Jet2 {
            v: log_sigma,
            d1: 0.0,
            d2: 0.0,
        })
    }

    pub(crate) fn offset(&self, i: usize, beta0: f64, effects: [&[f64]; 3]) -> f64 {
        let l = self.levels[i];
        beta0 + effects[0].get(l[0]).copied().unwrap_or(0.0)
            + effects[1].get(l[1]).copied().unwrap_or(0.0)
            + effects[2].get(l[2]).copied().unwrap_or(0.0)
    }
}

fn check_dims(data: &HmmDataset, u: &[f64], v: &[f64], w: &[f64]) -> Result<()> {
    let n = data.n_levels();
    if [u.len(), v.len(), w.len()] != n {
        return Err(Error::Dimension(format!(
            "effects have lengths ({}, {}, {}), data has ({}, {}, {}) levels",
            u.len(),
            v.len(),
            w.len(),
            n[0],
            n[1],
            n[2]
        )));
    }
    Ok(())
}

fn check_theta(theta: &Theta) -> Result<()> {
    let sds = [theta.sigma, theta.sigma_u, theta.sigma_v, theta.sigma_w];
    if sds.iter().all(|s| *s > 0.0 && s.is_finite()) && theta.beta0.is_finite() && theta.beta1.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("standard deviations must be positive and finite: {sds:?}")))
    }
}

fn gauss_prior(x: &[f64], sd: f64) -> f64 {
    let c = -0.5 * (2.0 * std::f64::consts::PI).ln() - sd.ln();
    x.iter().map(|v| c - 0.5 * (v / sd).powi(2)).sum()
}

/// Negative joint log-likelihood of the data and the random effects.
pub fn joint_negloglik(theta: &Theta, u: &[f64], v: &[f64], w: &[f64], data: &HmmDataset) -> Result<f64> {
    check_theta(theta)?;
    check_dims(data, u, v, w)?;
    let ls = theta.sigma.ln();
    let terms: Vec<f64> = (0..data.n_series())
        .into_par_iter()
        .map(|i| engine::forward(&data.caches[i], data.offset(i, theta.beta0, [u, v, w]), theta.beta1, ls))
        .collect();
    let ll: f64 = terms.iter().sum::<f64>()
        + gauss_prior(u, theta.sigma_u)
        + gauss_prior(v, theta.sigma_v)
        + gauss_prior(w, theta.sigma_w);
    Ok(-ll)
}

/// Value and gradient of [`joint_negloglik`]. The gradient is ordered
/// `(beta0, beta1, ln sigma, ln sigma_u, ln sigma_v, ln sigma_w, u.., v.., w..)`.
pub fn joint_negloglik_grad(
    theta: &Theta,
    u: &[f64],
    v: &[f64],
    w: &[f64],
    data: &HmmDataset,
) -> Result<(f64, Vec<f64>)> {
    check_theta(theta)?;
    check_dims(data, u, v, w)?;
    let n = data.n_levels();
    let ls = theta.sigma.ln();
    let terms: Vec<Dual<3>> = (0..data.n_series())
        .into_par_iter()
        .map(|i| {
            let a = data.offset(i, theta.beta0, [u, v, w]);
            engine::forward(&data.caches[i], Dual::var(a, 0), Dual::var(theta.beta1, 1), Dual::var(ls, 2))
        })
        .collect();
    let mut grad = vec![0.0; 6 + n[0] + n[1] + n[2]];
    let base = [6, 6 + n[0], 6 + n[0] + n[1]];
    let mut ll = 0.0;
    for (i, t) in terms.iter().enumerate() {
        ll += t.v;
        grad[0] -= t.g[0];
        grad[1] -= t.g[1];
        grad[2] -= t.g[2];
        for f in 0..3 {
            grad[base[f] + data.levels[i][f]] -= t.g[0];
        }
    }
    let effects = [u, v, w];
    let sds = [theta.sigma_u, theta.sigma_v, theta.sigma_w];
    for f in 0..3 {
        ll += gauss_prior(effects[f], sds[f]);
        for (l, x) in effects[f].iter().enumerate() {
            grad[base[f] + l] += x / (sds[f] * sds[f]);
            grad[3 + f] += 1.0 - (x / sds[f]).powi(2);
        }
    }
    Ok((-ll, grad))
}
