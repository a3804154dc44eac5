//! Lag selection with a homogeneous HMM: one free 5x5 transition matrix and
//! a shared emission standard deviation, fitted by Baum-Welch.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::FitConfig;
use crate::error::{Error, Result};
use crate::hmm::{DefenderSeries, SeriesCache, N_STATES};

/// 20 free transition logits plus the emission standard deviation.
const N_PARAMS: usize = N_STATES * (N_STATES - 1) + 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagFit {
    pub lag: usize,
    pub loglik: f64,
    pub aic: f64,
    pub n_params: usize,
    pub gamma: [[f64; N_STATES]; N_STATES],
    pub sigma: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Default)]
struct Stats {
    ll: f64,
    xi: [[f64; N_STATES]; N_STATES],
    weighted_r2: f64,
    n_obs: f64,
}

fn e_step(c: &SeriesCache, gamma: &[[f64; N_STATES]; N_STATES], sigma: f64) -> Stats {
    let n = c.len();
    let hp = 0.5 / (sigma * sigma);
    let half_ln_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    let mut em = vec![[0.0; N_STATES]; n];
    let mut ll = 0.0;
    for k in 0..n {
        em[k] = std::array::from_fn(|j| (-hp * (c.r2[k][j] - c.r2_min[k])).exp());
        ll += -sigma.ln() - half_ln_2pi - hp * c.r2_min[k];
    }
    let mut alpha = vec![[0.0; N_STATES]; n];
    let mut scale = vec![0.0; n];
    for k in 0..n {
        let pred: [f64; N_STATES] = if k == 0 {
            c.init
        } else {
            std::array::from_fn(|j| (0..N_STATES).map(|i| alpha[k - 1][i] * gamma[i][j]).sum())
        };
        let un: [f64; N_STATES] = std::array::from_fn(|j| pred[j] * em[k][j]);
        let s: f64 = un.iter().sum();
        scale[k] = s;
        ll += s.ln();
        alpha[k] = un.map(|v| v / s);
    }
    let mut st = Stats { ll, n_obs: n as f64, ..Default::default() };
    let mut beta = [1.0; N_STATES];
    for k in (0..n).rev() {
        let p: [f64; N_STATES] = std::array::from_fn(|j| alpha[k][j] * beta[j]);
        let s: f64 = p.iter().sum();
        for j in 0..N_STATES {
            st.weighted_r2 += p[j] / s * c.r2[k][j];
        }
        if k > 0 {
            let b: [f64; N_STATES] = std::array::from_fn(|j| em[k][j] * beta[j] / scale[k]);
            for i in 0..N_STATES {
                for j in 0..N_STATES {
                    st.xi[i][j] += alpha[k - 1][i] * gamma[i][j] * b[j];
                }
            }
            beta = std::array::from_fn(|i| (0..N_STATES).map(|j| gamma[i][j] * b[j]).sum());
        }
    }
    st
}

fn fit_one(caches: &[SeriesCache], lag: usize, cfg: &FitConfig) -> LagFit {
    let off = cfg.init_theta.beta0.exp();
    let diag = 1.0 / (1.0 + (N_STATES - 1) as f64 * off);
    let mut gamma: [[f64; N_STATES]; N_STATES] =
        std::array::from_fn(|i| std::array::from_fn(|j| if i == j { diag } else { off * diag }));
    let mut sigma = cfg.init_theta.sigma;
    let mut prev = f64::NEG_INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    let max_iters = cfg.max_outer_iters.max(500);
    for it in 1..=max_iters {
        iterations = it;
        let parts: Vec<Stats> = caches.par_iter().map(|c| e_step(c, &gamma, sigma)).collect();
        let mut tot = Stats::default();
        for p in &parts {
            tot.ll += p.ll;
            tot.weighted_r2 += p.weighted_r2;
            tot.n_obs += p.n_obs;
            for i in 0..N_STATES {
                for j in 0..N_STATES {
                    tot.xi[i][j] += p.xi[i][j];
                }
            }
        }
        let ll = tot.ll;
        if (ll - prev).abs() < cfg.outer_tol * ll.abs().max(1.0) {
            prev = ll;
            converged = true;
            break;
        }
        prev = ll;
        for i in 0..N_STATES {
            let row: f64 = tot.xi[i].iter().sum();
            if row > 0.0 {
                gamma[i] = tot.xi[i].map(|x| (x / row).max(1e-300));
            }
        }
        sigma = (tot.weighted_r2 / tot.n_obs).sqrt().max(1e-6);
    }
    LagFit {
        lag,
        loglik: prev,
        aic: 2.0 * N_PARAMS as f64 - 2.0 * prev,
        n_params: N_PARAMS,
        gamma,
        sigma,
        iterations,
        converged,
    }
}

/// Fit the homogeneous model at every lag and return the AIC-minimizing lag
/// (smallest lag on ties) with the full table.
pub fn select_lag(series: &[DefenderSeries], lags: &[usize], cfg: &FitConfig) -> Result<(usize, Vec<LagFit>)> {
    if lags.is_empty() {
        return Err(Error::Empty("lag set"));
    }
    if series.is_empty() {
        return Err(Error::Empty("defender series set"));
    }
    let mut lags = lags.to_vec();
    lags.sort_unstable();
    lags.dedup();
    let mut table = Vec::with_capacity(lags.len());
    for &lag in &lags {
        let caches = series
            .par_iter()
            .map(|s| SeriesCache::new(s, lag, cfg.boundary, cfg.init_alpha))
            .collect::<Result<Vec<_>>>()?;
        let fit = fit_one(&caches, lag, cfg);
        tracing::info!(lag, aic = fit.aic, "homogeneous fit");
        table.push(fit);
    }
    let best = table.iter().fold(&table[0], |b, f| if f.aic < b.aic { f } else { b });
    Ok((best.lag, table))
}
