use super::scalar::Scalar;
use super::{DefenderSeries, LagBoundary, N_STATES};
use crate::error::{Error, Result};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Per-series quantities that do not depend on parameters: squared residuals
/// against every lagged mean, lagged inter-receiver distances and the initial
/// distribution.
#[derive(Debug, Clone)]
pub(crate) struct SeriesCache {
    /// `r2[k][j] = (y_k - mu_{k,j})^2`.
    pub r2: Vec<[f64; N_STATES]>,
    /// Smallest entry of `r2[k]`.
    pub r2_min: Vec<f64>,
    /// `dist[k][i][j]` for transitions into used frame `k` (entry 0 unused).
    pub dist: Vec<[[f64; N_STATES]; N_STATES]>,
    pub init: [f64; N_STATES],
}

impl SeriesCache {
    pub fn new(s: &DefenderSeries, lag: usize, boundary: LagBoundary, alpha: f64) -> Result<Self> {
        s.validate()?;
        let t = s.y.len();
        let start = match boundary {
            LagBoundary::Clamp => 0,
            LagBoundary::Drop => lag,
        };
        if start >= t {
            return Err(Error::InvalidData(format!(
                "play {} defender {}: {t} frames leave nothing after dropping lag {lag}",
                s.play_key, s.defender_index
            )));
        }
        let mut r2 = Vec::with_capacity(t - start);
        let mut r2_min = Vec::with_capacity(t - start);
        let mut dist = Vec::with_capacity(t - start);
        for k in start..t {
            let src = k.saturating_sub(lag);
            let mu: [f64; N_STATES] = std::array::from_fn(|j| s.offense_y[j][src]);
            let r: [f64; N_STATES] = std::array::from_fn(|j| (s.y[k] - mu[j]).powi(2));
            r2_min.push(r.iter().copied().fold(f64::INFINITY, f64::min));
            r2.push(r);
            dist.push(std::array::from_fn(|i| std::array::from_fn(|j| (mu[i] - mu[j]).abs())));
        }
        let first: [f64; N_STATES] = std::array::from_fn(|j| s.offense_y[j][start]);
        Ok(Self { r2, r2_min, dist, init: initial_from(s.y[start], &first, alpha) })
    }

    pub fn len(&self) -> usize {
        self.r2.len()
    }
}

pub(crate) fn initial_from(y_def: f64, y_off: &[f64; N_STATES], alpha: f64) -> [f64; N_STATES] {
    let z: [f64; N_STATES] = std::array::from_fn(|j| -alpha * (y_def - y_off[j]).abs());
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = z.map(|v| (v - m).exp());
    let s: f64 = e.iter().sum();
    e.map(|v| v / s)
}

/// Unnormalized transition weights `exp(eta_ij - M_i)` and row sums at used
/// frame `k >= 1`.
#[inline]
fn transition_weights<S: Scalar>(
    d: &[[f64; N_STATES]; N_STATES],
    a: S,
    beta1: S,
) -> ([[S; N_STATES]; N_STATES], [S; N_STATES]) {
    let mut num = [[S::cst(0.0); N_STATES]; N_STATES];
    let mut den = [S::cst(0.0); N_STATES];
    for i in 0..N_STATES {
        let mut eta = [S::cst(0.0); N_STATES];
        let mut m = 0.0f64;
        for j in 0..N_STATES {
            if j != i {
                eta[j] = a + beta1 * d[i][j];
                m = m.max(eta[j].val());
            }
        }
        let mut sum = S::cst(0.0);
        for j in 0..N_STATES {
            let e = (eta[j] - m).exp();
            num[i][j] = e;
            sum = sum + e;
        }
        den[i] = sum;
    }
    (num, den)
}

/// Row-stochastic transition matrix into used frame `k >= 1`.
pub(crate) fn gamma(c: &SeriesCache, k: usize, a: f64, beta1: f64) -> [[f64; N_STATES]; N_STATES] {
    let (num, den) = transition_weights(&c.dist[k], a, beta1);
    std::array::from_fn(|i| std::array::from_fn(|j| num[i][j] / den[i]))
}

/// Log transition matrix, accurate even for vanishing probabilities.
pub(crate) fn log_gamma(c: &SeriesCache, k: usize, a: f64, beta1: f64) -> [[f64; N_STATES]; N_STATES] {
    let d = &c.dist[k];
    std::array::from_fn(|i| {
        let eta: [f64; N_STATES] = std::array::from_fn(|j| if i == j { 0.0 } else { a + beta1 * d[i][j] });
        let m = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + eta.iter().map(|e| (e - m).exp()).sum::<f64>().ln();
        eta.map(|e| e - lse)
    })
}

/// Scaled emission weights `f(y_k | j) / f(y_k | j*)` and the log of the
/// shared factor `f(y_k | j*)`.
#[inline]
fn emission<S: Scalar>(c: &SeriesCache, k: usize, log_sigma: S, half_prec: S) -> ([S; N_STATES], S) {
    let rmin = c.r2_min[k];
    let e = std::array::from_fn(|j| (-(half_prec * (c.r2[k][j] - rmin))).exp());
    let log_scale = -log_sigma - half_prec * rmin - HALF_LN_2PI;
    (e, log_scale)
}

/// Log-likelihood of one series by the scaled forward recursion, generic in
/// the scalar so that the same code yields derivatives. `a` is the full
/// off-diagonal offset `beta0 + u + v + w`.
pub(crate) fn forward<S: Scalar>(c: &SeriesCache, a: S, beta1: S, log_sigma: S) -> S {
    let half_prec = (log_sigma * -2.0).exp() * 0.5;
    let (e, ls) = emission(c, 0, log_sigma, half_prec);
    let mut phi: [S; N_STATES] = std::array::from_fn(|j| e[j] * c.init[j]);
    let mut sum = phi.iter().fold(S::cst(0.0), |acc, &p| acc + p);
    let mut ll = ls + sum.ln();
    for p in phi.iter_mut() {
        *p = *p / sum;
    }
    for k in 1..c.len() {
        let (num, den) = transition_weights(&c.dist[k], a, beta1);
        let w: [S; N_STATES] = std::array::from_fn(|i| phi[i] / den[i]);
        let (e, ls) = emission(c, k, log_sigma, half_prec);
        sum = S::cst(0.0);
        for j in 0..N_STATES {
            let mut psi = w[0] * num[0][j];
            for i in 1..N_STATES {
                psi = psi + w[i] * num[i][j];
            }
            phi[j] = psi * e[j];
            sum = sum + phi[j];
        }
        ll = ll + ls + sum.ln();
        for p in phi.iter_mut() {
            *p = *p / sum;
        }
    }
    ll
}

/// Smoothed state probabilities by scaled forward-backward.
pub(crate) fn posterior(c: &SeriesCache, a: f64, beta1: f64, sigma: f64) -> Vec<[f64; N_STATES]> {
    let n = c.len();
    let log_sigma = sigma.ln();
    let hp = 0.5 / (sigma * sigma);
    let em: Vec<[f64; N_STATES]> = (0..n).map(|k| emission(c, k, log_sigma, hp).0).collect();
    let gam: Vec<[[f64; N_STATES]; N_STATES]> =
        (0..n).map(|k| if k == 0 { [[0.0; N_STATES]; N_STATES] } else { gamma(c, k, a, beta1) }).collect();

    let mut alpha = vec![[0.0; N_STATES]; n];
    let mut scale = vec![0.0; n];
    for k in 0..n {
        let pred: [f64; N_STATES] = if k == 0 {
            c.init
        } else {
            std::array::from_fn(|j| (0..N_STATES).map(|i| alpha[k - 1][i] * gam[k][i][j]).sum())
        };
        let un: [f64; N_STATES] = std::array::from_fn(|j| pred[j] * em[k][j]);
        let s: f64 = un.iter().sum();
        scale[k] = s;
        alpha[k] = un.map(|v| v / s);
    }
    let mut beta = [1.0; N_STATES];
    let mut out = vec![[0.0; N_STATES]; n];
    for k in (0..n).rev() {
        let p: [f64; N_STATES] = std::array::from_fn(|j| alpha[k][j] * beta[j]);
        let s: f64 = p.iter().sum();
        out[k] = p.map(|v| v / s);
        if k > 0 {
            let b: [f64; N_STATES] = std::array::from_fn(|j| em[k][j] * beta[j] / scale[k]);
            beta = std::array::from_fn(|i| (0..N_STATES).map(|j| gam[k][i][j] * b[j]).sum());
        }
    }
    out
}

/// Max-product decoding in log space; ties go to the lowest state index.
pub(crate) fn viterbi(c: &SeriesCache, a: f64, beta1: f64, sigma: f64) -> Vec<usize> {
    let n = c.len();
    let hp = 0.5 / (sigma * sigma);
    let le = |k: usize| -> [f64; N_STATES] { std::array::from_fn(|j| -hp * c.r2[k][j]) };
    let mut v: [f64; N_STATES] = {
        let e = le(0);
        std::array::from_fn(|j| c.init[j].ln() + e[j])
    };
    let mut back = vec![[0usize; N_STATES]; n];
    for k in 1..n {
        let lg = log_gamma(c, k, a, beta1);
        let e = le(k);
        let mut next = [0.0; N_STATES];
        for j in 0..N_STATES {
            let mut best = 0;
            let mut bv = v[0] + lg[0][j];
            for i in 1..N_STATES {
                let cand = v[i] + lg[i][j];
                if cand > bv {
                    bv = cand;
                    best = i;
                }
            }
            back[k][j] = best;
            next[j] = bv + e[j];
        }
        v = next;
    }
    let mut state = argmax(&v);
    let mut path = vec![0; n];
    for k in (0..n).rev() {
        path[k] = state;
        state = back[k][state];
    }
    path
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate().skip(1) {
        if *x > v[best] {
            best = i;
        }
    }
    best
}
