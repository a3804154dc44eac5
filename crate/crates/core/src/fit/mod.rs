//! Maximum marginal likelihood for the mixed-effects HMM.
//!
//! The random effects are integrated out by a Laplace approximation; the
//! resulting objective is maximized over the six hyperparameters with BFGS
//! on central finite-difference gradients.

mod data;
mod lag;
pub mod laplace;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use data::{joint_negloglik, joint_negloglik_grad, HmmDataset, FACTORS};
pub use lag::{select_lag, LagFit};
pub use laplace::{laplace, FactorSpec, InnerOptions, LaplaceResult, UnitLikelihood};

use crate::error::{Error, Result};
use crate::hmm::scalar::Jet2;
use crate::hmm::{EmissionSpec, LagBoundary, TransitionSpec};

/// Hyperparameters on their natural scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub beta0: f64,
    pub beta1: f64,
    pub sigma: f64,
    pub sigma_u: f64,
    pub sigma_v: f64,
    pub sigma_w: f64,
}

impl Default for Theta {
    fn default() -> Self {
        Self { beta0: -4.0, beta1: 0.0, sigma: 1.0, sigma_u: 0.3, sigma_v: 0.3, sigma_w: 0.3 }
    }
}

impl Theta {
    /// `(beta0, beta1, ln sigma, ln sigma_u, ln sigma_v, ln sigma_w)`.
    pub fn to_internal(&self) -> [f64; 6] {
        [self.beta0, self.beta1, self.sigma.ln(), self.sigma_u.ln(), self.sigma_v.ln(), self.sigma_w.ln()]
    }

    pub fn from_internal(x: &[f64; 6]) -> Self {
        Self {
            beta0: x[0],
            beta1: x[1],
            sigma: x[2].exp(),
            sigma_u: x[3].exp(),
            sigma_v: x[4].exp(),
            sigma_w: x[5].exp(),
        }
    }

    pub fn effect_sds(&self) -> [f64; 3] {
        [self.sigma_u, self.sigma_v, self.sigma_w]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub lag: usize,
    pub boundary: LagBoundary,
    /// Sharpness of the initial state distribution.
    pub init_alpha: f64,
    pub outer_tol: f64,
    pub inner_tol: f64,
    pub max_outer_iters: usize,
    pub max_inner_iters: usize,
    pub init_theta: Theta,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            lag: 4,
            boundary: LagBoundary::Clamp,
            init_alpha: 1.0,
            outer_tol: 1e-9,
            inner_tol: 1e-8,
            max_outer_iters: 200,
            max_inner_iters: 100,
            init_theta: Theta::default(),
        }
    }
}

impl FitConfig {
    fn check(&self) -> Result<()> {
        if !(self.outer_tol > 0.0 && self.inner_tol > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        if self.max_outer_iters == 0 || self.max_inner_iters == 0 {
            return Err(Error::InvalidParameter("iteration limits must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta_hat: Theta,
    /// Role effects.
    pub u_hat: BTreeMap<String, f64>,
    /// Defensive-team effects.
    pub v_hat: BTreeMap<String, f64>,
    /// Play effects keyed by `gameId/playId`.
    pub w_hat: BTreeMap<String, f64>,
    /// Laplace-approximate marginal log-likelihood.
    pub loglik: f64,
    pub aic: f64,
    /// Number of estimated hyperparameters.
    pub n_params: usize,
    pub converged: bool,
    pub outer_iterations: usize,
    pub gradient_norm: f64,
    /// Factors whose variance was fixed at zero (single level).
    pub fixed_zero: Vec<String>,
    pub n_series: usize,
    pub n_plays: usize,
    pub config: FitConfig,
}

impl FitResult {
    pub fn emission_spec(&self) -> EmissionSpec {
        EmissionSpec { sigma: self.theta_hat.sigma, lag: self.config.lag, boundary: self.config.boundary }
    }

    pub fn transition_spec(&self) -> TransitionSpec {
        TransitionSpec {
            beta0: self.theta_hat.beta0,
            beta1: self.theta_hat.beta1,
            u: self.u_hat.clone(),
            v: self.v_hat.clone(),
            w: self.w_hat.clone(),
            init_alpha: self.config.init_alpha,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// HMM series as Laplace units at fixed `(beta0, beta1, sigma)`.
struct HmmUnits<'a> {
    data: &'a HmmDataset,
    beta0: f64,
    beta1: f64,
    log_sigma: f64,
}

impl UnitLikelihood for HmmUnits<'_> {
    fn n_units(&self) -> usize {
        self.data.n_series()
    }
    fn level(&self, i: usize, f: usize) -> usize {
        self.data.levels[i][f]
    }
    fn unit(&self, i: usize, offset: f64) -> Jet2 {
        self.data.unit_jet(i, self.beta0 + offset, self.beta1, self.log_sigma)
    }
}

/// Laplace-approximate log marginal likelihood at `theta`, with the mode of
/// `(u, v, w)` for warm starts. Factors with a zero standard deviation are
/// left out.
pub fn laplace_marginal(
    theta: &Theta,
    data: &HmmDataset,
    cfg: &FitConfig,
    warm: Option<&[Vec<f64>]>,
) -> Result<LaplaceResult> {
    if !(theta.sigma > 0.0) || theta.effect_sds().iter().any(|s| !(*s >= 0.0)) {
        return Err(Error::InvalidParameter(format!("invalid standard deviations in {theta:?}")));
    }
    let units = HmmUnits { data, beta0: theta.beta0, beta1: theta.beta1, log_sigma: theta.sigma.ln() };
    let n = data.n_levels();
    let sds = theta.effect_sds();
    let factors: Vec<FactorSpec> = (0..3).map(|f| FactorSpec { n_levels: n[f], sd: sds[f] }).collect();
    laplace(&units, &factors, warm, &InnerOptions { tol: cfg.inner_tol, max_iters: cfg.max_inner_iters })
}

struct Objective<'a> {
    data: &'a HmmDataset,
    cfg: &'a FitConfig,
    free: Vec<usize>,
    base: [f64; 6],
}

impl Objective<'_> {
    fn theta(&self, x: &[f64]) -> Theta {
        let mut full = self.base;
        for (k, &i) in self.free.iter().enumerate() {
            full[i] = x[k];
        }
        let mut th = Theta::from_internal(&full);
        for f in 0..3 {
            if !self.free.contains(&(3 + f)) {
                match f {
                    0 => th.sigma_u = 0.0,
                    1 => th.sigma_v = 0.0,
                    _ => th.sigma_w = 0.0,
                }
            }
        }
        th
    }

    /// Negative marginal log-likelihood.
    fn eval(&self, x: &[f64], warm: Option<&[Vec<f64>]>) -> Result<(f64, Vec<Vec<f64>>)> {
        let r = laplace_marginal(&self.theta(x), self.data, self.cfg, warm)?;
        if !r.value.is_finite() {
            return Err(Error::InvalidData("non-finite marginal likelihood".into()));
        }
        Ok((-r.value, r.mode))
    }

    fn grad(&self, x: &[f64], warm: &[Vec<f64>]) -> Result<Vec<f64>> {
        (0..x.len())
            .map(|i| {
                let h = 1e-6 * (1.0 + x[i].abs());
                let mut xp = x.to_vec();
                xp[i] += h;
                let mut xm = x.to_vec();
                xm[i] -= h;
                let fp = self.eval(&xp, Some(warm))?.0;
                let fm = self.eval(&xm, Some(warm))?.0;
                Ok((fp - fm) / (2.0 * h))
            })
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fit the mixed-effects HMM by maximizing the Laplace-approximate marginal
/// likelihood.
pub fn fit(data: &HmmDataset, cfg: &FitConfig) -> Result<FitResult> {
    cfg.check()?;
    if data.plays.len() < 2 {
        return Err(Error::InvalidData(format!("need at least 2 plays, got {}", data.plays.len())));
    }
    let n = data.n_levels();
    let mut free = vec![0, 1, 2];
    let mut fixed_zero = Vec::new();
    for f in 0..3 {
        if n[f] >= 2 {
            free.push(3 + f);
        } else {
            tracing::warn!(factor = FACTORS[f], "single level; variance fixed at zero");
            fixed_zero.push(FACTORS[f].to_string());
        }
    }
    let base = cfg.init_theta.to_internal();
    let obj = Objective { data, cfg, free: free.clone(), base };
    let mut x: Vec<f64> = free.iter().map(|&i| base[i]).collect();
    let dim = x.len();

    let (mut fx, mut mode) = obj.eval(&x, None)?;
    let mut g = obj.grad(&x, &mode)?;
    let mut hinv = nalgebra::DMatrix::<f64>::identity(dim, dim);
    let mut converged = false;
    let mut iters = 0;
    for it in 1..=cfg.max_outer_iters {
        iters = it;
        let gv = nalgebra::DVector::from_column_slice(&g);
        let mut p: Vec<f64> = (-(&hinv * &gv)).iter().copied().collect();
        if dot(&g, &p) >= 0.0 {
            hinv.fill_with_identity();
            p = g.iter().map(|v| -v).collect();
        }
        let slope = dot(&g, &p);
        if -slope < cfg.outer_tol * fx.abs().max(1.0) {
            converged = true;
            break;
        }
        let pmax = p.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if pmax > 3.0 {
            p.iter_mut().for_each(|v| *v *= 3.0 / pmax);
        }
        let slope = dot(&g, &p);

        let mut t = 1.0;
        let mut next = None;
        for _ in 0..40 {
            let xt: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + t * b).collect();
            if let Ok((ft, mt)) = obj.eval(&xt, Some(&mode)) {
                if ft <= fx + 1e-4 * t * slope {
                    next = Some((xt, ft, mt));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xn, fnew, mnew)) = next else {
            tracing::warn!(iteration = it, "line search failed");
            break;
        };
        let gn = obj.grad(&xn, &mnew)?;
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let ys = dot(&y, &s);
        if ys > 1e-10 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if it == 1 {
                hinv = nalgebra::DMatrix::identity(dim, dim) * (ys / dot(&y, &y));
            }
            let sv = nalgebra::DVector::from_column_slice(&s);
            let yv = nalgebra::DVector::from_column_slice(&y);
            let rho = 1.0 / ys;
            let hy = &hinv * &yv;
            let yhy = yv.dot(&hy);
            hinv += (&sv * sv.transpose()) * (rho * (1.0 + rho * yhy)) - (&hy * sv.transpose() + &sv * hy.transpose()) * rho;
        }
        let rel = (fx - fnew).abs() / fnew.abs().max(1.0);
        x = xn;
        fx = fnew;
        mode = mnew;
        g = gn;
        tracing::debug!(iteration = it, objective = fx, "outer step");
        if rel < cfg.outer_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        tracing::warn!(iterations = iters, "marginal likelihood maximization did not converge");
    }

    let theta_hat = obj.theta(&x);
    let named = |names: Vec<String>, vals: &[f64]| -> BTreeMap<String, f64> { names.into_iter().zip(vals.iter().copied()).collect() };
    let loglik = -fx;
    Ok(FitResult {
        theta_hat,
        u_hat: named(data.roles.clone(), &mode[0]),
        v_hat: named(data.teams.clone(), &mode[1]),
        w_hat: named(data.plays.iter().map(|k| k.to_string()).collect(), &mode[2]),
        loglik,
        aic: 2.0 * free.len() as f64 - 2.0 * loglik,
        n_params: free.len(),
        converged,
        outer_iterations: iters,
        gradient_norm: g.iter().fold(0.0f64, |a, v| a.max(v.abs())),
        fixed_zero,
        n_series: data.n_series(),
        n_plays: data.plays.len(),
        config: cfg.clone(),
    })
}
