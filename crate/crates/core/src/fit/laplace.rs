//! Laplace approximation of the marginal likelihood for models whose units
//! depend on crossed Gaussian random intercepts only through their sum.
//!
//! The negative Hessian has a diagonal block for every factor; the factor
//! with the most levels is kept diagonal and the others are eliminated
//! through a dense Schur complement.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hmm::scalar::Jet2;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Log-likelihood contributions of independent units.
pub trait UnitLikelihood: Sync {
    fn n_units(&self) -> usize;
    /// Level of unit `i` in factor `f`.
    fn level(&self, i: usize, f: usize) -> usize;
    /// Log-likelihood of unit `i` and its first two derivatives with respect
    /// to the summed random offset.
    fn unit(&self, i: usize, offset: f64) -> Jet2;
}

/// Number of levels and standard deviation of one factor; a zero standard
/// deviation removes the factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorSpec {
    pub n_levels: usize,
    pub sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerOptions {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for InnerOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iters: 100 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceResult {
    /// Approximate log marginal likelihood.
    pub value: f64,
    /// Joint log-likelihood at the mode.
    pub joint: f64,
    /// Mode of the random effects, one vector per factor.
    pub mode: Vec<Vec<f64>>,
    pub log_det: f64,
    pub iterations: usize,
}

struct Layout {
    active: Vec<usize>,
    diag: Option<usize>,
    /// Factors in the dense block with their starting offsets.
    dense: Vec<(usize, usize)>,
    na: usize,
    nc: usize,
}

impl Layout {
    fn new(factors: &[FactorSpec]) -> Self {
        let active: Vec<usize> = (0..factors.len()).filter(|&f| factors[f].sd > 0.0 && factors[f].n_levels > 0).collect();
        let diag = active.iter().copied().max_by_key(|&f| (factors[f].n_levels, f));
        let mut dense = Vec::new();
        let mut na = 0;
        for &f in &active {
            if Some(f) != diag {
                dense.push((f, na));
                na += factors[f].n_levels;
            }
        }
        let nc = diag.map_or(0, |f| factors[f].n_levels);
        Self { active, diag, dense, na, nc }
    }
}

struct Hessian {
    c: Vec<f64>,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

fn prior(x: &[f64], sd: f64) -> f64 {
    x.iter().map(|v| -0.5 * LN_2PI - sd.ln() - 0.5 * (v / sd).powi(2)).sum()
}

fn evaluate<L: UnitLikelihood>(lik: &L, factors: &[FactorSpec], lay: &Layout, m: &[Vec<f64>]) -> (f64, Vec<Jet2>) {
    let jets: Vec<Jet2> = (0..lik.n_units())
        .into_par_iter()
        .map(|i| {
            let off: f64 = lay.active.iter().map(|&f| m[f][lik.level(i, f)]).sum();
            lik.unit(i, off)
        })
        .collect();
    let mut ll: f64 = jets.iter().map(|j| j.v).sum();
    for &f in &lay.active {
        ll += prior(&m[f], factors[f].sd);
    }
    (ll, jets)
}

fn gradient<L: UnitLikelihood>(lik: &L, factors: &[FactorSpec], lay: &Layout, m: &[Vec<f64>], jets: &[Jet2]) -> Vec<Vec<f64>> {
    let mut g: Vec<Vec<f64>> = m.iter().map(|v| vec![0.0; v.len()]).collect();
    for &f in &lay.active {
        let s2 = factors[f].sd * factors[f].sd;
        for (l, x) in m[f].iter().enumerate() {
            g[f][l] = -x / s2;
        }
    }
    for (i, j) in jets.iter().enumerate() {
        for &f in &lay.active {
            g[f][lik.level(i, f)] += j.d1;
        }
    }
    g
}

fn hessian<L: UnitLikelihood>(lik: &L, factors: &[FactorSpec], lay: &Layout, jets: &[Jet2]) -> Hessian {
    let mut c = vec![0.0; lay.nc];
    let mut a = DMatrix::zeros(lay.na, lay.na);
    let mut b = DMatrix::zeros(lay.na, lay.nc);
    if let Some(d) = lay.diag {
        c.iter_mut().for_each(|x| *x = 1.0 / factors[d].sd.powi(2));
    }
    for &(f, start) in &lay.dense {
        for l in 0..factors[f].n_levels {
            a[(start + l, start + l)] += 1.0 / factors[f].sd.powi(2);
        }
    }
    let mut idx = Vec::with_capacity(lay.dense.len());
    for (i, j) in jets.iter().enumerate() {
        let h = -j.d2;
        idx.clear();
        idx.extend(lay.dense.iter().map(|&(f, start)| start + lik.level(i, f)));
        if let Some(d) = lay.diag {
            let ci = lik.level(i, d);
            c[ci] += h;
            for &r in &idx {
                b[(r, ci)] += h;
            }
        }
        for &r in &idx {
            for &s in &idx {
                a[(r, s)] += h;
            }
        }
    }
    Hessian { c, a, b }
}

/// Schur complement `A + ridge - B (C + ridge)^{-1} B'`, or `None` when the
/// diagonal block is not positive.
fn schur(h: &Hessian, ridge: f64) -> Option<(Vec<f64>, DMatrix<f64>)> {
    let cinv: Vec<f64> = h.c.iter().map(|c| 1.0 / (c + ridge)).collect();
    if h.c.iter().any(|c| c + ridge <= 0.0 || !c.is_finite()) {
        return None;
    }
    let mut s = h.a.clone();
    for r in 0..s.nrows() {
        s[(r, r)] += ridge;
    }
    let na = h.a.nrows();
    for k in 0..cinv.len() {
        let ck = cinv[k];
        for r in 0..na {
            let brk = h.b[(r, k)];
            if brk == 0.0 {
                continue;
            }
            for q in 0..=r {
                s[(r, q)] -= brk * h.b[(q, k)] * ck;
            }
        }
    }
    for r in 0..na {
        for q in 0..r {
            s[(q, r)] = s[(r, q)];
        }
    }
    Some((cinv, s))
}

/// Newton direction solving `(H + ridge I) delta = g`.
fn solve(h: &Hessian, g_dense: &DVector<f64>, g_diag: &[f64], ridge: f64) -> Option<(DVector<f64>, Vec<f64>)> {
    let (cinv, s) = schur(h, ridge)?;
    let mut rhs = g_dense.clone();
    for k in 0..cinv.len() {
        let t = cinv[k] * g_diag[k];
        for r in 0..rhs.len() {
            rhs[r] -= h.b[(r, k)] * t;
        }
    }
    let x = if rhs.is_empty() { rhs } else { s.cholesky()?.solve(&rhs) };
    let y = (0..cinv.len())
        .map(|k| {
            let btx: f64 = (0..x.len()).map(|r| h.b[(r, k)] * x[r]).sum();
            cinv[k] * (g_diag[k] - btx)
        })
        .collect();
    Some((x, y))
}

fn smallest_eigenvalue(h: &Hessian) -> f64 {
    let n = h.na() + h.c.len();
    if n <= 600 {
        let mut full = DMatrix::zeros(n, n);
        let na = h.na();
        full.view_mut((0, 0), (na, na)).copy_from(&h.a);
        for k in 0..h.c.len() {
            full[(na + k, na + k)] = h.c[k];
            for r in 0..na {
                full[(r, na + k)] = h.b[(r, k)];
                full[(na + k, r)] = h.b[(r, k)];
            }
        }
        return full.symmetric_eigenvalues().min();
    }
    let cmin = h.c.iter().copied().fold(f64::INFINITY, f64::min);
    match schur(h, 0.0) {
        Some((_, s)) if s.nrows() > 0 => cmin.min(s.symmetric_eigenvalues().min()),
        _ => cmin,
    }
}

impl Hessian {
    fn na(&self) -> usize {
        self.a.nrows()
    }
}

/// Maximize the joint log-likelihood over the random effects by damped
/// Newton steps and return the Laplace approximation of the marginal.
pub fn laplace<L: UnitLikelihood>(
    lik: &L,
    factors: &[FactorSpec],
    warm: Option<&[Vec<f64>]>,
    opts: &InnerOptions,
) -> Result<LaplaceResult> {
    let lay = Layout::new(factors);
    let mut m: Vec<Vec<f64>> = factors.iter().map(|f| vec![0.0; f.n_levels]).collect();
    if let Some(w) = warm {
        for &f in &lay.active {
            if w.get(f).is_some_and(|v| v.len() == factors[f].n_levels) {
                m[f].clone_from(&w[f]);
            }
        }
    }
    let (mut ll, mut jets) = evaluate(lik, factors, &lay, &m);
    if lay.active.is_empty() {
        return Ok(LaplaceResult { value: ll, joint: ll, mode: m, log_det: 0.0, iterations: 0 });
    }

    let mut iterations = 0;
    loop {
        let g = gradient(lik, factors, &lay, &m, &jets);
        let gnorm = lay.active.iter().flat_map(|&f| g[f].iter()).fold(0.0f64, |a, x| a.max(x.abs()));
        if !gnorm.is_finite() {
            return Err(Error::InnerNonConvergence { iterations, grad_norm: gnorm });
        }
        if gnorm < opts.tol {
            break;
        }
        if iterations >= opts.max_iters {
            return Err(Error::InnerNonConvergence { iterations, grad_norm: gnorm });
        }
        iterations += 1;

        let h = hessian(lik, factors, &lay, &jets);
        let g_dense = DVector::from_iterator(lay.na, lay.dense.iter().flat_map(|&(f, _)| g[f].iter().copied()));
        let g_diag: &[f64] = lay.diag.map_or(&[], |d| &g[d]);
        let scale = 1.0 + h.c.iter().chain(h.a.diagonal().iter()).fold(0.0f64, |a, x| a.max(x.abs()));
        let mut ridge = 0.0;
        let (dx, dy) = loop {
            if let Some(sol) = solve(&h, &g_dense, g_diag, ridge) {
                break sol;
            }
            ridge = if ridge == 0.0 { 1e-8 * scale } else { ridge * 10.0 };
            if ridge > 1e12 * scale {
                return Err(Error::InnerNonConvergence { iterations, grad_norm: gnorm });
            }
        };

        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let mut trial = m.clone();
            for &(f, start) in &lay.dense {
                for l in 0..factors[f].n_levels {
                    trial[f][l] += t * dx[start + l];
                }
            }
            if let Some(d) = lay.diag {
                for l in 0..factors[d].n_levels {
                    trial[d][l] += t * dy[l];
                }
            }
            let (ll_new, jets_new) = evaluate(lik, factors, &lay, &trial);
            if ll_new.is_finite() && ll_new >= ll - 1e-12 * ll.abs() {
                m = trial;
                ll = ll_new;
                jets = jets_new;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::InnerNonConvergence { iterations, grad_norm: gnorm });
        }
    }

    let h = hessian(lik, factors, &lay, &jets);
    let log_det = match schur(&h, 0.0) {
        Some((_, s)) => {
            let det_s = if s.nrows() == 0 {
                Some(0.0)
            } else {
                s.cholesky().map(|ch| 2.0 * ch.l().diagonal().iter().map(|x| x.ln()).sum::<f64>())
            };
            det_s.map(|d| d + h.c.iter().map(|c| c.ln()).sum::<f64>())
        }
        None => None,
    };
    let Some(log_det) = log_det else {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: smallest_eigenvalue(&h) });
    };
    let q: usize = lay.active.iter().map(|&f| factors[f].n_levels).sum();
    Ok(LaplaceResult {
        value: ll + 0.5 * q as f64 * LN_2PI - 0.5 * log_det,
        joint: ll,
        mode: m,
        log_det,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    /// `y_i ~ N(mu + sum of effects, tau^2)`.
    struct Gaussian {
        y: Vec<f64>,
        levels: Vec<Vec<usize>>,
        mu: f64,
        tau: f64,
    }

    impl UnitLikelihood for Gaussian {
        fn n_units(&self) -> usize {
            self.y.len()
        }
        fn level(&self, i: usize, f: usize) -> usize {
            self.levels[i][f]
        }
        fn unit(&self, i: usize, offset: f64) -> Jet2 {
            let r = self.y[i] - self.mu - offset;
            let t2 = self.tau * self.tau;
            Jet2 { v: -0.5 * LN_2PI - self.tau.ln() - 0.5 * r * r / t2, d1: r / t2, d2: -1.0 / t2 }
        }
    }

    /// Exact marginal: y ~ N(mu 1, tau^2 I + sum_f sd_f^2 Z_f Z_f').
    fn exact(model: &Gaussian, factors: &[FactorSpec]) -> f64 {
        let n = model.y.len();
        let mut cov = DMatrix::<f64>::identity(n, n) * model.tau.powi(2);
        for (f, spec) in factors.iter().enumerate() {
            if spec.sd == 0.0 {
                continue;
            }
            for i in 0..n {
                for j in 0..n {
                    if model.levels[i][f] == model.levels[j][f] {
                        cov[(i, j)] += spec.sd.powi(2);
                    }
                }
            }
        }
        let r = DVector::from_iterator(n, model.y.iter().map(|y| y - model.mu));
        let ch = cov.cholesky().unwrap();
        let quad = r.dot(&ch.solve(&r));
        let log_det = 2.0 * ch.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
        -0.5 * (n as f64 * LN_2PI + log_det + quad)
    }

    fn model(seed: u64, n: usize, n_levels: [usize; 3]) -> Gaussian {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Gaussian {
            y: (0..n).map(|_| rng.gen_range(-2.0..3.0)).collect(),
            levels: (0..n).map(|_| n_levels.iter().map(|&k| rng.gen_range(0..k)).collect()).collect(),
            mu: 0.4,
            tau: 0.9,
        }
    }

    #[test]
    fn exact_for_a_single_gaussian_intercept() {
        let m = model(1, 40, [6, 1, 1]);
        let factors = [FactorSpec { n_levels: 6, sd: 0.7 }, FactorSpec { n_levels: 1, sd: 0.0 }, FactorSpec {
            n_levels: 1,
            sd: 0.0,
        }];
        let r = laplace(&m, &factors, None, &InnerOptions::default()).unwrap();
        assert!((r.value - exact(&m, &factors)).abs() < 1e-8, "{} vs {}", r.value, exact(&m, &factors));
    }

    #[test]
    fn exact_for_crossed_gaussian_intercepts() {
        let m = model(2, 60, [4, 3, 15]);
        let factors = [
            FactorSpec { n_levels: 4, sd: 0.5 },
            FactorSpec { n_levels: 3, sd: 0.8 },
            FactorSpec { n_levels: 15, sd: 1.3 },
        ];
        let r = laplace(&m, &factors, None, &InnerOptions::default()).unwrap();
        assert!((r.value - exact(&m, &factors)).abs() < 1e-8);
        // warm start lands on the same mode
        let again = laplace(&m, &factors, Some(&r.mode), &InnerOptions::default()).unwrap();
        assert_eq!(again.iterations, 0);
        assert!((again.value - r.value).abs() < 1e-10);
    }

    #[test]
    fn no_random_effects_returns_the_joint_likelihood() {
        let m = model(3, 10, [2, 2, 2]);
        let factors = [FactorSpec { n_levels: 2, sd: 0.0 }; 3];
        let r = laplace(&m, &factors, None, &InnerOptions::default()).unwrap();
        let direct: f64 = (0..10).map(|i| m.unit(i, 0.0).v).sum();
        assert_eq!(r.value, direct);
    }

    #[test]
    fn vanishing_sd_recovers_the_fixed_effects_value() {
        let m = model(4, 30, [3, 1, 10]);
        let direct: f64 = (0..30).map(|i| m.unit(i, 0.0).v).sum();
        let factors = [FactorSpec { n_levels: 3, sd: 0.0 }, FactorSpec { n_levels: 1, sd: 0.0 }, FactorSpec {
            n_levels: 10,
            sd: 1e-6,
        }];
        let r = laplace(&m, &factors, None, &InnerOptions::default()).unwrap();
        assert!(r.mode[2].iter().all(|w| w.abs() < 1e-9));
        assert!((r.value - direct).abs() < 1e-6);
    }

    /// Positive curvature everywhere; the prior is too weak to compensate.
    struct Convex;
    impl UnitLikelihood for Convex {
        fn n_units(&self) -> usize {
            1
        }
        fn level(&self, _: usize, _: usize) -> usize {
            0
        }
        fn unit(&self, _: usize, x: f64) -> Jet2 {
            Jet2 { v: x * x, d1: 2.0 * x, d2: 2.0 }
        }
    }

    #[test]
    fn non_concave_problem_reports_an_error() {
        let factors = [FactorSpec { n_levels: 1, sd: 10.0 }];
        match laplace(&Convex, &factors, None, &InnerOptions::default()) {
            Err(Error::NotPositiveDefinite { min_eigenvalue }) => {
                assert!((min_eigenvalue - (0.01 - 2.0)).abs() < 1e-12)
            }
            other => panic!("{other:?}"),
        }
    }
}
