use serde::{Deserialize, Serialize};

use super::{check_labels, logit, sigmoid, FeatureMatrix};
use crate::error::{Error, Result};

const TOL: f64 = 1e-7;
const MAX_SWEEPS: usize = 50_000;

/// Logistic regression with penalty `lambda * (alpha |b|_1 + (1 - alpha)/2 |b|_2^2)`
/// fitted on standardized features; coefficients are on the original scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticNetModel {
    pub intercept: f64,
    pub coefs: Vec<f64>,
    pub lambda: f64,
    pub alpha: f64,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

impl ElasticNetModel {
    pub fn linear(&self, row: &[f64]) -> f64 {
        self.intercept + self.coefs.iter().zip(row).map(|(b, x)| b * x).sum::<f64>()
    }

    pub fn predict_proba(&self, x: &FeatureMatrix) -> Vec<f64> {
        (0..x.n_rows).map(|i| sigmoid(self.linear(x.row(i)))).collect()
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Coordinate-descent state on one standardized dataset, reusable along a
/// penalty path with warm starts.
#[derive(Debug, Clone)]
pub struct EnetPath {
    n: usize,
    p: usize,
    /// Column-major standardized design.
    xs: Vec<f64>,
    y: Vec<f64>,
    means: Vec<f64>,
    sds: Vec<f64>,
    b0: f64,
    b: Vec<f64>,
    eta: Vec<f64>,
    prob: Vec<f64>,
    loss: f64,
    trial: Vec<f64>,
    sweeps: usize,
    converged: bool,
}

impl EnetPath {
    pub fn new(x: &FeatureMatrix, y: &[f64]) -> Result<Self> {
        check_labels(y, x.n_rows)?;
        let (n, p) = (x.n_rows, x.n_cols());
        let mut xs = vec![0.0; n * p];
        let mut means = vec![0.0; p];
        let mut sds = vec![0.0; p];
        for j in 0..p {
            let col = x.column(j);
            let m = col.iter().sum::<f64>() / n as f64;
            let sd = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64).sqrt();
            means[j] = m;
            if sd > 1e-12 * m.abs().max(1.0) {
                sds[j] = sd;
                for i in 0..n {
                    xs[j * n + i] = (col[i] - m) / sd;
                }
            }
        }
        let ybar = y.iter().sum::<f64>() / n as f64;
        let b0 = logit(ybar);
        let mut s = Self {
            n,
            p,
            xs,
            y: y.to_vec(),
            means,
            sds,
            b0,
            b: vec![0.0; p],
            eta: vec![b0; n],
            prob: vec![ybar; n],
            loss: 0.0,
            trial: vec![0.0; n],
            sweeps: 0,
            converged: false,
        };
        s.loss = s.loss_of(&s.eta);
        Ok(s)
    }

    fn loss_of(&self, eta: &[f64]) -> f64 {
        eta.iter().zip(&self.y).map(|(&e, &y)| softplus(e) - y * e).sum::<f64>() / self.n as f64
    }

    fn penalty(&self, lambda: f64, alpha: f64) -> f64 {
        let l1: f64 = self.b.iter().map(|v| v.abs()).sum();
        let l2: f64 = self.b.iter().map(|v| v * v).sum();
        lambda * (alpha * l1 + 0.5 * (1.0 - alpha) * l2)
    }

    pub fn objective(&self, lambda: f64, alpha: f64) -> f64 {
        self.loss + self.penalty(lambda, alpha)
    }

    /// Largest penalty with a non-zero solution for `alpha` (ridge uses
    /// `alpha = 1e-3` for the bound).
    pub fn lambda_max(&self, alpha: f64) -> f64 {
        let ybar = self.y.iter().sum::<f64>() / self.n as f64;
        let g = (0..self.p)
            .map(|j| {
                let c = &self.xs[j * self.n..(j + 1) * self.n];
                (c.iter().zip(&self.y).map(|(x, y)| x * (y - ybar)).sum::<f64>() / self.n as f64).abs()
            })
            .fold(0.0, f64::max);
        g / alpha.max(1e-3)
    }

    /// Newton step on one coordinate (`None` = intercept), with curvature
    /// doubled until the objective does not increase. Returns the change.
    fn update(&mut self, j: Option<usize>, lambda: f64, alpha: f64) -> f64 {
        let n = self.n as f64;
        let col = j.map(|j| &self.xs[j * self.n..(j + 1) * self.n]);
        let x = |i: usize| col.map_or(1.0, |c| c[i]);
        let mut g = 0.0;
        let mut h = 0.0;
        for i in 0..self.n {
            let xi = x(i);
            g += (self.prob[i] - self.y[i]) * xi;
            h += self.prob[i] * (1.0 - self.prob[i]) * xi * xi;
        }
        g /= n;
        h = (h / n).max(1e-10);
        let (cur, l1, l2) = match j {
            Some(j) => (self.b[j], lambda * alpha, lambda * (1.0 - alpha)),
            None => (self.b0, 0.0, 0.0),
        };
        if cur == 0.0 && g.abs() <= l1 {
            return 0.0;
        }
        let pen = |b: f64| l1 * b.abs() + 0.5 * l2 * b * b;
        let before = self.loss + pen(cur);
        for _ in 0..60 {
            let next = soft_threshold(h * cur - g, l1) / (h + l2);
            let d = next - cur;
            if d == 0.0 {
                return 0.0;
            }
            for i in 0..self.n {
                self.trial[i] = self.eta[i] + d * x(i);
            }
            let loss = self.loss_of(&self.trial);
            if loss + pen(next) <= before {
                std::mem::swap(&mut self.eta, &mut self.trial);
                for i in 0..self.n {
                    self.prob[i] = sigmoid(self.eta[i]);
                }
                self.loss = loss;
                match j {
                    Some(j) => self.b[j] = next,
                    None => self.b0 = next,
                }
                return d.abs();
            }
            h *= 2.0;
        }
        0.0
    }

    /// One cyclic sweep (intercept, then features); returns the largest
    /// coefficient change.
    pub fn sweep(&mut self, lambda: f64, alpha: f64) -> f64 {
        let mut m = self.update(None, lambda, alpha);
        for j in 0..self.p {
            if self.sds[j] > 0.0 {
                m = m.max(self.update(Some(j), lambda, alpha));
            }
        }
        self.sweeps += 1;
        m
    }

    /// Run sweeps from the current state until the largest change falls
    /// below `1e-7`.
    pub fn solve(&mut self, lambda: f64, alpha: f64) -> Result<ElasticNetModel> {
        if !(lambda >= 0.0) || !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParameter(format!("lambda {lambda}, alpha {alpha}")));
        }
        self.sweeps = 0;
        self.converged = false;
        for _ in 0..MAX_SWEEPS {
            if self.sweep(lambda, alpha) < TOL {
                self.converged = true;
                break;
            }
        }
        if !self.converged {
            tracing::warn!(lambda, alpha, "coordinate descent hit the sweep limit");
        }
        Ok(self.model(lambda, alpha))
    }

    pub fn model(&self, lambda: f64, alpha: f64) -> ElasticNetModel {
        let coefs: Vec<f64> =
            (0..self.p).map(|j| if self.sds[j] > 0.0 { self.b[j] / self.sds[j] } else { 0.0 }).collect();
        let intercept = self.b0 - coefs.iter().zip(&self.means).map(|(c, m)| c * m).sum::<f64>();
        ElasticNetModel {
            intercept,
            coefs,
            lambda,
            alpha,
            means: self.means.clone(),
            sds: self.sds.clone(),
            sweeps: self.sweeps,
            converged: self.converged,
        }
    }
}

pub fn fit_elastic_net(x: &FeatureMatrix, y: &[f64], lambda: f64, alpha: f64) -> Result<ElasticNetModel> {
    EnetPath::new(x, y)?.solve(lambda, alpha)
}

/// `m` log-spaced penalties from `lambda_max(alpha)` down to
/// `ratio * lambda_max`, in decreasing order.
pub fn lambda_grid(x: &FeatureMatrix, y: &[f64], alpha: f64, m: usize, ratio: f64) -> Result<Vec<f64>> {
    let top = EnetPath::new(x, y)?.lambda_max(alpha);
    if m == 1 {
        return Ok(vec![top]);
    }
    Ok((0..m).map(|k| top * ratio.powf(k as f64 / (m - 1) as f64)).collect())
}

#[cfg(test)]
mod tests {
    use super::super::testdata::logistic;
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn irls(x: &FeatureMatrix, y: &[f64]) -> Vec<f64> {
        let (n, p) = (x.n_rows, x.n_cols() + 1);
        let a = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { x.get(i, j - 1) });
        let yv = DVector::from_column_slice(y);
        let mut b = DVector::zeros(p);
        for _ in 0..100 {
            let eta = &a * &b;
            let pr = eta.map(sigmoid);
            let w = pr.map(|q| q * (1.0 - q));
            let g = a.transpose() * (&pr - &yv);
            let mut h = DMatrix::zeros(p, p);
            for i in 0..n {
                let r = a.row(i);
                h += r.transpose() * r * w[i];
            }
            let step = h.cholesky().unwrap().solve(&g);
            b -= &step;
            if step.amax() < 1e-13 {
                break;
            }
        }
        b.iter().copied().collect()
    }

    #[test]
    fn unpenalized_matches_newton_irls() {
        for seed in 0..5 {
            let (x, y) = logistic(300, &[0.8, -0.5, 0.3], -0.4, seed);
            let m = fit_elastic_net(&x, &y, 0.0, 0.5).unwrap();
            assert!(m.converged);
            let oracle = irls(&x, &y);
            assert!((m.intercept - oracle[0]).abs() < 1e-5, "{} vs {}", m.intercept, oracle[0]);
            for j in 0..3 {
                assert!((m.coefs[j] - oracle[j + 1]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn huge_penalty_gives_prevalence() {
        let (x, y) = logistic(200, &[1.0, 1.0], 0.2, 7);
        let m = fit_elastic_net(&x, &y, 1e6, 1.0).unwrap();
        assert!(m.coefs.iter().all(|&c| c == 0.0));
        let ybar = y.iter().sum::<f64>() / y.len() as f64;
        assert!((m.intercept - logit(ybar)).abs() < 1e-9);
        let p = m.predict_proba(&x);
        assert!(p.iter().all(|&q| (q - ybar).abs() < 1e-9));
    }

    #[test]
    fn ridge_norm_shrinks_along_path() {
        let (x, y) = logistic(250, &[0.7, -0.4, 0.2, 0.0], 0.0, 3);
        let grid = lambda_grid(&x, &y, 0.0, 10, 1e-3).unwrap();
        let mut path = EnetPath::new(&x, &y).unwrap();
        let mut last = 0.0;
        for &l in &grid {
            path.solve(l, 0.0).unwrap();
            let norm: f64 = path.b.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(norm >= last - 1e-9);
            last = norm;
        }
    }

    #[test]
    fn objective_never_increases_across_sweeps() {
        let (x, y) = logistic(150, &[0.5, 0.5, -0.5, 0.1, 0.0], 0.3, 9);
        for &(l, a) in &[(0.01, 0.5), (0.05, 1.0), (0.0, 0.0), (0.2, 0.25)] {
            let mut p = EnetPath::new(&x, &y).unwrap();
            let mut prev = p.objective(l, a);
            for _ in 0..200 {
                p.sweep(l, a);
                let f = p.objective(l, a);
                assert!(f <= prev + 1e-15, "{f} > {prev}");
                prev = f;
            }
        }
    }

    #[test]
    fn lasso_bound_zeroes_everything() {
        let (x, y) = logistic(200, &[1.0, -1.0], 0.0, 5);
        let top = EnetPath::new(&x, &y).unwrap().lambda_max(1.0);
        let m = fit_elastic_net(&x, &y, top * 1.0001, 1.0).unwrap();
        assert!(m.coefs.iter().all(|&c| c == 0.0));
        let m = fit_elastic_net(&x, &y, top * 0.9, 1.0).unwrap();
        assert!(m.coefs.iter().any(|&c| c != 0.0));
    }

    #[test]
    fn constant_feature_gets_zero_and_monotone_prediction() {
        let (x, y) = logistic(200, &[1.5], 0.0, 1);
        let rows: Vec<Vec<f64>> = (0..x.n_rows).map(|i| vec![x.get(i, 0), 4.0]).collect();
        let x2 = FeatureMatrix::new(vec!["a".into(), "c".into()], &rows).unwrap();
        let m = fit_elastic_net(&x2, &y, 0.001, 0.5).unwrap();
        assert_eq!(m.coefs[1], 0.0);
        assert!(m.coefs[0] > 0.0);
        let mut idx: Vec<usize> = (0..x2.n_rows).collect();
        idx.sort_by(|&a, &b| x2.get(a, 0).total_cmp(&x2.get(b, 0)));
        let p = m.predict_proba(&x2);
        assert!(idx.windows(2).all(|w| p[w[0]] <= p[w[1]]));
    }

    #[test]
    fn rejects_single_class_and_bad_penalty() {
        let (x, _) = logistic(10, &[1.0], 0.0, 1);
        assert!(matches!(fit_elastic_net(&x, &[1.0; 10], 0.1, 0.5), Err(Error::SingleClass(_))));
        let y: Vec<f64> = (0..10).map(|i| f64::from(u8::from(i % 2 == 0))).collect();
        assert!(fit_elastic_net(&x, &y, -1.0, 0.5).is_err());
        assert!(fit_elastic_net(&x, &y, 0.1, 1.5).is_err());
    }
}
