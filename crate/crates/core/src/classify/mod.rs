//! Man-versus-zone classifiers: elastic-net logistic regression and
//! second-order gradient-boosted trees, with cross-validated tuning.

mod enet;
mod gbt;
mod tune;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use enet::{fit_elastic_net, lambda_grid, ElasticNetModel, EnetPath};
pub use gbt::{fit_gbt, GbtModel, GbtParams, GbtTrainer, Loss, Node, Tree};
pub use tune::{fit_hyper, train, tune, EnetGrid, GbtGrid, Hyper, TuneGrid, TuneResult};

use crate::error::{Error, Result};

pub const MODEL_SCHEMA: &str = "coverscope.model/1";

/// Dense row-major design matrix with named columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    pub n_rows: usize,
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let p = names.len();
        let mut data = Vec::with_capacity(rows.len() * p);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != p {
                return Err(Error::Dimension(format!("row {i} has {} values, expected {p}", r.len())));
            }
            if let Some(j) = r.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidData(format!("row {i}: non-finite value in `{}`", names[j])));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { names, n_rows: rows.len(), data })
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_cols();
        &self.data[i * p..(i + 1) * p]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols() + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, j)).collect()
    }

    pub fn rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.n_cols());
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self { names: self.names.clone(), n_rows: idx.len(), data }
    }

    /// Columns in the order of `names`; every name must be present.
    pub fn select(&self, names: &[String]) -> Result<Self> {
        let missing: Vec<String> = names.iter().filter(|n| !self.names.contains(n)).cloned().collect();
        let unexpected: Vec<String> = self.names.iter().filter(|n| !names.contains(n)).cloned().collect();
        if !missing.is_empty() {
            return Err(Error::Schema { missing, unexpected });
        }
        let cols: Vec<usize> = names.iter().map(|n| self.names.iter().position(|m| m == n).expect("present")).collect();
        let mut data = Vec::with_capacity(self.n_rows * cols.len());
        for i in 0..self.n_rows {
            let r = self.row(i);
            data.extend(cols.iter().map(|&j| r[j]));
        }
        Ok(Self { names: names.to_vec(), n_rows: self.n_rows, data })
    }

    /// Same columns as `names`, reordered if needed; extra or missing
    /// columns are a schema error.
    pub fn align(&self, names: &[String]) -> Result<Self> {
        if self.names == names {
            return Ok(self.clone());
        }
        let missing: Vec<String> = names.iter().filter(|n| !self.names.contains(n)).cloned().collect();
        let unexpected: Vec<String> = self.names.iter().filter(|n| !names.contains(n)).cloned().collect();
        if !missing.is_empty() || !unexpected.is_empty() {
            return Err(Error::Schema { missing, unexpected });
        }
        self.select(names)
    }
}

/// Labels must be 0/1 with both classes present.
pub fn check_labels(y: &[f64], n_rows: usize) -> Result<()> {
    if y.len() != n_rows {
        return Err(Error::Dimension(format!("{} labels for {n_rows} rows", y.len())));
    }
    if y.len() < 2 {
        return Err(Error::InvalidData(format!("need at least 2 observations, got {}", y.len())));
    }
    if let Some(v) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidData(format!("label {v} is not 0/1")));
    }
    if y.iter().all(|&v| v == y[0]) {
        return Err(Error::SingleClass(y[0]));
    }
    Ok(())
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Enet,
    Gbt,
}

impl ModelKind {
    pub const ALL: [ModelKind; 2] = [ModelKind::Enet, ModelKind::Gbt];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Enet => "enet",
            Self::Gbt => "gbt",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "enet" => Some(Self::Enet),
            "gbt" => Some(Self::Gbt),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Predictor {
    ElasticNet(ElasticNetModel),
    Gbt(GbtModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub n_rows: usize,
    pub n_positive: usize,
    pub seed: u64,
    pub folds: usize,
    pub cv_logloss: Option<f64>,
}

/// Persisted classifier: schema, hyperparameters, parameters and metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub schema: String,
    pub feature_names: Vec<String>,
    pub hyper: Hyper,
    pub predictor: Predictor,
    pub meta: TrainingMeta,
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self.predictor {
            Predictor::ElasticNet(_) => ModelKind::Enet,
            Predictor::Gbt(_) => ModelKind::Gbt,
        }
    }

    /// Man probabilities, clipped to `[1e-12, 1 - 1e-12]`.
    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        let x = x.align(&self.feature_names)?;
        let raw = match &self.predictor {
            Predictor::ElasticNet(m) => m.predict_proba(&x),
            Predictor::Gbt(m) => m.predict(&x),
        };
        Ok(raw.into_iter().map(crate::eval::clip).collect())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let m: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if m.schema != MODEL_SCHEMA {
            return Err(Error::InvalidData(format!("unsupported model schema `{}`", m.schema)));
        }
        Ok(m)
    }
}

#[cfg(test)]
pub(crate) mod testdata {
    use super::FeatureMatrix;
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, StandardNormal};

    /// Logistic data with coefficients `beta` and a mild correlation.
    pub fn logistic(n: usize, beta: &[f64], intercept: f64, seed: u64) -> (FeatureMatrix, Vec<f64>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let p = beta.len();
        let mut rows = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let common: f64 = StandardNormal.sample(&mut rng);
            let r: Vec<f64> = (0..p)
                .map(|j| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    (0.3 * common + e) * (1.0 + j as f64) + j as f64
                })
                .collect();
            let eta: f64 = intercept + r.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>();
            y.push(f64::from(u8::from(rng.gen::<f64>() < super::sigmoid(eta))));
            rows.push(r);
        }
        let names = (0..p).map(|j| format!("x{j}")).collect();
        (FeatureMatrix::new(names, &rows).unwrap(), y)
    }
}
