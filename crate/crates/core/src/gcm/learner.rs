use nalgebra::{DMatrix, DVector};

use crate::classify::{fit_gbt, FeatureMatrix, GbtParams, Loss};
use crate::error::{Error, Result};

/// Regression procedure used for the conditional means.
pub trait Learner: Sync {
    /// Fit on `(z_train, target)` and predict at `z_test`. `binary` targets
    /// are 0/1 and predictions are probabilities.
    fn fit_predict(&self, z_train: &FeatureMatrix, target: &[f64], z_test: &FeatureMatrix, binary: bool) -> Result<Vec<f64>>;

    fn name(&self) -> String;
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Least squares with an intercept (minimum-norm when rank deficient).
#[derive(Debug, Clone, Copy, Default)]
pub struct OlsLearner;

impl Learner for OlsLearner {
    fn fit_predict(&self, z_train: &FeatureMatrix, target: &[f64], z_test: &FeatureMatrix, _binary: bool) -> Result<Vec<f64>> {
        if target.is_empty() {
            return Err(Error::Empty("training set"));
        }
        let p = z_train.n_cols() + 1;
        let design = |z: &FeatureMatrix| DMatrix::from_fn(z.n_rows, p, |i, j| if j == 0 { 1.0 } else { z.get(i, j - 1) });
        let a = design(z_train);
        let svd = a.svd(true, true);
        let eps = 1e-10 * svd.singular_values.max();
        let b = svd
            .solve(&DVector::from_column_slice(target), eps)
            .map_err(|e| Error::InvalidData(format!("least squares failed: {e}")))?;
        Ok((design(z_test) * b).iter().copied().collect())
    }

    fn name(&self) -> String {
        "ols".into()
    }
}

/// Boosted trees: logistic loss for binary targets, squared loss otherwise.
#[derive(Debug, Clone, Copy)]
pub struct GbtLearner {
    pub params: GbtParams,
}

impl Default for GbtLearner {
    fn default() -> Self {
        Self { params: GbtParams { max_depth: 3, learning_rate: 0.1, n_rounds: 100, ..GbtParams::default() } }
    }
}

impl Learner for GbtLearner {
    fn fit_predict(&self, z_train: &FeatureMatrix, target: &[f64], z_test: &FeatureMatrix, binary: bool) -> Result<Vec<f64>> {
        if target.is_empty() {
            return Err(Error::Empty("training set"));
        }
        if binary && target.iter().all(|&v| v == target[0]) {
            return Ok(vec![target[0]; z_test.n_rows]);
        }
        if z_train.n_cols() == 0 {
            return Ok(vec![mean(target); z_test.n_rows]);
        }
        let loss = if binary { Loss::Logistic } else { Loss::Squared };
        let m = fit_gbt(z_train, target, GbtParams { loss, ..self.params })?;
        Ok(m.predict(z_test))
    }

    fn name(&self) -> String {
        format!("gbt(depth={}, rate={}, rounds={})", self.params.max_depth, self.params.learning_rate, self.params.n_rounds)
    }
}
