use serde::{Deserialize, Serialize};

use super::{check_labels, logit, sigmoid, FeatureMatrix};
use crate::error::{Error, Result};

const HESSIAN_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    /// Binary labels, raw score on the log-odds scale.
    Logistic,
    /// Real response, half squared error.
    Squared,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub max_depth: usize,
    pub learning_rate: f64,
    pub n_rounds: usize,
    pub lambda_reg: f64,
    pub min_child_weight: f64,
    pub loss: Loss,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self { max_depth: 3, learning_rate: 0.1, n_rounds: 100, lambda_reg: 1.0, min_child_weight: 1.0, loss: Loss::Logistic }
    }
}

impl GbtParams {
    fn check(&self) -> Result<()> {
        if self.max_depth == 0 {
            return Err(Error::InvalidParameter("max_depth must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.learning_rate) {
            return Err(Error::InvalidParameter(format!("learning rate {} outside [0, 1]", self.learning_rate)));
        }
        if !(self.lambda_reg >= 0.0) || !(self.min_child_weight >= 0.0) {
            return Err(Error::InvalidParameter("negative regularization".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    /// Rows with `x[feature] < threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut k = 0;
        loop {
            match self.nodes[k] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    k = if row[feature] < threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, k: usize) -> usize {
            match t.nodes[k] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub params: GbtParams,
    pub base_score: f64,
    pub trees: Vec<Tree>,
}

impl GbtModel {
    pub fn raw(&self, row: &[f64]) -> f64 {
        self.base_score + self.params.learning_rate * self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }

    /// Probabilities for the logistic loss, fitted values otherwise.
    pub fn predict(&self, x: &FeatureMatrix) -> Vec<f64> {
        (0..x.n_rows)
            .map(|i| {
                let r = self.raw(x.row(i));
                match self.params.loss {
                    Loss::Logistic => sigmoid(r),
                    Loss::Squared => r,
                }
            })
            .collect()
    }

    /// The first `rounds` trees.
    pub fn truncated(&self, rounds: usize) -> Self {
        let mut m = self.clone();
        m.trees.truncate(rounds);
        m.params.n_rounds = m.trees.len();
        m
    }
}

/// Incremental booster: each [`GbtTrainer::step`] adds one tree.
#[derive(Debug, Clone)]
pub struct GbtTrainer {
    n: usize,
    p: usize,
    /// Column-major design.
    x: Vec<f64>,
    y: Vec<f64>,
    order: Vec<Vec<u32>>,
    score: Vec<f64>,
    model: GbtModel,
}

#[derive(Clone, Copy)]
struct Best {
    gain: f64,
    feature: usize,
    threshold: f64,
    gl: f64,
    hl: f64,
}

impl GbtTrainer {
    pub fn new(x: &FeatureMatrix, y: &[f64], params: GbtParams) -> Result<Self> {
        params.check()?;
        let (n, p) = (x.n_rows, x.n_cols());
        let base_score = match params.loss {
            Loss::Logistic => {
                check_labels(y, n)?;
                logit(y.iter().sum::<f64>() / n as f64)
            }
            Loss::Squared => {
                if y.len() != n {
                    return Err(Error::Dimension(format!("{} responses for {n} rows", y.len())));
                }
                if n == 0 {
                    return Err(Error::Empty("training set"));
                }
                if y.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidData("non-finite response".into()));
                }
                y.iter().sum::<f64>() / n as f64
            }
        };
        let mut cols = vec![0.0; n * p];
        let mut order = Vec::with_capacity(p);
        for j in 0..p {
            for i in 0..n {
                cols[j * n + i] = x.get(i, j);
            }
            let c = &cols[j * n..(j + 1) * n];
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]).then(a.cmp(&b)));
            order.push(idx);
        }
        Ok(Self {
            n,
            p,
            x: cols,
            y: y.to_vec(),
            order,
            score: vec![base_score; n],
            model: GbtModel { params: GbtParams { n_rounds: 0, ..params }, base_score, trees: Vec::new() },
        })
    }

    pub fn model(&self) -> &GbtModel {
        &self.model
    }

    pub fn into_model(self) -> GbtModel {
        self.model
    }

    pub fn rounds(&self) -> usize {
        self.model.trees.len()
    }

    /// Mean training loss: logloss or half squared error.
    pub fn train_loss(&self) -> f64 {
        let s: f64 = self
            .score
            .iter()
            .zip(&self.y)
            .map(|(&f, &y)| match self.model.params.loss {
                Loss::Logistic => f.max(0.0) + (-f.abs()).exp().ln_1p() - y * f,
                Loss::Squared => 0.5 * (y - f) * (y - f),
            })
            .sum();
        s / self.n as f64
    }

    fn grad_hess(&self) -> (Vec<f64>, Vec<f64>) {
        match self.model.params.loss {
            Loss::Logistic => self
                .score
                .iter()
                .zip(&self.y)
                .map(|(&f, &y)| {
                    let p = sigmoid(f);
                    (p - y, (p * (1.0 - p)).max(HESSIAN_FLOOR))
                })
                .unzip(),
            Loss::Squared => self.score.iter().zip(&self.y).map(|(&f, &y)| (f - y, 1.0)).unzip(),
        }
    }

    pub fn step(&mut self) {
        let prm = self.model.params;
        let (g, h) = self.grad_hess();
        let lam = prm.lambda_reg;
        let score = |gs: f64, hs: f64| gs * gs / (hs + lam);

        let mut nodes = vec![Node::Leaf { value: 0.0 }];
        let mut stats = vec![(g.iter().sum::<f64>(), h.iter().sum::<f64>())];
        let mut node_of = vec![0usize; self.n];
        let mut open = vec![0usize];
        for _ in 0..prm.max_depth {
            if open.is_empty() {
                break;
            }
            let mut slot = vec![usize::MAX; nodes.len()];
            for (s, &k) in open.iter().enumerate() {
                slot[k] = s;
            }
            let mut best: Vec<Option<Best>> = vec![None; open.len()];
            for f in 0..self.p {
                let col = &self.x[f * self.n..(f + 1) * self.n];
                let mut run: Vec<(f64, f64, Option<f64>)> = vec![(0.0, 0.0, None); open.len()];
                for &i in &self.order[f] {
                    let i = i as usize;
                    let s = slot[node_of[i]];
                    if s == usize::MAX {
                        continue;
                    }
                    let v = col[i];
                    let (gl, hl, last) = run[s];
                    if let Some(last) = last {
                        if v > last {
                            let (gt, ht) = stats[open[s]];
                            let hr = ht - hl;
                            if hl >= prm.min_child_weight && hr >= prm.min_child_weight {
                                let gain = 0.5 * (score(gl, hl) + score(gt - gl, hr) - score(gt, ht));
                                if gain > 0.0 && best[s].map_or(true, |b| gain > b.gain) {
                                    let mut threshold = last + (v - last) / 2.0;
                                    if threshold <= last {
                                        threshold = v;
                                    }
                                    best[s] = Some(Best { gain, feature: f, threshold, gl, hl });
                                }
                            }
                        }
                    }
                    run[s] = (gl + g[i], hl + h[i], Some(v));
                }
            }
            let mut next = Vec::new();
            let mut split_of = vec![None; nodes.len()];
            for (s, b) in best.iter().enumerate() {
                let Some(b) = b else { continue };
                let k = open[s];
                let (gt, ht) = stats[k];
                let left = nodes.len();
                nodes.push(Node::Leaf { value: 0.0 });
                nodes.push(Node::Leaf { value: 0.0 });
                stats.push((b.gl, b.hl));
                stats.push((gt - b.gl, ht - b.hl));
                nodes[k] = Node::Split { feature: b.feature, threshold: b.threshold, left, right: left + 1 };
                split_of[k] = Some((b.feature, b.threshold, left));
                next.push(left);
                next.push(left + 1);
            }
            for i in 0..self.n {
                if let Some((f, t, left)) = split_of[node_of[i]] {
                    node_of[i] = if self.x[f * self.n + i] < t { left } else { left + 1 };
                }
            }
            open = next;
        }
        for (k, node) in nodes.iter_mut().enumerate() {
            if let Node::Leaf { value } = node {
                let (gs, hs) = stats[k];
                *value = -gs / (hs + lam);
            }
        }
        let tree = Tree { nodes };
        for i in 0..self.n {
            if let Node::Leaf { value } = tree.nodes[node_of[i]] {
                self.score[i] += prm.learning_rate * value;
            }
        }
        self.model.trees.push(tree);
        self.model.params.n_rounds = self.model.trees.len();
    }
}

pub fn fit_gbt(x: &FeatureMatrix, y: &[f64], params: GbtParams) -> Result<GbtModel> {
    let mut t = GbtTrainer::new(x, y, params)?;
    for _ in 0..params.n_rounds {
        t.step();
    }
    Ok(t.into_model())
}
