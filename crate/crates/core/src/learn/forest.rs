use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::binning::BinnedData;
use super::matrix::{check_xy, Matrix};
use super::tree::{Tree, TreeParams};
use crate::exec::Execution;
use crate::seed;
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RfParams {
    pub n_estimators: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Features per split; `None` means `floor(sqrt(n_features))`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub max_bins: usize,
}

impl Default for RfParams {
    fn default() -> Self {
        RfParams {
            n_estimators: 100,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: None,
            bootstrap: true,
            max_bins: 255,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<Tree>,
    /// Mean impurity decrease per feature, normalized to sum 1.
    pub importances: Vec<f64>,
}

impl RandomForest {
    /// Each tree draws from its own stream derived from `(seed, tree index)`.
    pub fn fit(
        x: &Matrix,
        y: &[u8],
        params: &RfParams,
        seed: u64,
        exec: Execution,
    ) -> Result<Self> {
        check_xy(x, y)?;
        let n = x.n_rows();
        let d = x.n_cols();
        let data = BinnedData::build(x, params.max_bins);
        let target: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            min_samples_split: params.min_samples_split,
            min_samples_leaf: params.min_samples_leaf,
            max_features: Some(
                params
                    .max_features
                    .unwrap_or(((d as f64).sqrt().floor() as usize).max(1)),
            ),
        };
        let grown = exec.map_range(params.n_estimators, |t| {
            let mut rng = seed::rng(seed::derive_index(seed, t as u64));
            let mut weight = vec![0.0; n];
            if params.bootstrap {
                for _ in 0..n {
                    weight[rng.gen_range(0..n)] += 1.0;
                }
            } else {
                weight.fill(1.0);
            }
            let rows: Vec<usize> = (0..n).filter(|&i| weight[i] > 0.0).collect();
            Tree::grow(&data, rows, &target, &weight, &tree_params, &mut rng)
        });
        let mut importances = vec![0.0; d];
        let mut counted = 0usize;
        let mut trees = Vec::with_capacity(grown.len());
        for g in grown {
            let s: f64 = g.importance.iter().sum();
            if s > 0.0 {
                for (a, b) in importances.iter_mut().zip(&g.importance) {
                    *a += b / s;
                }
                counted += 1;
            }
            trees.push(g.tree);
        }
        let total: f64 = importances.iter().sum();
        if counted > 0 && total > 0.0 {
            for v in &mut importances {
                *v /= total;
            }
        }
        Ok(RandomForest { trees, importances })
    }

    /// Fraction of trees voting for class 1; a tree with a 0.5 leaf casts half a vote.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let votes: f64 = self
            .trees
            .iter()
            .map(|t| {
                let p = t.predict(row);
                if p > 0.5 {
                    1.0
                } else if p == 0.5 {
                    0.5
                } else {
                    0.0
                }
            })
            .sum();
        votes / self.trees.len().max(1) as f64
    }
}
