//! Gradient boosting with log-loss on depth-limited regression trees.

use serde::{Deserialize, Serialize};

use super::binning::BinnedData;
use super::matrix::{check_xy, class_counts, Matrix};
use super::tree::{Tree, TreeParams};
use crate::seed;
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub max_bins: usize,
}

impl Default for GbParams {
    fn default() -> Self {
        GbParams {
            n_estimators: 100,
            learning_rate: 0.1,
            max_depth: 3,
            min_samples_leaf: 1,
            max_bins: 255,
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary log-loss of one label at logit `f`: `ln(1 + e^f) - y f`.
pub fn log_loss(y: f64, f: f64) -> f64 {
    let softplus = if f > 0.0 {
        f + (-f).exp().ln_1p()
    } else {
        f.exp().ln_1p()
    };
    softplus - y * f
}

/// Derivative of [`log_loss`] with respect to the logit.
pub fn log_loss_gradient(y: f64, f: f64) -> f64 {
    sigmoid(f) - y
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientBoosting {
    pub init: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
}

impl GradientBoosting {
    pub fn fit(x: &Matrix, y: &[u8], params: &GbParams, seed: u64) -> Result<Self> {
        check_xy(x, y)?;
        let n = x.n_rows();
        let (neg, pos) = class_counts(y);
        let init = (pos as f64 / neg as f64).ln();
        let data = BinnedData::build(x, params.max_bins);
        let labels: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
        let tree_params = TreeParams {
            max_depth: Some(params.max_depth),
            min_samples_leaf: params.min_samples_leaf,
            ..Default::default()
        };
        let weight = vec![1.0; n];
        let mut logit = vec![init; n];
        let mut rng = seed::rng_for(seed, &["gb"]);
        let mut trees = Vec::with_capacity(params.n_estimators);
        for _ in 0..params.n_estimators {
            let residual: Vec<f64> = labels
                .iter()
                .zip(&logit)
                .map(|(&yy, &f)| -log_loss_gradient(yy, f))
                .collect();
            let mut grown = Tree::grow(
                &data,
                (0..n).collect(),
                &residual,
                &weight,
                &tree_params,
                &mut rng,
            );
            // One Newton step per leaf.
            for (leaf, rows) in &grown.leaves {
                let num: f64 = rows.iter().map(|&i| residual[i]).sum();
                let den: f64 = rows
                    .iter()
                    .map(|&i| {
                        let p = sigmoid(logit[i]);
                        p * (1.0 - p)
                    })
                    .sum();
                let v = if den.abs() < 1e-12 { 0.0 } else { num / den };
                grown.tree.set_leaf_value(*leaf, v);
                for &i in rows {
                    logit[i] += params.learning_rate * v;
                }
            }
            trees.push(grown.tree);
        }
        Ok(GradientBoosting {
            init,
            learning_rate: params.learning_rate,
            trees,
        })
    }

    pub fn decision(&self, row: &[f64]) -> f64 {
        self.init + self.learning_rate * self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        sigmoid(self.decision(row))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_is_stable_at_extremes() {
        assert!(log_loss(1.0, 800.0).abs() < 1e-12);
        assert!((log_loss(0.0, 800.0) - 800.0).abs() < 1e-9);
        assert!((log_loss(1.0, 0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(sigmoid(-1000.0), 0.0);
    }
}
