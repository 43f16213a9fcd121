//! Discrete AdaBoost (SAMME) with decision stumps.

use serde::{Deserialize, Serialize};

use super::binning::BinnedData;
use super::boost::sigmoid;
use super::matrix::{check_xy, Matrix};
use super::tree::{Tree, TreeParams};
use crate::seed;
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AbParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_bins: usize,
}

impl Default for AbParams {
    fn default() -> Self {
        AbParams {
            n_estimators: 50,
            learning_rate: 1.0,
            max_bins: 255,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaBoost {
    pub stumps: Vec<Tree>,
    pub alphas: Vec<f64>,
}

fn stump_class(t: &Tree, row: &[f64]) -> u8 {
    u8::from(t.predict(row) > 0.5)
}

impl AdaBoost {
    pub fn fit(x: &Matrix, y: &[u8], params: &AbParams, seed: u64) -> Result<Self> {
        check_xy(x, y)?;
        let n = x.n_rows();
        let data = BinnedData::build(x, params.max_bins);
        let target: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
        let stump = TreeParams {
            max_depth: Some(1),
            ..Default::default()
        };
        let mut w = vec![1.0 / n as f64; n];
        let mut rng = seed::rng_for(seed, &["ab"]);
        let mut model = AdaBoost {
            stumps: Vec::new(),
            alphas: Vec::new(),
        };
        for _ in 0..params.n_estimators {
            let t = Tree::grow(&data, (0..n).collect(), &target, &w, &stump, &mut rng).tree;
            let miss: Vec<bool> = (0..n).map(|i| stump_class(&t, x.row(i)) != y[i]).collect();
            let wsum: f64 = w.iter().sum();
            let err: f64 = w
                .iter()
                .zip(&miss)
                .filter(|(_, m)| **m)
                .map(|(v, _)| v)
                .sum::<f64>()
                / wsum;
            if err <= 0.0 {
                model.stumps.push(t);
                model.alphas.push(1.0);
                break;
            }
            if err >= 0.5 {
                if model.stumps.is_empty() {
                    model.stumps.push(t);
                    model.alphas.push(1.0);
                }
                break;
            }
            let alpha = params.learning_rate * ((1.0 - err) / err).ln();
            for (wi, m) in w.iter_mut().zip(&miss) {
                if *m {
                    *wi *= alpha.exp();
                }
            }
            let s: f64 = w.iter().sum();
            for wi in &mut w {
                *wi /= s;
            }
            model.stumps.push(t);
            model.alphas.push(alpha);
        }
        Ok(model)
    }

    /// Softmax over the two weighted vote totals.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let (mut d0, mut d1) = (0.0, 0.0);
        for (t, a) in self.stumps.iter().zip(&self.alphas) {
            if stump_class(t, row) == 1 {
                d1 += a;
            } else {
                d0 += a;
            }
        }
        sigmoid(d1 - d0)
    }
}
