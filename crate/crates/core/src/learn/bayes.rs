use serde::{Deserialize, Serialize};

use super::matrix::{check_xy, Matrix};
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NbParams {
    pub var_floor: f64,
}

impl Default for NbParams {
    fn default() -> Self {
        NbParams { var_floor: 1e-9 }
    }
}

/// Gaussian naive Bayes for two classes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    pub log_prior: [f64; 2],
    pub mean: [Vec<f64>; 2],
    pub var: [Vec<f64>; 2],
}

impl GaussianNb {
    pub fn fit(x: &Matrix, y: &[u8], params: &NbParams) -> Result<Self> {
        check_xy(x, y)?;
        let d = x.n_cols();
        let mut mean = [vec![0.0; d], vec![0.0; d]];
        let mut var = [vec![0.0; d], vec![0.0; d]];
        let mut count = [0usize; 2];
        for (row, &c) in x.rows().zip(y) {
            let c = c as usize;
            count[c] += 1;
            for (m, v) in mean[c].iter_mut().zip(row) {
                *m += v;
            }
        }
        for c in 0..2 {
            for m in &mut mean[c] {
                *m /= count[c] as f64;
            }
        }
        for (row, &c) in x.rows().zip(y) {
            let c = c as usize;
            for j in 0..d {
                var[c][j] += (row[j] - mean[c][j]).powi(2);
            }
        }
        for c in 0..2 {
            for v in &mut var[c] {
                *v = (*v / count[c] as f64).max(params.var_floor);
            }
        }
        let n = y.len() as f64;
        Ok(GaussianNb {
            log_prior: [(count[0] as f64 / n).ln(), (count[1] as f64 / n).ln()],
            mean,
            var,
        })
    }

    fn log_joint(&self, c: usize, row: &[f64]) -> f64 {
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        self.log_prior[c]
            + row
                .iter()
                .zip(&self.mean[c])
                .zip(&self.var[c])
                .map(|((x, m), v)| -0.5 * (ln_2pi + v.ln() + (x - m).powi(2) / v))
                .sum::<f64>()
    }

    /// Posterior probability of class 1.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        super::boost::sigmoid(self.log_joint(1, row) - self.log_joint(0, row))
    }
}
