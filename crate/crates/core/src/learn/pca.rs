use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::{Error, Result};

/// Per-column z-scoring with training statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Constant columns are only centred.
    pub fn fit(x: &Matrix) -> Self {
        let n = x.n_rows().max(1) as f64;
        let mut mean = vec![0.0; x.n_cols()];
        for r in x.rows() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; x.n_cols()];
        for r in x.rows() {
            for j in 0..r.len() {
                var[j] += (r[j] - mean[j]).powi(2);
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let sd = (v / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for i in 0..out.n_rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.scale[j];
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// `c` orthonormal rows of length `d`, by decreasing variance.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
}

/// Numerical rank of the sample covariance of `x`.
pub fn covariance_rank(x: &Matrix) -> usize {
    let (vals, _) = eigen(x);
    rank_of(&vals)
}

fn rank_of(vals: &[f64]) -> usize {
    let top = vals.first().copied().unwrap_or(0.0);
    vals.iter()
        .filter(|&&v| v > 1e-10 * top.max(1e-300) && v > 1e-12)
        .count()
}

/// Eigenpairs of the covariance matrix sorted by decreasing eigenvalue.
fn eigen(x: &Matrix) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = x.n_rows();
    let d = x.n_cols();
    let mean: Vec<f64> = (0..d)
        .map(|j| x.column(j).iter().sum::<f64>() / n as f64)
        .collect();
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for r in x.rows() {
        for a in 0..d {
            let da = r[a] - mean[a];
            for b in a..d {
                cov[(a, b)] += da * (r[b] - mean[b]);
            }
        }
    }
    let denom = (n.max(2) - 1) as f64;
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] / denom;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let vecs = order
        .iter()
        .map(|&i| {
            let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            // Sign convention: largest-magnitude entry positive.
            let k = (0..d)
                .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()))
                .unwrap_or(0);
            if v[k] < 0.0 {
                v.iter_mut().for_each(|e| *e = -*e);
            }
            v
        })
        .collect();
    (vals, vecs)
}

/// Fit the top-`c` principal components of `x` (already standardized).
pub fn fit_pca(x: &Matrix, c: usize) -> Result<Pca> {
    if c == 0 || c > x.n_cols() {
        return Err(Error::Invalid(format!(
            "component count {c} outside 1..={}",
            x.n_cols()
        )));
    }
    let (vals, vecs) = eigen(x);
    let rank = rank_of(&vals);
    if c > rank {
        return Err(Error::RankDeficient { requested: c, rank });
    }
    let total: f64 = vals.iter().sum();
    let n = x.n_rows() as f64;
    let mean = (0..x.n_cols())
        .map(|j| x.column(j).iter().sum::<f64>() / n)
        .collect();
    Ok(Pca {
        mean,
        components: vecs.into_iter().take(c).collect(),
        explained_variance: vals[..c].to_vec(),
        explained_variance_ratio: vals[..c].iter().map(|v| v / total).collect(),
    })
}

impl Pca {
    pub fn apply(&self, x: &Matrix) -> Matrix {
        let c = self.components.len();
        let mut out = Matrix::zeros(x.n_rows(), c);
        for i in 0..x.n_rows() {
            let r = x.row(i);
            for (k, comp) in self.components.iter().enumerate() {
                out.row_mut(i)[k] = comp
                    .iter()
                    .zip(r)
                    .zip(&self.mean)
                    .map(|((w, v), m)| w * (v - m))
                    .sum();
            }
        }
        out
    }

    pub fn reconstruct(&self, scores: &Matrix) -> Matrix {
        let d = self.mean.len();
        let mut out = Matrix::zeros(scores.n_rows(), d);
        for i in 0..scores.n_rows() {
            let s = scores.row(i);
            let row = out.row_mut(i);
            row.copy_from_slice(&self.mean);
            for (k, comp) in self.components.iter().enumerate() {
                for j in 0..d {
                    row[j] += s[k] * comp[j];
                }
            }
        }
        out
    }
}

/// Standardize and project: the transform used for the PCA feature preset.
pub fn apply_pca(scaler: &Standardizer, pca: &Pca, x: &Matrix) -> Matrix {
    pca.apply(&scaler.transform(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng as _;

    fn random(n: usize, d: usize, s: u64) -> Matrix {
        let mut rng = seed::rng(s);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        Matrix::from_rows(&rows)
    }

    #[test]
    fn rank_one_data_is_fully_explained() {
        let rows: Vec<[f64; 3]> = (0..20)
            .map(|i| {
                let t = i as f64;
                [t, 2.0 * t, -t]
            })
            .collect();
        let x = Matrix::from_rows(&rows);
        let p = fit_pca(&x, 1).unwrap();
        assert!((p.explained_variance_ratio[0] - 1.0).abs() < 1e-12);
        assert!(matches!(
            fit_pca(&x, 2),
            Err(Error::RankDeficient { rank: 1, .. })
        ));
    }

    #[test]
    fn full_rank_reconstruction_and_orthonormality() {
        let x = Standardizer::fit(&random(50, 6, 3)).transform(&random(50, 6, 3));
        let p = fit_pca(&x, 6).unwrap();
        let back = p.reconstruct(&p.apply(&x));
        for i in 0..x.n_rows() {
            for j in 0..6 {
                assert!((back.get(i, j) - x.get(i, j)).abs() <= 1e-8);
            }
        }
        for a in 0..6 {
            for b in 0..6 {
                let dot: f64 = p.components[a]
                    .iter()
                    .zip(&p.components[b])
                    .map(|(u, v)| u * v)
                    .sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() <= 1e-8);
            }
        }
    }
}
