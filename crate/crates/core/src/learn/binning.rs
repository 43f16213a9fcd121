//! Per-feature quantile binning for histogram split search.
//!
//! Cut points are actual training values, so a split `x <= cut` keeps the
//! same partition under any strictly increasing transform of the feature.

use super::matrix::Matrix;

#[derive(Clone, Debug)]
pub struct BinnedData {
    pub n_rows: usize,
    /// Column-major bin indices.
    bins: Vec<u16>,
    /// Sorted cut points per column; bin `b` holds values in `(cut[b-1], cut[b]]`.
    pub cuts: Vec<Vec<f64>>,
}

impl BinnedData {
    pub fn build(x: &Matrix, max_bins: usize) -> Self {
        let max_bins = max_bins.clamp(2, u16::MAX as usize);
        let n = x.n_rows();
        let mut bins = vec![0u16; n * x.n_cols()];
        let mut cuts = Vec::with_capacity(x.n_cols());
        for j in 0..x.n_cols() {
            let mut col = x.column(j);
            col.sort_by(f64::total_cmp);
            let mut distinct = col.clone();
            distinct.dedup();
            let mut c: Vec<f64> = if distinct.len() <= max_bins {
                distinct[..distinct.len().saturating_sub(1)].to_vec()
            } else {
                let mut q: Vec<f64> = (1..max_bins).map(|k| col[k * n / max_bins]).collect();
                q.dedup();
                q
            };
            if let Some(&top) = distinct.last() {
                c.retain(|&v| v < top);
            }
            for i in 0..n {
                bins[j * n + i] = bin_of(&c, x.get(i, j));
            }
            cuts.push(c);
        }
        BinnedData {
            n_rows: n,
            bins,
            cuts,
        }
    }

    pub fn n_cols(&self) -> usize {
        self.cuts.len()
    }

    pub fn n_bins(&self, col: usize) -> usize {
        self.cuts[col].len() + 1
    }

    pub fn column(&self, col: usize) -> &[u16] {
        &self.bins[col * self.n_rows..(col + 1) * self.n_rows]
    }
}

/// Number of cut points strictly below `v`.
pub fn bin_of(cuts: &[f64], v: f64) -> u16 {
    cuts.partition_point(|&c| c < v) as u16
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn few_distinct_values_get_own_bins() {
        let x = Matrix::from_rows(&[[3.0], [1.0], [2.0], [1.0]]);
        let b = BinnedData::build(&x, 16);
        assert_eq!(b.cuts[0], vec![1.0, 2.0]);
        assert_eq!(b.column(0), &[2, 0, 1, 0]);
    }

    #[test]
    fn many_values_are_capped() {
        let rows: Vec<[f64; 1]> = (0..1000).map(|i| [i as f64]).collect();
        let b = BinnedData::build(&Matrix::from_rows(&rows), 32);
        assert!(b.n_bins(0) <= 32);
        let col = b.column(0);
        assert!(col.windows(2).all(|w| w[0] <= w[1]));
    }
}
