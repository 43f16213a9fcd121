//! Minority over-sampling by interpolation toward nearest minority neighbours.

use rand::Rng as _;

use super::matrix::{class_counts, Matrix};
use crate::seed::Rng;
use crate::{Error, Result};

pub const DEFAULT_K: usize = 5;

/// Balanced training data. Synthetic rows follow the original rows.
#[derive(Clone, Debug)]
pub struct Smoted {
    pub x: Matrix,
    pub y: Vec<u8>,
    /// `(base, neighbour)` original row indices behind each synthetic row.
    pub parents: Vec<(usize, usize)>,
}

/// Oversample the minority class up to the majority count.
///
/// Each synthetic point is `x + u (nn - x)` with `u` uniform in `[0, 1)` and
/// `nn` one of the `min(k, m - 1)` nearest minority neighbours of a uniformly
/// drawn minority point `x`. Neighbours are searched in z-scored space so
/// large-range features do not dominate; interpolation happens in the input
/// space. Columns flagged in `binary_cols` are rounded back to 0/1.
pub fn smote(
    x: &Matrix,
    y: &[u8],
    k: usize,
    binary_cols: &[bool],
    rng: &mut Rng,
) -> Result<Smoted> {
    if x.n_rows() != y.len() {
        return Err(Error::Invalid("row/label count mismatch".into()));
    }
    let (neg, pos) = class_counts(y);
    if neg == 0 || pos == 0 {
        return Err(Error::SingleClass(format!(
            "{neg} negatives and {pos} positives"
        )));
    }
    let minority_label = u8::from(pos < neg);
    let minority: Vec<usize> = (0..y.len()).filter(|&i| y[i] == minority_label).collect();
    let m = minority.len();
    let need = neg.max(pos) - m;
    let mut out = Smoted {
        x: x.clone(),
        y: y.to_vec(),
        parents: Vec::with_capacity(need),
    };
    if need == 0 {
        return Ok(out);
    }
    if m < 2 {
        return Err(Error::Invalid(format!(
            "SMOTE needs at least 2 minority samples, got {m}"
        )));
    }
    let k = k.min(m - 1).max(1);

    let d = x.n_cols();
    let scale: Vec<f64> = (0..d)
        .map(|j| {
            let col = x.column(j);
            let mu = col.iter().sum::<f64>() / col.len() as f64;
            let sd = (col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / col.len() as f64).sqrt();
            if sd > 1e-12 {
                1.0 / sd
            } else {
                0.0
            }
        })
        .collect();
    let dist = |a: usize, b: usize| -> f64 {
        let (ra, rb) = (x.row(a), x.row(b));
        (0..d).map(|j| ((ra[j] - rb[j]) * scale[j]).powi(2)).sum()
    };
    let mut neighbours: Vec<Option<Vec<usize>>> = vec![None; m];

    for _ in 0..need {
        let bi = rng.gen_range(0..m);
        let nn = neighbours[bi].get_or_insert_with(|| {
            let mut cand: Vec<(f64, usize)> = (0..m)
                .filter(|&j| j != bi)
                .map(|j| (dist(minority[bi], minority[j]), j))
                .collect();
            cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            cand.truncate(k);
            cand.into_iter().map(|(_, j)| minority[j]).collect()
        });
        let base = minority[bi];
        let other = nn[rng.gen_range(0..nn.len())];
        let u: f64 = rng.gen();
        let (rb, ro) = (x.row(base), x.row(other));
        let row: Vec<f64> = (0..d)
            .map(|j| {
                let v = rb[j] + u * (ro[j] - rb[j]);
                if binary_cols.get(j).copied().unwrap_or(false) {
                    v.round().clamp(0.0, 1.0)
                } else {
                    v
                }
            })
            .collect();
        out.x.push_row(&row);
        out.y.push(minority_label);
        out.parents.push((base, other));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn identical_minority_points_give_identical_synthetics() {
        let mut rows = vec![[1.0, 2.0]; 3];
        rows.extend(vec![[5.0, 5.0]; 10]);
        let x = Matrix::from_rows(&rows);
        let mut y = vec![1u8; 3];
        y.extend(vec![0u8; 10]);
        let s = smote(&x, &y, 5, &[false, false], &mut seed::rng(1)).unwrap();
        assert_eq!(s.x.n_rows(), 20);
        for i in 13..20 {
            assert_eq!(s.x.row(i), &[1.0, 2.0]);
            assert_eq!(s.y[i], 1);
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let x = Matrix::from_rows(&[[1.0], [2.0]]);
        assert!(smote(&x, &[1, 1], 5, &[false], &mut seed::rng(0)).is_err());
    }

    #[test]
    fn binary_columns_stay_binary() {
        let rows: Vec<[f64; 2]> = (0..30).map(|i| [i as f64, (i % 2) as f64]).collect();
        let y: Vec<u8> = (0..30).map(|i| u8::from(i < 6)).collect();
        let s = smote(
            &Matrix::from_rows(&rows),
            &y,
            5,
            &[false, true],
            &mut seed::rng(4),
        )
        .unwrap();
        for r in s.x.rows() {
            assert!(r[1] == 0.0 || r[1] == 1.0);
        }
    }
}
