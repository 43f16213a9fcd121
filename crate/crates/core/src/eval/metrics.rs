//! Macro-F1 and AUROC.

use crate::learn::matrix::class_counts;
use crate::{Error, Result};

/// Decision threshold applied to class-1 scores.
pub const THRESHOLD: f64 = 0.5;

pub fn predict_labels(scores: &[f64]) -> Vec<u8> {
    scores.iter().map(|&s| u8::from(s >= THRESHOLD)).collect()
}

fn require_both(y: &[u8]) -> Result<()> {
    let (neg, pos) = class_counts(y);
    if neg == 0 || pos == 0 {
        return Err(Error::SingleClass(format!(
            "y_true has {neg} negatives and {pos} positives"
        )));
    }
    Ok(())
}

/// F1 of `class`, 0 when precision + recall is 0.
pub fn class_f1(y_true: &[u8], y_pred: &[u8], class: u8) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t == class, p == class) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            _ => {}
        }
    }
    let denom = 2 * tp + fp + fn_;
    if tp == 0 || denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Unweighted mean of the two per-class F1 scores.
pub fn macro_f1(y_true: &[u8], y_pred: &[u8]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Invalid("y_true and y_pred differ in length".into()));
    }
    require_both(y_true)?;
    Ok((class_f1(y_true, y_pred, 0) + class_f1(y_true, y_pred, 1)) / 2.0)
}

/// Area under the ROC curve from the Mann-Whitney rank statistic, ties count 1/2.
///
/// Binary AUROC is symmetric in the classes, so this is also the
/// macro-averaged AUROC.
pub fn auroc(y_true: &[u8], scores: &[f64]) -> Result<f64> {
    if y_true.len() != scores.len() {
        return Err(Error::Invalid("y_true and scores differ in length".into()));
    }
    require_both(y_true)?;
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::NonFinite { row: i, col: 0 });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based midrank of the tie block i..=j
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if y_true[k] == 1 {
                rank_sum_pos += mid;
            }
        }
        i = j + 1;
    }
    let (neg, pos) = class_counts(y_true);
    let (n0, n1) = (neg as f64, pos as f64);
    Ok((rank_sum_pos - n1 * (n1 + 1.0) / 2.0) / (n0 * n1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(auroc(&[0, 0, 1, 1], &[0.1, 0.4, 0.35, 0.8]).unwrap(), 0.75);
        assert_eq!(auroc(&[0, 1, 0, 1], &[0.3; 4]).unwrap(), 0.5);
        let y = [0, 0, 1, 1];
        assert_eq!(macro_f1(&y, &y).unwrap(), 1.0);
        assert_eq!(auroc(&y, &[0.0, 0.1, 0.9, 1.0]).unwrap(), 1.0);
        let f = macro_f1(&[0, 0, 0, 1], &[0, 0, 0, 0]).unwrap();
        assert!((f - 3.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn single_class_rejected() {
        assert!(auroc(&[1, 1], &[0.2, 0.3]).is_err());
        assert!(macro_f1(&[0, 0], &[0, 1]).is_err());
    }

    #[test]
    fn threshold() {
        assert_eq!(predict_labels(&[0.49, 0.5, 0.9]), vec![0, 1, 1]);
    }
}
