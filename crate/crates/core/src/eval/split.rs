//! Stratified splits.

use rand::seq::SliceRandom;

use crate::seed::Rng;

/// Train count for a class of size `n` at `ratio`, kept within `1..n`.
fn train_count(n: usize, ratio: f64) -> usize {
    ((ratio * n as f64).floor() as usize).clamp(1, n.saturating_sub(1).max(1))
}

/// Why a user cannot be split, or `None` when the split is usable.
///
/// A usable split has at least 2 training and 1 test event of each class.
pub fn split_problem(labels: &[u8], ratio: f64) -> Option<String> {
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if labels.len() < 4 {
        return Some(format!("{} events, at least 4 needed", labels.len()));
    }
    for (name, n) in [("non-eating", neg), ("eating", pos)] {
        if n == 0 {
            return Some(format!("no {name} events"));
        }
        let tr = train_count(n, ratio);
        if tr < 2 || n - tr < 1 {
            return Some(format!(
                "{n} {name} events cannot give 2 training and 1 test event"
            ));
        }
    }
    None
}

/// Stratified split of one user's rows: `floor(ratio * n_c)` rows of each class train.
///
/// `rows` are global row ids and `labels[i]` the label of `rows[i]`.
/// Both outputs are sorted.
pub fn stratified_split_user(
    rows: &[usize],
    labels: &[u8],
    ratio: f64,
    rng: &mut Rng,
) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [0u8, 1] {
        let mut members: Vec<usize> = rows
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == class)
            .map(|(&r, _)| r)
            .collect();
        if members.is_empty() {
            continue;
        }
        members.shuffle(rng);
        let k = train_count(members.len(), ratio);
        train.extend_from_slice(&members[..k]);
        test.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Stratified k-fold over positions `0..y.len()`; returns the test positions of each fold.
pub fn stratified_kfold(y: &[u8], k: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let k = k.max(1);
    let mut folds = vec![Vec::new(); k];
    let mut offset = 0;
    for class in [0u8, 1] {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        members.shuffle(rng);
        for (i, m) in members.into_iter().enumerate() {
            folds[(i + offset) % k].push(m);
        }
        offset += y.iter().filter(|&&l| l == class).count();
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    folds
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn per_class_floor() {
        let rows: Vec<usize> = (100..110).collect();
        let labels = [1, 1, 1, 1, 1, 1, 1, 0, 0, 0];
        let (tr, te) = stratified_split_user(&rows, &labels, 0.7, &mut seed::rng(3));
        let eat = |v: &[usize]| v.iter().filter(|&&r| r < 107).count();
        assert_eq!((eat(&tr), tr.len() - eat(&tr)), (4, 2));
        assert_eq!(tr.len() + te.len(), 10);
        assert!(tr.iter().all(|r| !te.contains(r)));
        let again = stratified_split_user(&rows, &labels, 0.7, &mut seed::rng(3));
        assert_eq!(again, (tr, te));
    }

    #[test]
    fn eligibility() {
        assert!(split_problem(&[1, 1, 1, 0, 0, 0], 0.7).is_none());
        assert!(split_problem(&[1, 1, 1, 1], 0.7).is_some());
        assert!(split_problem(&[1, 1, 0, 0, 0], 0.7).is_some());
    }

    #[test]
    fn kfold_is_a_stratified_partition() {
        let y: Vec<u8> = (0..23).map(|i| u8::from(i % 3 == 0)).collect();
        let folds = stratified_kfold(&y, 3, &mut seed::rng(1));
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        for f in &folds {
            assert!(f.iter().any(|&i| y[i] == 1) && f.iter().any(|&i| y[i] == 0));
        }
    }
}
