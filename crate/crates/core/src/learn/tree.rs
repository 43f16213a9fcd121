//! Weighted CART on binned features.
//!
//! Splits minimize weighted squared error of the target. For 0/1 targets the
//! squared-error impurity `p(1 - p)` is half the Gini impurity, so the same
//! builder grows classification trees (random forest, stumps) and regression
//! trees on gradients (boosting).

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::binning::BinnedData;
use crate::seed::Rng;

const MIN_GAIN: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Features examined per split; `None` means all.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

/// A fitted tree plus training-time bookkeeping.
pub struct GrownTree {
    pub tree: Tree,
    /// Weighted impurity decrease per feature.
    pub importance: Vec<f64>,
    /// Training rows that ended in each leaf, keyed by node id.
    pub leaves: Vec<(usize, Vec<usize>)>,
}

#[derive(Clone, Copy, Default)]
struct Stats {
    w: f64,
    s: f64,
    n: usize,
}

impl Stats {
    fn add(&mut self, w: f64, y: f64) {
        self.w += w;
        self.s += w * y;
        self.n += 1;
    }

    fn score(&self) -> f64 {
        if self.w > 0.0 {
            self.s * self.s / self.w
        } else {
            0.0
        }
    }
}

struct Best {
    feature: usize,
    bin: u16,
    gain: f64,
}

impl Tree {
    /// Grow a tree on `rows` of `data` (rows may repeat nothing; use weights for bootstrap).
    pub fn grow(
        data: &BinnedData,
        rows: Vec<usize>,
        target: &[f64],
        weight: &[f64],
        params: &TreeParams,
        rng: &mut Rng,
    ) -> GrownTree {
        let n_cols = data.n_cols();
        let mtry = params
            .max_features
            .unwrap_or(n_cols)
            .clamp(1, n_cols.max(1));
        let mut nodes = Vec::new();
        let mut importance = vec![0.0; n_cols];
        let mut leaves = Vec::new();
        let mut features: Vec<usize> = (0..n_cols).collect();
        let max_bins = (0..n_cols).map(|j| data.n_bins(j)).max().unwrap_or(1);
        let mut hist = vec![Stats::default(); max_bins];

        // (node id, rows, depth); node ids are assigned when pushed.
        nodes.push(Node::Leaf { value: 0.0 });
        let mut stack = vec![(0usize, rows, 0usize)];
        while let Some((id, rows, depth)) = stack.pop() {
            let mut total = Stats::default();
            for &i in &rows {
                total.add(weight[i], target[i]);
            }
            let value = if total.w > 0.0 {
                total.s / total.w
            } else {
                0.0
            };
            let mean_sq = rows
                .iter()
                .map(|&i| weight[i] * target[i] * target[i])
                .sum::<f64>();
            let impurity = mean_sq - total.score();
            let can_split = total.n >= params.min_samples_split
                && total.n >= 2 * params.min_samples_leaf
                && params.max_depth.is_none_or(|d| depth < d)
                && impurity > MIN_GAIN;
            let best = if can_split {
                if mtry < n_cols {
                    features.shuffle(rng);
                }
                find_split(
                    data, &rows, target, weight, &total, &features, mtry, params, &mut hist,
                )
            } else {
                None
            };
            match best {
                None => {
                    nodes[id] = Node::Leaf { value };
                    leaves.push((id, rows));
                }
                Some(b) => {
                    importance[b.feature] += b.gain;
                    let col = data.column(b.feature);
                    let (l, r): (Vec<usize>, Vec<usize>) =
                        rows.into_iter().partition(|&i| col[i] <= b.bin);
                    let left = nodes.len();
                    nodes.push(Node::Leaf { value: 0.0 });
                    let right = nodes.len();
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes[id] = Node::Split {
                        feature: b.feature,
                        threshold: data.cuts[b.feature][b.bin as usize],
                        left,
                        right,
                    };
                    stack.push((right, r, depth + 1));
                    stack.push((left, l, depth + 1));
                }
            }
        }
        leaves.sort_by_key(|(id, _)| *id);
        GrownTree {
            tree: Tree { nodes },
            importance,
            leaves,
        }
    }

    pub fn leaf_of(&self, row: &[f64]) -> usize {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf { .. } => return id,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    id = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        match self.nodes[self.leaf_of(row)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn set_leaf_value(&mut self, id: usize, v: f64) {
        self.nodes[id] = Node::Leaf { value: v };
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[allow(clippy::too_many_arguments)]
fn find_split(
    data: &BinnedData,
    rows: &[usize],
    target: &[f64],
    weight: &[f64],
    total: &Stats,
    features: &[usize],
    mtry: usize,
    params: &TreeParams,
    hist: &mut [Stats],
) -> Option<Best> {
    let parent = total.score();
    let mut best: Option<Best> = None;
    let mut visited = 0;
    for &f in features {
        if visited >= mtry {
            break;
        }
        let nb = data.n_bins(f);
        if nb < 2 {
            continue;
        }
        let col = data.column(f);
        let h = &mut hist[..nb];
        h.fill(Stats::default());
        for &i in rows {
            h[col[i] as usize].add(weight[i], target[i]);
        }
        if h.iter().filter(|s| s.n > 0).count() < 2 {
            // Constant within this node; does not count towards mtry.
            continue;
        }
        visited += 1;
        let mut left = Stats::default();
        for (b, s) in h.iter().enumerate().take(nb - 1) {
            left.w += s.w;
            left.s += s.s;
            left.n += s.n;
            if s.n == 0 {
                continue;
            }
            let right = Stats {
                w: total.w - left.w,
                s: total.s - left.s,
                n: total.n - left.n,
            };
            if left.n < params.min_samples_leaf || right.n < params.min_samples_leaf {
                continue;
            }
            if right.n == 0 || left.w <= 0.0 || right.w <= 0.0 {
                continue;
            }
            let gain = left.score() + right.score() - parent;
            if gain > MIN_GAIN && best.as_ref().is_none_or(|bb| gain > bb.gain) {
                best = Some(Best {
                    feature: f,
                    bin: b as u16,
                    gain,
                });
            }
        }
    }
    best
}
