//! Greedy sequential forward feature selection.

use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::pipeline::{cv_score, Objective, PipelineSpec};
use crate::exec::Execution;
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SfsConfig {
    pub folds: usize,
    /// Minimum improvement needed to keep adding features.
    pub tolerance: f64,
    pub objective: Objective,
    pub max_features: Option<usize>,
}

impl Default for SfsConfig {
    fn default() -> Self {
        SfsConfig {
            folds: 3,
            tolerance: 1e-4,
            objective: Objective::Auroc,
            max_features: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SfsResult {
    /// Selected columns of the input matrix, in the order they were added.
    pub selected: Vec<usize>,
    pub score: f64,
    /// Score after each addition.
    pub trace: Vec<f64>,
}

/// Add, one at a time, the column that most improves the inner-CV score.
///
/// Stops when the best addition improves by no more than `tolerance`; the
/// first feature is always taken. Ties go to the lowest column index.
pub fn sfs(
    x: &Matrix,
    y: &[u8],
    binary_cols: &[bool],
    spec: &PipelineSpec,
    config: &SfsConfig,
    seed: u64,
    exec: Execution,
) -> Result<SfsResult> {
    let d = x.n_cols();
    let limit = config.max_features.unwrap_or(d).clamp(1, d);
    let mut selected: Vec<usize> = Vec::new();
    let mut current = f64::NEG_INFINITY;
    let mut trace = Vec::new();
    while selected.len() < limit {
        let candidates: Vec<usize> = (0..d).filter(|j| !selected.contains(j)).collect();
        let scores = exec.try_map(&candidates, |&j| {
            let mut cols = selected.clone();
            cols.push(j);
            score_subset(x, y, binary_cols, &cols, spec, config, seed)
        })?;
        let (best_pos, best) =
            scores
                .iter()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc },
                );
        if !selected.is_empty() && best - current <= config.tolerance {
            break;
        }
        selected.push(candidates[best_pos]);
        current = best;
        trace.push(best);
    }
    Ok(SfsResult {
        selected,
        score: current,
        trace,
    })
}

/// Inner-CV score of the column subset `cols`.
pub fn score_subset(
    x: &Matrix,
    y: &[u8],
    binary_cols: &[bool],
    cols: &[usize],
    spec: &PipelineSpec,
    config: &SfsConfig,
    seed: u64,
) -> Result<f64> {
    let sub = x.select_cols(cols);
    let bin: Vec<bool> = cols
        .iter()
        .map(|&j| binary_cols.get(j).copied().unwrap_or(false))
        .collect();
    cv_score(
        &sub,
        y,
        &bin,
        spec,
        config.folds,
        config.objective,
        seed,
        Execution::Sequential,
    )
}
