//! Training pipeline shared by the protocols and the inner selection loops:
//! optional z-scoring and PCA (statistics from the real training rows),
//! SMOTE on the training rows, then the classifier.

use serde::{Deserialize, Serialize};

use super::matrix::{check_xy, class_counts, Matrix};
use super::pca::{fit_pca, Pca, Standardizer};
use super::smote::smote;
use super::{train, Model, ModelKind, ModelParams};
use crate::eval::metrics::{auroc, macro_f1, predict_labels};
use crate::eval::split::stratified_kfold;
use crate::exec::Execution;
use crate::seed;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Reduction {
    #[default]
    None,
    Pca(usize),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    #[default]
    Auroc,
    MacroF1,
}

impl Objective {
    pub fn score(self, y: &[u8], scores: &[f64]) -> Result<f64> {
        match self {
            Objective::Auroc => auroc(y, scores),
            Objective::MacroF1 => macro_f1(y, &predict_labels(scores)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub kind: ModelKind,
    pub params: ModelParams,
    pub smote_k: usize,
    pub reduction: Reduction,
}

impl PipelineSpec {
    pub fn new(kind: ModelKind, params: ModelParams) -> Self {
        PipelineSpec {
            kind,
            params,
            smote_k: super::smote::DEFAULT_K,
            reduction: Reduction::None,
        }
    }

    pub fn with_reduction(mut self, reduction: Reduction) -> Self {
        self.reduction = reduction;
        self
    }

    /// Fit on training rows only. `binary_cols` flags 0/1 columns of `x` for SMOTE.
    pub fn fit(
        &self,
        x: &Matrix,
        y: &[u8],
        binary_cols: &[bool],
        seed: u64,
        exec: Execution,
    ) -> Result<FittedPipeline> {
        check_xy(x, y)?;
        let needs_scaler =
            self.kind.wants_standardized() || matches!(self.reduction, Reduction::Pca(_));
        let scaler = needs_scaler.then(|| Standardizer::fit(x));
        let pca = match self.reduction {
            Reduction::Pca(c) => Some(fit_pca(&scaler.as_ref().expect("scaler").transform(x), c)?),
            Reduction::None => None,
        };

        let (neg, pos) = class_counts(y);
        let (xb, yb) = if neg.min(pos) >= 2 && neg != pos {
            let mut rng = seed::rng_for(seed, &["smote"]);
            let s = smote(x, y, self.smote_k, binary_cols, &mut rng)?;
            (s.x, s.y)
        } else if neg.min(pos) == 1 && neg != pos {
            // A lone minority row has no neighbour; replicate it instead.
            let lone = y
                .iter()
                .position(|&l| l == u8::from(pos < neg))
                .expect("minority row");
            let mut xb = x.clone();
            let mut yb = y.to_vec();
            for _ in 0..neg.max(pos) - 1 {
                xb.push_row(x.row(lone));
                yb.push(y[lone]);
            }
            (xb, yb)
        } else {
            (x.clone(), y.to_vec())
        };

        let mut fitted = FittedPipeline {
            spec: *self,
            scaler,
            pca,
            model: None,
        };
        let xt = fitted.transform(&xb);
        fitted.model = Some(train(
            self.kind,
            &xt,
            &yb,
            &self.params,
            seed::derive(seed, "model"),
            exec,
        )?);
        Ok(fitted)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedPipeline {
    pub spec: PipelineSpec,
    pub scaler: Option<Standardizer>,
    pub pca: Option<Pca>,
    pub model: Option<Model>,
}

impl FittedPipeline {
    pub fn transform(&self, x: &Matrix) -> Matrix {
        let mut out = match &self.scaler {
            Some(s) => s.transform(x),
            None => x.clone(),
        };
        if let Some(p) = &self.pca {
            out = p.apply(&out);
        }
        out
    }

    pub fn model(&self) -> &Model {
        self.model.as_ref().expect("pipeline is fitted")
    }

    pub fn predict_scores(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.model().predict_scores(&self.transform(x))
    }
}

/// Mean objective over stratified `folds`-fold cross-validation of `spec` on `(x, y)`.
///
/// Fold assignment depends only on `y` and `seed`, so different column
/// subsets of the same data are scored on identical folds.
#[allow(clippy::too_many_arguments)]
pub fn cv_score(
    x: &Matrix,
    y: &[u8],
    binary_cols: &[bool],
    spec: &PipelineSpec,
    folds: usize,
    objective: Objective,
    seed: u64,
    exec: Execution,
) -> Result<f64> {
    let (neg, pos) = class_counts(y);
    let k = folds.min(neg).min(pos);
    if k < 2 {
        return Err(Error::Invalid(format!(
            "cross-validation needs 2 folds with both classes, got {neg} and {pos} samples"
        )));
    }
    let test_folds = stratified_kfold(y, k, &mut seed::rng_for(seed, &["cv-folds"]));
    let scores = exec.try_map(&test_folds, |test| -> Result<f64> {
        let mut is_test = vec![false; y.len()];
        for &i in test {
            is_test[i] = true;
        }
        let train_idx: Vec<usize> = (0..y.len()).filter(|&i| !is_test[i]).collect();
        let ytr: Vec<u8> = train_idx.iter().map(|&i| y[i]).collect();
        let yte: Vec<u8> = test.iter().map(|&i| y[i]).collect();
        let fitted = spec.fit(
            &x.select_rows(&train_idx),
            &ytr,
            binary_cols,
            seed,
            Execution::Sequential,
        )?;
        let s = fitted.predict_scores(&x.select_rows(test))?;
        objective.score(&yte, &s)
    })?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}
