//! Training-side machinery: class balancing, dimensionality reduction,
//! forward feature selection and the four classifier families.

pub mod adaboost;
pub mod bayes;
pub mod binning;
pub mod boost;
pub mod forest;
pub mod matrix;
pub mod pca;
pub mod pipeline;
pub mod sfs;
pub mod smote;
pub mod tree;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use adaboost::{AbParams, AdaBoost};
pub use bayes::{GaussianNb, NbParams};
pub use boost::{GbParams, GradientBoosting};
pub use forest::{RandomForest, RfParams};
pub use matrix::Matrix;
pub use pca::{fit_pca, Pca, Standardizer};
pub use pipeline::{FittedPipeline, PipelineSpec, Reduction};
pub use sfs::{sfs, SfsConfig, SfsResult};
pub use smote::smote;

use crate::exec::Execution;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "RF")]
    RandomForest,
    #[serde(rename = "NB")]
    NaiveBayes,
    #[serde(rename = "GB")]
    GradientBoosting,
    #[serde(rename = "AB")]
    AdaBoost,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::RandomForest,
        ModelKind::NaiveBayes,
        ModelKind::GradientBoosting,
        ModelKind::AdaBoost,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::RandomForest => "RF",
            ModelKind::NaiveBayes => "NB",
            ModelKind::GradientBoosting => "GB",
            ModelKind::AdaBoost => "AB",
        }
    }

    /// Whether inputs are z-scored before fitting.
    pub fn wants_standardized(self) -> bool {
        self == ModelKind::NaiveBayes
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let up = s.trim().to_ascii_uppercase();
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == up)
            .ok_or_else(|| format!("unknown model kind {s:?} (expected RF, NB, GB or AB)"))
    }
}

/// Hyperparameters of every model family.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    pub rf: RfParams,
    pub nb: NbParams,
    pub gb: GbParams,
    pub ab: AbParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Model {
    RandomForest(RandomForest),
    NaiveBayes(GaussianNb),
    GradientBoosting(GradientBoosting),
    AdaBoost(AdaBoost),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::RandomForest(_) => ModelKind::RandomForest,
            Model::NaiveBayes(_) => ModelKind::NaiveBayes,
            Model::GradientBoosting(_) => ModelKind::GradientBoosting,
            Model::AdaBoost(_) => ModelKind::AdaBoost,
        }
    }

    /// Probability-like score of the eating class for every row.
    pub fn predict_scores(&self, x: &Matrix) -> Result<Vec<f64>> {
        x.check_finite()?;
        Ok(x.rows()
            .map(|r| match self {
                Model::RandomForest(m) => m.predict_row(r),
                Model::NaiveBayes(m) => m.predict_row(r),
                Model::GradientBoosting(m) => m.predict_row(r),
                Model::AdaBoost(m) => m.predict_row(r),
            })
            .collect())
    }
}

/// Fit one model. Deterministic given `(x, y, params, seed)`.
pub fn train(
    kind: ModelKind,
    x: &Matrix,
    y: &[u8],
    params: &ModelParams,
    seed: u64,
    exec: Execution,
) -> Result<Model> {
    let (neg, pos) = matrix::class_counts(y);
    if neg < 2 || pos < 2 {
        return Err(Error::SingleClass(format!(
            "training needs at least 2 samples per class, got {neg} and {pos}"
        )));
    }
    Ok(match kind {
        ModelKind::RandomForest => {
            Model::RandomForest(RandomForest::fit(x, y, &params.rf, seed, exec)?)
        }
        ModelKind::NaiveBayes => Model::NaiveBayes(GaussianNb::fit(x, y, &params.nb)?),
        ModelKind::GradientBoosting => {
            Model::GradientBoosting(GradientBoosting::fit(x, y, &params.gb, seed)?)
        }
        ModelKind::AdaBoost => Model::AdaBoost(AdaBoost::fit(x, y, &params.ab, seed)?),
    })
}

pub fn predict_scores(model: &Model, x: &Matrix) -> Result<Vec<f64>> {
    model.predict_scores(x)
}

/// Mean impurity decrease per input column of a random forest, summing to 1.
pub fn gini_importance(model: &Model) -> Result<Vec<f64>> {
    match model {
        Model::RandomForest(rf) => Ok(rf.importances.clone()),
        other => Err(Error::Invalid(format!(
            "Gini importance is defined for RF models only, got {}",
            other.kind()
        ))),
    }
}

pub const ARTIFACT_VERSION: u32 = 1;

/// A fitted pipeline with the metadata needed to reuse it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub kind: ModelKind,
    pub params: ModelParams,
    pub seed: u64,
    pub features: Vec<String>,
    /// Training means used to fill missing values, one per feature.
    #[serde(default)]
    pub impute_means: Vec<f64>,
    pub pipeline: FittedPipeline,
}

impl ModelArtifact {
    pub fn new(pipeline: FittedPipeline, features: Vec<String>, seed: u64) -> Self {
        ModelArtifact {
            format_version: ARTIFACT_VERSION,
            kind: pipeline.spec.kind,
            params: pipeline.spec.params,
            seed,
            features,
            impute_means: Vec::new(),
            pipeline,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let a: ModelArtifact = serde_json::from_reader(std::io::BufReader::new(file))?;
        if a.format_version != ARTIFACT_VERSION {
            return Err(Error::Invalid(format!(
                "unsupported model artifact version {}",
                a.format_version
            )));
        }
        Ok(a)
    }
}
