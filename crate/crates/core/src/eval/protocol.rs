//! The BASE, PERS1 and PERS2 protocols.
//!
//! * BASE trains on every other user and tests on all events of the target.
//! * PERS1 adds a stratified share of the target's events to that training set
//!   and tests on the rest of the target's events.
//! * PERS2 trains and tests on the target's own split only.
//!
//! PERS1 and PERS2 use the same per-user split. Missing values are imputed
//! with training-fold means; scaling, PCA and SMOTE are fitted on training
//! rows inside [`PipelineSpec::fit`].

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::metrics::{auroc, macro_f1, predict_labels};
use super::report::{EvalReport, SkippedUser, UserResult};
use super::split::{split_problem, stratified_split_user};
use crate::exec::Execution;
use crate::features::{is_binary, FeatureGroupPreset, FEATURE_NAMES, N_FEATURES};
use crate::featurize::FeatureTable;
use crate::learn::matrix::Matrix;
use crate::learn::pca::covariance_rank;
use crate::learn::pipeline::{cv_score, PipelineSpec, Reduction};
use crate::learn::sfs::{sfs, SfsConfig};
use crate::learn::{ModelArtifact, ModelKind, ModelParams};
use crate::seed;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Protocol {
    #[serde(rename = "BASE")]
    Base,
    #[serde(rename = "PERS1")]
    Pers1,
    #[serde(rename = "PERS2")]
    Pers2,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::Base, Protocol::Pers1, Protocol::Pers2];

    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Base => "BASE",
            Protocol::Pers1 => "PERS1",
            Protocol::Pers2 => "PERS2",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let up = s.trim().to_ascii_uppercase();
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == up)
            .ok_or_else(|| format!("unknown protocol {s:?} (expected BASE, PERS1 or PERS2)"))
    }
}

/// Feature set of an evaluation cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FeaturePreset {
    Group(FeatureGroupPreset),
    /// All 40 features reduced by PCA; the component count is chosen by inner CV.
    AllPca,
    /// Features chosen by forward selection on the training rows.
    AllFs,
}

impl FeaturePreset {
    /// The nine presets of the full grid.
    pub const GRID: [FeaturePreset; 9] = [
        FeaturePreset::Group(FeatureGroupPreset::Loc),
        FeaturePreset::Group(FeatureGroupPreset::Scr),
        FeaturePreset::Group(FeatureGroupPreset::Time),
        FeaturePreset::Group(FeatureGroupPreset::Bat),
        FeaturePreset::Group(FeatureGroupPreset::App),
        FeaturePreset::Group(FeatureGroupPreset::Acc),
        FeaturePreset::Group(FeatureGroupPreset::All),
        FeaturePreset::AllPca,
        FeaturePreset::AllFs,
    ];

    pub fn name(self) -> String {
        match self {
            FeaturePreset::Group(g) => g.as_str().to_string(),
            FeaturePreset::AllPca => "ALL_PCA".into(),
            FeaturePreset::AllFs => "ALL_FS".into(),
        }
    }
}

impl fmt::Display for FeaturePreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for FeaturePreset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().replace('-', "_").as_str() {
            "ALL_PCA" => Ok(FeaturePreset::AllPca),
            "ALL_FS" => Ok(FeaturePreset::AllFs),
            other => other.parse().map(FeaturePreset::Group),
        }
    }
}

impl TryFrom<String> for FeaturePreset {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<FeaturePreset> for String {
    fn from(p: FeaturePreset) -> String {
        p.name()
    }
}

/// Everything a single protocol run depends on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub model: ModelKind,
    pub features: FeaturePreset,
    /// Share of each class of the target user used for training in PERS1/PERS2.
    pub split_ratio: f64,
    pub seed: u64,
    pub params: ModelParams,
    /// Model parameters for the inner CV of feature selection and PCA sizing;
    /// `None` reuses `params`.
    pub inner_params: Option<ModelParams>,
    pub smote_k: usize,
    pub sfs: SfsConfig,
    /// Candidate PCA component counts; counts above the training rank are skipped.
    pub pca_components: Vec<usize>,
    pub pca_folds: usize,
    /// PERS1 reuses the selection made on the other users (as in BASE) instead
    /// of selecting again on its own training set.
    pub pers1_reuse_base_selection: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            model: ModelKind::RandomForest,
            features: FeaturePreset::Group(FeatureGroupPreset::All),
            split_ratio: 0.7,
            seed: 0,
            params: ModelParams::default(),
            inner_params: None,
            smote_k: crate::learn::smote::DEFAULT_K,
            sfs: SfsConfig::default(),
            pca_components: vec![1, 2, 3, 5, 8, 10, 15, 20, 25, 30, 35, 40],
            pca_folds: 3,
            pers1_reuse_base_selection: true,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::Invalid(format!(
                "split_ratio must be in (0, 1), got {}",
                self.split_ratio
            )));
        }
        if self.smote_k == 0 {
            return Err(Error::Invalid("smote_k must be at least 1".into()));
        }
        if self.features == FeaturePreset::AllPca
            && (self.pca_components.is_empty()
                || self
                    .pca_components
                    .iter()
                    .any(|&c| c == 0 || c > N_FEATURES))
        {
            return Err(Error::Invalid(format!(
                "pca_components must be a non-empty list within 1..={N_FEATURES}"
            )));
        }
        Ok(())
    }

    fn spec(&self) -> PipelineSpec {
        PipelineSpec {
            kind: self.model,
            params: self.params,
            smote_k: self.smote_k,
            reduction: Reduction::None,
        }
    }

    fn inner_spec(&self) -> PipelineSpec {
        PipelineSpec {
            params: self.inner_params.unwrap_or(self.params),
            ..self.spec()
        }
    }
}

/// Row counts of one train/test fold, recorded for leakage audits.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAudit {
    pub protocol: Protocol,
    pub user: String,
    pub n_train: usize,
    pub n_test: usize,
    /// Training rows that belong to the target user.
    pub target_rows_in_train: usize,
    /// Rows present in both sets.
    pub overlap: usize,
}

/// Check a fold and return its audit record, or [`Error::Leakage`].
///
/// Train and test must be disjoint; in BASE the target user may not
/// contribute any training row and every test row must be the target's.
pub fn audit_fold(
    protocol: Protocol,
    table: &FeatureTable,
    user: &str,
    train: &[usize],
    test: &[usize],
) -> Result<FoldAudit> {
    let test_set: BTreeSet<usize> = test.iter().copied().collect();
    let overlap = train.iter().filter(|r| test_set.contains(r)).count();
    let target_rows_in_train = train
        .iter()
        .filter(|&&r| table.rows[r].user_id == user)
        .count();
    let audit = FoldAudit {
        protocol,
        user: user.to_string(),
        n_train: train.len(),
        n_test: test.len(),
        target_rows_in_train,
        overlap,
    };
    if overlap > 0 {
        return Err(Error::Leakage(format!(
            "{protocol} fold for {user}: {overlap} rows in train and test"
        )));
    }
    if let Some(&r) = test.iter().find(|&&r| table.rows[r].user_id != user) {
        return Err(Error::Leakage(format!(
            "{protocol} fold for {user}: test row {r} belongs to {}",
            table.rows[r].user_id
        )));
    }
    if protocol == Protocol::Base && target_rows_in_train > 0 {
        return Err(Error::Leakage(format!(
            "BASE fold for {user}: {target_rows_in_train} target rows in training"
        )));
    }
    if protocol == Protocol::Pers2 && target_rows_in_train != train.len() {
        return Err(Error::Leakage(format!(
            "PERS2 fold for {user}: training holds other users' rows"
        )));
    }
    Ok(audit)
}

/// Imputed design matrix of `rows` restricted to `cols`.
pub fn design(table: &FeatureTable, rows: &[usize], cols: &[usize], means: &[f64]) -> Matrix {
    let mut data = Vec::with_capacity(rows.len() * cols.len());
    for &r in rows {
        for &c in cols {
            data.push(table.imputed(r, c, means));
        }
    }
    Matrix::new(rows.len(), cols.len(), data)
}

fn labels_of(table: &FeatureTable, rows: &[usize]) -> Vec<u8> {
    rows.iter()
        .map(|&r| table.rows[r].label.as_class())
        .collect()
}

/// Columns and reduction chosen for a fold.
#[derive(Clone, Debug, PartialEq)]
struct Selection {
    cols: Vec<usize>,
    reduction: Reduction,
    chosen_by_search: bool,
}

fn select(cfg: &EvalConfig, table: &FeatureTable, rows: &[usize], seed: u64) -> Result<Selection> {
    match cfg.features {
        FeaturePreset::Group(g) => Ok(Selection {
            cols: g.indices(),
            reduction: Reduction::None,
            chosen_by_search: false,
        }),
        FeaturePreset::AllFs => {
            let cols: Vec<usize> = (0..N_FEATURES).collect();
            let means = table.present_means(rows);
            let x = design(table, rows, &cols, &means);
            let y = labels_of(table, rows);
            let bin: Vec<bool> = cols.iter().map(|&c| is_binary(c)).collect();
            let r = sfs(
                &x,
                &y,
                &bin,
                &cfg.inner_spec(),
                &cfg.sfs,
                seed::derive(seed, "sfs"),
                Execution::Sequential,
            )?;
            Ok(Selection {
                cols: r.selected,
                reduction: Reduction::None,
                chosen_by_search: true,
            })
        }
        FeaturePreset::AllPca => {
            let cols: Vec<usize> = (0..N_FEATURES).collect();
            let means = table.present_means(rows);
            let x = design(table, rows, &cols, &means);
            let y = labels_of(table, rows);
            let bin: Vec<bool> = cols.iter().map(|&c| is_binary(c)).collect();
            // Inner training folds hold roughly (k-1)/k of the rows; keep c below their rank.
            let folds = cfg.pca_folds.max(2);
            let inner_rows = rows.len() * (folds - 1) / folds;
            let limit = covariance_rank(&x).min(inner_rows.saturating_sub(1));
            let mut best: Option<(usize, f64)> = None;
            for &c in cfg.pca_components.iter().filter(|&&c| c <= limit) {
                let spec = cfg.inner_spec().with_reduction(Reduction::Pca(c));
                let score = match cv_score(
                    &x,
                    &y,
                    &bin,
                    &spec,
                    folds,
                    cfg.sfs.objective,
                    seed::derive(seed, "pca"),
                    Execution::Sequential,
                ) {
                    Ok(s) => s,
                    Err(Error::RankDeficient { .. }) => continue,
                    Err(e) => return Err(e),
                };
                if best.is_none_or(|(_, b)| score > b) {
                    best = Some((c, score));
                }
            }
            let c = best.map(|(c, _)| c).unwrap_or(1);
            Ok(Selection {
                cols,
                reduction: Reduction::Pca(c),
                chosen_by_search: true,
            })
        }
    }
}

/// Outcome of one fold.
#[derive(Clone, Debug)]
struct FoldOutcome {
    result: UserResult,
    audit: FoldAudit,
}

#[allow(clippy::too_many_arguments)]
fn run_fold(
    protocol: Protocol,
    cfg: &EvalConfig,
    table: &FeatureTable,
    user: &str,
    train: &[usize],
    test: &[usize],
    selection: &Selection,
    seed: u64,
) -> Result<FoldOutcome> {
    let audit = audit_fold(protocol, table, user, train, test)?;
    let means = table.present_means(train);
    let x_train = design(table, train, &selection.cols, &means);
    let x_test = design(table, test, &selection.cols, &means);
    let y_train = labels_of(table, train);
    let y_test = labels_of(table, test);
    let bin: Vec<bool> = selection.cols.iter().map(|&c| is_binary(c)).collect();
    let spec = cfg.spec().with_reduction(selection.reduction);
    let fitted = spec.fit(&x_train, &y_train, &bin, seed, Execution::Sequential)?;
    let scores = fitted.predict_scores(&x_test)?;
    let result = UserResult {
        user: user.to_string(),
        f1: macro_f1(&y_test, &predict_labels(&scores))?,
        auroc: auroc(&y_test, &scores)?,
        n_train: train.len(),
        n_test: test.len(),
        selected: (cfg.features == FeaturePreset::AllFs).then(|| {
            selection
                .cols
                .iter()
                .map(|&c| FEATURE_NAMES[c].to_string())
                .collect()
        }),
        pca_components: match selection.reduction {
            Reduction::Pca(c) if selection.chosen_by_search => Some(c),
            _ => None,
        },
    };
    Ok(FoldOutcome { result, audit })
}

/// Users usable as targets, plus the skipped ones with reasons.
///
/// The same rule applies to all protocols so their user sets match.
pub fn eligible_users(
    table: &FeatureTable,
    ratio: f64,
) -> (Vec<(String, Vec<usize>)>, Vec<SkippedUser>) {
    let mut ok = Vec::new();
    let mut skipped = Vec::new();
    for (user, rows) in table.rows_by_user() {
        match split_problem(&labels_of(table, &rows), ratio) {
            None => ok.push((user, rows)),
            Some(reason) => {
                log::warn!("skipping user {user}: {reason}");
                skipped.push(SkippedUser { user, reason });
            }
        }
    }
    (ok, skipped)
}

fn fold_seed(cfg: &EvalConfig, tag: &str, user: &str) -> u64 {
    seed::derive(cfg.seed, &format!("{tag}/{user}"))
}

fn split_for(
    cfg: &EvalConfig,
    table: &FeatureTable,
    user: &str,
    rows: &[usize],
) -> (Vec<usize>, Vec<usize>) {
    let mut rng = seed::rng(fold_seed(cfg, "split", user));
    stratified_split_user(rows, &labels_of(table, rows), cfg.split_ratio, &mut rng)
}

fn others(table: &FeatureTable, user: &str) -> Vec<usize> {
    (0..table.len())
        .filter(|&r| table.rows[r].user_id != user)
        .collect()
}

/// Run one protocol for every eligible user.
pub fn run_protocol(
    protocol: Protocol,
    table: &FeatureTable,
    cfg: &EvalConfig,
    exec: Execution,
) -> Result<EvalReport> {
    cfg.validate()?;
    let (targets, skipped) = eligible_users(table, cfg.split_ratio);
    if protocol != Protocol::Pers2 && table.rows_by_user().len() < 2 {
        return Err(Error::Invalid(format!("{protocol} needs at least 2 users")));
    }
    let outcomes = exec.try_map(&targets, |(user, rows)| -> Result<FoldOutcome> {
        let select_seed = fold_seed(cfg, "select", user);
        let model_seed = fold_seed(cfg, protocol.as_str(), user);
        match protocol {
            Protocol::Base => {
                let train = others(table, user);
                let sel = select(cfg, table, &train, select_seed)?;
                run_fold(protocol, cfg, table, user, &train, rows, &sel, model_seed)
            }
            Protocol::Pers1 => {
                let (own_train, test) = split_for(cfg, table, user, rows);
                let rest = others(table, user);
                let mut train = rest.clone();
                train.extend_from_slice(&own_train);
                train.sort_unstable();
                let sel = if cfg.pers1_reuse_base_selection {
                    select(cfg, table, &rest, select_seed)?
                } else {
                    select(cfg, table, &train, select_seed)?
                };
                run_fold(protocol, cfg, table, user, &train, &test, &sel, model_seed)
            }
            Protocol::Pers2 => {
                let (train, test) = split_for(cfg, table, user, rows);
                let sel = select(cfg, table, &train, fold_seed(cfg, "select-own", user))?;
                run_fold(protocol, cfg, table, user, &train, &test, &sel, model_seed)
            }
        }
    })?;
    let (per_user, audit): (Vec<_>, Vec<_>) =
        outcomes.into_iter().map(|o| (o.result, o.audit)).unzip();
    Ok(EvalReport::new(
        protocol,
        cfg.model,
        cfg.features,
        per_user,
        skipped,
        audit,
    ))
}

pub fn run_base(table: &FeatureTable, cfg: &EvalConfig, exec: Execution) -> Result<EvalReport> {
    run_protocol(Protocol::Base, table, cfg, exec)
}

pub fn run_pers1(table: &FeatureTable, cfg: &EvalConfig, exec: Execution) -> Result<EvalReport> {
    run_protocol(Protocol::Pers1, table, cfg, exec)
}

pub fn run_pers2(table: &FeatureTable, cfg: &EvalConfig, exec: Execution) -> Result<EvalReport> {
    run_protocol(Protocol::Pers2, table, cfg, exec)
}

/// One cell of an evaluation grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub protocol: Protocol,
    pub model: ModelKind,
    pub features: FeaturePreset,
}

/// Cross product of the given axes, protocol-major.
pub fn grid(protocols: &[Protocol], models: &[ModelKind], features: &[FeaturePreset]) -> Vec<Cell> {
    let mut out = Vec::new();
    for &protocol in protocols {
        for &model in models {
            for &f in features {
                out.push(Cell {
                    protocol,
                    model,
                    features: f,
                });
            }
        }
    }
    out
}

/// Run every cell; reports come back in cell order.
///
/// Cells share the base config and differ only in protocol, model and
/// features, so each one is independent of how the others are scheduled.
pub fn run_grid(
    table: &FeatureTable,
    base: &EvalConfig,
    cells: &[Cell],
    exec: Execution,
) -> Result<Vec<EvalReport>> {
    exec.try_map(cells, |cell| {
        let cfg = EvalConfig {
            model: cell.model,
            features: cell.features,
            ..base.clone()
        };
        log::info!(
            "evaluating {} {} {}",
            cell.protocol,
            cell.model,
            cell.features
        );
        run_protocol(cell.protocol, table, &cfg, exec)
    })
}

/// Fit `cfg` on every row of `table`, for reuse outside the protocols.
pub fn fit_all_rows(table: &FeatureTable, cfg: &EvalConfig) -> Result<ModelArtifact> {
    cfg.validate()?;
    let rows: Vec<usize> = (0..table.len()).collect();
    let sel = select(cfg, table, &rows, seed::derive(cfg.seed, "select-all"))?;
    let means = table.present_means(&rows);
    let x = design(table, &rows, &sel.cols, &means);
    let y = labels_of(table, &rows);
    let bin: Vec<bool> = sel.cols.iter().map(|&c| is_binary(c)).collect();
    let fitted = cfg.spec().with_reduction(sel.reduction).fit(
        &x,
        &y,
        &bin,
        seed::derive(cfg.seed, "fit-all"),
        Execution::Sequential,
    )?;
    let names = sel
        .cols
        .iter()
        .map(|&c| FEATURE_NAMES[c].to_string())
        .collect();
    let mut artifact = ModelArtifact::new(fitted, names, cfg.seed);
    artifact.impute_means = sel.cols.iter().map(|&c| means[c]).collect();
    Ok(artifact)
}
