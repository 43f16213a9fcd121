//! Metrics, splits, the three evaluation protocols and report assembly.

pub mod metrics;
pub mod protocol;
pub mod report;
pub mod split;

pub use metrics::{auroc, macro_f1};
pub use protocol::{
    audit_fold, grid, run_base, run_grid, run_pers1, run_pers2, run_protocol, Cell, EvalConfig,
    FeaturePreset, FoldAudit, Protocol,
};
pub use report::{bump_report, Bump, EvalReport, SkippedUser, UserResult};
pub use split::{stratified_kfold, stratified_split_user};
