//! Statistics over evaluation results: logistic difficulty models,
//! two-sample comparisons, scaling curves, telemetry and grids.

pub mod logistic;
pub mod stats;
pub mod tables;

pub use logistic::{fit_logistic, null_log_likelihood, Coefficient, LogisticFit};
pub use stats::{bootstrap_mean_ci, cohens_d, mann_whitney, quantile, BootstrapInterval, MannWhitney};
pub use tables::{
    all_tools, difficulty_grid, passn_curve, telemetry_summary, BoundaryLine, DifficultyGrid, GridCell, ResultRow, TelemetryRow,
};

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("outcomes are all identical")]
    DegenerateOutcomes,
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("pooled variance is zero")]
    ZeroVariance,
    #[error("sample too small: need {needed}, got {got}")]
    EmptySample { needed: usize, got: usize },
    #[error("predictor rows do not match names")]
    DimensionMismatch,
}
