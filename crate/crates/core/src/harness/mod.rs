//! Evaluation protocol, robustness cross-tests, policy-surface export and
//! the empirical best-response audit.

mod audit;
mod cross;
mod eval;
mod report;
mod surface;

pub use audit::{best_response_audit, AuditConfig, AuditReport, DirectionReport, Player, Verdict};
pub use cross::{cross_test, CrossTestCell, CrossTestMatrix};
pub use eval::{evaluate, evaluate_outcomes, sharpe, EpisodeOutcome, EvalReport};
pub use report::{format_table, write_reports_csv, ReportLine};
pub use surface::{
    adversary_surface, grid, mm_surface, opposing_drift_share, write_csv, AdversarySurfaceRow, MmSurfaceRow,
};
