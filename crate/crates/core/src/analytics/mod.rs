//! Fitts' law evaluation: index of difficulty, regression, throughput,
//! error rates, exclusion filtering and rank tests.

mod fitts;
mod report;
mod wilcoxon;

use thiserror::Error;

pub use fitts::{
    cell_stats, condition_stats, effective_id, entropy_width_factor, error_rate, exclusion_filter,
    f_survival, fit_fitts, nominal_id, per_participant_throughput, throughput, ConditionStats,
    FittsFit, ReachSelection,
};
pub use report::{
    build_report, cohorts_from_logs, mean_sem, Cohort, Comparison, Participant, ParticipantSummary,
    PerformanceSummary, Report, ReportOptions, ReportRow, REFERENCE_FOOTER,
};
pub use wilcoxon::{midranks, rank_sum, signed_rank, Method, TestResult, ZeroMethod, EXACT_LIMIT};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("target width must be positive, got {0}")]
    NonPositiveWidth(f64),
    #[error("distance must be non-negative, got {0}")]
    NegativeDistance(f64),
    #[error("endpoint spread must be positive, got {0}")]
    DegenerateSpread(f64),
    #[error("no trials for D={distance} W={width}")]
    EmptyCell { distance: f64, width: f64 },
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("index of difficulty is constant; slope undefined")]
    ConstantId,
    #[error("selection time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("no data")]
    Empty,
    #[error("inconsistent grid: {0}")]
    InconsistentGrid(String),
    #[error("paired samples differ in length ({0} vs {1})")]
    UnequalLength(usize, usize),
    #[error("all paired differences are zero")]
    AllZeroDifferences,
    #[error("participant {participant}: {source}")]
    Participant {
        participant: String,
        #[source]
        source: Box<AnalysisError>,
    },
}
