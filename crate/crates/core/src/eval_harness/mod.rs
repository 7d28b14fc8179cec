//! Log-replay evaluation: ranking metrics, rolling weekly folds,
//! position and length breakdowns, and paired significance tests.

mod metrics;
mod replay;
mod report;
mod stats;

pub use metrics::{
    average_precision, ndcg_at_k, precision_at_k, reciprocal_rank_at, reciprocal_rank_at_10,
    relative_change, relative_improvement, Metric, MetricSet,
};
pub use replay::{
    aggregate, breakdown, compare, rolling_weekly_eval, select, Bucket, BucketSummary, Comparison,
    Dimension, EvalImpression, EvaluationRun, FittedMethod, ImpressionRecord, RankingMethod,
    WeekId,
};
pub use report::{write_impression_table, write_report};
pub use stats::{
    ln_gamma, paired_t_test, regularized_incomplete_beta, student_t_cdf, student_t_two_sided_p,
    TTest,
};
