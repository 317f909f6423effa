//! Metrics and evaluation harnesses.

mod interactive;
pub mod metrics;
mod offline;
mod report;

pub use interactive::{episodes, eval_interactive, run_episode, Episode, EpisodeOutcome, InteractiveConfig};
pub use metrics::{bleu_n, dist_n, f1_tokens, hit_at_k, metric_tokens, mrr, ndcg_at_k, RankResult};
pub use offline::{
    eval_ablation, eval_cases, eval_generation, eval_grounding, eval_recommendation, rank_metrics, EvalCase, GroundingPrediction, Pipeline, RankMetric,
    TargetSource, GROUNDING_METRICS, RECOMMENDATION_METRICS,
};
pub use report::EvalReport;
