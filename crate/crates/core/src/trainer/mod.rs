//! Per-sentence SGD for the generator and its backward reranker.

mod cost;
mod split;
mod train;

pub use cost::{sentence_cost, CostBreakdown, GatePenalty};
pub use split::{split_3_1_1, upsample, SplitCorpus};
pub use train::{
    corpus_cost, eval_cost, sgd_step, train, train_with_log, EpochLog, Prepared, TrainConfig,
    TrainHistory,
};
