mod chance;
mod dataset;
mod train;

pub use chance::{chance_mse, chance_mse_vectors, pair_count, unrank_pair, DEFAULT_PAIR_BUDGET};
pub(crate) use dataset::{raw_records, RawRecord};
pub use dataset::{load_dataset, parse_dataset, write_dataset, SentenceRecord};
pub use train::{
    evaluate, evaluate_mean_predictor, evaluate_with, mean_mse, mean_vector, record_losses, sentence_gradients, train,
    EpochStats, Evaluation, TrainConfig, TrainHistory, TrainOutcome,
};
