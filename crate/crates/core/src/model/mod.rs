//! The conv-pool network, its training loop and LOTO evaluation.

mod arch;
mod loto;
mod serialize;
mod train;

pub use arch::{build_network, ArchitectureConfig};
pub use loto::{fold_seed, run_loto, run_loto_with, select_folds, FoldContext, FoldResult, LotoOptions, LotoOutcome};
pub use serialize::{load_network, network_from_str, network_to_string, save_network, FORMAT_HEADER};
pub use train::{predict, train, EarlyStop, TrainConfig, TrainHistory, TrainedNetwork};
