//! Records, synthetic data, genre splits, training, evaluation and ablations.

mod ablation;
mod config;
mod eval;
mod record;
mod split;
pub mod synthetic;
mod train;

pub use ablation::{run_ablation, AblationCell, AblationReport, AblationRow, RowSettings};
pub use config::{DataPaths, RunConfig};
pub use eval::{evaluate, evaluate_prepared, prepare_all, GenreMetrics, Metrics};
pub use record::{decode_f64s, encode_f64s, load_dataset, record_from_line, record_to_line, save_dataset, QARecord};
pub use split::GenreSplit;
pub use synthetic::{generate_synthetic, oracle_predict, Signal, SyntheticSpec, SyntheticWorld, WorldSpec};
pub use train::{accumulate_question, run_experiment, train, train_prepared, Experiment, TrainRun};
