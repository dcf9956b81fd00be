//! Neural digital twin of the link: a dense network mapping the TX power
//! profile to received signal and noise powers, trained on campaign data
//! and differentiable back to its inputs.

mod dataset;
mod evaluate;
mod model;
mod network;
mod train;

pub use dataset::{validation_count, Dataset, DatasetRow, Split};
pub use evaluate::{evaluate, ErrorSummary, EvaluationReport, ExcursionBin, RowError};
pub use model::{
    CapacityObjective, Extrapolation, InputEncoding, Normalizer, Prediction, SignalOutput,
    TwinModel, EXTRAPOLATION_MARGIN_DB,
};
pub use network::{Activation, Dense, LayerSpec, Network};
pub use train::{train, TrainSettings, TrainingReport};
