//! Losses, a trainable linear baseline, and the predictor interface that
//! turns an image window into a horizon distribution.

mod baseline;
mod external;
mod loss;
mod predictor;

pub use baseline::{
    center_features, extract_features, train_linear_baseline, train_on_features, LinearModel, Parameterization,
    TrainConfig, TrainingSet, FEATURE_DIM, FEATURE_GRID, MIN_FEATURE_SIDE, MIN_TRAINING_IMAGES,
};
pub use external::{ExternalGrids, GridRecord, GRID_MAGIC};
pub use loss::{huber_loss, l2_loss, Loss};
pub use predictor::{linear_spec, train_prior, PredictInput, Predictor, PredictorKind, PredictorSpec};
