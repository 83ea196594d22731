//! Feed-forward network with Gaussian hidden units, trained by
//! Levenberg–Marquardt on sliding windows of the corrected series.

mod data;
mod network;
mod predict;
mod train;

pub use data::{make_windows, Scaler, WindowDataset};
pub use network::{gaussian, gaussian_derivative, Layer, Mlp, MlpLayout};
pub use predict::{predict_series, MlpForecaster};
pub use train::{
    split_point, train_lm, train_restarts, EpochRecord, LmConfig, StopReason, TrainHistory, LAMBDA_MAX, LAMBDA_MIN,
    MAX_INFLATIONS,
};
