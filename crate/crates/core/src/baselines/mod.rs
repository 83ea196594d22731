//! Classical reference forecasters.
//!
//! All of them follow the same protocol: fit once on the training span,
//! then produce one-step-ahead predictions from measured history only.

mod discrete;
mod knn;
mod linear;
mod naive;

pub use discrete::{
    fit_bayes, fit_discretizer, fit_markov, predict_bayes, predict_markov, BayesModel, Discretizer, MarkovModel,
    SMOOTHING,
};
pub use knn::{knn_predict, KnnConfig};
pub use linear::{fit_ar, fit_arma, LinearModel};
pub use naive::{naive_predict, NaiveModel};
