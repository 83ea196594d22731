use log::debug;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::WindowDataset;
use super::network::{Mlp, MlpLayout};
use crate::error::{Error, Result};

pub const LAMBDA_MIN: f64 = 1e-12;
pub const LAMBDA_MAX: f64 = 1e12;
/// Damping increases tried within one epoch before giving up.
pub const MAX_INFLATIONS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LmConfig {
    pub lambda0: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub max_epochs: usize,
    pub max_fail: usize,
    pub min_gradient: f64,
    pub val_fraction: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig {
            lambda0: 1e-3,
            lambda_up: 10.0,
            lambda_down: 10.0,
            max_epochs: 1000,
            max_fail: 5,
            min_gradient: 1e-10,
            val_fraction: 0.2,
        }
    }
}

impl LmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.lambda0 > 0.0 && self.lambda0.is_finite()) {
            return bad("lambda0 must be positive");
        }
        if !(self.lambda_up > 1.0 && self.lambda_down > 1.0) {
            return bad("lambda factors must exceed 1");
        }
        if self.max_fail == 0 {
            return bad("max_fail must be at least 1");
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return bad("val_fraction must lie in [0, 1)");
        }
        if self.min_gradient.is_nan() || self.min_gradient < 0.0 {
            return bad("min_gradient must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxFail,
    MaxEpochs,
    MinGradient,
    LambdaCeiling,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::MaxFail => "max_fail",
            StopReason::MaxEpochs => "max_epochs",
            StopReason::MinGradient => "min_gradient",
            StopReason::LambdaCeiling => "lambda_ceiling",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// Training MSE after the epoch's accepted step.
    pub train_mse: f64,
    /// `None` when there are no validation rows.
    pub val_mse: Option<f64>,
    /// Damping after the epoch's update.
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub stop_reason: StopReason,
    /// Epoch whose weights were restored; `None` means the initial weights.
    pub best_epoch: Option<usize>,
    pub initial_train_mse: f64,
    pub initial_val_mse: Option<f64>,
}

impl TrainHistory {
    pub fn final_train_mse(&self) -> f64 {
        self.epochs.last().map_or(self.initial_train_mse, |e| e.train_mse)
    }

    pub fn best_val_mse(&self) -> Option<f64> {
        match self.best_epoch {
            Some(e) => self.epochs[e].val_mse,
            None => self.initial_val_mse,
        }
    }
}

/// Chronological split point: the first `n − round(n·val_fraction)` rows train.
pub fn split_point(n: usize, val_fraction: f64) -> usize {
    n - (n as f64 * val_fraction).round() as usize
}

fn mse(mlp: &Mlp, data: &WindowDataset) -> Result<f64> {
    let mut sum = 0.0;
    for (x, y) in data.inputs.iter().zip(&data.targets) {
        sum += (mlp.forward(x)? - y).powi(2);
    }
    let m = sum / data.len() as f64;
    if !m.is_finite() {
        return Err(Error::NonFinite(format!("loss {m}")));
    }
    Ok(m)
}

fn residuals(mlp: &Mlp, data: &WindowDataset) -> Result<DVector<f64>> {
    let r = data
        .inputs
        .iter()
        .zip(&data.targets)
        .map(|(x, y)| mlp.forward(x).map(|o| o - y))
        .collect::<Result<Vec<f64>>>()?;
    Ok(DVector::from_vec(r))
}

/// Levenberg–Marquardt on the mean squared error with early stopping.
///
/// The first rows train and the trailing `val_fraction` validate. Each epoch
/// solves `(JᵀJ + λI)Δ = −Jᵀr`; a step is kept only if it lowers training MSE.
/// The max_fail counter resets on every new validation best, and the returned
/// network carries the best-validation weights.
pub fn train_lm(mlp: &Mlp, data: &WindowDataset, cfg: &LmConfig) -> Result<(Mlp, TrainHistory)> {
    cfg.validate()?;
    let split = split_point(data.len(), cfg.val_fraction);
    if split == 0 {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    let train = data.rows(0, split);
    let val = data.rows(split, data.len());
    let has_val = !val.is_empty();

    let mut net = mlp.clone();
    let initial_train_mse = mse(&net, &train)?;
    let initial_val_mse = if has_val { Some(mse(&net, &val)?) } else { None };
    let mut history = TrainHistory {
        epochs: Vec::new(),
        stop_reason: StopReason::MaxEpochs,
        best_epoch: None,
        initial_train_mse,
        initial_val_mse,
    };

    let n_params = net.layout().n_params();
    let mut theta = DVector::from_vec(net.params());
    let mut best_theta = theta.clone();
    let mut best_val = initial_val_mse.unwrap_or(f64::INFINITY);
    let mut fails = 0;
    let mut lambda = cfg.lambda0;
    let mut current = initial_train_mse;

    for epoch in 0..cfg.max_epochs {
        let j = net.jacobian(&train.inputs)?;
        let r = residuals(&net, &train)?;
        let grad = j.tr_mul(&r);
        if grad.norm() < cfg.min_gradient {
            history.stop_reason = StopReason::MinGradient;
            break;
        }
        let jtj = j.tr_mul(&j);

        let mut accepted = false;
        for _ in 0..=MAX_INFLATIONS {
            let a = &jtj + DMatrix::identity(n_params, n_params) * lambda;
            let step = a.cholesky().map(|c| c.solve(&(-&grad)));
            if let Some(step) = step.filter(|s| s.iter().all(|v| v.is_finite())) {
                let candidate = &theta + step;
                net.set_params(candidate.as_slice())?;
                let trial = match mse(&net, &train) {
                    Ok(m) => m,
                    Err(Error::NonFinite(_)) => f64::INFINITY,
                    Err(e) => return Err(e),
                };
                if trial < current {
                    theta = candidate;
                    current = trial;
                    lambda = (lambda / cfg.lambda_down).max(LAMBDA_MIN);
                    accepted = true;
                    break;
                }
            }
            lambda *= cfg.lambda_up;
            if lambda > LAMBDA_MAX {
                break;
            }
        }
        net.set_params(theta.as_slice())?;
        if !accepted {
            debug!("epoch {epoch}: no descent step up to lambda {lambda:e}");
            history.stop_reason = StopReason::LambdaCeiling;
            break;
        }

        let val_mse = if has_val { Some(mse(&net, &val)?) } else { None };
        history.epochs.push(EpochRecord {
            train_mse: current,
            val_mse,
            lambda,
        });
        match val_mse {
            Some(v) if v < best_val => {
                best_val = v;
                best_theta = theta.clone();
                history.best_epoch = Some(epoch);
                fails = 0;
            }
            Some(_) => {
                fails += 1;
                if fails >= cfg.max_fail {
                    history.stop_reason = StopReason::MaxFail;
                    break;
                }
            }
            None => {
                best_theta = theta.clone();
                history.best_epoch = Some(epoch);
            }
        }
    }

    net.set_params(best_theta.as_slice())?;
    debug!(
        "trained seed {} for {} epochs, stop {}, best epoch {:?}",
        net.seed(),
        history.epochs.len(),
        history.stop_reason.as_str(),
        history.best_epoch
    );
    Ok((net, history))
}

/// One training run per seed, each from its own initialization. Results come
/// back in seed order whatever the thread count.
pub fn train_restarts(
    layout: &MlpLayout,
    data: &WindowDataset,
    cfg: &LmConfig,
    seeds: &[u64],
) -> Result<Vec<(Mlp, TrainHistory)>> {
    seeds
        .par_iter()
        .map(|&seed| train_lm(&Mlp::new(layout.clone(), seed), data, cfg))
        .collect()
}
