//! Uniform fit/predict contract over every forecaster.
//!
//! Models work in "model space": the corrected series when preprocessing is
//! on, raw Wh/m² when it is off. A forecast for day `t` reads only values
//! strictly before `t`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{
    fit_ar, fit_arma, fit_bayes, fit_discretizer, fit_markov, knn_predict, BayesModel, KnnConfig, LinearModel,
    MarkovModel, NaiveModel,
};
use crate::error::{Error, Result};
use crate::mlp::{make_windows, train_lm, LmConfig, Mlp, MlpForecaster, MlpLayout, Scaler, TrainHistory};
use crate::preprocess::Preprocessor;
use crate::series::{DailySeries, DayIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Naive,
    Ar,
    Arma,
    Markov,
    Bayes,
    Knn,
    Mlp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::Naive,
        ModelKind::Ar,
        ModelKind::Arma,
        ModelKind::Markov,
        ModelKind::Bayes,
        ModelKind::Knn,
        ModelKind::Mlp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Naive => "naive",
            ModelKind::Ar => "ar",
            ModelKind::Arma => "arma",
            ModelKind::Markov => "markov",
            ModelKind::Bayes => "bayes",
            ModelKind::Knn => "knn",
            ModelKind::Mlp => "mlp",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown model '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparameters {
    pub ar_order: usize,
    pub arma_p: usize,
    pub arma_q: usize,
    /// Number of equal-width classes for the Markov and Bayes models.
    pub classes: usize,
    /// Context length for the Markov and Bayes models.
    pub chain_order: usize,
    pub knn: KnnConfig,
    pub mlp_layout: Vec<usize>,
    pub lm: LmConfig,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            ar_order: 8,
            arma_p: 2,
            arma_q: 2,
            classes: 50,
            chain_order: 3,
            knn: KnnConfig::default(),
            mlp_layout: vec![8, 3, 1],
            lm: LmConfig::default(),
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::Config("classes must be at least 2".into()));
        }
        if self.chain_order == 0 {
            return Err(Error::Config("chain_order must be at least 1".into()));
        }
        self.knn.validate()?;
        MlpLayout::new(self.mlp_layout.clone())?;
        self.lm.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub hyper: Hyperparameters,
    /// Initialization seed; only the MLP uses it.
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        ModelSpec {
            kind,
            hyper: Hyperparameters::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Naive(NaiveModel),
    Ar(LinearModel),
    Arma(LinearModel),
    Markov(MarkovModel),
    Bayes(BayesModel),
    Knn(KnnConfig),
    Mlp(MlpForecaster),
}

/// Fits `spec` on `train`. The MLP also returns its training history.
pub fn fit(spec: &ModelSpec, train: &DailySeries) -> Result<(Model, Option<TrainHistory>)> {
    spec.hyper.validate()?;
    let h = &spec.hyper;
    let model = match spec.kind {
        ModelKind::Naive => Model::Naive(NaiveModel::fit(train)),
        ModelKind::Ar => Model::Ar(fit_ar(&train.dense()?, h.ar_order)?),
        ModelKind::Arma => Model::Arma(fit_arma(&train.dense()?, h.arma_p, h.arma_q)?),
        ModelKind::Markov => {
            let x = train.dense()?;
            Model::Markov(fit_markov(&x, fit_discretizer(&x, h.classes)?, h.chain_order)?)
        }
        ModelKind::Bayes => {
            let x = train.dense()?;
            Model::Bayes(fit_bayes(&x, fit_discretizer(&x, h.classes)?, h.chain_order)?)
        }
        ModelKind::Knn => Model::Knn(h.knn),
        ModelKind::Mlp => {
            let layout = MlpLayout::new(h.mlp_layout.clone())?;
            let windows = make_windows(train, layout.inputs())?;
            let scaler = Scaler::fit(&windows)?;
            let scaled = scaler.transform(&windows)?;
            let (mlp, history) = train_lm(&Mlp::new(layout, spec.seed), &scaled, &h.lm)?;
            return Ok((Model::Mlp(MlpForecaster::new(mlp, scaler)?), Some(history)));
        }
    };
    Ok((model, None))
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Naive(_) => ModelKind::Naive,
            Model::Ar(_) => ModelKind::Ar,
            Model::Arma(_) => ModelKind::Arma,
            Model::Markov(_) => ModelKind::Markov,
            Model::Bayes(_) => ModelKind::Bayes,
            Model::Knn(_) => ModelKind::Knn,
            Model::Mlp(_) => ModelKind::Mlp,
        }
    }

    /// Number of immediately preceding values a forecast needs.
    pub fn lags(&self) -> usize {
        match self {
            Model::Naive(_) => 0,
            Model::Ar(m) | Model::Arma(m) => m.p(),
            Model::Markov(m) => m.order,
            Model::Bayes(m) => m.order,
            Model::Knn(c) => c.window,
            Model::Mlp(m) => m.lags(),
        }
    }

    /// One-step forecasts in model space for `days`, each using only the
    /// values of `series` before it. Days may extend one past the series end.
    pub fn predict_days(&self, series: &DailySeries, days: &[DayIndex]) -> Result<Vec<f64>> {
        let Some(&last) = days.iter().max() else {
            return Ok(Vec::new());
        };
        if let Model::Naive(m) = self {
            return days.iter().map(|&d| m.predict(d)).collect();
        }
        let start = series.start();
        let t_max = start.days_until(last);
        if t_max < 0 || t_max > series.len() as i64 {
            return Err(Error::InsufficientHistory(format!("{last} lies outside the history")));
        }
        let x: Vec<f64> = series.values()[..t_max as usize]
            .iter()
            .enumerate()
            .map(|(i, v)| v.ok_or(Error::MissingValue(series.day(i))))
            .collect::<Result<_>>()?;

        let lags = self.lags();
        let index = |day: DayIndex| -> Result<usize> {
            let t = start.days_until(day);
            if t < lags as i64 {
                return Err(Error::InsufficientHistory(format!(
                    "{day}: needs {lags} values before it"
                )));
            }
            Ok(t as usize)
        };

        match self {
            Model::Naive(_) => unreachable!(),
            Model::Ar(m) | Model::Arma(m) => {
                // the appended value is never read by a forecast
                let mut padded = x;
                padded.push(0.0);
                let preds = m.one_step(&padded);
                days.iter()
                    .map(|&d| {
                        let t = index(d)?;
                        preds[t].ok_or_else(|| Error::InsufficientHistory(format!("{d}: no forecast")))
                    })
                    .collect()
            }
            Model::Markov(m) => days
                .iter()
                .map(|&d| m.predict(&x[index(d)? - m.order..index(d)?]))
                .collect(),
            Model::Bayes(m) => days
                .iter()
                .map(|&d| m.predict(&x[index(d)? - m.order..index(d)?]))
                .collect(),
            Model::Knn(cfg) => days
                .iter()
                .map(|&d| {
                    let t = index(d)?;
                    knn_predict(&x[..t - cfg.window], &x[t - cfg.window..t], cfg)
                })
                .collect(),
            Model::Mlp(m) => days
                .iter()
                .map(|&d| {
                    let t = index(d)?;
                    m.predict_next(&x[t - m.lags()..t])
                })
                .collect(),
        }
    }
}

/// Forecasts in Wh/m² for every day of `from..=to`.
///
/// `measured` is the cleaned series in Wh/m². With a preprocessor the model
/// sees the corrected series and its outputs are inverted; negative results
/// clamp to 0.
pub fn forecast_span(
    model: &Model,
    preprocessor: Option<&Preprocessor>,
    measured: &DailySeries,
    from: DayIndex,
    to: DayIndex,
) -> Result<DailySeries> {
    if to < from {
        return Err(Error::Config(format!("empty forecast span {from}..{to}")));
    }
    let model_space = match preprocessor {
        Some(p) => p.apply(measured)?,
        None => measured.clone(),
    };
    let days: Vec<DayIndex> = (0..=from.days_until(to)).map(|i| from.offset(i)).collect();
    let raw = model.predict_days(&model_space, &days)?;
    let values = days
        .iter()
        .zip(raw)
        .map(|(&d, y)| {
            let wh = preprocessor.map_or(y, |p| p.invert_value(d, y));
            if wh.is_finite() {
                Ok(Some(wh.max(0.0)))
            } else {
                Err(Error::NonFinite(format!("forecast for {d}")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    DailySeries::new(from, values, "ghi_pred_wh_m2")
}
