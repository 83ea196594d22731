use super::data::Scaler;
use super::network::Mlp;
use crate::error::{Error, Result};
use crate::preprocess::Preprocessor;
use crate::series::{DailySeries, DayIndex};

/// A trained network with the scaler fitted on its training windows.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpForecaster {
    pub mlp: Mlp,
    pub scaler: Scaler,
}

impl MlpForecaster {
    pub fn new(mlp: Mlp, scaler: Scaler) -> Result<Self> {
        if scaler.n_inputs() != mlp.layout().inputs() {
            return Err(Error::Dimension {
                expected: mlp.layout().inputs(),
                got: scaler.n_inputs(),
            });
        }
        Ok(MlpForecaster { mlp, scaler })
    }

    pub fn lags(&self) -> usize {
        self.mlp.layout().inputs()
    }

    /// Next value from unscaled lags, oldest first.
    pub fn predict_next(&self, lags: &[f64]) -> Result<f64> {
        let x = self.scaler.scale_input(lags)?;
        Ok(self.scaler.unscale_output(self.mlp.forward(&x)?))
    }
}

/// One-step forecasts in Wh/m² for `test_days`.
///
/// Lags for day `t` are the measured values of `history` on the `p` days
/// before `t`, passed through `preprocessor` when given. Nothing on or after
/// `t` is read. Predictions are inverted and floored at 0. The result spans
/// the first to the last test day; days in between that were not requested
/// stay missing.
pub fn predict_series(
    model: &MlpForecaster,
    preprocessor: Option<&Preprocessor>,
    history: &DailySeries,
    test_days: &[DayIndex],
) -> Result<DailySeries> {
    let (Some(&first), Some(&last)) = (test_days.first(), test_days.last()) else {
        return Err(Error::EmptyInput);
    };
    if test_days.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidSeries("test days must be strictly increasing".into()));
    }
    let model_space = match preprocessor {
        Some(pre) => pre.apply(history)?,
        None => history.clone(),
    };
    let p = model.lags();
    let start = model_space.start();
    let mut out = vec![None; (first.days_until(last) + 1) as usize];
    for &day in test_days {
        let t = start.days_until(day);
        if t < p as i64 || t > model_space.len() as i64 {
            return Err(Error::InsufficientHistory(format!(
                "{day}: needs {p} measured days before it"
            )));
        }
        let t = t as usize;
        let lags: Vec<f64> = model_space.values()[t - p..t]
            .iter()
            .copied()
            .collect::<Option<_>>()
            .ok_or_else(|| Error::InsufficientHistory(format!("{day}: a lag in the previous {p} days is missing")))?;
        let y = model.predict_next(&lags)?;
        let wh = match preprocessor {
            Some(pre) => pre.invert_value(day, y),
            None => y,
        };
        out[first.days_until(day) as usize] = Some(wh.max(0.0));
    }
    DailySeries::new(first, out, "ghi_pred_wh_m2")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::{Layer, MlpLayout};
    use crate::preprocess::SeasonalFactors;
    use crate::series::{generate_synthetic, seasonal_modulation, SynthConfig, SLOTS};
    use crate::solar::SiteSpec;

    fn constant_net(bias: f64) -> Mlp {
        let layers = vec![
            Layer {
                n_in: 8,
                n_out: 3,
                weights: vec![0.0; 24],
                biases: vec![0.0; 3],
            },
            Layer {
                n_in: 3,
                n_out: 1,
                weights: vec![0.0; 3],
                biases: vec![bias],
            },
        ];
        Mlp::from_layers(MlpLayout::default(), layers, 0).unwrap()
    }

    fn unit_scaler() -> Scaler {
        Scaler::from_ranges(vec![0.0; 8], vec![1.0; 8], 0.0, 1.0).unwrap()
    }

    #[test]
    fn oracle_network_reproduces_noise_free_series() {
        let cfg = SynthConfig {
            noise_std: 0.0,
            n_years: 4,
            ..SynthConfig::default()
        };
        let series = generate_synthetic(&cfg).unwrap();
        let modulation: Vec<f64> = (1..=SLOTS)
            .map(|s| seasonal_modulation(s, cfg.modulation_amplitude))
            .collect();
        let mean = modulation.iter().sum::<f64>() / SLOTS as f64;
        let adjusted: Vec<f64> = modulation.iter().map(|m| m / mean).collect();
        let factors = SeasonalFactors::from_adjusted(adjusted, vec![4; SLOTS], 182).unwrap();
        let site = SiteSpec::from_degrees(cfg.latitude_deg).unwrap();
        let pre = Preprocessor::from_parts(site, factors);

        // the corrected series is the constant clear-sky fraction times the mean modulation
        let level = cfg.clear_sky_fraction_mean * mean;
        let model = MlpForecaster::new(constant_net(level), unit_scaler()).unwrap();
        let test_days: Vec<DayIndex> = series.days().skip(400).take(500).collect();
        let pred = predict_series(&model, Some(&pre), &series, &test_days).unwrap();
        for (day, p) in test_days.iter().zip(pred.values()) {
            let m = series.value(series.index_of(*day).unwrap()).unwrap();
            assert!((p.unwrap() - m).abs() <= 1e-6 * m, "{day}: {p:?} vs {m}");
        }
    }

    #[test]
    fn first_test_day_reads_last_training_values() {
        let start = DayIndex::new(2000, 1).unwrap();
        let v: Vec<f64> = (0..20).map(f64::from).collect();
        let history = DailySeries::from_values(start, &v, "x").unwrap();
        let model = MlpForecaster::new(constant_net(0.5), unit_scaler()).unwrap();
        assert!(predict_series(&model, None, &history, &[start.offset(7)]).is_err());
        let ok = predict_series(&model, None, &history, &[start.offset(8)]).unwrap();
        assert_eq!(ok.value(0), Some(0.5));
        let next = predict_series(&model, None, &history, &[start.offset(20)]).unwrap();
        assert_eq!(next.value(0), Some(0.5));
        let err = predict_series(&model, None, &history, &[start.offset(21)]).unwrap_err();
        assert!(err.to_string().contains("2000-01-22"), "{err}");
    }

    #[test]
    fn negative_outputs_clamp_to_zero() {
        let start = DayIndex::new(2000, 1).unwrap();
        let history = DailySeries::from_values(start, &[1.0; 12], "x").unwrap();
        let model = MlpForecaster::new(constant_net(-3.0), unit_scaler()).unwrap();
        let p = predict_series(&model, None, &history, &[start.offset(10)]).unwrap();
        assert_eq!(p.value(0), Some(0.0));
    }

    #[test]
    fn no_lookahead() {
        let series = generate_synthetic(&SynthConfig {
            n_years: 3,
            ..SynthConfig::default()
        })
        .unwrap();
        let model = MlpForecaster::new(Mlp::new(MlpLayout::default(), 3), {
            let lo = vec![0.0; 8];
            let hi = vec![12_000.0; 8];
            Scaler::from_ranges(lo, hi, 5_000.0, 6_000.0).unwrap()
        })
        .unwrap();
        let days: Vec<DayIndex> = series.days().skip(500).take(100).collect();
        let base = predict_series(&model, None, &series, &days).unwrap();
        let mut values = series.values().to_vec();
        values[550] = Some(99_999.0);
        let perturbed = DailySeries::new(series.start(), values, "x").unwrap();
        let after = predict_series(&model, None, &perturbed, &days).unwrap();
        assert_eq!(&base.values()[..=50], &after.values()[..=50]);
        assert_ne!(base.values()[51], after.values()[51]);
    }
}
