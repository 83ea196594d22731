use crate::error::{Error, Result};
use crate::series::{DailySeries, DayIndex};

/// Sliding windows over a daily series: `p` lags, oldest first, and the
/// value that follows them.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowDataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    /// Day of each target.
    pub days: Vec<DayIndex>,
}

impl WindowDataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn lags(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    /// Rows `from..to` as a new dataset.
    pub fn rows(&self, from: usize, to: usize) -> WindowDataset {
        WindowDataset {
            inputs: self.inputs[from..to].to_vec(),
            targets: self.targets[from..to].to_vec(),
            days: self.days[from..to].to_vec(),
        }
    }
}

/// Every window of `p` consecutive present values followed by a present
/// target. Windows touching a missing value are skipped, so a dense series
/// yields exactly `len − p` rows.
pub fn make_windows(series: &DailySeries, p: usize) -> Result<WindowDataset> {
    if p == 0 {
        return Err(Error::Config("window length must be at least 1".into()));
    }
    if series.len() <= p {
        return Err(Error::TooShort {
            needed: p + 1,
            got: series.len(),
        });
    }
    let values = series.values();
    let mut out = WindowDataset {
        inputs: Vec::new(),
        targets: Vec::new(),
        days: Vec::new(),
    };
    for t in p..values.len() {
        let Some(target) = values[t] else { continue };
        let lags: Option<Vec<f64>> = values[t - p..t].iter().copied().collect();
        if let Some(lags) = lags {
            out.inputs.push(lags);
            out.targets.push(target);
            out.days.push(series.day(t));
        }
    }
    Ok(out)
}

/// Per-channel min-max scaling to `[0, 1]`, fitted on training rows only.
/// Values outside the fitted range map linearly outside `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    input_min: Vec<f64>,
    input_max: Vec<f64>,
    output_min: f64,
    output_max: f64,
}

fn check_range(channel: usize, min: f64, max: f64) -> Result<()> {
    if !(min.is_finite() && max.is_finite()) {
        return Err(Error::NonFinite(format!("channel {channel} range [{min}, {max}]")));
    }
    if max <= min {
        return Err(Error::ConstantChannel { channel, value: min });
    }
    Ok(())
}

impl Scaler {
    /// Channel `n_inputs` (one past the last input) is the target.
    pub fn fit(data: &WindowDataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::TooShort { needed: 1, got: 0 });
        }
        let k = data.lags();
        let mut input_min = vec![f64::INFINITY; k];
        let mut input_max = vec![f64::NEG_INFINITY; k];
        for row in &data.inputs {
            for (c, &v) in row.iter().enumerate() {
                input_min[c] = input_min[c].min(v);
                input_max[c] = input_max[c].max(v);
            }
        }
        let (output_min, output_max) = data
            .targets
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        Scaler::from_ranges(input_min, input_max, output_min, output_max)
    }

    pub fn from_ranges(input_min: Vec<f64>, input_max: Vec<f64>, output_min: f64, output_max: f64) -> Result<Self> {
        if input_min.len() != input_max.len() {
            return Err(Error::Dimension {
                expected: input_min.len(),
                got: input_max.len(),
            });
        }
        for (c, (&lo, &hi)) in input_min.iter().zip(&input_max).enumerate() {
            check_range(c, lo, hi)?;
        }
        check_range(input_min.len(), output_min, output_max)?;
        Ok(Scaler {
            input_min,
            input_max,
            output_min,
            output_max,
        })
    }

    pub fn n_inputs(&self) -> usize {
        self.input_min.len()
    }

    pub fn input_min(&self) -> &[f64] {
        &self.input_min
    }

    pub fn input_max(&self) -> &[f64] {
        &self.input_max
    }

    pub fn output_range(&self) -> (f64, f64) {
        (self.output_min, self.output_max)
    }

    pub fn scale_input(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_inputs() {
            return Err(Error::Dimension {
                expected: self.n_inputs(),
                got: x.len(),
            });
        }
        Ok(x.iter()
            .zip(self.input_min.iter().zip(&self.input_max))
            .map(|(v, (lo, hi))| (v - lo) / (hi - lo))
            .collect())
    }

    pub fn scale_output(&self, y: f64) -> f64 {
        (y - self.output_min) / (self.output_max - self.output_min)
    }

    pub fn unscale_output(&self, y: f64) -> f64 {
        self.output_min + y * (self.output_max - self.output_min)
    }

    pub fn transform(&self, data: &WindowDataset) -> Result<WindowDataset> {
        Ok(WindowDataset {
            inputs: data.inputs.iter().map(|r| self.scale_input(r)).collect::<Result<_>>()?,
            targets: data.targets.iter().map(|&y| self.scale_output(y)).collect(),
            days: data.days.clone(),
        })
    }
}
