//! Stationarization of daily irradiation and its exact inverse.
//!
//! The chain is: divide by H0 (clearness index), divide by a centered
//! 365-day moving average, average those ratios per day-of-year slot into
//! seasonal factors, normalize the factors to unit mean, and finally divide
//! the clearness index by the factor of each slot. A fitted [`Preprocessor`]
//! freezes H0 and the factors so the same transform (and its inverse) can be
//! applied to later years without refitting.

use crate::error::{Error, Result};
use crate::series::{DailySeries, DayIndex, SLOTS};
use crate::solar::{h0_table, H0Table, SiteSpec};

/// Half-width of the 365-day centered window.
pub const DEFAULT_HALF_WIDTH: usize = 182;

/// Measured irradiation divided by H0 of the slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ClearnessSeries(DailySeries);

impl ClearnessSeries {
    pub fn series(&self) -> &DailySeries {
        &self.0
    }

    pub fn into_series(self) -> DailySeries {
        self.0
    }
}

pub fn clearness_index(series: &DailySeries, h0: &H0Table) -> Result<ClearnessSeries> {
    series
        .map_values("clearness", |_, day, x| {
            let h = h0.get(day.seasonal_slot());
            if h <= 0.0 {
                return Err(Error::ZeroExtraterrestrial(day));
            }
            Ok(x / h)
        })
        .map(ClearnessSeries)
}

/// Ratio of each value to its centered moving average. Slots whose window
/// leaves the series or touches a missing value are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioSeries {
    start: DayIndex,
    values: Vec<Option<f64>>,
    half_width: usize,
}

impl RatioSeries {
    pub fn start(&self) -> DayIndex {
        self.start
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn defined(&self) -> impl Iterator<Item = (DayIndex, f64)> + '_ {
        let start = self.start;
        self.values
            .iter()
            .enumerate()
            .filter_map(move |(i, v)| v.map(|v| (start.offset(i as i64), v)))
    }
}

/// `y_t = S_t / mean(S_{t-m} ..= S_{t+m})` on the flat time axis, so windows
/// straddle year boundaries; the first and last `m` slots stay undefined.
pub fn moving_average_ratio(s: &ClearnessSeries, half_width: usize) -> Result<RatioSeries> {
    let series = s.series();
    let window = 2 * half_width + 1;
    if series.len() < window {
        return Err(Error::TooShort {
            needed: window,
            got: series.len(),
        });
    }
    let x = series.values();
    let mut values = vec![None; x.len()];
    for t in half_width..x.len() - half_width {
        let Some(centre) = x[t] else { continue };
        let mut sum = 0.0;
        let mut complete = true;
        for v in &x[t - half_width..=t + half_width] {
            match v {
                Some(v) => sum += v,
                None => {
                    complete = false;
                    break;
                }
            }
        }
        if !complete {
            continue;
        }
        let mean = sum / window as f64;
        if mean == 0.0 {
            return Err(Error::ZeroWindowMean(series.day(t)));
        }
        values[t] = Some(centre / mean);
    }
    Ok(RatioSeries {
        start: series.start(),
        values,
        half_width,
    })
}

/// Per-slot seasonal coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SeasonalFactors {
    /// Mean ratio of each slot over the defined years.
    raw: Vec<f64>,
    /// Grand mean of `raw` over the 365 slots.
    grand_mean: f64,
    /// `raw / grand_mean`; unit mean by construction.
    adjusted: Vec<f64>,
    half_width: usize,
    /// Number of defined ratios that entered each slot.
    n_years_used: Vec<usize>,
}

impl SeasonalFactors {
    /// Rebuilds factors from persisted unit-mean values (raw = adjusted).
    pub fn from_adjusted(adjusted: Vec<f64>, n_years_used: Vec<usize>, half_width: usize) -> Result<Self> {
        if adjusted.len() != SLOTS || n_years_used.len() != SLOTS {
            return Err(Error::Dimension {
                expected: SLOTS,
                got: adjusted.len().min(n_years_used.len()),
            });
        }
        if let Some(d) = adjusted.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidSeries(format!(
                "seasonal factor for slot {} is not positive",
                d + 1
            )));
        }
        Ok(SeasonalFactors {
            raw: adjusted.clone(),
            grand_mean: 1.0,
            adjusted,
            half_width,
            n_years_used,
        })
    }

    /// Final unit-mean factor for slot `1..=365`.
    pub fn get(&self, slot: usize) -> f64 {
        self.adjusted[slot - 1]
    }

    pub fn adjusted(&self) -> &[f64] {
        &self.adjusted
    }

    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    pub fn grand_mean(&self) -> f64 {
        self.grand_mean
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn n_years_used(&self) -> &[usize] {
        &self.n_years_used
    }
}

pub fn seasonal_factors(ratios: &RatioSeries) -> Result<SeasonalFactors> {
    let mut sums = vec![0.0; SLOTS];
    let mut counts = vec![0usize; SLOTS];
    for (day, y) in ratios.defined() {
        let slot = day.seasonal_slot() - 1;
        sums[slot] += y;
        counts[slot] += 1;
    }
    if let Some(slot) = counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptySlot(slot + 1));
    }
    let raw: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    let grand_mean = raw.iter().sum::<f64>() / SLOTS as f64;
    let adjusted = raw.iter().map(|y| y / grand_mean).collect();
    Ok(SeasonalFactors {
        raw,
        grand_mean,
        adjusted,
        half_width: ratios.half_width,
        n_years_used: counts,
    })
}

pub fn deseasonalize(s: &ClearnessSeries, factors: &SeasonalFactors) -> Result<DailySeries> {
    s.series()
        .map_values("s_corr", |_, day, v| Ok(v / factors.get(day.seasonal_slot())))
}

/// Fitted stationarization state.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessor {
    site: SiteSpec,
    h0: H0Table,
    factors: SeasonalFactors,
}

impl Preprocessor {
    /// Fits on `train`; nothing outside it influences the factors.
    pub fn fit(train: &DailySeries, site: SiteSpec) -> Result<Self> {
        Self::fit_with_half_width(train, site, DEFAULT_HALF_WIDTH)
    }

    pub fn fit_with_half_width(train: &DailySeries, site: SiteSpec, half_width: usize) -> Result<Self> {
        let h0 = h0_table(&site);
        let clearness = clearness_index(train, &h0)?;
        let ratios = moving_average_ratio(&clearness, half_width)?;
        let factors = seasonal_factors(&ratios)?;
        Ok(Preprocessor { site, h0, factors })
    }

    pub fn from_parts(site: SiteSpec, factors: SeasonalFactors) -> Self {
        Preprocessor {
            h0: h0_table(&site),
            site,
            factors,
        }
    }

    pub fn site(&self) -> &SiteSpec {
        &self.site
    }

    pub fn h0(&self) -> &H0Table {
        &self.h0
    }

    pub fn factors(&self) -> &SeasonalFactors {
        &self.factors
    }

    /// `H0 · y*` of the day's slot, the divisor of the forward transform.
    pub fn scale_of(&self, day: DayIndex) -> f64 {
        let slot = day.seasonal_slot();
        self.h0.get(slot) * self.factors.get(slot)
    }

    pub fn apply_value(&self, day: DayIndex, x: f64) -> Result<f64> {
        let slot = day.seasonal_slot();
        if self.h0.get(slot) <= 0.0 {
            return Err(Error::ZeroExtraterrestrial(day));
        }
        Ok(x / self.scale_of(day))
    }

    pub fn invert_value(&self, day: DayIndex, corrected: f64) -> f64 {
        corrected * self.scale_of(day)
    }

    /// Corrected series `X / (H0 · y*)`.
    pub fn apply(&self, series: &DailySeries) -> Result<DailySeries> {
        series.map_values("s_corr", |_, day, x| self.apply_value(day, x))
    }

    /// Back to Wh/m²: `S_corr · y* · H0`.
    pub fn invert(&self, corrected: &DailySeries) -> Result<DailySeries> {
        corrected.map_values("ghi_wh_m2", |_, day, v| Ok(self.invert_value(day, v)))
    }
}
