//! Calendar-indexed daily series.
//!
//! A [`DailySeries`] holds exactly one slot per calendar day starting at
//! [`DailySeries::start`]; absent observations are `None`. All seasonal
//! computations in the crate work on 365 day-of-year slots: Feb 29 is kept
//! in storage but shares slot 59 with Feb 28 (see [`DayIndex::seasonal_slot`]).

mod clean;
mod csv_io;
mod synth;

pub use clean::{clean, CleaningReport, Replacement};
pub use csv_io::{load_csv, write_csv, CsvSchema};
pub use synth::{generate_synthetic, seasonal_modulation, SynthConfig};

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate};

use crate::error::{Error, Result};

/// Number of seasonal slots per year.
pub const SLOTS: usize = 365;

/// A calendar day identified by year and 1-based day of year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DayIndex {
    year: i32,
    day_of_year: u32,
}

impl DayIndex {
    pub fn new(year: i32, day_of_year: u32) -> Result<Self> {
        let max = if is_leap_year(year) { 366 } else { 365 };
        if day_of_year == 0 || day_of_year > max {
            return Err(Error::InvalidSeries(format!(
                "day of year {day_of_year} invalid for {year}"
            )));
        }
        Ok(DayIndex { year, day_of_year })
    }

    pub fn from_date(date: NaiveDate) -> Self {
        DayIndex {
            year: date.year(),
            day_of_year: date.ordinal(),
        }
    }

    pub fn from_ymd(year: i32, month: u32, day: u32) -> Result<Self> {
        NaiveDate::from_ymd_opt(year, month, day)
            .map(Self::from_date)
            .ok_or_else(|| Error::InvalidSeries(format!("invalid date {year}-{month}-{day}")))
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn day_of_year(self) -> u32 {
        self.day_of_year
    }

    pub fn date(self) -> NaiveDate {
        // invariant checked at construction
        NaiveDate::from_yo_opt(self.year, self.day_of_year).expect("valid DayIndex")
    }

    pub fn month(self) -> u32 {
        self.date().month()
    }

    /// Day-of-year slot in `1..=365`. In leap years Feb 29 maps onto 59 and
    /// every later day shifts down by one.
    pub fn seasonal_slot(self) -> usize {
        let d = self.day_of_year as usize;
        if is_leap_year(self.year) && d >= 60 {
            d - 1
        } else {
            d
        }
    }

    pub fn offset(self, days: i64) -> DayIndex {
        Self::from_date(self.date() + Duration::days(days))
    }

    /// Signed number of days from `self` to `other`.
    pub fn days_until(self, other: DayIndex) -> i64 {
        (other.date() - self.date()).num_days()
    }
}

impl fmt::Display for DayIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.date().format("%Y-%m-%d"))
    }
}

impl FromStr for DayIndex {
    type Err = Error;

    /// `YYYY-MM-DD`.
    fn from_str(s: &str) -> Result<Self> {
        NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
            .map(DayIndex::from_date)
            .map_err(|e| Error::Config(format!("date '{s}': {e}")))
    }
}

pub fn is_leap_year(year: i32) -> bool {
    (year % 4 == 0 && year % 100 != 0) || year % 400 == 0
}

/// Contiguous daily series, one slot per calendar day.
#[derive(Debug, Clone, PartialEq)]
pub struct DailySeries {
    start: DayIndex,
    values: Vec<Option<f64>>,
    label: String,
}

impl DailySeries {
    pub fn new(start: DayIndex, values: Vec<Option<f64>>, label: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidSeries("series must hold at least one day".into()));
        }
        for (i, v) in values.iter().enumerate() {
            if let Some(v) = v {
                if !v.is_finite() || *v < 0.0 {
                    return Err(Error::InvalidSeries(format!(
                        "value {v} on {} is not a finite non-negative number",
                        start.offset(i as i64)
                    )));
                }
            }
        }
        Ok(DailySeries {
            start,
            values,
            label: label.into(),
        })
    }

    pub fn from_values(start: DayIndex, values: &[f64], label: impl Into<String>) -> Result<Self> {
        Self::new(start, values.iter().copied().map(Some).collect(), label)
    }

    pub fn start(&self) -> DayIndex {
        self.start
    }

    pub fn end(&self) -> DayIndex {
        self.day(self.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn value(&self, i: usize) -> Option<f64> {
        self.values.get(i).copied().flatten()
    }

    pub fn day(&self, i: usize) -> DayIndex {
        self.start.offset(i as i64)
    }

    pub fn days(&self) -> impl Iterator<Item = DayIndex> + '_ {
        let start = self.start.date();
        (0..self.len()).map(move |i| DayIndex::from_date(start + Duration::days(i as i64)))
    }

    /// Position of `day` in the series, if covered.
    pub fn index_of(&self, day: DayIndex) -> Option<usize> {
        let off = self.start.days_until(day);
        (off >= 0 && (off as usize) < self.len()).then_some(off as usize)
    }

    pub fn has_missing(&self) -> bool {
        self.values.iter().any(Option::is_none)
    }

    /// All values, failing on the first missing slot.
    pub fn dense(&self) -> Result<Vec<f64>> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| Error::MissingValue(self.day(i))))
            .collect()
    }

    /// Sub-series covering `from..=to` (inclusive, clipped to coverage).
    pub fn slice(&self, from: DayIndex, to: DayIndex) -> Result<DailySeries> {
        let lo = self.start.days_until(from).max(0) as usize;
        let hi = (self.start.days_until(to) + 1).min(self.len() as i64);
        if hi <= lo as i64 {
            return Err(Error::InvalidSeries(format!(
                "no days of {from}..={to} in series {}..={}",
                self.start,
                self.end()
            )));
        }
        Ok(DailySeries {
            start: self.day(lo),
            values: self.values[lo..hi as usize].to_vec(),
            label: self.label.clone(),
        })
    }

    /// Sub-series covering whole calendar years `first..=last`.
    pub fn years(&self, first: i32, last: i32) -> Result<DailySeries> {
        self.slice(DayIndex::new(first, 1)?, DayIndex::from_ymd(last, 12, 31)?)
    }

    /// Number of distinct calendar years touched by the series.
    pub fn year_count(&self) -> usize {
        (self.end().year() - self.start.year() + 1) as usize
    }

    pub(crate) fn map_values(
        &self,
        label: impl Into<String>,
        mut f: impl FnMut(usize, DayIndex, f64) -> Result<f64>,
    ) -> Result<DailySeries> {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| v.map(|v| f(i, self.day(i), v)).transpose())
            .collect::<Result<Vec<_>>>()?;
        DailySeries::new(self.start, values, label)
    }
}
