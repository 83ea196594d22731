use super::{DailySeries, DayIndex, SLOTS};
use crate::error::{Error, Result};
use crate::solar::H0Table;

/// Rule text recorded in every [`CleaningReport`].
pub const CLEANING_RULE: &str =
    "missing, negative, or above daily extraterrestrial irradiation -> mean of the same day-of-year over the other years";

#[derive(Debug, Clone, PartialEq)]
pub struct Replacement {
    pub day: DayIndex,
    pub old: Option<f64>,
    pub new: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CleaningReport {
    pub replaced: Vec<Replacement>,
    pub rule: String,
}

impl CleaningReport {
    pub fn is_empty(&self) -> bool {
        self.replaced.is_empty()
    }
}

fn is_typical(value: Option<f64>, h0: f64) -> bool {
    matches!(value, Some(v) if v >= 0.0 && v <= h0)
}

/// Replaces atypical days (missing, negative, or physically impossible
/// values above H0) by the mean of the typical values found at the same
/// day-of-year slot in the other years of the series.
pub fn clean(series: &DailySeries, h0: &H0Table) -> Result<(DailySeries, CleaningReport)> {
    if series.year_count() < 2 || series.len() < 2 * SLOTS {
        return Err(Error::TooShort {
            needed: 2 * SLOTS,
            got: series.len(),
        });
    }

    // per slot: (year, value) of every typical observation
    let mut by_slot: Vec<Vec<(i32, f64)>> = vec![Vec::new(); SLOTS + 1];
    for (day, v) in series.days().zip(series.values()) {
        let slot = day.seasonal_slot();
        if is_typical(*v, h0.get(slot)) {
            by_slot[slot].push((day.year(), v.unwrap()));
        }
    }

    let mut values = series.values().to_vec();
    let mut replaced = Vec::new();
    for (i, day) in series.days().enumerate() {
        let slot = day.seasonal_slot();
        if is_typical(values[i], h0.get(slot)) {
            continue;
        }
        let (sum, count) = by_slot[slot]
            .iter()
            .filter(|(year, _)| *year != day.year())
            .fold((0.0, 0usize), |(s, n), (_, v)| (s + v, n + 1));
        if count == 0 {
            return Err(Error::UnrecoverableGap { slot, day });
        }
        let new = sum / count as f64;
        replaced.push(Replacement {
            day,
            old: values[i],
            new,
        });
        values[i] = Some(new);
    }

    let cleaned = DailySeries::new(series.start(), values, series.label())?;
    Ok((
        cleaned,
        CleaningReport {
            replaced,
            rule: CLEANING_RULE.to_string(),
        },
    ))
}
