use crate::error::{Error, Result};
use crate::series::{DailySeries, DayIndex, SLOTS};

/// Climatological forecast: the mean of the training values that share the
/// target's day-of-year slot.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveModel {
    slot_means: Vec<Option<f64>>,
}

impl NaiveModel {
    pub fn fit(train: &DailySeries) -> Self {
        let mut sums = vec![0.0; SLOTS];
        let mut counts = vec![0usize; SLOTS];
        for (day, v) in train.days().zip(train.values()) {
            if let Some(v) = v {
                sums[day.seasonal_slot() - 1] += v;
                counts[day.seasonal_slot() - 1] += 1;
            }
        }
        let slot_means = sums
            .iter()
            .zip(&counts)
            .map(|(s, &c)| (c > 0).then(|| s / c as f64))
            .collect();
        NaiveModel { slot_means }
    }

    pub fn from_slot_means(slot_means: Vec<Option<f64>>) -> Result<Self> {
        if slot_means.len() != SLOTS {
            return Err(Error::Dimension {
                expected: SLOTS,
                got: slot_means.len(),
            });
        }
        Ok(NaiveModel { slot_means })
    }

    pub fn slot_means(&self) -> &[Option<f64>] {
        &self.slot_means
    }

    pub fn predict(&self, target: DayIndex) -> Result<f64> {
        let slot = target.seasonal_slot();
        self.slot_means[slot - 1].ok_or(Error::EmptySlot(slot))
    }
}

pub fn naive_predict(history: &DailySeries, target: DayIndex) -> Result<f64> {
    NaiveModel::fit(history).predict(target)
}
