//! Synthetic daily irradiation with a known annual cycle and AR(1) cloud noise.
//!
//! `value(d, y) = H0(d) · clamp(k · m(d) · (1 + n_t), 0.03, 1)` where `m` is a
//! cosine modulation of the clearness index peaking in mid-July and `n_t` an
//! AR(1) process driven by seeded Gaussian innovations.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{DailySeries, DayIndex};
use crate::error::{Error, Result};
use crate::solar::{h0_table, SiteSpec, SOLAR_CONSTANT};

const MIN_CLEARNESS: f64 = 0.03;
const MAX_CLEARNESS: f64 = 1.0;
const MODULATION_PEAK_DAY: f64 = 196.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_years: usize,
    pub start_year: i32,
    pub latitude_deg: f64,
    /// Mean clearness index `k`.
    pub clear_sky_fraction_mean: f64,
    /// Amplitude of the annual clearness modulation, at most 0.3.
    pub modulation_amplitude: f64,
    /// AR(1) coefficient of the cloud noise.
    pub ar_coeff: f64,
    /// Innovation standard deviation of the cloud noise.
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_years: 19,
            start_year: 1971,
            latitude_deg: 41.917,
            clear_sky_fraction_mean: 0.6,
            modulation_amplitude: 0.15,
            ar_coeff: 0.3,
            noise_std: 0.15,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_years < 2 {
            return bad(format!("n_years = {} must be at least 2", self.n_years));
        }
        if !(self.latitude_deg > -90.0 && self.latitude_deg < 90.0) {
            return bad(format!("latitude {} outside (-90, 90)", self.latitude_deg));
        }
        if !(self.clear_sky_fraction_mean > 0.0 && self.clear_sky_fraction_mean <= 1.0) {
            return bad(format!(
                "clear_sky_fraction_mean {} outside (0, 1]",
                self.clear_sky_fraction_mean
            ));
        }
        if !(0.0..=0.3).contains(&self.modulation_amplitude) {
            return bad(format!(
                "modulation_amplitude {} outside [0, 0.3]",
                self.modulation_amplitude
            ));
        }
        if !(0.0..1.0).contains(&self.ar_coeff) {
            return bad(format!("ar_coeff {} outside [0, 1)", self.ar_coeff));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad(format!("noise_std {} must be finite and >= 0", self.noise_std));
        }
        Ok(())
    }
}

/// Annual clearness modulation `1 + a·cos(2π(d − 196)/365)` for slot `d`.
pub fn seasonal_modulation(slot: usize, amplitude: f64) -> f64 {
    1.0 + amplitude * (2.0 * PI * (slot as f64 - MODULATION_PEAK_DAY) / 365.0).cos()
}

pub fn generate_synthetic(config: &SynthConfig) -> Result<DailySeries> {
    config.validate()?;
    let site = SiteSpec::with_solar_constant(config.latitude_deg.to_radians(), SOLAR_CONSTANT)?;
    let h0 = h0_table(&site);
    let start = DayIndex::new(config.start_year, 1)?;
    let end = DayIndex::from_ymd(config.start_year + config.n_years as i32 - 1, 12, 31)?;
    let len = start.days_until(end) as usize + 1;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let phi = config.ar_coeff;
    let sigma = config.noise_std;
    let mut noise = sigma / (1.0 - phi * phi).sqrt() * Distribution::<f64>::sample(&StandardNormal, &mut rng);

    let mut values = Vec::with_capacity(len);
    for i in 0..len {
        if i > 0 {
            let eps: f64 = StandardNormal.sample(&mut rng);
            noise = phi * noise + sigma * eps;
        }
        let slot = start.offset(i as i64).seasonal_slot();
        let k = config.clear_sky_fraction_mean * seasonal_modulation(slot, config.modulation_amplitude) * (1.0 + noise);
        values.push(Some(h0.get(slot) * k.clamp(MIN_CLEARNESS, MAX_CLEARNESS)));
    }
    DailySeries::new(start, values, "ghi_wh_m2")
}
