//! Daily extraterrestrial irradiation on a horizontal plane.
//!
//! Declination follows Cooper's single sinusoid and the sunset hour angle
//! comes from the standard daily integral of `cos(zenith)` between sunrise
//! and sunset. Every angle formula uses a 365-day year.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::series::SLOTS;

/// Default solar constant in W/m².
pub const SOLAR_CONSTANT: f64 = 1367.0;

/// Peak declination in radians (≈ 23.45°).
const OBLIQUITY: f64 = 0.409;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiteSpec {
    latitude: f64,
    solar_constant: f64,
}

impl SiteSpec {
    /// Site at `latitude` radians with the default solar constant.
    pub fn new(latitude: f64) -> Result<Self> {
        Self::with_solar_constant(latitude, SOLAR_CONSTANT)
    }

    pub fn from_degrees(latitude_deg: f64) -> Result<Self> {
        Self::new(latitude_deg.to_radians())
    }

    pub fn with_solar_constant(latitude: f64, solar_constant: f64) -> Result<Self> {
        if !latitude.is_finite() || latitude.abs() >= PI / 2.0 {
            return Err(Error::Config(format!(
                "latitude {:.4}° must lie strictly between the poles",
                latitude.to_degrees()
            )));
        }
        if !(1300.0..=1400.0).contains(&solar_constant) {
            return Err(Error::Config(format!(
                "solar constant {solar_constant} W/m² outside [1300, 1400]"
            )));
        }
        Ok(SiteSpec {
            latitude,
            solar_constant,
        })
    }

    pub fn latitude(&self) -> f64 {
        self.latitude
    }

    pub fn latitude_deg(&self) -> f64 {
        self.latitude.to_degrees()
    }

    pub fn solar_constant(&self) -> f64 {
        self.solar_constant
    }
}

fn check_day(day_of_year: u32) -> Result<()> {
    if (1..=SLOTS as u32).contains(&day_of_year) {
        Ok(())
    } else {
        Err(Error::DayOutOfRange(day_of_year))
    }
}

/// Solar declination in radians.
pub fn declination(day_of_year: u32) -> Result<f64> {
    check_day(day_of_year)?;
    Ok(OBLIQUITY * (2.0 * PI * (day_of_year as f64 + 284.0) / 365.0).sin())
}

/// Earth–sun distance correction factor.
pub fn eccentricity_correction(day_of_year: u32) -> Result<f64> {
    check_day(day_of_year)?;
    Ok(1.0 + 0.033 * (2.0 * PI * day_of_year as f64 / 365.0).cos())
}

/// Sunset hour angle in radians; 0 during polar night, π during polar day.
pub fn sunset_hour_angle(latitude: f64, declination: f64) -> f64 {
    (-latitude.tan() * declination.tan()).clamp(-1.0, 1.0).acos()
}

/// Daily extraterrestrial irradiation on a horizontal surface, Wh/m².
pub fn daily_extraterrestrial(site: &SiteSpec, day_of_year: u32) -> Result<f64> {
    let delta = declination(day_of_year)?;
    let e0 = eccentricity_correction(day_of_year)?;
    let phi = site.latitude;
    let ws = sunset_hour_angle(phi, delta);
    let h0 = 24.0 / PI * site.solar_constant * e0 * (phi.cos() * delta.cos() * ws.sin() + ws * phi.sin() * delta.sin());
    // ws = 0 leaves a tiny negative rounding residue
    Ok(h0.max(0.0))
}

/// H0 for each of the 365 day-of-year slots at one site.
#[derive(Debug, Clone, PartialEq)]
pub struct H0Table {
    values: Vec<f64>,
}

impl H0Table {
    /// Value for slot `day` in `1..=365`.
    pub fn get(&self, day: usize) -> f64 {
        self.values[day - 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

pub fn h0_table(site: &SiteSpec) -> H0Table {
    let values = (1..=SLOTS as u32)
        .map(|d| daily_extraterrestrial(site, d).expect("slot in range"))
        .collect();
    H0Table { values }
}
