//! Daily solar irradiation forecasting.
//!
//! The crate covers the whole chain from raw daily global horizontal
//! irradiation to verified forecasts:
//!
//! 1. [`series`]: calendar-aware containers, CSV I/O, atypical-day cleaning
//!    and a synthetic generator.
//! 2. [`solar`]: daily extraterrestrial irradiation H0.
//! 3. [`preprocess`]: clearness index, moving-average ratio and seasonal
//!    factors, with an exact inverse.
//! 4. [`spectral`]: periodogram and Fisher's g-test.
//! 5. [`mlp`] and [`baselines`]: the forecasters, unified in [`forecast`].
//! 6. [`evaluation`]: RMSE / nRMSE / MBE / R², seasonal and monthly
//!    breakdowns, confidence intervals across restarts.
//! 7. [`pipeline`]: file-mediated orchestration of all stages.

pub mod baselines;
pub mod error;
pub mod evaluation;
pub mod forecast;
pub mod mlp;
pub mod model_io;
pub mod pipeline;
pub mod preprocess;
pub mod series;
pub mod solar;
pub mod spectral;

pub use error::{Error, ErrorClass, Result, StageExt};
pub use preprocess::Preprocessor;
pub use series::{DailySeries, DayIndex};
pub use solar::SiteSpec;
