//! Raw periodogram, dominant period and Fisher's g-test for hidden periodicity.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::series::DailySeries;

const MIN_LEN: usize = 16;

/// One-sided periodogram of a demeaned series.
///
/// `ordinates[k-1] = |X_k|² / n` for `k = 1..=n/2`, with `X` the DFT of the
/// demeaned input. Every ordinate below Nyquist stands for a pair of
/// conjugate frequencies, so the population variance is
/// `(2/n)·Σ I_k` for odd `n`; for even `n` the Nyquist term counts once
/// (see [`Periodogram::variance`]).
#[derive(Debug, Clone, PartialEq)]
pub struct Periodogram {
    frequencies: Vec<f64>,
    ordinates: Vec<f64>,
    n: usize,
}

impl Periodogram {
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn ordinates(&self) -> &[f64] {
        &self.ordinates
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Period in days of the `k`-th ordinate (1-based).
    pub fn period(&self, k: usize) -> f64 {
        self.n as f64 / k as f64
    }

    /// Ordinate whose period is closest to `period_days`.
    pub fn ordinate_at_period(&self, period_days: f64) -> f64 {
        let k = (self.n as f64 / period_days)
            .round()
            .clamp(1.0, self.ordinates.len() as f64) as usize;
        self.ordinates[k - 1]
    }

    /// Population variance recovered from the ordinates.
    pub fn variance(&self) -> f64 {
        let n = self.n as f64;
        self.ordinates
            .iter()
            .enumerate()
            .map(|(i, &o)| {
                let nyquist = self.n.is_multiple_of(2) && i + 1 == self.n / 2;
                if nyquist {
                    o / n
                } else {
                    2.0 * o / n
                }
            })
            .sum()
    }

    /// `(period_days, power)` rows ordered by ascending frequency.
    pub fn period_rows(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.ordinates.iter().enumerate().map(|(i, &o)| (self.period(i + 1), o))
    }
}

pub fn periodogram(values: &[f64]) -> Result<Periodogram> {
    let n = values.len();
    if n < MIN_LEN {
        return Err(Error::TooShort {
            needed: MIN_LEN,
            got: n,
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSeries("periodogram input must be finite".into()));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let half = n / 2;
    let ordinates = buf[1..=half].iter().map(|c| c.norm_sqr() / n as f64).collect();
    let frequencies = (1..=half).map(|k| k as f64 / n as f64).collect();
    Ok(Periodogram {
        frequencies,
        ordinates,
        n,
    })
}

/// Periodogram of a daily series with missing slots replaced by the mean.
pub fn series_periodogram(series: &DailySeries) -> Result<Periodogram> {
    let present: Vec<f64> = series.values().iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(Error::InvalidSeries("series has no values".into()));
    }
    let mean = present.iter().sum::<f64>() / present.len() as f64;
    let filled: Vec<f64> = series.values().iter().map(|v| v.unwrap_or(mean)).collect();
    periodogram(&filled)
}

fn argmax(p: &Periodogram) -> Result<usize> {
    let mut best = 0;
    for (i, &o) in p.ordinates.iter().enumerate() {
        // strict comparison keeps the lowest k on ties
        if o > p.ordinates[best] {
            best = i;
        }
    }
    if p.ordinates[best] > 0.0 {
        Ok(best + 1)
    } else {
        Err(Error::NoPeak)
    }
}

/// Period in days of the largest ordinate.
pub fn dominant_period(p: &Periodogram) -> Result<f64> {
    argmax(p).map(|k| p.period(k))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherTestResult {
    pub g: f64,
    pub p_value: f64,
    pub peak_period: f64,
}

/// Exact tail probability `P(G > g)` of Fisher's statistic for `q` ordinates
/// under the Gaussian white-noise null.
pub fn fisher_p_value(g: f64, q: usize) -> f64 {
    if g <= 0.0 {
        return 1.0;
    }
    if g >= 1.0 {
        return 0.0;
    }
    let qf = q as f64;
    let ln_q_fact = ln_gamma(qf + 1.0);
    let upper = ((1.0 / g).floor() as usize).min(q);
    let mut sum = 0.0;
    for j in 1..=upper {
        let base = 1.0 - j as f64 * g;
        if base <= 0.0 {
            break;
        }
        let jf = j as f64;
        let ln_binom = ln_q_fact - ln_gamma(jf + 1.0) - ln_gamma(qf - jf + 1.0);
        let term = (ln_binom + (qf - 1.0) * base.ln()).exp();
        if j % 2 == 1 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    sum.clamp(0.0, 1.0)
}

pub fn fisher_g_test(p: &Periodogram) -> Result<FisherTestResult> {
    let q = p.ordinates.len();
    if q < 8 {
        return Err(Error::TooShort { needed: 8, got: q });
    }
    let total: f64 = p.ordinates.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroPower);
    }
    let k = argmax(p)?;
    let g = p.ordinates[k - 1] / total;
    Ok(FisherTestResult {
        g,
        p_value: fisher_p_value(g, q),
        peak_period: p.period(k),
    })
}
