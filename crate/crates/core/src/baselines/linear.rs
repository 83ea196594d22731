//! AR(p) by least squares and ARMA(p, q) by the Hannan–Rissanen two-stage
//! regression.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Diagonal load added to the centered normal equations.
const RIDGE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    /// `φ_1..φ_p`, coefficient of `x_{t-i}` at index `i-1`.
    pub ar: Vec<f64>,
    /// `θ_1..θ_q`, coefficient of `e_{t-j}` at index `j-1`.
    pub ma: Vec<f64>,
    pub intercept: f64,
    /// Last `q` in-sample residuals, most recent first.
    pub residual_history: Vec<f64>,
}

impl LinearModel {
    pub fn p(&self) -> usize {
        self.ar.len()
    }

    pub fn q(&self) -> usize {
        self.ma.len()
    }

    /// `intercept + Σ φ_i·lags[i-1] + Σ θ_j·residuals[j-1]`, with the most
    /// recent value first in both slices.
    pub fn predict(&self, lags: &[f64], residuals: &[f64]) -> Result<f64> {
        if lags.len() < self.p() {
            return Err(Error::InsufficientHistory(format!(
                "AR part needs {} lags, got {}",
                self.p(),
                lags.len()
            )));
        }
        if residuals.len() < self.q() {
            return Err(Error::InsufficientHistory(format!(
                "MA part needs {} residuals, got {}",
                self.q(),
                residuals.len()
            )));
        }
        let ar: f64 = self.ar.iter().zip(lags).map(|(c, x)| c * x).sum();
        let ma: f64 = self.ma.iter().zip(residuals).map(|(c, e)| c * e).sum();
        Ok(self.intercept + ar + ma)
    }

    /// One-step predictions over `x`, filtering residuals recursively from a
    /// zero start. Entry `t` uses `x[..t]` only; the first `p` are `None`.
    pub fn one_step(&self, x: &[f64]) -> Vec<Option<f64>> {
        let p = self.p();
        let mut residuals = vec![0.0; x.len()];
        let mut out = vec![None; x.len()];
        for t in p..x.len() {
            let mut pred = self.intercept;
            for (i, c) in self.ar.iter().enumerate() {
                pred += c * x[t - 1 - i];
            }
            for (j, c) in self.ma.iter().enumerate() {
                if t > j {
                    pred += c * residuals[t - 1 - j];
                }
            }
            residuals[t] = x[t] - pred;
            out[t] = Some(pred);
        }
        out
    }

    /// In-sample one-step mean squared error.
    pub fn mse(&self, x: &[f64]) -> f64 {
        let (sum, n) = self
            .one_step(x)
            .iter()
            .zip(x)
            .filter_map(|(p, x)| p.map(|p| (x - p).powi(2)))
            .fold((0.0, 0usize), |(s, n), e| (s + e, n + 1));
        sum / n.max(1) as f64
    }
}

/// Least squares with intercept: columns and target are centered, the slope
/// system gets a tiny ridge, and the intercept is recovered from the means.
fn centered_ols(rows: &[Vec<f64>], y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = y.len();
    if n == 0 {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    let k = rows.first().map_or(0, Vec::len);
    let y_mean = y.iter().sum::<f64>() / n as f64;
    if k == 0 {
        return Ok((Vec::new(), y_mean));
    }
    let mut col_means = vec![0.0; k];
    for r in rows {
        for (m, v) in col_means.iter_mut().zip(r) {
            *m += v;
        }
    }
    col_means.iter_mut().for_each(|m| *m /= n as f64);

    let x = DMatrix::from_fn(n, k, |i, j| rows[i][j] - col_means[j]);
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    let mut xtx = x.tr_mul(&x);
    for j in 0..k {
        xtx[(j, j)] += RIDGE;
    }
    let xty = x.tr_mul(&yc);
    let beta = xtx
        .cholesky()
        .ok_or_else(|| Error::Singular("normal equations are not positive definite".into()))?
        .solve(&xty);
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::Singular("non-finite regression coefficients".into()));
    }
    let intercept = y_mean - beta.iter().zip(&col_means).map(|(b, m)| b * m).sum::<f64>();
    Ok((beta.iter().copied().collect(), intercept))
}

fn check_length(len: usize, order: usize) -> Result<()> {
    let needed = 10 * order + 1;
    if len < needed.max(1) {
        return Err(Error::TooShort { needed, got: len });
    }
    Ok(())
}

/// AR(p) with intercept by ordinary least squares on the lag matrix.
pub fn fit_ar(x: &[f64], p: usize) -> Result<LinearModel> {
    check_length(x.len(), p)?;
    let rows: Vec<Vec<f64>> = (p..x.len()).map(|t| (1..=p).map(|i| x[t - i]).collect()).collect();
    let (ar, intercept) = centered_ols(&rows, &x[p..])?;
    Ok(LinearModel {
        ar,
        ma: Vec::new(),
        intercept,
        residual_history: Vec::new(),
    })
}

/// ARMA(p, q) by Hannan–Rissanen: residual proxies from a long AR fit, then
/// least squares of `x_t` on `p` lags of `x` and `q` lags of the proxies.
pub fn fit_arma(x: &[f64], p: usize, q: usize) -> Result<LinearModel> {
    if q == 0 {
        return fit_ar(x, p);
    }
    check_length(x.len(), p + q)?;
    let long_order = 20.max(2 * (p + q));
    let long = fit_ar(x, long_order)?;
    let mut proxy = vec![0.0; x.len()];
    for t in long_order..x.len() {
        let lags: Vec<f64> = (1..=long_order).map(|i| x[t - i]).collect();
        proxy[t] = x[t] - long.predict(&lags, &[])?;
    }

    let first = (long_order + q).max(p);
    if first >= x.len() {
        return Err(Error::TooShort {
            needed: first + 1,
            got: x.len(),
        });
    }
    let rows: Vec<Vec<f64>> = (first..x.len())
        .map(|t| (1..=p).map(|i| x[t - i]).chain((1..=q).map(|j| proxy[t - j])).collect())
        .collect();
    let (coeffs, intercept) = centered_ols(&rows, &x[first..])?;
    let mut model = LinearModel {
        ar: coeffs[..p].to_vec(),
        ma: coeffs[p..].to_vec(),
        intercept,
        residual_history: Vec::new(),
    };
    let preds = model.one_step(x);
    model.residual_history = (0..q)
        .map(|j| x.len() - 1 - j)
        .map(|t| preds[t].map_or(0.0, |p| x[t] - p))
        .collect();
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn simulate_arma(phi: f64, theta: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::with_capacity(n);
        let (mut prev_x, mut prev_e) = (0.0, 0.0);
        for _ in 0..n + 200 {
            let e: f64 = StandardNormal.sample(&mut rng);
            let v = phi * prev_x + e + theta * prev_e;
            x.push(v);
            prev_x = v;
            prev_e = e;
        }
        x.split_off(200)
    }

    #[test]
    fn predict_direct_evaluation() {
        let m = LinearModel {
            ar: vec![0.5],
            ma: vec![],
            intercept: 0.0,
            residual_history: vec![],
        };
        assert_eq!(m.predict(&[2.0], &[]).unwrap(), 1.0);
        let m = LinearModel {
            ar: vec![0.6],
            ma: vec![0.3],
            intercept: 0.0,
            residual_history: vec![],
        };
        assert!((m.predict(&[1.0], &[0.5]).unwrap() - 0.75).abs() < 1e-15);
        assert!(m.predict(&[], &[0.5]).is_err());
        assert!(m.predict(&[1.0], &[]).is_err());
        let c = LinearModel {
            ar: vec![0.0, 0.0],
            ma: vec![0.0],
            intercept: 4.2,
            residual_history: vec![],
        };
        assert_eq!(c.predict(&[1.0, 2.0], &[3.0]).unwrap(), 4.2);
    }

    #[test]
    fn ar1_is_recovered() {
        let x = simulate_arma(0.8, 0.0, 5000, 1);
        let m = fit_ar(&x, 1).unwrap();
        assert!((m.ar[0] - 0.8).abs() < 0.03, "{}", m.ar[0]);
    }

    #[test]
    fn constant_series_gives_intercept_only() {
        let m = fit_ar(&[3.25; 200], 4).unwrap();
        assert!((m.intercept - 3.25).abs() < 1e-12);
        assert!(m.ar.iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn order_zero_predicts_the_mean() {
        let x: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let m = fit_ar(&x, 0).unwrap();
        assert!((m.predict(&[], &[]).unwrap() - 24.5).abs() < 1e-12);
    }

    #[test]
    fn too_short_for_order() {
        assert!(matches!(fit_ar(&[1.0; 80], 8), Err(Error::TooShort { .. })));
        assert!(fit_arma(&[1.0; 30], 2, 2).is_err());
    }

    #[test]
    fn arma11_is_recovered() {
        let x = simulate_arma(0.6, 0.3, 10_000, 2);
        let m = fit_arma(&x, 1, 1).unwrap();
        assert!((m.ar[0] - 0.6).abs() < 0.05, "phi {}", m.ar[0]);
        assert!((m.ma[0] - 0.3).abs() < 0.07, "theta {}", m.ma[0]);
        assert_eq!(m.residual_history.len(), 1);
    }

    #[test]
    fn arma_without_ma_is_ar() {
        let x = simulate_arma(0.5, 0.4, 3000, 3);
        let a = fit_ar(&x, 2).unwrap();
        let b = fit_arma(&x, 2, 0).unwrap();
        for (u, v) in a.ar.iter().zip(&b.ar) {
            assert!((u - v).abs() < 1e-9);
        }
        assert!((a.intercept - b.intercept).abs() < 1e-9);
    }

    #[test]
    fn white_noise_coefficients_vanish() {
        let x = simulate_arma(0.0, 0.0, 10_000, 4);
        let ar = fit_ar(&x, 2).unwrap();
        for c in &ar.ar {
            assert!(c.abs() < 0.05, "{c}");
        }
        // AR and MA roots may cancel on white noise, so check the predictions
        let m = fit_arma(&x, 2, 2).unwrap();
        let preds: Vec<f64> = m.one_step(&x).into_iter().flatten().collect();
        let var = preds.iter().map(|p| p * p).sum::<f64>() / preds.len() as f64;
        assert!(var < 0.01, "{var}");
    }

    #[test]
    fn arma_fits_at_least_as_well_as_ar() {
        let x = simulate_arma(0.6, 0.5, 5000, 5);
        let ar = fit_ar(&x, 2).unwrap();
        let arma = fit_arma(&x, 2, 2).unwrap();
        assert!(arma.mse(&x) <= ar.mse(&x) * 1.05);
    }

    #[test]
    fn one_step_has_no_lookahead() {
        let x = simulate_arma(0.6, 0.3, 600, 6);
        let m = fit_arma(&x, 2, 2).unwrap();
        let base = m.one_step(&x);
        let mut y = x.clone();
        y[400] += 10.0;
        let perturbed = m.one_step(&y);
        assert_eq!(&base[..=400], &perturbed[..=400]);
        assert_ne!(base[401], perturbed[401]);
    }
}
