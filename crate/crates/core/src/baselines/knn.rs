use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnConfig {
    /// Number of neighbours averaged.
    pub k: usize,
    /// Length of the lag window compared by Euclidean distance.
    pub window: usize,
}

impl Default for KnnConfig {
    fn default() -> Self {
        KnnConfig { k: 10, window: 10 }
    }
}

impl KnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.window == 0 {
            return Err(Error::Config("k-NN needs k >= 1 and window >= 1".into()));
        }
        Ok(())
    }
}

/// Analog forecast: the mean successor of the `k` historical windows closest
/// to `query`.
///
/// `history` is the data strictly before `query`. Candidate windows lie
/// entirely inside `history`; the successor of the last one is `query[0]`.
/// Distance ties go to the earlier window.
pub fn knn_predict(history: &[f64], query: &[f64], cfg: &KnnConfig) -> Result<f64> {
    cfg.validate()?;
    let w = cfg.window;
    if query.len() != w {
        return Err(Error::Dimension {
            expected: w,
            got: query.len(),
        });
    }
    if history.len() < w {
        return Err(Error::InsufficientHistory(format!(
            "k-NN needs at least {w} historical values, got {}",
            history.len()
        )));
    }
    let candidates = history.len() - w + 1;
    if candidates < cfg.k {
        return Err(Error::InsufficientHistory(format!(
            "k-NN has {candidates} candidate windows for k = {}",
            cfg.k
        )));
    }
    let successor = |i: usize| history.get(i + w).copied().unwrap_or(query[0]);

    let mut scored: Vec<(f64, usize)> = (0..candidates)
        .map(|i| {
            let d2: f64 = history[i..i + w].iter().zip(query).map(|(a, b)| (a - b).powi(2)).sum();
            (d2, i)
        })
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let sum: f64 = scored[..cfg.k].iter().map(|&(_, i)| successor(i)).sum();
    Ok(sum / cfg.k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn exact_repeat_returns_its_successor() {
        let query = [0.3, 0.9, 0.1];
        let mut history = query.to_vec();
        history.push(0.77);
        let cfg = KnnConfig { k: 1, window: 3 };
        assert_eq!(knn_predict(&history, &query, &cfg).unwrap(), 0.77);
    }

    #[test]
    fn all_candidates_average_all_successors() {
        let history = [1.0, 2.0, 3.0, 4.0, 5.0];
        let query = [9.0, 9.0];
        let cfg = KnnConfig { k: 4, window: 2 };
        // successors: 3, 4, 5, and query[0] = 9
        assert_eq!(knn_predict(&history, &query, &cfg).unwrap(), 21.0 / 4.0);
        let cfg = KnnConfig { k: 5, window: 2 };
        assert!(knn_predict(&history, &query, &cfg).is_err());
    }

    #[test]
    fn distance_ties_go_to_earlier_window() {
        let query = [1.0];
        let cfg = KnnConfig { k: 2, window: 1 };
        // distances 1, 0, 16, 1, 36: the tie between windows 0 and 3 goes to 0
        let history = [0.0, 1.0, 5.0, 2.0, 7.0];
        assert_eq!(knn_predict(&history, &query, &cfg).unwrap(), (5.0 + 1.0) / 2.0);
    }

    #[test]
    fn permuting_tied_neighbours_keeps_the_mean() {
        let query = [1.0];
        let cfg = KnnConfig { k: 3, window: 1 };
        // windows 0.0 and 2.0 tie at distance 1; both are among the 3 nearest
        let a = knn_predict(&[0.0, 4.0, 2.0, 6.0, 1.0, 9.0], &query, &cfg).unwrap();
        let b = knn_predict(&[2.0, 6.0, 0.0, 4.0, 1.0, 9.0], &query, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noisy_sinusoid_beats_noise_level() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let noise_std = 0.05;
        let normal = Normal::new(0.0, noise_std).unwrap();
        let period = 37.0;
        let x: Vec<f64> = (0..3000)
            .map(|t| (2.0 * std::f64::consts::PI * t as f64 / period).sin() + normal.sample(&mut rng))
            .collect();
        let cfg = KnnConfig::default();
        let mut errs = Vec::new();
        for t in 2500..2600 {
            let pred = knn_predict(&x[..t - 10], &x[t - 10..t], &cfg).unwrap();
            let truth = (2.0 * std::f64::consts::PI * t as f64 / period).sin();
            errs.push((pred - truth).abs());

            // brute-force oracle over the same candidate set
            let mut d: Vec<(f64, usize)> = (0..=t - 20)
                .map(|i| ((0..10).map(|j| (x[i + j] - x[t - 10 + j]).powi(2)).sum::<f64>(), i))
                .collect();
            d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let oracle = d[..10].iter().map(|&(_, i)| x[i + 10]).sum::<f64>() / 10.0;
            assert!((oracle - pred).abs() < 1e-12);
        }
        let mae = errs.iter().sum::<f64>() / errs.len() as f64;
        assert!(mae < noise_std, "{mae}");
    }
}
