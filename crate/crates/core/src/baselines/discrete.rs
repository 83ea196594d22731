//! Class-based forecasters: a higher-order Markov chain and a naive Bayes
//! classifier over the same equal-width discretization. Both predict the
//! expected class center under their (smoothed) predictive distribution.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Additive smoothing constant.
pub const SMOOTHING: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Discretizer {
    max: f64,
    edges: Vec<f64>,
    centers: Vec<f64>,
}

impl Discretizer {
    /// Equal-width classes over `[min, max]`.
    pub fn with_range(min: f64, max: f64, n_classes: usize) -> Result<Self> {
        if n_classes == 0 {
            return Err(Error::Config("n_classes must be positive".into()));
        }
        if !(min.is_finite() && max.is_finite()) || min >= max {
            return Err(Error::InvalidSeries(format!("cannot discretize range [{min}, {max}]")));
        }
        let width = (max - min) / n_classes as f64;
        let edges: Vec<f64> = (0..=n_classes).map(|i| min + i as f64 * width).collect();
        let centers = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        Ok(Discretizer { max, edges, centers })
    }

    pub fn n_classes(&self) -> usize {
        self.centers.len()
    }

    /// The `(min, max)` this discretizer was built from.
    pub fn range(&self) -> (f64, f64) {
        (self.edges[0], self.max)
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// Class of `v`; values outside the fitted range clamp to the end classes.
    pub fn classify(&self, v: f64) -> usize {
        let min = self.edges[0];
        let width = self.edges[1] - min;
        let k = ((v - min) / width).floor();
        if k.is_nan() || k < 0.0 {
            0
        } else {
            (k as usize).min(self.n_classes() - 1)
        }
    }
}

pub fn fit_discretizer(values: &[f64], n_classes: usize) -> Result<Discretizer> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: values.len(),
        });
    }
    Discretizer::with_range(min, max, n_classes)
}

fn smoothed(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    let denom = total as f64 + SMOOTHING * counts.len() as f64;
    counts.iter().map(|&c| (c as f64 + SMOOTHING) / denom).collect()
}

fn expectation(probs: &[f64], centers: &[f64]) -> f64 {
    probs.iter().zip(centers).map(|(p, c)| p * c).sum()
}

fn recent_classes(d: &Discretizer, recent: &[f64], order: usize) -> Result<Vec<usize>> {
    if recent.len() < order {
        return Err(Error::InsufficientHistory(format!(
            "need {order} recent values, got {}",
            recent.len()
        )));
    }
    Ok(recent[recent.len() - order..].iter().map(|&v| d.classify(v)).collect())
}

/// Context of up to `order` classes (oldest first) → next-class counts.
/// Counts for every shorter suffix context are kept for back-off.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovModel {
    pub order: usize,
    pub discretizer: Discretizer,
    /// `contexts[j]` holds the counts for contexts of length `j + 1`.
    pub contexts: Vec<BTreeMap<Vec<usize>, Vec<u64>>>,
    pub marginal: Vec<u64>,
}

pub fn fit_markov(x: &[f64], discretizer: Discretizer, order: usize) -> Result<MarkovModel> {
    if x.len() <= order {
        return Err(Error::TooShort {
            needed: order + 1,
            got: x.len(),
        });
    }
    let k = discretizer.n_classes();
    let classes: Vec<usize> = x.iter().map(|&v| discretizer.classify(v)).collect();
    let mut contexts = vec![BTreeMap::new(); order];
    let mut marginal = vec![0u64; k];
    for t in order..classes.len() {
        let next = classes[t];
        marginal[next] += 1;
        for len in 1..=order {
            let key = classes[t - len..t].to_vec();
            contexts[len - 1].entry(key).or_insert_with(|| vec![0u64; k])[next] += 1;
        }
    }
    Ok(MarkovModel {
        order,
        discretizer,
        contexts,
        marginal,
    })
}

impl MarkovModel {
    /// Smoothed next-class distribution, backing off to shorter contexts and
    /// finally to the marginal when the context was never observed.
    pub fn distribution(&self, recent: &[f64]) -> Result<Vec<f64>> {
        let classes = recent_classes(&self.discretizer, recent, self.order)?;
        for len in (1..=self.order).rev() {
            let key = &classes[classes.len() - len..];
            if let Some(counts) = self.contexts[len - 1].get(key) {
                return Ok(smoothed(counts));
            }
        }
        Ok(smoothed(&self.marginal))
    }

    pub fn predict(&self, recent: &[f64]) -> Result<f64> {
        Ok(expectation(&self.distribution(recent)?, self.discretizer.centers()))
    }
}

pub fn predict_markov(model: &MarkovModel, recent: &[f64]) -> Result<f64> {
    model.predict(recent)
}

/// Naive Bayes over the classes of the last `order` values.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesModel {
    pub order: usize,
    pub discretizer: Discretizer,
    /// Next-class counts.
    pub prior: Vec<u64>,
    /// `conditional[j][c][a]`: times lag `j + 1` had class `a` when the next
    /// class was `c`.
    pub conditional: Vec<Vec<Vec<u64>>>,
}

pub fn fit_bayes(x: &[f64], discretizer: Discretizer, order: usize) -> Result<BayesModel> {
    if x.len() <= order {
        return Err(Error::TooShort {
            needed: order + 1,
            got: x.len(),
        });
    }
    let k = discretizer.n_classes();
    let classes: Vec<usize> = x.iter().map(|&v| discretizer.classify(v)).collect();
    let mut prior = vec![0u64; k];
    let mut conditional = vec![vec![vec![0u64; k]; k]; order];
    for t in order..classes.len() {
        let c = classes[t];
        prior[c] += 1;
        for (j, table) in conditional.iter_mut().enumerate() {
            table[c][classes[t - 1 - j]] += 1;
        }
    }
    Ok(BayesModel {
        order,
        discretizer,
        prior,
        conditional,
    })
}

impl BayesModel {
    pub fn prior_probabilities(&self) -> Vec<f64> {
        smoothed(&self.prior)
    }

    pub fn posterior(&self, recent: &[f64]) -> Result<Vec<f64>> {
        let classes = recent_classes(&self.discretizer, recent, self.order)?;
        let k = self.discretizer.n_classes();
        let mut log_post: Vec<f64> = self.prior_probabilities().iter().map(|p| p.ln()).collect();
        for (j, table) in self.conditional.iter().enumerate() {
            // lag j+1 is the (j+1)-th most recent value
            let a = classes[classes.len() - 1 - j];
            for (c, lp) in log_post.iter_mut().enumerate() {
                let row_total: u64 = table[c].iter().sum();
                let p = (table[c][a] as f64 + SMOOTHING) / (row_total as f64 + SMOOTHING * k as f64);
                *lp += p.ln();
            }
        }
        let max = log_post.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = log_post.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = weights.iter().sum();
        Ok(weights.into_iter().map(|w| w / z).collect())
    }

    pub fn predict(&self, recent: &[f64]) -> Result<f64> {
        Ok(expectation(&self.posterior(recent)?, self.discretizer.centers()))
    }
}

pub fn predict_bayes(model: &BayesModel, recent: &[f64]) -> Result<f64> {
    model.predict(recent)
}
