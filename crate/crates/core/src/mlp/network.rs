use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Weight initialization range, symmetric around zero.
const INIT_RANGE: f64 = 0.5;

/// Layer sizes from input to output. Hidden layers use the Gaussian
/// `exp(-a²)`, the single output unit is linear.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpLayout {
    sizes: Vec<usize>,
}

impl Default for MlpLayout {
    fn default() -> Self {
        MlpLayout { sizes: vec![8, 3, 1] }
    }
}

impl MlpLayout {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.len() < 3 {
            return Err(Error::Config(format!(
                "layout {sizes:?} needs input, at least one hidden layer and output"
            )));
        }
        if sizes.contains(&0) {
            return Err(Error::Config(format!("layout {sizes:?} has an empty layer")));
        }
        if *sizes.last().unwrap() != 1 {
            return Err(Error::Config("the output layer must have exactly one unit".into()));
        }
        Ok(MlpLayout { sizes })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn inputs(&self) -> usize {
        self.sizes[0]
    }

    /// Total number of weights and biases.
    pub fn n_params(&self) -> usize {
        self.sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
    }
}

pub fn gaussian(a: f64) -> f64 {
    (-a * a).exp()
}

pub fn gaussian_derivative(a: f64) -> f64 {
    -2.0 * a * (-a * a).exp()
}

/// Dense layer with row-major `n_out × n_in` weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn weight(&self, out: usize, inp: usize) -> f64 {
        self.weights[out * self.n_in + inp]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layout: MlpLayout,
    layers: Vec<Layer>,
    seed: u64,
}

struct Trace {
    /// Pre-activations per layer.
    pre: Vec<Vec<f64>>,
    /// Activations per layer, `post[0]` is the input.
    post: Vec<Vec<f64>>,
}

impl Mlp {
    /// Weights and biases drawn uniformly from `[-0.5, 0.5]`.
    pub fn new(layout: MlpLayout, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = layout
            .sizes
            .windows(2)
            .map(|w| {
                let (n_in, n_out) = (w[0], w[1]);
                Layer {
                    n_in,
                    n_out,
                    weights: (0..n_in * n_out)
                        .map(|_| rng.random_range(-INIT_RANGE..=INIT_RANGE))
                        .collect(),
                    biases: (0..n_out).map(|_| rng.random_range(-INIT_RANGE..=INIT_RANGE)).collect(),
                }
            })
            .collect();
        Mlp { layout, layers, seed }
    }

    pub fn from_layers(layout: MlpLayout, layers: Vec<Layer>, seed: u64) -> Result<Self> {
        let expected: Vec<(usize, usize)> = layout.sizes.windows(2).map(|w| (w[0], w[1])).collect();
        if layers.len() != expected.len() {
            return Err(Error::Dimension {
                expected: expected.len(),
                got: layers.len(),
            });
        }
        for (layer, &(n_in, n_out)) in layers.iter().zip(&expected) {
            if layer.n_in != n_in
                || layer.n_out != n_out
                || layer.weights.len() != n_in * n_out
                || layer.biases.len() != n_out
            {
                return Err(Error::Dimension {
                    expected: n_in * n_out + n_out,
                    got: layer.weights.len() + layer.biases.len(),
                });
            }
            if layer.weights.iter().chain(&layer.biases).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("non-finite weight".into()));
            }
        }
        Ok(Mlp { layout, layers, seed })
    }

    pub fn layout(&self) -> &MlpLayout {
        &self.layout
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Parameters flattened layer by layer: row-major weights, then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.layout.n_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.layout.n_params() {
            return Err(Error::Dimension {
                expected: self.layout.n_params(),
                got: params.len(),
            });
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w = it.next().unwrap());
            l.biases.iter_mut().for_each(|b| *b = it.next().unwrap());
        }
        Ok(())
    }

    fn trace(&self, input: &[f64]) -> Trace {
        let last = self.layers.len() - 1;
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = vec![input.to_vec()];
        for (li, layer) in self.layers.iter().enumerate() {
            let x = post.last().unwrap();
            let a: Vec<f64> = (0..layer.n_out)
                .map(|o| layer.biases[o] + (0..layer.n_in).map(|i| layer.weight(o, i) * x[i]).sum::<f64>())
                .collect();
            let h = if li == last {
                a.clone()
            } else {
                a.iter().map(|&v| gaussian(v)).collect()
            };
            pre.push(a);
            post.push(h);
        }
        Trace { pre, post }
    }

    pub fn forward(&self, input: &[f64]) -> Result<f64> {
        if input.len() != self.layout.inputs() {
            return Err(Error::Dimension {
                expected: self.layout.inputs(),
                got: input.len(),
            });
        }
        let y = self.trace(input).post.last().unwrap()[0];
        if !y.is_finite() {
            return Err(Error::NonFinite(format!("network output {y}")));
        }
        Ok(y)
    }

    /// Gradient of the output with respect to every parameter, in
    /// [`Mlp::params`] order.
    pub fn output_gradient(&self, input: &[f64], out: &mut [f64]) {
        let trace = self.trace(input);
        let n_layers = self.layers.len();
        let offsets: Vec<usize> = self
            .layers
            .iter()
            .scan(0, |acc, l| {
                let start = *acc;
                *acc += l.weights.len() + l.biases.len();
                Some(start)
            })
            .collect();

        // the output unit is linear, so its delta is 1
        let mut delta = vec![1.0];
        for li in (0..n_layers).rev() {
            let layer = &self.layers[li];
            let x = &trace.post[li];
            let base = offsets[li];
            for o in 0..layer.n_out {
                for i in 0..layer.n_in {
                    out[base + o * layer.n_in + i] = delta[o] * x[i];
                }
                out[base + layer.weights.len() + o] = delta[o];
            }
            if li > 0 {
                let below = &trace.pre[li - 1];
                delta = (0..layer.n_in)
                    .map(|i| {
                        let back: f64 = (0..layer.n_out).map(|o| layer.weight(o, i) * delta[o]).sum();
                        gaussian_derivative(below[i]) * back
                    })
                    .collect();
            }
        }
    }

    /// Jacobian of the residuals `output − target` over `inputs`
    /// (`n_samples × n_params`).
    pub fn jacobian(&self, inputs: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        if inputs.is_empty() {
            return Err(Error::TooShort { needed: 1, got: 0 });
        }
        let n_params = self.layout.n_params();
        let mut rows = vec![0.0; inputs.len() * n_params];
        for (r, input) in inputs.iter().enumerate() {
            if input.len() != self.layout.inputs() {
                return Err(Error::Dimension {
                    expected: self.layout.inputs(),
                    got: input.len(),
                });
            }
            self.output_gradient(input, &mut rows[r * n_params..(r + 1) * n_params]);
        }
        Ok(DMatrix::from_row_slice(inputs.len(), n_params, &rows))
    }
}
