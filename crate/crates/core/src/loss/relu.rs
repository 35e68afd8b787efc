//! Squared loss of a small bias-free ReLU network.

use super::{Loss, Smoothness};
use crate::{Error, Result, Vector};

/// Parameters are the weight matrices `W_0, …, W_{L−1}` stored row-major
/// and concatenated; `W_l` has shape `widths[l+1] × widths[l]`. Hidden
/// layers apply ReLU, the output layer (width 1) is linear. The loss is
/// `½ · mean_s (net(x_s) − y_s)²`, and `ReLU'(0) = 0`.
#[derive(Debug, Clone)]
pub struct ReluRegression {
    inputs: Vec<Vector>,
    targets: Vec<f64>,
    widths: Vec<usize>,
    dim: usize,
}

struct Forward {
    /// Activations per layer, `acts[0]` is the input.
    acts: Vec<Vector>,
    /// Pre-activations of each layer after the input.
    pre: Vec<Vector>,
}

impl ReluRegression {
    pub fn new(inputs: Vec<Vector>, targets: Vec<f64>, widths: Vec<usize>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::Loss("relu regression needs at least one sample".into()));
        }
        if inputs.len() != targets.len() {
            return Err(Error::Dimension {
                expected: inputs.len(),
                got: targets.len(),
            });
        }
        if widths.len() < 2 || widths.iter().any(|&w| w == 0) {
            return Err(Error::Loss("widths need an input and an output layer, all positive".into()));
        }
        if *widths.last().unwrap() != 1 {
            return Err(Error::Loss("output width must be 1".into()));
        }
        for x in &inputs {
            if x.len() != widths[0] {
                return Err(Error::Dimension {
                    expected: widths[0],
                    got: x.len(),
                });
            }
        }
        let dim = widths.windows(2).map(|w| w[0] * w[1]).sum();
        Ok(Self {
            inputs,
            targets,
            widths,
            dim,
        })
    }

    fn layer_offsets(&self) -> Vec<usize> {
        let mut off = vec![0];
        for w in self.widths.windows(2) {
            off.push(off.last().unwrap() + w[0] * w[1]);
        }
        off
    }

    fn forward(&self, params: &Vector, x: &Vector, off: &[usize]) -> Forward {
        let layers = self.widths.len() - 1;
        let mut acts = vec![x.clone()];
        let mut pre = Vec::with_capacity(layers);
        for l in 0..layers {
            let (rows, cols) = (self.widths[l + 1], self.widths[l]);
            let a = acts.last().unwrap();
            let mut z = Vector::zeros(rows);
            for r in 0..rows {
                let base = off[l] + r * cols;
                z[r] = (0..cols).map(|c| params[base + c] * a[c]).sum();
            }
            let out = if l + 1 < layers {
                z.map(|v| v.max(0.0))
            } else {
                z.clone()
            };
            pre.push(z);
            acts.push(out);
        }
        Forward { acts, pre }
    }
}

impl Loss for ReluRegression {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, params: &Vector) -> f64 {
        let off = self.layer_offsets();
        let n = self.inputs.len() as f64;
        self.inputs
            .iter()
            .zip(&self.targets)
            .map(|(x, y)| {
                let f = self.forward(params, x, &off);
                let r = f.acts.last().unwrap()[0] - y;
                0.5 * r * r
            })
            .sum::<f64>()
            / n
    }

    fn subgradient(&self, params: &Vector) -> Vector {
        let off = self.layer_offsets();
        let layers = self.widths.len() - 1;
        let n = self.inputs.len() as f64;
        let mut g = Vector::zeros(self.dim);
        for (x, y) in self.inputs.iter().zip(&self.targets) {
            let f = self.forward(params, x, &off);
            // delta = ∂loss/∂pre-activation of the current layer
            let mut delta = Vector::from_element(1, (f.acts[layers][0] - y) / n);
            for l in (0..layers).rev() {
                let (rows, cols) = (self.widths[l + 1], self.widths[l]);
                let a = &f.acts[l];
                for r in 0..rows {
                    for c in 0..cols {
                        g[off[l] + r * cols + c] += delta[r] * a[c];
                    }
                }
                if l == 0 {
                    break;
                }
                let mut next = Vector::zeros(cols);
                for c in 0..cols {
                    if f.pre[l - 1][c] > 0.0 {
                        next[c] = (0..rows)
                            .map(|r| params[off[l] + r * cols + c] * delta[r])
                            .sum();
                    }
                }
                delta = next;
            }
        }
        g
    }

    fn smoothness(&self) -> Smoothness {
        if self.widths.len() == 2 {
            Smoothness::C3
        } else {
            Smoothness::LocallyLipschitz
        }
    }

    /// Nonsmooth exactly where some hidden pre-activation vanishes.
    fn is_smooth_at(&self, params: &Vector) -> bool {
        let off = self.layer_offsets();
        let layers = self.widths.len() - 1;
        self.inputs.iter().all(|x| {
            let f = self.forward(params, x, &off);
            f.pre[..layers - 1].iter().all(|z| z.iter().all(|&v| v != 0.0))
        })
    }
}
