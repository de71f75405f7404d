//! Dense matrices and multi-layer perceptrons with hand-written backprop.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix with explicit shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Glorot-style uniform init scaled by fan-in and fan-out.
    pub fn glorot(rows: usize, cols: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        Mat {
            rows,
            cols,
            data: (0..rows * cols).map(|_| rng.random_range(-limit..limit)).collect(),
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::Shape(format!(
                "matrix data length {} does not match {}x{}",
                self.data.len(),
                self.rows,
                self.cols
            )));
        }
        if self.data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("non-finite matrix entry".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }
}

/// One affine layer: `y = W x + b`, `W` is `out x in` row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Mat,
    pub bias: Vec<f64>,
}

impl Dense {
    fn glorot(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        Dense { weight: Mat::glorot(out_dim, in_dim, rng), bias: vec![0.0; out_dim] }
    }

    fn zeros_like(&self) -> Self {
        Dense {
            weight: Mat::zeros(self.weight.rows, self.weight.cols),
            bias: vec![0.0; self.bias.len()],
        }
    }
}

/// Multi-layer perceptron: ReLU between layers, configurable output
/// activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub output_activation: Activation,
}

/// Forward intermediates: the input to every layer plus the final output
/// (`activations[0]` is the MLP input, `activations.last()` the output).
#[derive(Debug, Clone)]
pub struct MlpTrace {
    pub activations: Vec<Vec<f64>>,
}

impl MlpTrace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("trace has at least the input")
    }
}

impl Mlp {
    /// Build an MLP with the given layer widths, e.g. `[in, h, out]`.
    pub fn new(dims: &[usize], output_activation: Activation, rng: &mut impl Rng) -> Self {
        assert!(dims.len() >= 2, "an MLP needs at least one layer");
        let layers = dims.windows(2).map(|w| Dense::glorot(w[0], w[1], rng)).collect();
        Mlp { layers, output_activation }
    }

    pub fn zeros_like(&self) -> Self {
        Mlp {
            layers: self.layers.iter().map(Dense::zeros_like).collect(),
            output_activation: self.output_activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.weight.cols)
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.weight.rows)
    }

    pub fn forward(&self, input: &[f64]) -> MlpTrace {
        debug_assert_eq!(input.len(), self.in_dim());
        let n_layers = self.layers.len();
        let mut activations = Vec::with_capacity(n_layers + 1);
        activations.push(input.to_vec());
        for (k, layer) in self.layers.iter().enumerate() {
            let act = if k + 1 == n_layers { self.output_activation } else { Activation::Relu };
            let x = activations.last().expect("non-empty");
            let mut y = vec![0.0; layer.weight.rows];
            for (o, yo) in y.iter_mut().enumerate() {
                let row = layer.weight.row(o);
                let mut acc = layer.bias[o];
                for (w, xi) in row.iter().zip(x) {
                    acc += w * xi;
                }
                *yo = act.apply(acc);
            }
            activations.push(y);
        }
        MlpTrace { activations }
    }

    /// Backprop through a recorded forward pass. Accumulates parameter
    /// gradients into `grads` (same shape as `self`) and returns the
    /// gradient with respect to the input.
    pub fn backward(&self, trace: &MlpTrace, d_output: &[f64], grads: &mut Mlp) -> Vec<f64> {
        let n_layers = self.layers.len();
        debug_assert_eq!(trace.activations.len(), n_layers + 1);
        let mut d_out = d_output.to_vec();
        for k in (0..n_layers).rev() {
            let act = if k + 1 == n_layers { self.output_activation } else { Activation::Relu };
            let layer = &self.layers[k];
            let x = &trace.activations[k];
            let y = &trace.activations[k + 1];
            // through the activation
            let d_pre: Vec<f64> = d_out
                .iter()
                .zip(y)
                .map(|(&g, &yo)| g * act.derivative_from_output(yo))
                .collect();
            // parameter grads and input grad
            let g = &mut grads.layers[k];
            let mut d_in = vec![0.0; layer.weight.cols];
            for (o, &dp) in d_pre.iter().enumerate() {
                g.bias[o] += dp;
                if dp != 0.0 {
                    let w_row = layer.weight.row(o);
                    let g_row = g.weight.row_mut(o);
                    for i in 0..w_row.len() {
                        g_row[i] += dp * x[i];
                        d_in[i] += dp * w_row[i];
                    }
                }
            }
            d_out = d_in;
        }
        d_out
    }
}
