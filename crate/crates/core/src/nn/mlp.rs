//! Dense feed-forward stack over a flat parameter vector.

use alloc::vec;
use alloc::vec::Vec;

use super::{init_weight_region, Activation, ParamVector};
use crate::rng::DetRng;

/// One dense layer: y = act(W x + b).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DenseSpec {
    pub input: usize,
    pub output: usize,
    pub act: Activation,
}

/// A stack of dense layers. Parameter layout is layer-by-layer:
/// W (input*output, input index major) followed by b (output).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MlpSpec {
    pub layers: Vec<DenseSpec>,
}

/// Forward cache: the input to each layer plus each layer's activation
/// output, enough to run the exact backward pass.
pub struct MlpCache {
    inputs: Vec<Vec<f64>>,
    outputs: Vec<Vec<f64>>,
}

impl MlpSpec {
    /// Builds a stack from `dims` (len >= 2) where every hidden layer uses
    /// `hidden_act` and the last layer uses `out_act`.
    pub fn new(dims: &[usize], hidden_act: Activation, out_act: Activation) -> Self {
        assert!(dims.len() >= 2, "mlp needs at least one layer");
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for w in dims.windows(2) {
            layers.push(DenseSpec {
                input: w[0],
                output: w[1],
                act: hidden_act,
            });
        }
        layers.last_mut().unwrap().act = out_act;
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().unwrap().input
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().output
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.input * l.output + l.output)
            .sum()
    }

    /// Fresh Glorot-initialized parameters with zero biases.
    pub fn init(&self, rng: &mut DetRng) -> ParamVector {
        let mut p = ParamVector::zeros(self.param_count());
        let data = p.as_mut_slice();
        let mut off = 0;
        for l in &self.layers {
            init_weight_region(&mut data[off..off + l.input * l.output], l.input, l.output, rng);
            off += l.input * l.output + l.output;
        }
        p
    }

    /// Forward pass returning the output and a cache for backward.
    pub fn forward(&self, params: &[f64], x: &[f64]) -> (Vec<f64>, MlpCache) {
        assert_eq!(x.len(), self.input_dim(), "mlp input shape mismatch");
        debug_assert_eq!(params.len(), self.param_count());
        let data = params;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_vec();
        let mut off = 0;
        for l in &self.layers {
            let w = &data[off..off + l.input * l.output];
            let b = &data[off + l.input * l.output..off + l.input * l.output + l.output];
            off += l.input * l.output + l.output;
            let mut y = b.to_vec();
            for (i, &xi) in cur.iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                let row = &w[i * l.output..(i + 1) * l.output];
                for (j, &wij) in row.iter().enumerate() {
                    y[j] += xi * wij;
                }
            }
            for v in y.iter_mut() {
                *v = l.act.apply(*v);
            }
            inputs.push(cur);
            outputs.push(y.clone());
            cur = y;
        }
        (cur, MlpCache { inputs, outputs })
    }

    /// Output without building a cache (inference path).
    pub fn eval(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        self.forward(params, x).0
    }

    /// Exact reverse-mode gradient. Returns (parameter gradient, input
    /// gradient). `upstream` is dL/dy for the forward output.
    pub fn backward(
        &self,
        params: &[f64],
        cache: &MlpCache,
        upstream: &[f64],
    ) -> (Vec<f64>, Vec<f64>) {
        let data = params;
        let mut grad = vec![0.0; params.len()];
        let mut delta = upstream.to_vec();

        // Layer offsets, computed up front so we can walk backwards.
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        for l in &self.layers {
            offsets.push(off);
            off += l.input * l.output + l.output;
        }

        for (idx, l) in self.layers.iter().enumerate().rev() {
            let off = offsets[idx];
            let x = &cache.inputs[idx];
            let y = &cache.outputs[idx];
            // d(pre-activation) = upstream * act'(y)
            for (d, &yo) in delta.iter_mut().zip(y.iter()) {
                *d *= l.act.deriv_from_output(yo);
            }
            let (gw, gb) = grad[off..off + l.input * l.output + l.output]
                .split_at_mut(l.input * l.output);
            for (j, &dj) in delta.iter().enumerate() {
                gb[j] += dj;
            }
            for (i, &xi) in x.iter().enumerate() {
                if xi != 0.0 {
                    let row = &mut gw[i * l.output..(i + 1) * l.output];
                    for (j, &dj) in delta.iter().enumerate() {
                        row[j] += xi * dj;
                    }
                }
            }
            // Propagate to the layer input.
            let w = &data[off..off + l.input * l.output];
            let mut dx = vec![0.0; l.input];
            for (i, dxi) in dx.iter_mut().enumerate() {
                let row = &w[i * l.output..(i + 1) * l.output];
                let mut acc = 0.0;
                for (j, &dj) in delta.iter().enumerate() {
                    acc += row[j] * dj;
                }
                *dxi = acc;
            }
            delta = dx;
        }
        (grad, delta)
    }
}
