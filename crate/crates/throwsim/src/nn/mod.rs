//! Minimal dense-network kernel: MLPs over flat `f64` parameter buffers,
//! exact reverse-mode gradients, Adam, and diagonal-Gaussian policy heads.
//!
//! Two execution paths cover every use in the crate: a naive single-sample
//! path that serves as the readable reference (and the ground truth in
//! tests), and a batched path that routes the heavy lifting through `dgemm`
//! so training minibatches run at matrix-multiply speed on one core. The two
//! paths are checked against each other; the batch path is the one trainers
//! call.

mod adam;
mod gaussian;

pub use adam::AdamState;
pub use gaussian::{
    gaussian_logprob, gaussian_sample, softplus, tanh_correction, LOG_STD_MAX, LOG_STD_MIN,
};

use crate::error::Error;
use crate::Result;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Per-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation *output* (exact for all
    /// three choices, which is why pre-activations are never stored).
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

/// Shape of one dense layer inside the flat parameter buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub act: Activation,
}

impl Layer {
    fn n_params(&self) -> usize {
        self.out_dim * (self.in_dim + 1)
    }
}

/// Dense multi-layer perceptron. Parameters live in one flat buffer laid out
/// layer by layer: row-major weight matrix (out×in), then biases (out).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
    pub params: Vec<f64>,
}

impl Mlp {
    /// Builds a network from `sizes = [input, hidden…, output]` with one
    /// activation per weight layer. Weights and biases start uniform in
    /// ±1/√fan_in.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], acts: &[Activation], rng: &mut R) -> Result<Mlp> {
        if sizes.len() < 2 || acts.len() != sizes.len() - 1 {
            return Err(Error::InvalidArgument(format!(
                "mlp shape mismatch: {} sizes need {} activations, got {}",
                sizes.len(),
                sizes.len() - 1,
                acts.len()
            )));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidArgument("mlp layer size 0".into()));
        }
        let layers: Vec<Layer> = sizes
            .windows(2)
            .zip(acts)
            .map(|(w, &act)| Layer { in_dim: w[0], out_dim: w[1], act })
            .collect();
        let n: usize = layers.iter().map(Layer::n_params).sum();
        let mut params = Vec::with_capacity(n);
        for layer in &layers {
            let bound = 1.0 / (layer.in_dim as f64).sqrt();
            for _ in 0..layer.n_params() {
                params.push(rng.gen_range(-bound..bound));
            }
        }
        Ok(Mlp { layers, params })
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").out_dim
    }

    /// Offset of a layer's weights inside the flat buffer; biases follow the
    /// weight block.
    fn layer_offset(&self, index: usize) -> usize {
        self.layers[..index].iter().map(Layer::n_params).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// Reference forward pass for a single input.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::InvalidArgument(format!(
                "forward: expected input of {}, got {}",
                self.input_dim(),
                input.len()
            )));
        }
        let mut x = input.to_vec();
        let mut offset = 0;
        for layer in &self.layers {
            let (w, rest) = self.params[offset..].split_at(layer.out_dim * layer.in_dim);
            let b = &rest[..layer.out_dim];
            let mut y = vec![0.0; layer.out_dim];
            for (o, y_o) in y.iter_mut().enumerate() {
                let row = &w[o * layer.in_dim..(o + 1) * layer.in_dim];
                let mut acc = b[o];
                for (wi, xi) in row.iter().zip(&x) {
                    acc += wi * xi;
                }
                *y_o = layer.act.apply(acc);
            }
            offset += layer.n_params();
            x = y;
        }
        Ok(x)
    }

    /// Reference reverse-mode gradients of `outputᵀ·upstream` for a single
    /// input: returns (∂/∂params, ∂/∂input).
    pub fn gradients(&self, input: &[f64], upstream: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if upstream.len() != self.output_dim() {
            return Err(Error::InvalidArgument(format!(
                "gradients: upstream length {} ≠ output dim {}",
                upstream.len(),
                self.output_dim()
            )));
        }
        // Forward, keeping every activation output.
        let mut acts: Vec<Vec<f64>> = vec![input.to_vec()];
        for (i, layer) in self.layers.iter().enumerate() {
            let offset = self.layer_offset(i);
            let (w, rest) = self.params[offset..].split_at(layer.out_dim * layer.in_dim);
            let b = &rest[..layer.out_dim];
            let x = acts.last().expect("non-empty");
            if x.len() != layer.in_dim {
                return Err(Error::InvalidArgument("gradients: input dim mismatch".into()));
            }
            let mut y = vec![0.0; layer.out_dim];
            for (o, y_o) in y.iter_mut().enumerate() {
                let row = &w[o * layer.in_dim..(o + 1) * layer.in_dim];
                let mut acc = b[o];
                for (wi, xi) in row.iter().zip(x) {
                    acc += wi * xi;
                }
                *y_o = layer.act.apply(acc);
            }
            acts.push(y);
        }
        // Backward.
        let mut grads = vec![0.0; self.n_params()];
        let mut g: Vec<f64> = upstream.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let offset = self.layer_offset(i);
            let y = &acts[i + 1];
            let x = &acts[i];
            // Through the nonlinearity.
            let dpre: Vec<f64> = g
                .iter()
                .zip(y)
                .map(|(&gi, &yi)| gi * layer.act.derivative_from_output(yi))
                .collect();
            let (gw, rest) = grads[offset..].split_at_mut(layer.out_dim * layer.in_dim);
            let gb = &mut rest[..layer.out_dim];
            for (o, &d) in dpre.iter().enumerate() {
                gb[o] = d;
                let row = &mut gw[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (r, xi) in row.iter_mut().zip(x) {
                    *r = d * xi;
                }
            }
            // Input gradient for the next (earlier) layer.
            let w = &self.params[offset..offset + layer.out_dim * layer.in_dim];
            let mut gx = vec![0.0; layer.in_dim];
            for (o, &d) in dpre.iter().enumerate() {
                let row = &w[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (gxi, wi) in gx.iter_mut().zip(row) {
                    *gxi += d * wi;
                }
            }
            g = gx;
        }
        Ok((grads, g))
    }
}

/// Reusable scratch for the batched forward/backward path: per-layer
/// activation matrices (rows = samples) plus the backward delta buffers.
#[derive(Debug, Default)]
pub struct Workspace {
    /// acts[0] is the input matrix; acts[l+1] the output of layer l.
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_next: Vec<f64>,
}

impl Workspace {
    pub fn new() -> Workspace {
        Workspace::default()
    }
}

#[allow(clippy::too_many_arguments)]
fn dgemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    rsa: isize,
    csa: isize,
    b: &[f64],
    rsb: isize,
    csb: isize,
    beta: f64,
    c: &mut [f64],
    rsc: isize,
    csc: isize,
) {
    debug_assert!(c.len() >= m * n);
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            rsc,
            csc,
        );
    }
}

impl Mlp {
    /// Batched forward pass: `inputs` is row-major (batch × input_dim). The
    /// output matrix (batch × output_dim) lives in the workspace; mutate
    /// nothing between this call and a matching `backward_batch`.
    pub fn forward_batch<'w>(&self, inputs: &[f64], batch: usize, ws: &'w mut Workspace) -> &'w [f64] {
        assert_eq!(inputs.len(), batch * self.input_dim(), "forward_batch input shape");
        let n_layers = self.layers.len();
        ws.acts.resize(n_layers + 1, Vec::new());
        ws.acts[0].clear();
        ws.acts[0].extend_from_slice(inputs);
        for (i, layer) in self.layers.iter().enumerate() {
            let offset = self.layer_offset(i);
            let w = &self.params[offset..offset + layer.out_dim * layer.in_dim];
            let b = &self.params[offset + layer.out_dim * layer.in_dim..offset + layer.n_params()];
            let (done, todo) = ws.acts.split_at_mut(i + 1);
            let x = &done[i];
            let y = &mut todo[0];
            y.resize(batch * layer.out_dim, 0.0);
            // y = x · Wᵀ  (batch×in)·(in×out), W stored row-major out×in.
            dgemm(
                batch,
                layer.in_dim,
                layer.out_dim,
                1.0,
                x,
                layer.in_dim as isize,
                1,
                w,
                1,
                layer.in_dim as isize,
                0.0,
                y,
                layer.out_dim as isize,
                1,
            );
            for row in y.chunks_exact_mut(layer.out_dim) {
                for (yo, &bo) in row.iter_mut().zip(b) {
                    *yo = layer.act.apply(*yo + bo);
                }
            }
        }
        &ws.acts[n_layers]
    }

    /// Batched reverse pass after `forward_batch`: `upstream` is row-major
    /// (batch × output_dim) holding ∂L/∂output per sample. Writes the summed
    /// parameter gradients into `grads` (overwriting it) and returns nothing;
    /// ask for input gradients via `backward_batch_with_input_grads`.
    pub fn backward_batch(&self, upstream: &[f64], batch: usize, ws: &mut Workspace, grads: &mut [f64]) {
        self.backward_impl(upstream, batch, ws, grads, None);
    }

    /// As `backward_batch`, also writing ∂L/∂input (batch × input_dim).
    pub fn backward_batch_with_input_grads(
        &self,
        upstream: &[f64],
        batch: usize,
        ws: &mut Workspace,
        grads: &mut [f64],
        input_grads: &mut [f64],
    ) {
        self.backward_impl(upstream, batch, ws, grads, Some(input_grads));
    }

    fn backward_impl(
        &self,
        upstream: &[f64],
        batch: usize,
        ws: &mut Workspace,
        grads: &mut [f64],
        mut input_grads: Option<&mut [f64]>,
    ) {
        assert_eq!(upstream.len(), batch * self.output_dim(), "backward_batch upstream shape");
        assert_eq!(grads.len(), self.n_params(), "backward_batch grads length");
        ws.delta.clear();
        ws.delta.extend_from_slice(upstream);
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let offset = self.layer_offset(i);
            let y = &ws.acts[i + 1];
            let x = &ws.acts[i];
            // Nonlinearity backward, in place on the delta buffer.
            for (d, &yo) in ws.delta.iter_mut().zip(y) {
                *d *= layer.act.derivative_from_output(yo);
            }
            let (gw, rest) =
                grads[offset..offset + layer.n_params()].split_at_mut(layer.out_dim * layer.in_dim);
            let gb = &mut rest[..layer.out_dim];
            // dW = deltaᵀ · x  (out×batch)·(batch×in).
            dgemm(
                layer.out_dim,
                batch,
                layer.in_dim,
                1.0,
                &ws.delta,
                1,
                layer.out_dim as isize,
                x,
                layer.in_dim as isize,
                1,
                0.0,
                gw,
                layer.in_dim as isize,
                1,
            );
            // db = column sums of delta.
            gb.fill(0.0);
            for row in ws.delta.chunks_exact(layer.out_dim) {
                for (g, &d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            // Propagate to the earlier layer unless this is the first and
            // nobody asked for input gradients.
            let need_input = i > 0 || input_grads.is_some();
            if need_input {
                let w = &self.params[offset..offset + layer.out_dim * layer.in_dim];
                ws.delta_next.resize(batch * layer.in_dim, 0.0);
                // dX = delta · W  (batch×out)·(out×in).
                dgemm(
                    batch,
                    layer.out_dim,
                    layer.in_dim,
                    1.0,
                    &ws.delta,
                    layer.out_dim as isize,
                    1,
                    w,
                    layer.in_dim as isize,
                    1,
                    0.0,
                    &mut ws.delta_next,
                    layer.in_dim as isize,
                    1,
                );
                std::mem::swap(&mut ws.delta, &mut ws.delta_next);
            }
            if i == 0 {
                if let Some(gi) = input_grads.as_deref_mut() {
                    gi.copy_from_slice(&ws.delta[..batch * layer.in_dim]);
                }
            }
        }
    }
}
