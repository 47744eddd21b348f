// Copyright 2026 The qthermo Authors
// SPDX-License-Identifier: Apache-2.0

//! Fully connected network with rectified-linear hidden layers and a scaled
//! `tanh` output: `μ = μ*·tanh(z)`.

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct DenseNetwork {
    sizes: Vec<usize>,
    mu_star: f64,
    params: Vec<f64>,
}

/// Activations retained by [`DenseNetwork::forward`] for the backward pass.
#[derive(Clone, Debug)]
pub struct DenseCache {
    /// `activations[0]` is the input, `activations[l]` the output of layer `l`
    /// (post-ReLU for hidden layers).
    activations: Vec<Vec<f64>>,
    /// `tanh(z)` of the output unit.
    out_tanh: f64,
}

impl DenseCache {
    pub fn activations(&self) -> &[Vec<f64>] {
        &self.activations
    }
}

pub(crate) fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl DenseNetwork {
    pub fn zeros(sizes: Vec<usize>, mu_star: f64) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) || *sizes.last().unwrap() != 1 {
            return Err(Error::InvalidParameter(format!(
                "dense layer sizes must be non-zero and end in a single output, got {sizes:?}"
            )));
        }
        if !(mu_star > 0.0) {
            return Err(Error::InvalidParameter(format!("mu_star must be positive, got {mu_star}")));
        }
        let n = param_count(&sizes);
        Ok(Self {
            sizes,
            mu_star,
            params: vec![0.0; n],
        })
    }

    /// Weights uniform in `±1/√fan_in`, biases zero.
    pub fn init<R: Rng + ?Sized>(sizes: Vec<usize>, mu_star: f64, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes, mu_star)?;
        let mut offset = 0;
        for w in net.sizes.clone().windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let bound = 1.0 / (n_in as f64).sqrt();
            for p in &mut net.params[offset..offset + n_in * n_out] {
                *p = rng.random_range(-bound..bound);
            }
            offset += n_in * n_out + n_out;
        }
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn mu_star(&self) -> f64 {
        self.mu_star
    }

    pub fn input_len(&self) -> usize {
        self.sizes[0]
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// `(weights, biases)` of layer `l` (0-based), weights row-major `out × in`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let offset: usize = param_count(&self.sizes[..=l]);
        let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
        let w = &self.params[offset..offset + n_in * n_out];
        let b = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
        (w, b)
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_len() {
            return Err(Error::DimensionMismatch {
                expected: self.input_len(),
                got: input.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<(f64, DenseCache)> {
        self.check_input(input)?;
        let n_layers = self.sizes.len() - 1;
        let mut activations = Vec::with_capacity(n_layers + 1);
        activations.push(input.to_vec());
        let mut out_tanh = 0.0;
        for l in 0..n_layers {
            let (w, b) = self.layer(l);
            let x = &activations[l];
            let n_in = x.len();
            let mut z: Vec<f64> = b
                .iter()
                .enumerate()
                .map(|(j, &bj)| bj + dot(&w[j * n_in..(j + 1) * n_in], x))
                .collect();
            if l + 1 < n_layers {
                for v in &mut z {
                    *v = v.max(0.0);
                }
            } else {
                out_tanh = z[0].tanh();
                z[0] = out_tanh;
            }
            activations.push(z);
        }
        Ok((self.mu_star * out_tanh, DenseCache { activations, out_tanh }))
    }

    /// Smallest `|z|` over hidden pre-activations; distance of `input` from a
    /// rectifier kink.
    pub fn min_hidden_margin(&self, input: &[f64]) -> Result<f64> {
        self.check_input(input)?;
        let mut x = input.to_vec();
        let mut margin = f64::INFINITY;
        for l in 0..self.sizes.len() - 2 {
            let (w, b) = self.layer(l);
            let n_in = x.len();
            x = b
                .iter()
                .enumerate()
                .map(|(j, &bj)| {
                    let z = bj + dot(&w[j * n_in..(j + 1) * n_in], &x);
                    margin = margin.min(z.abs());
                    z.max(0.0)
                })
                .collect();
        }
        Ok(margin)
    }

    /// Accumulates `seed · ∂μ/∂θ` into `grad`.
    pub fn backward(&self, cache: &DenseCache, seed: f64, grad: &mut [f64]) -> Result<()> {
        if grad.len() != self.params.len() || cache.activations.len() != self.sizes.len() {
            return Err(Error::ShapeMismatch("dense cache or gradient buffer does not match the network".into()));
        }
        if seed == 0.0 {
            return Ok(());
        }
        let n_layers = self.sizes.len() - 1;
        let mut delta = vec![seed * self.mu_star * (1.0 - cache.out_tanh * cache.out_tanh)];
        for l in (0..n_layers).rev() {
            let offset = param_count(&self.sizes[..=l]);
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let x = &cache.activations[l];
            {
                let (gw, gb) = grad[offset..offset + n_in * n_out + n_out].split_at_mut(n_in * n_out);
                for j in 0..n_out {
                    let dj = delta[j];
                    if dj == 0.0 {
                        continue;
                    }
                    gb[j] += dj;
                    for (g, &xi) in gw[j * n_in..(j + 1) * n_in].iter_mut().zip(x) {
                        *g += dj * xi;
                    }
                }
            }
            if l == 0 {
                break;
            }
            let (w, _) = self.layer(l);
            let mut prev = vec![0.0; n_in];
            for j in 0..n_out {
                let dj = delta[j];
                if dj == 0.0 {
                    continue;
                }
                for (p, &wji) in prev.iter_mut().zip(&w[j * n_in..(j + 1) * n_in]) {
                    *p += dj * wji;
                }
            }
            // ReLU derivative: active units have positive outputs.
            for (p, &a) in prev.iter_mut().zip(x) {
                if a <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
