//! Dense feed-forward networks (ReLU hidden layers, linear output) with
//! exact reverse-mode vector-Jacobian products, plus the Adam optimizer.
//!
//! Parameters live in one flat `Vec<f64>` laid out per layer as the weight
//! matrix in row-major order (rows = output units) followed by the bias
//! vector. The flat layout lets the optimizer, snapshotting, and gradient
//! accumulation all work on plain slices.

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use std::io::{BufRead, Write};

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Reusable per-layer activation buffers for one forward pass.
///
/// `acts[0]` is the input; `acts[l+1]` the post-activation output of
/// layer `l`. ReLU masks are recovered from the sign of the stored
/// activations.
#[derive(Debug, Clone)]
pub struct MlpTrace {
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_next: Vec<f64>,
}

impl MlpTrace {
    /// The last forward pass's network output.
    pub fn output(&self) -> &[f64] {
        self.acts.last().unwrap()
    }
}

impl Mlp {
    /// Fresh network with weights and biases drawn uniformly from
    /// `±1/√fan_in`.
    pub fn new(sizes: &[usize], rng: &mut SeededRng) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least input and output sizes");
        let mut params = Vec::with_capacity(Self::param_count_for(sizes));
        for l in 0..sizes.len() - 1 {
            let bound = 1.0 / (sizes[l] as f64).sqrt();
            let n = sizes[l] * sizes[l + 1] + sizes[l + 1];
            for _ in 0..n {
                params.push(rng.uniform(-bound, bound));
            }
        }
        Self {
            sizes: sizes.to_vec(),
            params,
        }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2);
        Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; Self::param_count_for(sizes)],
        }
    }

    fn param_count_for(sizes: &[usize]) -> usize {
        (0..sizes.len() - 1)
            .map(|l| sizes[l] * sizes[l + 1] + sizes[l + 1])
            .sum()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Offset of layer `l`'s weight block in the flat parameter vector.
    fn w_offset(&self, l: usize) -> usize {
        (0..l)
            .map(|i| self.sizes[i] * self.sizes[i + 1] + self.sizes[i + 1])
            .sum()
    }

    pub fn alloc_trace(&self) -> MlpTrace {
        let max_width = *self.sizes.iter().max().unwrap();
        MlpTrace {
            acts: self.sizes.iter().map(|&s| vec![0.0; s]).collect(),
            delta: vec![0.0; max_width],
            delta_next: vec![0.0; max_width],
        }
    }

    /// Forward pass recording all activations into `trace`.
    pub fn forward_trace(&self, x: &[f64], trace: &mut MlpTrace) {
        assert_eq!(x.len(), self.input_dim(), "input dimension mismatch");
        trace.acts[0].copy_from_slice(x);
        let n_layers = self.n_layers();
        let mut off = 0;
        for l in 0..n_layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[off..off + n_in * n_out];
            let b = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            off += n_in * n_out + n_out;
            let hidden = l < n_layers - 1;
            let (prev, rest) = trace.acts.split_at_mut(l + 1);
            let a_in = &prev[l];
            let a_out = &mut rest[0];
            for i in 0..n_out {
                let row = &w[i * n_in..(i + 1) * n_in];
                let mut z = b[i];
                for j in 0..n_in {
                    z += row[j] * a_in[j];
                }
                a_out[i] = if hidden && z < 0.0 { 0.0 } else { z };
            }
        }
    }

    /// Network output for a single input.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut trace = self.alloc_trace();
        self.forward_trace(x, &mut trace);
        Ok(trace.acts.last().unwrap().clone())
    }

    /// Shared backward recursion over a recorded trace.
    ///
    /// Accumulates the parameter VJP `∇_θ (upstreamᵀ·f)` into `param_grad`
    /// when provided, and writes the input VJP into `input_grad` when
    /// provided.
    pub fn backward_trace(
        &self,
        trace: &mut MlpTrace,
        upstream: &[f64],
        mut param_grad: Option<&mut [f64]>,
        input_grad: Option<&mut [f64]>,
    ) {
        assert_eq!(upstream.len(), self.output_dim(), "upstream dimension mismatch");
        if let Some(g) = param_grad.as_ref() {
            assert_eq!(g.len(), self.n_params(), "parameter gradient length mismatch");
        }
        let n_layers = self.n_layers();
        trace.delta[..upstream.len()].copy_from_slice(upstream);
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = self.w_offset(l);
            let w = &self.params[off..off + n_in * n_out];
            let a_in = &trace.acts[l];
            if let Some(g) = param_grad.as_deref_mut() {
                let (gw, gb) = g[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
                for i in 0..n_out {
                    let d = trace.delta[i];
                    if d != 0.0 {
                        let grow = &mut gw[i * n_in..(i + 1) * n_in];
                        for j in 0..n_in {
                            grow[j] += d * a_in[j];
                        }
                        gb[i] += d;
                    }
                }
            }
            let need_propagate = l > 0 || input_grad.is_some();
            if need_propagate {
                for j in 0..n_in {
                    trace.delta_next[j] = 0.0;
                }
                for i in 0..n_out {
                    let d = trace.delta[i];
                    if d != 0.0 {
                        let row = &w[i * n_in..(i + 1) * n_in];
                        for j in 0..n_in {
                            trace.delta_next[j] += d * row[j];
                        }
                    }
                }
                if l > 0 {
                    // mask by the hidden-layer ReLU
                    for j in 0..n_in {
                        if a_in[j] <= 0.0 {
                            trace.delta_next[j] = 0.0;
                        }
                    }
                }
                trace.delta[..n_in].copy_from_slice(&trace.delta_next[..n_in]);
            }
        }
        if let Some(out) = input_grad {
            out.copy_from_slice(&trace.delta[..self.input_dim()]);
        }
    }

    /// Exact reverse-mode VJP with respect to the parameters:
    /// `∇_θ (upstreamᵀ · f(x; θ))`.
    pub fn backward_params(&self, x: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
        self.check_dims(x, upstream)?;
        let mut trace = self.alloc_trace();
        self.forward_trace(x, &mut trace);
        let mut grad = vec![0.0; self.n_params()];
        self.backward_trace(&mut trace, upstream, Some(&mut grad), None);
        Ok(grad)
    }

    /// Exact reverse-mode VJP with respect to the input:
    /// `∇_x (upstreamᵀ · f(x; θ))`.
    pub fn backward_input(&self, x: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
        self.check_dims(x, upstream)?;
        let mut trace = self.alloc_trace();
        self.forward_trace(x, &mut trace);
        let mut grad = vec![0.0; self.input_dim()];
        self.backward_trace(&mut trace, upstream, None, Some(&mut grad));
        Ok(grad)
    }

    fn check_dims(&self, x: &[f64], upstream: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        if upstream.len() != self.output_dim() {
            return Err(Error::DimMismatch {
                expected: self.output_dim(),
                got: upstream.len(),
            });
        }
        Ok(())
    }

    /// Write the parameter snapshot: a shape header line followed by one
    /// parameter per line in full precision.
    pub fn save<W: Write>(&self, w: &mut W) -> Result<()> {
        write!(w, "mlp {}", self.sizes.len())?;
        for s in &self.sizes {
            write!(w, " {s}")?;
        }
        writeln!(w)?;
        for p in &self.params {
            writeln!(w, "{p:.17e}")?;
        }
        Ok(())
    }

    pub fn load<R: BufRead>(r: &mut R) -> Result<Self> {
        let mut header = String::new();
        r.read_line(&mut header)?;
        let mut it = header.split_whitespace();
        if it.next() != Some("mlp") {
            return Err(Error::Io("expected 'mlp' header".into()));
        }
        let k: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Io("bad layer count".into()))?;
        let sizes: Vec<usize> = it
            .take(k)
            .map(|t| t.parse().map_err(|_| Error::Io("bad size".into())))
            .collect::<Result<_>>()?;
        if sizes.len() != k || k < 2 {
            return Err(Error::Io("bad shape header".into()));
        }
        let n = Self::param_count_for(&sizes);
        let mut params = Vec::with_capacity(n);
        let mut line = String::new();
        for _ in 0..n {
            line.clear();
            if r.read_line(&mut line)? == 0 {
                return Err(Error::Io("truncated parameter list".into()));
            }
            params.push(
                line.trim()
                    .parse()
                    .map_err(|_| Error::Io("bad parameter value".into()))?,
            );
        }
        Ok(Self { sizes, params })
    }
}

/// Adam optimizer state over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n_params: usize, alpha: f64) -> Self {
        Self {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
            alpha,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn with_betas(mut self, beta1: f64, beta2: f64) -> Self {
        self.beta1 = beta1;
        self.beta2 = beta2;
        self
    }

    /// One bias-corrected Adam step in the descent direction of `grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.m.len(), "parameter shape mismatch");
        assert_eq!(grad.len(), self.m.len(), "gradient shape mismatch");
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / b1t;
            let v_hat = self.v[i] / b2t;
            params[i] -= self.alpha * m_hat / (v_hat.sqrt() + self.eps);
        }
    }

    /// Gradient-ascent variant of [`Self::step`].
    pub fn ascend(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.m.len(), "parameter shape mismatch");
        assert_eq!(grad.len(), self.m.len(), "gradient shape mismatch");
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / b1t;
            let v_hat = self.v[i] / b2t;
            params[i] += self.alpha * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}
