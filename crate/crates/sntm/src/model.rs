//! Decoder-only transformer runtime.
//!
//! The model is a small pre-norm transformer: learned absolute position
//! embeddings, causal multi-head attention, and a gated FFN computing
//! `down(act(gate . x + b) * (up . x))`. A "neuron" is one of the `d_ffn`
//! intermediate FFN channels; its activation value is the post-activation
//! gate output, captured per (layer, position, neuron) in an
//! [`ActivationTrace`]. A [`DeactivationMask`] forces selected neurons'
//! activation values to zero exactly.
//!
//! Every forward pass also produces early-exit next-token distributions:
//! the final RMS norm and the vocabulary head are applied to the hidden
//! state after the embeddings (row 0) and after each layer, so
//! [`LayerDistributions`] has `n_layers + 1` rows and row `n_layers` is the
//! model's standard output distribution.
//!
//! All model arithmetic is 32-bit floating point; softmax subtracts the max
//! logit for stability.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::steering::DeactivationMask;

const RMS_NORM_EPS: f32 = 1e-5;

/// FFN gate activation function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    /// SiLU gate of a gated linear unit.
    #[serde(rename = "silu-glu")]
    SiluGlu,
    /// Plain ReLU gate.
    #[serde(rename = "relu")]
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f32) -> f32 {
        match self {
            Activation::SiluGlu => x / (1.0 + (-x).exp()),
            Activation::Relu => x.max(0.0),
        }
    }
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub d_model: usize,
    pub n_heads: usize,
    /// Neuron count per layer.
    pub d_ffn: usize,
    pub vocab_size: usize,
    pub max_seq_len: usize,
    pub activation_kind: Activation,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_layers < 1 {
            return Err(Error::Construction("n_layers must be >= 1".into()));
        }
        if self.d_ffn < 1 {
            return Err(Error::Construction("d_ffn must be >= 1".into()));
        }
        if self.vocab_size < 2 {
            return Err(Error::Construction("vocab_size must be >= 2".into()));
        }
        if self.d_model < 1 {
            return Err(Error::Construction("d_model must be >= 1".into()));
        }
        if self.n_heads < 1 || !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::Construction(format!(
                "n_heads ({}) must divide d_model ({})",
                self.n_heads, self.d_model
            )));
        }
        if self.max_seq_len < 1 {
            return Err(Error::Construction("max_seq_len must be >= 1".into()));
        }
        Ok(())
    }

    pub fn d_head(&self) -> usize {
        self.d_model / self.n_heads
    }
}

/// Dense row-major f32 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Format(format!(
                "matrix data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f32] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f32) {
        self.data[r * self.cols + c] = v;
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// `y = M x` with `x` of length `cols`.
    pub fn matvec(&self, x: &[f32]) -> Vec<f32> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|r| dot(self.row(r), x)).collect()
    }
}

#[inline]
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f32 {
    let mut s = 0.0f32;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Per-layer weight tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    pub attn_q: Matrix,
    pub attn_k: Matrix,
    pub attn_v: Matrix,
    pub attn_o: Matrix,
    pub attn_norm: Vec<f32>,
    pub ffn_norm: Vec<f32>,
    /// Gate projection; row `i` is the read direction of neuron `i`.
    pub ffn_gate: Matrix,
    pub ffn_gate_bias: Vec<f32>,
    pub ffn_up: Matrix,
    /// Down projection; column `i` is the write direction of neuron `i`.
    pub ffn_down: Matrix,
}

impl LayerWeights {
    pub fn zeros(config: &ModelConfig) -> Self {
        let d = config.d_model;
        let f = config.d_ffn;
        LayerWeights {
            attn_q: Matrix::zeros(d, d),
            attn_k: Matrix::zeros(d, d),
            attn_v: Matrix::zeros(d, d),
            attn_o: Matrix::zeros(d, d),
            attn_norm: vec![0.0; d],
            ffn_norm: vec![0.0; d],
            ffn_gate: Matrix::zeros(f, d),
            ffn_gate_bias: vec![0.0; f],
            ffn_up: Matrix::zeros(f, d),
            ffn_down: Matrix::zeros(d, f),
        }
    }
}

/// Immutable model parameters plus configuration.
///
/// Shareable read-only across threads; a forward pass never mutates it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub config: ModelConfig,
    pub token_embedding: Matrix,
    pub position_embedding: Matrix,
    pub layers: Vec<LayerWeights>,
    pub final_norm: Vec<f32>,
    pub vocab_head: Matrix,
}

impl ModelWeights {
    /// All-zero weights for the given configuration.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let layers = (0..config.n_layers)
            .map(|_| LayerWeights::zeros(&config))
            .collect();
        Ok(ModelWeights {
            token_embedding: Matrix::zeros(config.vocab_size, config.d_model),
            position_embedding: Matrix::zeros(config.max_seq_len, config.d_model),
            layers,
            final_norm: vec![0.0; config.d_model],
            vocab_head: Matrix::zeros(config.vocab_size, config.d_model),
            config,
        })
    }

    /// Checks shape consistency against the config and that every entry is finite.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let c = &self.config;
        let expect = |name: &str, ok: bool| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::Format(format!(
                    "tensor {name} has inconsistent shape"
                )))
            }
        };
        expect(
            "token_embedding",
            self.token_embedding.rows() == c.vocab_size && self.token_embedding.cols() == c.d_model,
        )?;
        expect(
            "position_embedding",
            self.position_embedding.rows() == c.max_seq_len
                && self.position_embedding.cols() == c.d_model,
        )?;
        expect("layers", self.layers.len() == c.n_layers)?;
        for (j, l) in self.layers.iter().enumerate() {
            let square = |m: &Matrix| m.rows() == c.d_model && m.cols() == c.d_model;
            expect(&format!("layer{j}.attn_q"), square(&l.attn_q))?;
            expect(&format!("layer{j}.attn_k"), square(&l.attn_k))?;
            expect(&format!("layer{j}.attn_v"), square(&l.attn_v))?;
            expect(&format!("layer{j}.attn_o"), square(&l.attn_o))?;
            expect(
                &format!("layer{j}.attn_norm"),
                l.attn_norm.len() == c.d_model,
            )?;
            expect(&format!("layer{j}.ffn_norm"), l.ffn_norm.len() == c.d_model)?;
            expect(
                &format!("layer{j}.ffn_gate"),
                l.ffn_gate.rows() == c.d_ffn && l.ffn_gate.cols() == c.d_model,
            )?;
            expect(
                &format!("layer{j}.ffn_gate_bias"),
                l.ffn_gate_bias.len() == c.d_ffn,
            )?;
            expect(
                &format!("layer{j}.ffn_up"),
                l.ffn_up.rows() == c.d_ffn && l.ffn_up.cols() == c.d_model,
            )?;
            expect(
                &format!("layer{j}.ffn_down"),
                l.ffn_down.rows() == c.d_model && l.ffn_down.cols() == c.d_ffn,
            )?;
        }
        expect("final_norm", self.final_norm.len() == c.d_model)?;
        expect(
            "vocab_head",
            self.vocab_head.rows() == c.vocab_size && self.vocab_head.cols() == c.d_model,
        )?;
        for (name, values) in self.named_tensors() {
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Format(format!(
                    "tensor {name} contains non-finite values"
                )));
            }
        }
        Ok(())
    }

    /// Tensors in the container's fixed serialization order.
    pub fn named_tensors(&self) -> Vec<(String, &[f32])> {
        let mut out: Vec<(String, &[f32])> = Vec::new();
        out.push(("token_embedding".into(), self.token_embedding.data()));
        out.push(("position_embedding".into(), self.position_embedding.data()));
        for (j, l) in self.layers.iter().enumerate() {
            out.push((format!("layer{j}.attn_q"), l.attn_q.data()));
            out.push((format!("layer{j}.attn_k"), l.attn_k.data()));
            out.push((format!("layer{j}.attn_v"), l.attn_v.data()));
            out.push((format!("layer{j}.attn_o"), l.attn_o.data()));
            out.push((format!("layer{j}.attn_norm"), &l.attn_norm));
            out.push((format!("layer{j}.ffn_norm"), &l.ffn_norm));
            out.push((format!("layer{j}.ffn_gate"), l.ffn_gate.data()));
            out.push((format!("layer{j}.ffn_gate_bias"), &l.ffn_gate_bias));
            out.push((format!("layer{j}.ffn_up"), l.ffn_up.data()));
            out.push((format!("layer{j}.ffn_down"), l.ffn_down.data()));
        }
        out.push(("final_norm".into(), &self.final_norm));
        out.push(("vocab_head".into(), self.vocab_head.data()));
        out
    }

    /// Same tensor order as [`Self::named_tensors`], mutable.
    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut [f32])> {
        let mut out: Vec<(String, &mut [f32])> = Vec::new();
        out.push(("token_embedding".into(), self.token_embedding.data_mut()));
        out.push((
            "position_embedding".into(),
            self.position_embedding.data_mut(),
        ));
        for (j, l) in self.layers.iter_mut().enumerate() {
            out.push((format!("layer{j}.attn_q"), l.attn_q.data_mut()));
            out.push((format!("layer{j}.attn_k"), l.attn_k.data_mut()));
            out.push((format!("layer{j}.attn_v"), l.attn_v.data_mut()));
            out.push((format!("layer{j}.attn_o"), l.attn_o.data_mut()));
            out.push((format!("layer{j}.attn_norm"), l.attn_norm.as_mut_slice()));
            out.push((format!("layer{j}.ffn_norm"), l.ffn_norm.as_mut_slice()));
            out.push((format!("layer{j}.ffn_gate"), l.ffn_gate.data_mut()));
            out.push((
                format!("layer{j}.ffn_gate_bias"),
                l.ffn_gate_bias.as_mut_slice(),
            ));
            out.push((format!("layer{j}.ffn_up"), l.ffn_up.data_mut()));
            out.push((format!("layer{j}.ffn_down"), l.ffn_down.data_mut()));
        }
        out.push(("final_norm".into(), self.final_norm.as_mut_slice()));
        out.push(("vocab_head".into(), self.vocab_head.data_mut()));
        out
    }
}

/// Post-activation FFN gate values for every (layer, position, neuron).
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTrace {
    n_layers: usize,
    seq_len: usize,
    d_ffn: usize,
    values: Vec<f32>,
}

impl ActivationTrace {
    fn new(n_layers: usize, seq_len: usize, d_ffn: usize) -> Self {
        ActivationTrace {
            n_layers,
            seq_len,
            d_ffn,
            values: vec![0.0; n_layers * seq_len * d_ffn],
        }
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn d_ffn(&self) -> usize {
        self.d_ffn
    }

    #[inline]
    pub fn get(&self, layer: usize, position: usize, neuron: usize) -> f32 {
        self.values[(layer * self.seq_len + position) * self.d_ffn + neuron]
    }

    /// All neuron values at one (layer, position).
    #[inline]
    pub fn at(&self, layer: usize, position: usize) -> &[f32] {
        let start = (layer * self.seq_len + position) * self.d_ffn;
        &self.values[start..start + self.d_ffn]
    }

    #[inline]
    fn at_mut(&mut self, layer: usize, position: usize) -> &mut [f32] {
        let start = (layer * self.seq_len + position) * self.d_ffn;
        &mut self.values[start..start + self.d_ffn]
    }
}

/// Early-exit next-token distributions at the last input position.
///
/// Row 0 is the embedding-layer exit; row `j` is the exit after layer `j`;
/// row `n_layers` equals the standard output distribution exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerDistributions {
    rows: Vec<Vec<f32>>,
}

impl LayerDistributions {
    /// Wraps pre-computed rows; the last row is treated as the final
    /// distribution.
    pub fn from_rows(rows: Vec<Vec<f32>>) -> Self {
        assert!(!rows.is_empty());
        LayerDistributions { rows }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Distribution after `j` layers (row 0 = embeddings only).
    pub fn row(&self, j: usize) -> &[f32] {
        &self.rows[j]
    }

    /// The standard output distribution (last row).
    pub fn final_row(&self) -> &[f32] {
        self.rows.last().expect("at least the embedding row")
    }
}

/// RMS norm with learned gain, `eps = 1e-5`.
pub fn rmsnorm(x: &[f32], gain: &[f32]) -> Vec<f32> {
    let mut ms = 0.0f32;
    for &v in x {
        ms += v * v;
    }
    ms /= x.len() as f32;
    let inv = 1.0 / (ms + RMS_NORM_EPS).sqrt();
    x.iter().zip(gain).map(|(&v, &g)| v * inv * g).collect()
}

/// Softmax with max subtraction.
pub fn softmax(logits: &[f32]) -> Vec<f32> {
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut out: Vec<f32> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f32 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    out
}

fn validate_tokens(config: &ModelConfig, tokens: &[u32]) -> Result<()> {
    if tokens.is_empty() {
        return Err(Error::InvalidInput("token sequence is empty".into()));
    }
    if tokens.len() > config.max_seq_len {
        return Err(Error::Capacity(format!(
            "sequence length {} exceeds max_seq_len {}",
            tokens.len(),
            config.max_seq_len
        )));
    }
    if let Some(&bad) = tokens.iter().find(|&&t| t as usize >= config.vocab_size) {
        return Err(Error::InvalidInput(format!(
            "token id {bad} out of range for vocab_size {}",
            config.vocab_size
        )));
    }
    Ok(())
}

/// Hidden states at every layer boundary plus the activation trace.
struct ForwardStates {
    /// `boundaries[b][t]` is the hidden state at position `t` after `b` layers.
    boundaries: Vec<Vec<Vec<f32>>>,
    trace: ActivationTrace,
}

fn compute_states(
    weights: &ModelWeights,
    tokens: &[u32],
    mask: Option<&DeactivationMask>,
) -> Result<ForwardStates> {
    validate_tokens(&weights.config, tokens)?;
    if let Some(m) = mask {
        m.validate(&weights.config)?;
    }
    let c = &weights.config;
    let seq = tokens.len();
    let d = c.d_model;
    let d_head = c.d_head();
    let scale = 1.0 / (d_head as f32).sqrt();

    let mut h: Vec<Vec<f32>> = (0..seq)
        .map(|t| {
            let tok = weights.token_embedding.row(tokens[t] as usize);
            let pos = weights.position_embedding.row(t);
            tok.iter().zip(pos).map(|(&a, &b)| a + b).collect()
        })
        .collect();

    let mut boundaries = Vec::with_capacity(c.n_layers + 1);
    boundaries.push(h.clone());
    let mut trace = ActivationTrace::new(c.n_layers, seq, c.d_ffn);

    for (l, layer) in weights.layers.iter().enumerate() {
        // Causal multi-head attention.
        let normed: Vec<Vec<f32>> = h.iter().map(|x| rmsnorm(x, &layer.attn_norm)).collect();
        let q: Vec<Vec<f32>> = normed.iter().map(|x| layer.attn_q.matvec(x)).collect();
        let k: Vec<Vec<f32>> = normed.iter().map(|x| layer.attn_k.matvec(x)).collect();
        let v: Vec<Vec<f32>> = normed.iter().map(|x| layer.attn_v.matvec(x)).collect();
        for t in 0..seq {
            let mut merged = vec![0.0f32; d];
            for head in 0..c.n_heads {
                let lo = head * d_head;
                let hi = lo + d_head;
                let scores: Vec<f32> = (0..=t)
                    .map(|s| dot(&q[t][lo..hi], &k[s][lo..hi]) * scale)
                    .collect();
                let w = softmax(&scores);
                for (s, &ws) in w.iter().enumerate() {
                    for i in lo..hi {
                        merged[i] += ws * v[s][i];
                    }
                }
            }
            let proj = layer.attn_o.matvec(&merged);
            for i in 0..d {
                h[t][i] += proj[i];
            }
        }

        // Gated FFN with activation capture and deactivation.
        for t in 0..seq {
            let xn = rmsnorm(&h[t], &layer.ffn_norm);
            let mut a = layer.ffn_gate.matvec(&xn);
            for (i, v) in a.iter_mut().enumerate() {
                *v = c.activation_kind.apply(*v + layer.ffn_gate_bias[i]);
            }
            if let Some(m) = mask {
                for &neuron in m.neurons_in_layer(l) {
                    a[neuron] = 0.0;
                }
            }
            trace.at_mut(l, t).copy_from_slice(&a);
            let up = layer.ffn_up.matvec(&xn);
            let gated: Vec<f32> = a.iter().zip(&up).map(|(&x, &y)| x * y).collect();
            let y = layer.ffn_down.matvec(&gated);
            for i in 0..d {
                h[t][i] += y[i];
            }
        }

        boundaries.push(h.clone());
    }

    Ok(ForwardStates { boundaries, trace })
}

fn exit_distribution(weights: &ModelWeights, hidden: &[f32]) -> Vec<f32> {
    let e = rmsnorm(hidden, &weights.final_norm);
    softmax(&weights.vocab_head.matvec(&e))
}

/// Full forward pass.
///
/// Returns the early-exit distributions at the last position for every layer
/// boundary, plus the activation trace for all positions. With a mask, the
/// masked neurons contribute exactly zero to the FFN down-projection input.
pub fn forward(
    weights: &ModelWeights,
    tokens: &[u32],
    mask: Option<&DeactivationMask>,
) -> Result<(LayerDistributions, ActivationTrace)> {
    let states = compute_states(weights, tokens, mask)?;
    let last = tokens.len() - 1;
    let rows = states
        .boundaries
        .iter()
        .map(|b| exit_distribution(weights, &b[last]))
        .collect();
    Ok((LayerDistributions { rows }, states.trace))
}

/// Final-layer next-token distributions at every input position.
pub fn forward_all_positions(
    weights: &ModelWeights,
    tokens: &[u32],
    mask: Option<&DeactivationMask>,
) -> Result<(Vec<Vec<f32>>, ActivationTrace)> {
    let states = compute_states(weights, tokens, mask)?;
    let final_states = states
        .boundaries
        .last()
        .expect("final boundary always present");
    let dists = final_states
        .iter()
        .map(|hidden| exit_distribution(weights, hidden))
        .collect();
    Ok((dists, states.trace))
}

/// Standard next-token distribution, computed without any early-exit capture.
pub fn standard_next_dist(
    weights: &ModelWeights,
    tokens: &[u32],
    mask: Option<&DeactivationMask>,
) -> Result<Vec<f32>> {
    let states = compute_states(weights, tokens, mask)?;
    let last = tokens.len() - 1;
    Ok(exit_distribution(
        weights,
        &states.boundaries[weights.config.n_layers][last],
    ))
}

/// Total log-probability (nats) of `tokens[1..]` given the preceding context.
pub fn logprob_sequence(weights: &ModelWeights, tokens: &[u32]) -> Result<f64> {
    if tokens.len() < 2 {
        return Err(Error::InvalidInput(
            "log-probability needs a sequence of length >= 2".into(),
        ));
    }
    let (dists, _) = forward_all_positions(weights, tokens, None)?;
    let mut total = 0.0f64;
    for t in 1..tokens.len() {
        total += f64::from(dists[t - 1][tokens[t] as usize]).ln();
    }
    Ok(total)
}
