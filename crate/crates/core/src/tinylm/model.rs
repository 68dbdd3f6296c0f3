//! The transformer itself: deterministic init, a caching forward pass, and
//! the shared output head applied at any layer (early exit).
//!
//! Layers are numbered 1..=n_layers in every public API; layer `n_layers`
//! is the final layer. The output head includes the final layer norm, so
//! an early exit at layer j is `softmax(unembed(final_norm(h_j)))`.

use ndarray::{s, Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use super::tokenizer::TokenId;
use super::ModelConfig;
use crate::error::{Error, Result};

/// Probability floor used before any log; keeps log-ratios finite.
pub const EPS_PROB: f32 = 1e-10;

const LN_EPS: f32 = 1e-5;

#[derive(Debug, Clone)]
pub(crate) struct NormWeights {
    pub gain: Array1<f32>,
    pub bias: Array1<f32>,
}

impl NormWeights {
    fn ones(d: usize) -> Self {
        NormWeights {
            gain: Array1::ones(d),
            bias: Array1::zeros(d),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LayerWeights {
    pub ln1: NormWeights,
    pub wq: Array2<f32>,
    pub wk: Array2<f32>,
    pub wv: Array2<f32>,
    pub wo: Array2<f32>,
    pub ln2: NormWeights,
    pub w_up: Array2<f32>,
    pub w_down: Array2<f32>,
}

#[derive(Debug, Clone)]
pub(crate) struct Weights {
    pub tok_emb: Array2<f32>,
    pub pos_emb: Array2<f32>,
    pub layers: Vec<LayerWeights>,
    pub final_norm: NormWeights,
    pub unembed: Array2<f32>,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub(crate) config: ModelConfig,
    pub(crate) weights: Weights,
    model_id: String,
}

impl Model {
    /// Deterministic initialization from `config.seed`; two inits with the
    /// same config are bit-identical.
    pub fn init(config: ModelConfig) -> Result<Model> {
        config.validate()?;
        let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
        let normal = Normal::new(0.0f32, 0.02).expect("valid std");
        let mut draw = |rows: usize, cols: usize| -> Array2<f32> {
            Array2::from_shape_fn((rows, cols), |_| normal.sample(&mut rng))
        };

        let d = config.d_model;
        let ff = config.d_ff();
        let tok_emb = draw(config.vocab_size, d);
        let pos_emb = draw(config.max_seq_len, d);
        let layers = (0..config.n_layers)
            .map(|_| LayerWeights {
                ln1: NormWeights::ones(d),
                wq: draw(d, d),
                wk: draw(d, d),
                wv: draw(d, d),
                wo: draw(d, d),
                ln2: NormWeights::ones(d),
                w_up: draw(d, ff),
                w_down: draw(ff, d),
            })
            .collect();
        let final_norm = NormWeights::ones(d);
        let unembed = draw(d, config.vocab_size);

        let weights = Weights {
            tok_emb,
            pos_emb,
            layers,
            final_norm,
            unembed,
        };
        Ok(Model::from_parts(config, weights))
    }

    pub(crate) fn from_parts(config: ModelConfig, weights: Weights) -> Model {
        let mut m = Model {
            config,
            weights,
            model_id: String::new(),
        };
        m.refresh_model_id();
        m
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Identifier bound to geometry, seed, and the current weight values.
    /// Training or loading different weights changes it.
    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub(crate) fn refresh_model_id(&mut self) {
        let digest = self.weight_checksum();
        self.model_id = format!(
            "tlm-{}x{}x{}-v{}-s{}-{}",
            self.config.n_layers,
            self.config.n_heads,
            self.config.d_model,
            self.config.vocab_size,
            self.config.seed,
            &digest[..12]
        );
    }

    /// Hex SHA-256 over all weight tensors in serialization order.
    pub fn weight_checksum(&self) -> String {
        let mut hasher = Sha256::new();
        for tensor in self.tensors() {
            for &v in tensor.iter() {
                hasher.update(v.to_le_bytes());
            }
        }
        hex_string(&hasher.finalize())
    }

    /// All weight tensors in the fixed serialization order (norm gains and
    /// biases are exposed as 1-row matrices).
    pub(crate) fn tensors(&self) -> Vec<ndarray::ArrayView2<'_, f32>> {
        let mut out = Vec::new();
        let w = &self.weights;
        out.push(w.tok_emb.view());
        out.push(w.pos_emb.view());
        for layer in &w.layers {
            out.push(as_row(&layer.ln1.gain));
            out.push(as_row(&layer.ln1.bias));
            out.push(layer.wq.view());
            out.push(layer.wk.view());
            out.push(layer.wv.view());
            out.push(layer.wo.view());
            out.push(as_row(&layer.ln2.gain));
            out.push(as_row(&layer.ln2.bias));
            out.push(layer.w_up.view());
            out.push(layer.w_down.view());
        }
        out.push(as_row(&w.final_norm.gain));
        out.push(as_row(&w.final_norm.bias));
        out.push(w.unembed.view());
        out
    }

    /// Run the model over `tokens` and record per-layer observables at the
    /// final position. `early_exit_dists` holds q_1..q_N; the last entry is
    /// the model's standard next-token distribution.
    pub fn forward(&self, tokens: &[TokenId]) -> Result<LayerTrace> {
        let cache = self.forward_cached(tokens)?;
        Ok(self.trace_from_cache(tokens.len() - 1, &cache))
    }

    /// Apply the shared output head to one layer's hidden state. `layer` is
    /// 1-based; `layer == n_layers` reproduces the final distribution.
    pub fn early_exit(&self, hidden: &[f32], layer: usize) -> Result<Vec<f32>> {
        if layer == 0 || layer > self.config.n_layers {
            return Err(Error::Index(format!(
                "layer {} out of range 1..={}",
                layer, self.config.n_layers
            )));
        }
        if hidden.len() != self.config.d_model {
            return Err(Error::Input(format!(
                "hidden state has dimension {}, expected {}",
                hidden.len(),
                self.config.d_model
            )));
        }
        let h = Array1::from_vec(hidden.to_vec());
        Ok(self.output_head(&h))
    }

    /// final layer norm + unembedding + softmax; shared by every exit point.
    fn output_head(&self, hidden: &Array1<f32>) -> Vec<f32> {
        let normed = layer_norm_vec(hidden, &self.weights.final_norm);
        let logits = normed.dot(&self.weights.unembed);
        softmax_vec(logits.as_slice().expect("contiguous"))
    }

    pub(crate) fn trace_from_cache(&self, step_index: usize, cache: &ForwardCache) -> LayerTrace {
        let n_layers = self.config.n_layers;
        let last = cache.seq_len - 1;
        let mut hidden_states = Vec::with_capacity(n_layers);
        let mut early_exit_dists = Vec::with_capacity(n_layers);
        let mut head_activations = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let h = cache.layers[l].x_out.row(last).to_owned();
            early_exit_dists.push(self.output_head(&h));
            hidden_states.push(h.to_vec());
            let heads = (0..self.config.n_heads)
                .map(|hd| {
                    cache.layers[l]
                        .head_out
                        .slice(s![last, hd * self.config.d_head..(hd + 1) * self.config.d_head])
                        .to_vec()
                })
                .collect();
            head_activations.push(heads);
        }
        LayerTrace {
            step_index,
            hidden_states,
            early_exit_dists,
            head_activations,
        }
    }

    /// Full forward pass keeping every intermediate needed for the trace and
    /// for backpropagation.
    pub(crate) fn forward_cached(&self, tokens: &[TokenId]) -> Result<ForwardCache> {
        let t_len = tokens.len();
        if t_len == 0 {
            return Err(Error::Input("token sequence is empty".into()));
        }
        if t_len > self.config.max_seq_len {
            return Err(Error::Input(format!(
                "sequence length {} exceeds max_seq_len {}",
                t_len, self.config.max_seq_len
            )));
        }
        if let Some(&bad) = tokens.iter().find(|&&t| t >= self.config.vocab_size) {
            return Err(Error::Input(format!(
                "token id {} outside vocabulary of size {}",
                bad, self.config.vocab_size
            )));
        }

        let d = self.config.d_model;
        let mut x = Array2::<f32>::zeros((t_len, d));
        for (i, &tok) in tokens.iter().enumerate() {
            let row = &self.weights.tok_emb.row(tok) + &self.weights.pos_emb.row(i);
            x.row_mut(i).assign(&row);
        }
        let x0 = x.clone();

        let mut layers = Vec::with_capacity(self.config.n_layers);
        for lw in &self.weights.layers {
            let (a_in, ln1) = layer_norm(&x, &lw.ln1);
            let q = a_in.dot(&lw.wq);
            let k = a_in.dot(&lw.wk);
            let v = a_in.dot(&lw.wv);
            let (head_out, probs) = self.attention(&q, &k, &v);
            let attn_out = head_out.dot(&lw.wo);
            let x_mid = &x + &attn_out;

            let (m_in, ln2) = layer_norm(&x_mid, &lw.ln2);
            let h_pre = m_in.dot(&lw.w_up);
            let h_act = h_pre.mapv(|v| v.max(0.0));
            let mlp_out = h_act.dot(&lw.w_down);
            let x_out = &x_mid + &mlp_out;

            x = x_out.clone();
            layers.push(LayerCache {
                ln1,
                a_in,
                q,
                k,
                v,
                probs,
                head_out,
                x_mid,
                ln2,
                m_in,
                h_pre,
                h_act,
                x_out,
            });
        }

        let (xf, final_ln) = layer_norm(&x, &self.weights.final_norm);
        let logits = xf.dot(&self.weights.unembed);
        Ok(ForwardCache {
            seq_len: t_len,
            x0,
            layers,
            final_ln,
            xf,
            logits,
        })
    }

    /// Causal multi-head attention. Returns the concatenated per-head
    /// outputs (before the output projection) and each head's attention
    /// probabilities.
    fn attention(
        &self,
        q: &Array2<f32>,
        k: &Array2<f32>,
        v: &Array2<f32>,
    ) -> (Array2<f32>, Vec<Array2<f32>>) {
        let t_len = q.nrows();
        let dh = self.config.d_head;
        let scale = 1.0 / (dh as f32).sqrt();
        let mut head_out = Array2::<f32>::zeros((t_len, self.config.d_model));
        let mut all_probs = Vec::with_capacity(self.config.n_heads);
        for h in 0..self.config.n_heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let qh = q.slice(cols);
            let kh = k.slice(cols);
            let vh = v.slice(cols);
            let mut scores = qh.dot(&kh.t());
            scores.mapv_inplace(|s| s * scale);
            // causal mask + row softmax
            let mut probs = Array2::<f32>::zeros((t_len, t_len));
            for i in 0..t_len {
                let row = scores.slice(s![i, ..=i]);
                let soft = softmax_vec(row.as_slice().expect("contiguous"));
                for (j, p) in soft.into_iter().enumerate() {
                    probs[[i, j]] = p;
                }
            }
            let oh = probs.dot(&vh);
            head_out.slice_mut(cols).assign(&oh);
            all_probs.push(probs);
        }
        (head_out, all_probs)
    }
}

/// Per-step observables at the final position: one hidden state, one
/// early-exit distribution, and one set of per-head outputs per layer.
/// Index 0 of each list is layer 1.
#[derive(Debug, Clone)]
pub struct LayerTrace {
    pub step_index: usize,
    pub hidden_states: Vec<Vec<f32>>,
    pub early_exit_dists: Vec<Vec<f32>>,
    pub head_activations: Vec<Vec<Vec<f32>>>,
}

impl LayerTrace {
    /// Build a trace directly from per-layer distributions (hand-made
    /// traces for decoding tests). Hidden states and head activations are
    /// left empty.
    pub fn from_dists(step_index: usize, dists: Vec<Vec<f32>>) -> Result<LayerTrace> {
        if dists.is_empty() {
            return Err(Error::Input("trace needs at least one layer".into()));
        }
        let len = dists[0].len();
        if dists.iter().any(|d| d.len() != len) {
            return Err(Error::Input("distributions differ in length".into()));
        }
        Ok(LayerTrace {
            step_index,
            hidden_states: vec![Vec::new(); dists.len()],
            early_exit_dists: dists,
            head_activations: vec![Vec::new(); 0],
        })
    }

    pub fn n_layers(&self) -> usize {
        self.early_exit_dists.len()
    }

    /// Early-exit distribution q_j for 1-based layer j.
    pub fn early_exit_dist(&self, layer: usize) -> Result<&[f32]> {
        if layer == 0 || layer > self.n_layers() {
            return Err(Error::Index(format!(
                "layer {} out of range 1..={}",
                layer,
                self.n_layers()
            )));
        }
        Ok(&self.early_exit_dists[layer - 1])
    }

    /// The model's standard next-token distribution (final layer).
    pub fn final_dist(&self) -> &[f32] {
        self.early_exit_dists
            .last()
            .expect("trace has at least one layer")
    }
}

pub(crate) struct LnCache {
    pub xhat: Array2<f32>,
    pub inv_std: Array1<f32>,
}

pub(crate) struct LayerCache {
    pub ln1: LnCache,
    pub a_in: Array2<f32>,
    pub q: Array2<f32>,
    pub k: Array2<f32>,
    pub v: Array2<f32>,
    pub probs: Vec<Array2<f32>>,
    pub head_out: Array2<f32>,
    pub x_mid: Array2<f32>,
    pub ln2: LnCache,
    pub m_in: Array2<f32>,
    pub h_pre: Array2<f32>,
    pub h_act: Array2<f32>,
    pub x_out: Array2<f32>,
}

pub(crate) struct ForwardCache {
    pub seq_len: usize,
    pub x0: Array2<f32>,
    pub layers: Vec<LayerCache>,
    pub final_ln: LnCache,
    pub xf: Array2<f32>,
    pub logits: Array2<f32>,
}

fn as_row(v: &Array1<f32>) -> ndarray::ArrayView2<'_, f32> {
    v.view().insert_axis(Axis(0))
}

/// Row-wise layer norm returning the cache needed for backprop.
pub(crate) fn layer_norm(x: &Array2<f32>, w: &NormWeights) -> (Array2<f32>, LnCache) {
    let d = x.ncols();
    let mut xhat = Array2::<f32>::zeros(x.raw_dim());
    let mut inv_std = Array1::<f32>::zeros(x.nrows());
    for (i, row) in x.outer_iter().enumerate() {
        let mean = row.sum() / d as f32;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f32>() / d as f32;
        let istd = 1.0 / (var + LN_EPS).sqrt();
        inv_std[i] = istd;
        for j in 0..d {
            xhat[[i, j]] = (row[j] - mean) * istd;
        }
    }
    let y = &xhat * &w.gain + &w.bias;
    (y, LnCache { xhat, inv_std })
}

pub(crate) fn layer_norm_vec(x: &Array1<f32>, w: &NormWeights) -> Array1<f32> {
    let d = x.len();
    let mean = x.sum() / d as f32;
    let var = x.iter().map(|&v| (v - mean) * (v - mean)).sum::<f32>() / d as f32;
    let istd = 1.0 / (var + LN_EPS).sqrt();
    Array1::from_shape_fn(d, |j| (x[j] - mean) * istd * w.gain[j] + w.bias[j])
}

/// Numerically stable softmax.
pub fn softmax_vec(logits: &[f32]) -> Vec<f32> {
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let exps: Vec<f32> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f32 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
