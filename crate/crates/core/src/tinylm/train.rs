//! Deterministic training for the toy model: manual backprop,
//! full-precision Adam, seeded window sampling.

use ndarray::{s, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use super::model::{ForwardCache, Model, NormWeights, Weights};
use super::tokenizer::TokenId;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub lr: f32,
    pub batch_size: usize,
    /// Input window length per sampled example (targets are the window
    /// shifted by one).
    pub window: usize,
    /// Cap on positions used when evaluating corpus loss.
    pub eval_cap: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            lr: 1e-3,
            batch_size: 4,
            window: 32,
            eval_cap: 2048,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainStats {
    pub steps: usize,
    pub loss_before: f64,
    pub loss_after: f64,
}

/// Train with next-token cross-entropy. Deterministic given the model seed:
/// the same (model, corpus, steps, options) always produces identical
/// weights. Zero steps leaves the model untouched.
pub fn train_toy(
    mut model: Model,
    corpus: &[Vec<TokenId>],
    steps: usize,
    opts: &TrainOptions,
) -> Result<(Model, TrainStats)> {
    if corpus.is_empty() {
        return Err(Error::Input("training corpus is empty".into()));
    }
    let eligible: Vec<&Vec<TokenId>> = corpus.iter().filter(|s| s.len() >= 2).collect();
    if eligible.is_empty() {
        return Err(Error::Input(
            "corpus has no sequence with at least 2 tokens".into(),
        ));
    }
    for seq in corpus {
        if let Some(&bad) = seq.iter().find(|&&t| t >= model.config.vocab_size) {
            return Err(Error::Input(format!(
                "corpus token {} outside vocabulary of size {}",
                bad, model.config.vocab_size
            )));
        }
    }

    let loss_before = corpus_loss(&model, corpus, opts.eval_cap)?;
    if steps == 0 {
        return Ok((
            model,
            TrainStats {
                steps: 0,
                loss_before,
                loss_after: loss_before,
            },
        ));
    }

    let mut rng = ChaCha12Rng::seed_from_u64(model.config.seed.wrapping_add(0x9E37_79B9_7F4A_7C15));
    let mut adam = AdamState::new(&model.weights);

    for _ in 0..steps {
        let mut acc = Grads::zeros_like(&model.weights);
        for _ in 0..opts.batch_size {
            let seq = eligible[rng.gen_range(0..eligible.len())];
            let span = (opts.window + 1)
                .min(seq.len())
                .min(model.config.max_seq_len + 1);
            let start = rng.gen_range(0..=seq.len() - span);
            let window = &seq[start..start + span];
            let input = &window[..span - 1];
            let targets = &window[1..];
            let cache = model.forward_cached(input)?;
            backward(&model, input, targets, &cache, &mut acc);
        }
        acc.scale(1.0 / opts.batch_size as f32);
        adam.step(&mut model.weights, &acc, opts.lr);
    }

    model.refresh_model_id();
    let loss_after = corpus_loss(&model, corpus, opts.eval_cap)?;
    Ok((
        model,
        TrainStats {
            steps,
            loss_before,
            loss_after,
        },
    ))
}

/// Mean next-token cross-entropy (nats) over the corpus, capped at
/// `eval_cap` predicted positions. Deterministic: sequences are visited in
/// order.
pub fn corpus_loss(model: &Model, corpus: &[Vec<TokenId>], eval_cap: usize) -> Result<f64> {
    let mut total = 0.0f64;
    let mut count = 0usize;
    let window = model.config.max_seq_len;
    'outer: for seq in corpus {
        if seq.len() < 2 {
            continue;
        }
        let mut start = 0;
        while start + 1 < seq.len() {
            let end = (start + window + 1).min(seq.len());
            let input = &seq[start..end - 1];
            let targets = &seq[start + 1..end];
            let cache = model.forward_cached(input)?;
            total += cross_entropy(&cache.logits, targets);
            count += targets.len();
            if count >= eval_cap {
                break 'outer;
            }
            start = end - 1;
        }
    }
    if count == 0 {
        return Err(Error::Input("no positions to evaluate".into()));
    }
    Ok(total / count as f64)
}

/// Summed (not averaged) cross-entropy of logits rows against targets.
fn cross_entropy(logits: &Array2<f32>, targets: &[TokenId]) -> f64 {
    let mut total = 0.0f64;
    for (i, &t) in targets.iter().enumerate() {
        let row = logits.row(i);
        let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        let log_sum: f64 = row
            .iter()
            .map(|&l| ((l - max) as f64).exp())
            .sum::<f64>()
            .ln();
        total += log_sum + max as f64 - row[t] as f64;
    }
    total
}

pub(crate) struct Grads {
    pub tok_emb: Array2<f32>,
    pub pos_emb: Array2<f32>,
    pub layers: Vec<LayerGrads>,
    pub final_gain: Array1<f32>,
    pub final_bias: Array1<f32>,
    pub unembed: Array2<f32>,
}

pub(crate) struct LayerGrads {
    pub ln1_gain: Array1<f32>,
    pub ln1_bias: Array1<f32>,
    pub wq: Array2<f32>,
    pub wk: Array2<f32>,
    pub wv: Array2<f32>,
    pub wo: Array2<f32>,
    pub ln2_gain: Array1<f32>,
    pub ln2_bias: Array1<f32>,
    pub w_up: Array2<f32>,
    pub w_down: Array2<f32>,
}

impl Grads {
    pub fn zeros_like(w: &Weights) -> Grads {
        Grads {
            tok_emb: Array2::zeros(w.tok_emb.raw_dim()),
            pos_emb: Array2::zeros(w.pos_emb.raw_dim()),
            layers: w
                .layers
                .iter()
                .map(|l| LayerGrads {
                    ln1_gain: Array1::zeros(l.ln1.gain.raw_dim()),
                    ln1_bias: Array1::zeros(l.ln1.bias.raw_dim()),
                    wq: Array2::zeros(l.wq.raw_dim()),
                    wk: Array2::zeros(l.wk.raw_dim()),
                    wv: Array2::zeros(l.wv.raw_dim()),
                    wo: Array2::zeros(l.wo.raw_dim()),
                    ln2_gain: Array1::zeros(l.ln2.gain.raw_dim()),
                    ln2_bias: Array1::zeros(l.ln2.bias.raw_dim()),
                    w_up: Array2::zeros(l.w_up.raw_dim()),
                    w_down: Array2::zeros(l.w_down.raw_dim()),
                })
                .collect(),
            final_gain: Array1::zeros(w.final_norm.gain.raw_dim()),
            final_bias: Array1::zeros(w.final_norm.bias.raw_dim()),
            unembed: Array2::zeros(w.unembed.raw_dim()),
        }
    }

    fn scale(&mut self, factor: f32) {
        self.tok_emb *= factor;
        self.pos_emb *= factor;
        for l in &mut self.layers {
            l.ln1_gain *= factor;
            l.ln1_bias *= factor;
            l.wq *= factor;
            l.wk *= factor;
            l.wv *= factor;
            l.wo *= factor;
            l.ln2_gain *= factor;
            l.ln2_bias *= factor;
            l.w_up *= factor;
            l.w_down *= factor;
        }
        self.final_gain *= factor;
        self.final_bias *= factor;
        self.unembed *= factor;
    }
}

/// Accumulate gradients of the mean cross-entropy over this window into
/// `grads`.
pub(crate) fn backward(
    model: &Model,
    input: &[TokenId],
    targets: &[TokenId],
    cache: &ForwardCache,
    grads: &mut Grads,
) {
    let t_len = input.len();
    let n_heads = model.config.n_heads;
    let dh = model.config.d_head;
    let scale = 1.0 / (dh as f32).sqrt();
    let w = &model.weights;

    // d loss / d logits for mean CE over the window's positions
    let mut dlogits = Array2::<f32>::zeros(cache.logits.raw_dim());
    let norm = 1.0 / t_len as f32;
    for (i, &t) in targets.iter().enumerate() {
        let row = cache.logits.row(i);
        let soft = super::model::softmax_vec(row.as_slice().expect("contiguous"));
        for (j, p) in soft.into_iter().enumerate() {
            dlogits[[i, j]] = p * norm;
        }
        dlogits[[i, t]] -= norm;
    }

    grads.unembed += &cache.xf.t().dot(&dlogits);
    let dxf = dlogits.dot(&w.unembed.t());
    let mut dx = ln_backward(
        &dxf,
        &cache.final_ln.xhat,
        &cache.final_ln.inv_std,
        &w.final_norm,
        &mut grads.final_gain,
        &mut grads.final_bias,
    );

    for (l, lw) in w.layers.iter().enumerate().rev() {
        let lc = &cache.layers[l];
        let lg = &mut grads.layers[l];

        // MLP sublayer: x_out = x_mid + relu(ln2(x_mid) W_up) W_down
        let dmlp_out = &dx;
        lg.w_down += &lc.h_act.t().dot(dmlp_out);
        let dh_act = dmlp_out.dot(&lw.w_down.t());
        let mut dh_pre = dh_act;
        dh_pre.zip_mut_with(&lc.h_pre, |g, &pre| {
            if pre <= 0.0 {
                *g = 0.0;
            }
        });
        lg.w_up += &lc.m_in.t().dot(&dh_pre);
        let dm_in = dh_pre.dot(&lw.w_up.t());
        let dx_mid_ln = ln_backward(
            &dm_in,
            &lc.ln2.xhat,
            &lc.ln2.inv_std,
            &lw.ln2,
            &mut lg.ln2_gain,
            &mut lg.ln2_bias,
        );
        let dx_mid = &dx + &dx_mid_ln;

        // Attention sublayer: x_mid = x_in + (heads(ln1(x_in))) Wo
        let dattn_out = &dx_mid;
        lg.wo += &lc.head_out.t().dot(dattn_out);
        let dhead_out = dattn_out.dot(&lw.wo.t());

        let mut dq = Array2::<f32>::zeros((t_len, model.config.d_model));
        let mut dk = Array2::<f32>::zeros((t_len, model.config.d_model));
        let mut dv = Array2::<f32>::zeros((t_len, model.config.d_model));
        for h in 0..n_heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let do_h = dhead_out.slice(cols);
            let probs = &lc.probs[h];
            let vh = lc.v.slice(cols);
            let kh = lc.k.slice(cols);
            let qh = lc.q.slice(cols);

            let dp = do_h.dot(&vh.t());
            dv.slice_mut(cols).assign(&probs.t().dot(&do_h));

            // softmax rows: ds = p * (dp - rowsum(dp * p))
            let mut ds = Array2::<f32>::zeros((t_len, t_len));
            for i in 0..t_len {
                let mut dot = 0.0f32;
                for j in 0..=i {
                    dot += dp[[i, j]] * probs[[i, j]];
                }
                for j in 0..=i {
                    ds[[i, j]] = probs[[i, j]] * (dp[[i, j]] - dot);
                }
            }
            let mut dqh = ds.dot(&kh);
            dqh.mapv_inplace(|v| v * scale);
            dq.slice_mut(cols).assign(&dqh);
            let mut dkh = ds.t().dot(&qh);
            dkh.mapv_inplace(|v| v * scale);
            dk.slice_mut(cols).assign(&dkh);
        }

        lg.wq += &lc.a_in.t().dot(&dq);
        lg.wk += &lc.a_in.t().dot(&dk);
        lg.wv += &lc.a_in.t().dot(&dv);
        let da = dq.dot(&lw.wq.t()) + dk.dot(&lw.wk.t()) + dv.dot(&lw.wv.t());
        let dx_in_ln = ln_backward(
            &da,
            &lc.ln1.xhat,
            &lc.ln1.inv_std,
            &lw.ln1,
            &mut lg.ln1_gain,
            &mut lg.ln1_bias,
        );
        dx = dx_mid + dx_in_ln;
    }

    for (i, &tok) in input.iter().enumerate() {
        let row = dx.row(i);
        let mut emb = grads.tok_emb.row_mut(tok);
        emb += &row;
        let mut pos = grads.pos_emb.row_mut(i);
        pos += &row;
    }
}

fn ln_backward(
    dy: &Array2<f32>,
    xhat: &Array2<f32>,
    inv_std: &Array1<f32>,
    w: &NormWeights,
    dgain: &mut Array1<f32>,
    dbias: &mut Array1<f32>,
) -> Array2<f32> {
    let (rows, d) = (dy.nrows(), dy.ncols());
    let mut dx = Array2::<f32>::zeros(dy.raw_dim());
    for i in 0..rows {
        let mut m1 = 0.0f32;
        let mut m2 = 0.0f32;
        for j in 0..d {
            let dyg = dy[[i, j]] * w.gain[j];
            m1 += dyg;
            m2 += dyg * xhat[[i, j]];
            dgain[j] += dy[[i, j]] * xhat[[i, j]];
            dbias[j] += dy[[i, j]];
        }
        m1 /= d as f32;
        m2 /= d as f32;
        for j in 0..d {
            let dyg = dy[[i, j]] * w.gain[j];
            dx[[i, j]] = inv_std[i] * (dyg - m1 - xhat[[i, j]] * m2);
        }
    }
    dx
}

struct AdamState {
    m: Grads,
    v: Grads,
    t: usize,
}

const BETA1: f32 = 0.9;
const BETA2: f32 = 0.999;
const ADAM_EPS: f32 = 1e-8;

impl AdamState {
    fn new(w: &Weights) -> AdamState {
        AdamState {
            m: Grads::zeros_like(w),
            v: Grads::zeros_like(w),
            t: 0,
        }
    }

    fn step(&mut self, w: &mut Weights, g: &Grads, lr: f32) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t as i32);
        let c2 = 1.0 - BETA2.powi(self.t as i32);

        adam_2d(&mut w.tok_emb, &g.tok_emb, &mut self.m.tok_emb, &mut self.v.tok_emb, lr, c1, c2);
        adam_2d(&mut w.pos_emb, &g.pos_emb, &mut self.m.pos_emb, &mut self.v.pos_emb, lr, c1, c2);
        for ((lw, lg), (lm, lv)) in w
            .layers
            .iter_mut()
            .zip(&g.layers)
            .zip(self.m.layers.iter_mut().zip(self.v.layers.iter_mut()))
        {
            adam_1d(&mut lw.ln1.gain, &lg.ln1_gain, &mut lm.ln1_gain, &mut lv.ln1_gain, lr, c1, c2);
            adam_1d(&mut lw.ln1.bias, &lg.ln1_bias, &mut lm.ln1_bias, &mut lv.ln1_bias, lr, c1, c2);
            adam_2d(&mut lw.wq, &lg.wq, &mut lm.wq, &mut lv.wq, lr, c1, c2);
            adam_2d(&mut lw.wk, &lg.wk, &mut lm.wk, &mut lv.wk, lr, c1, c2);
            adam_2d(&mut lw.wv, &lg.wv, &mut lm.wv, &mut lv.wv, lr, c1, c2);
            adam_2d(&mut lw.wo, &lg.wo, &mut lm.wo, &mut lv.wo, lr, c1, c2);
            adam_1d(&mut lw.ln2.gain, &lg.ln2_gain, &mut lm.ln2_gain, &mut lv.ln2_gain, lr, c1, c2);
            adam_1d(&mut lw.ln2.bias, &lg.ln2_bias, &mut lm.ln2_bias, &mut lv.ln2_bias, lr, c1, c2);
            adam_2d(&mut lw.w_up, &lg.w_up, &mut lm.w_up, &mut lv.w_up, lr, c1, c2);
            adam_2d(&mut lw.w_down, &lg.w_down, &mut lm.w_down, &mut lv.w_down, lr, c1, c2);
        }
        adam_1d(&mut w.final_norm.gain, &g.final_gain, &mut self.m.final_gain, &mut self.v.final_gain, lr, c1, c2);
        adam_1d(&mut w.final_norm.bias, &g.final_bias, &mut self.m.final_bias, &mut self.v.final_bias, lr, c1, c2);
        adam_2d(&mut w.unembed, &g.unembed, &mut self.m.unembed, &mut self.v.unembed, lr, c1, c2);
    }
}

fn adam_2d(
    w: &mut Array2<f32>,
    g: &Array2<f32>,
    m: &mut Array2<f32>,
    v: &mut Array2<f32>,
    lr: f32,
    c1: f32,
    c2: f32,
) {
    ndarray::Zip::from(w)
        .and(g)
        .and(m)
        .and(v)
        .for_each(|w, &g, m, v| {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            let mhat = *m / c1;
            let vhat = *v / c2;
            *w -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
        });
}

fn adam_1d(
    w: &mut Array1<f32>,
    g: &Array1<f32>,
    m: &mut Array1<f32>,
    v: &mut Array1<f32>,
    lr: f32,
    c1: f32,
    c2: f32,
) {
    ndarray::Zip::from(w)
        .and(g)
        .and(m)
        .and(v)
        .for_each(|w, &g, m, v| {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            let mhat = *m / c1;
            let vhat = *v / c2;
            *w -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
        });
}
