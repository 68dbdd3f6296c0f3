//! The autoregressive loop tying the model, the scoring strategy, and the
//! sampler together.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use super::{creative_dola_scores, dola_scores, sample_next, DecodeConfig, StepScores, Strategy};
use crate::error::{Error, Result};
use crate::tinylm::{ByteTokenizer, Model, TokenId, EOS_TOKEN};

#[derive(Debug, Clone)]
pub struct Generation {
    pub text: String,
    pub tokens: Vec<TokenId>,
    pub step_scores: Vec<StepScores>,
}

/// Generate up to `max_new_tokens` continuation tokens. Pure function of
/// (model, prompt, config): the sampler is seeded from `config.rng_seed`.
pub fn generate(model: &Model, prompt: &[TokenId], config: &DecodeConfig) -> Result<Generation> {
    if prompt.is_empty() {
        return Err(Error::Input("prompt is empty".into()));
    }
    let config = config.resolve(model.config().n_layers)?;
    let mut rng = ChaCha12Rng::seed_from_u64(config.rng_seed);
    let mut tokens = prompt.to_vec();
    let mut generated = Vec::new();
    let mut step_scores = Vec::new();

    for _ in 0..config.max_new_tokens {
        if tokens.len() >= model.config().max_seq_len {
            break;
        }
        let trace = model.forward(&tokens)?;
        let scores = match config.strategy {
            Strategy::Baseline => StepScores::baseline(trace.final_dist()),
            Strategy::Dola => dola_scores(&trace, &config)?,
            Strategy::CreativeDola => creative_dola_scores(&trace, &config)?,
        };
        let next = sample_next(
            &scores,
            config.temperature,
            config.top_p,
            config.do_sample,
            &mut rng,
        )?;
        step_scores.push(scores);
        if next == EOS_TOKEN {
            break;
        }
        tokens.push(next);
        generated.push(next);
    }

    Ok(Generation {
        text: ByteTokenizer.decode_to_string(&generated),
        tokens: generated,
        step_scores,
    })
}
