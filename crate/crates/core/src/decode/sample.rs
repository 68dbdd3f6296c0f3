//! Turning step scores into a token: temperature softmax over the finite
//! scores, nucleus truncation, seeded sampling, or greedy argmax.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use super::StepScores;
use crate::error::{Error, Result};
use crate::tinylm::TokenId;

pub fn sample_next(
    scores: &StepScores,
    temperature: f32,
    top_p: f32,
    do_sample: bool,
    rng: &mut ChaCha12Rng,
) -> Result<TokenId> {
    let finite: Vec<(TokenId, f32)> = scores
        .raw_scores
        .iter()
        .enumerate()
        .filter(|(_, s)| s.is_finite())
        .map(|(t, &s)| (t, s))
        .collect();
    if finite.is_empty() {
        return Err(Error::Internal(
            "all step scores are -inf; the plausibility set invariant is broken".into(),
        ));
    }

    if !do_sample {
        // greedy: highest score, lowest token id on ties
        let mut best = finite[0];
        for &(t, s) in &finite[1..] {
            if s > best.1 {
                best = (t, s);
            }
        }
        return Ok(best.0);
    }

    if temperature <= 0.0 {
        return Err(Error::Config("temperature must be positive".into()));
    }
    if top_p <= 0.0 || top_p > 1.0 {
        return Err(Error::Config(format!("top_p must lie in (0, 1], got {top_p}")));
    }

    // softmax over finite scores at the given temperature, in f64
    let max = finite
        .iter()
        .map(|&(_, s)| s)
        .fold(f32::NEG_INFINITY, f32::max);
    let mut probs: Vec<(TokenId, f64)> = finite
        .iter()
        .map(|&(t, s)| (t, (((s - max) / temperature) as f64).exp()))
        .collect();
    let sum: f64 = probs.iter().map(|&(_, p)| p).sum();
    for p in &mut probs {
        p.1 /= sum;
    }

    // nucleus: keep the smallest probability-sorted prefix reaching top_p
    if top_p < 1.0 {
        probs.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let mut cum = 0.0;
        let mut keep = probs.len();
        for (i, &(_, p)) in probs.iter().enumerate() {
            cum += p;
            if cum >= top_p as f64 {
                keep = i + 1;
                break;
            }
        }
        probs.truncate(keep);
        let renorm: f64 = probs.iter().map(|&(_, p)| p).sum();
        for p in &mut probs {
            p.1 /= renorm;
        }
        // restore token order so sampling is independent of sort details
        probs.sort_by_key(|&(t, _)| t);
    }

    let draw: f64 = rng.gen();
    let mut cum = 0.0;
    for &(t, p) in &probs {
        cum += p;
        if draw < cum {
            return Ok(t);
        }
    }
    Ok(probs.last().expect("non-empty").0)
}
