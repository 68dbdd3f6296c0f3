//! Step scoring: premature-layer selection, the adaptive plausibility
//! filter, and the two contrast formulas.

use std::collections::{BTreeMap, BTreeSet};

use super::jsd::jsd;
use super::{DecodeConfig, StepScores};
use crate::error::{Error, Result};
use crate::tinylm::{LayerTrace, TokenId, EPS_PROB};

/// Pick the candidate layer whose early-exit distribution diverges most
/// from the final layer (Jensen-Shannon). Ties go to the lowest index.
pub fn select_premature_layer(trace: &LayerTrace, candidates: &BTreeSet<usize>) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::Config("premature-layer candidate set is empty".into()));
    }
    let n = trace.n_layers();
    let final_dist = trace.final_dist();
    let mut best: Option<(usize, f64)> = None;
    for &layer in candidates {
        if layer == 0 || layer >= n {
            return Err(Error::Config(format!(
                "candidate layer {layer} outside 1..{n}"
            )));
        }
        let div = jsd(trace.early_exit_dist(layer)?, final_dist)?;
        // strict > keeps the lowest index on ties (candidates iterate ascending)
        if best.map_or(true, |(_, b)| div > b) {
            best = Some((layer, div));
        }
    }
    Ok(best.expect("candidates non-empty").0)
}

/// Adaptive plausibility set: tokens whose final-layer probability is at
/// least `beta` times the maximum. Always contains the argmax.
pub fn head_filter(final_dist: &[f32], beta: f32) -> Result<Vec<TokenId>> {
    if beta <= 0.0 || beta > 1.0 {
        return Err(Error::Config(format!("beta must lie in (0, 1], got {beta}")));
    }
    let max = final_dist.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let threshold = beta * max;
    Ok(final_dist
        .iter()
        .enumerate()
        .filter(|(_, &p)| p >= threshold)
        .map(|(i, _)| i)
        .collect())
}

/// Plain layer contrast: log(q_N / q_M) on the plausibility set, negative
/// infinity elsewhere. Probabilities are floored before the logs.
pub fn dola_scores(trace: &LayerTrace, config: &DecodeConfig) -> Result<StepScores> {
    let premature = select_premature_layer(trace, &config.candidate_layers)?;
    let v_head = head_filter(trace.final_dist(), config.beta)?;
    let raw_scores = contrast_base(trace, premature, &v_head);
    Ok(StepScores {
        raw_scores,
        v_head,
        premature_layer: Some(premature),
        per_layer_contributions: None,
    })
}

/// Layer contrast plus the probe-guided creativity term: amplifies layers
/// in `set_a` and suppresses layers in `set_b`, each weighted by gamma and
/// scaled by alpha. With alpha = 0 this is exactly `dola_scores`.
pub fn creative_dola_scores(trace: &LayerTrace, config: &DecodeConfig) -> Result<StepScores> {
    if !config.set_a.is_disjoint(&config.set_b) {
        return Err(Error::Config("set_a and set_b must be disjoint".into()));
    }
    creative_dola_scores_unchecked(trace, config)
}

/// Same as [`creative_dola_scores`] without the disjointness check. With
/// overlapping equal-gamma sets the amplification terms cancel exactly,
/// which tests exercise directly.
#[doc(hidden)]
pub fn creative_dola_scores_unchecked(
    trace: &LayerTrace,
    config: &DecodeConfig,
) -> Result<StepScores> {
    if config.alpha < 0.0 {
        return Err(Error::Config(format!(
            "alpha must be non-negative, got {}",
            config.alpha
        )));
    }
    let n = trace.n_layers();
    for &l in config.set_a.iter().chain(config.set_b.iter()) {
        if l == 0 || l > n {
            return Err(Error::Config(format!(
                "layer {l} in set_a/set_b outside 1..={n}"
            )));
        }
    }

    let premature = select_premature_layer(trace, &config.candidate_layers)?;
    let v_head = head_filter(trace.final_dist(), config.beta)?;
    let mut raw_scores = contrast_base(trace, premature, &v_head);

    let mut contributions: BTreeMap<usize, Vec<f32>> = BTreeMap::new();
    if config.alpha != 0.0 {
        for (slot, &token) in v_head.iter().enumerate() {
            let mut amplify = 0.0f32;
            for &a in &config.set_a {
                let g = config.gamma.get(a);
                let term = g * log_prob(trace, a, token);
                amplify += term;
                contributions.entry(a).or_insert_with(|| vec![0.0; v_head.len()])[slot] = term;
            }
            let mut suppress = 0.0f32;
            for &b in &config.set_b {
                let g = config.gamma.get(b);
                let term = g * log_prob(trace, b, token);
                suppress += term;
                contributions.entry(b).or_insert_with(|| vec![0.0; v_head.len()])[slot] = -term;
            }
            raw_scores[token] += config.alpha * (amplify - suppress);
        }
    }

    Ok(StepScores {
        raw_scores,
        v_head,
        premature_layer: Some(premature),
        per_layer_contributions: if contributions.is_empty() {
            None
        } else {
            Some(contributions)
        },
    })
}

/// log(q_N(x)) - log(q_M(x)) over the plausibility set.
fn contrast_base(trace: &LayerTrace, premature: usize, v_head: &[TokenId]) -> Vec<f32> {
    let final_dist = trace.final_dist();
    let premature_dist = trace
        .early_exit_dist(premature)
        .expect("premature layer validated by selection");
    let mut scores = vec![f32::NEG_INFINITY; final_dist.len()];
    for &token in v_head {
        scores[token] =
            final_dist[token].max(EPS_PROB).ln() - premature_dist[token].max(EPS_PROB).ln();
    }
    scores
}

fn log_prob(trace: &LayerTrace, layer: usize, token: TokenId) -> f32 {
    trace.early_exit_dists[layer - 1][token].max(EPS_PROB).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decode::Strategy;
    use crate::tinylm::LayerTrace;
    use std::collections::BTreeSet;

    fn trace_with(dists: Vec<Vec<f32>>) -> LayerTrace {
        LayerTrace::from_dists(0, dists).unwrap()
    }

    fn layers(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    fn dola_config(candidates: &[usize]) -> DecodeConfig {
        DecodeConfig {
            strategy: Strategy::Dola,
            candidate_layers: layers(candidates),
            ..DecodeConfig::default()
        }
    }

    #[test]
    fn identical_candidates_tie_break_to_lowest() {
        let d = vec![0.5f32, 0.5];
        let trace = trace_with(vec![d.clone(), d.clone(), d.clone(), d.clone()]);
        let m = select_premature_layer(&trace, &layers(&[2, 3])).unwrap();
        assert_eq!(m, 2);
    }

    #[test]
    fn singleton_candidate_always_wins() {
        let trace = trace_with(vec![
            vec![0.9, 0.1],
            vec![0.9, 0.1],
            vec![0.1, 0.9],
            vec![0.5, 0.5],
        ]);
        assert_eq!(select_premature_layer(&trace, &layers(&[2])).unwrap(), 2);
    }

    #[test]
    fn picks_the_most_divergent_layer() {
        // q_2 = (0.9, 0.1), q_4 = (0.6, 0.4), q_N = (0.5, 0.5):
        // JSD(q_2, q_N) > JSD(q_4, q_N), so 2 wins.
        let trace = trace_with(vec![
            vec![0.5, 0.5],
            vec![0.9, 0.1],
            vec![0.5, 0.5],
            vec![0.6, 0.4],
            vec![0.5, 0.5],
        ]);
        assert_eq!(select_premature_layer(&trace, &layers(&[2, 4])).unwrap(), 2);
    }

    #[test]
    fn empty_candidates_is_a_config_error() {
        let trace = trace_with(vec![vec![1.0, 0.0], vec![1.0, 0.0]]);
        assert!(matches!(
            select_premature_layer(&trace, &BTreeSet::new()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn head_filter_low_beta_keeps_everything() {
        let q = vec![0.5f32, 0.3, 0.15, 0.05];
        // threshold 0.1 * 0.5 = 0.05, all four pass
        assert_eq!(head_filter(&q, 0.1).unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn head_filter_beta_one_keeps_only_the_max() {
        let q = vec![0.5f32, 0.3, 0.15, 0.05];
        assert_eq!(head_filter(&q, 1.0).unwrap(), vec![0]);
    }

    #[test]
    fn head_filter_uniform_keeps_full_vocabulary() {
        let q = vec![0.25f32; 4];
        assert_eq!(head_filter(&q, 0.9).unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn equal_layers_make_all_finite_scores_zero() {
        let d = vec![0.5f32, 0.5];
        let trace = trace_with(vec![d.clone(), d.clone(), d.clone()]);
        let scores = dola_scores(&trace, &dola_config(&[2])).unwrap();
        for &t in &scores.v_head {
            assert_eq!(scores.raw_scores[t], 0.0);
        }
    }

    #[test]
    fn contrast_matches_hand_arithmetic() {
        // q_N = (0.7, 0.3), q_M = (0.5, 0.5): scores (ln 1.4, ln 0.6)
        let trace = trace_with(vec![vec![0.5, 0.5], vec![0.5, 0.5], vec![0.7, 0.3]]);
        let scores = dola_scores(&trace, &dola_config(&[2])).unwrap();
        assert_eq!(scores.premature_layer, Some(2));
        assert!((scores.raw_scores[0] - 1.4f32.ln()).abs() < 1e-6);
        assert!((scores.raw_scores[1] - 0.6f32.ln()).abs() < 1e-6);
        assert!(scores.raw_scores[0] > scores.raw_scores[1]);
    }

    #[test]
    fn tokens_outside_v_head_are_neg_infinity() {
        let trace = trace_with(vec![
            vec![0.25, 0.25, 0.25, 0.25],
            vec![0.25, 0.25, 0.25, 0.25],
            vec![0.90, 0.08, 0.01, 0.01],
        ]);
        let mut cfg = dola_config(&[2]);
        cfg.beta = 0.5;
        let scores = dola_scores(&trace, &cfg).unwrap();
        assert_eq!(scores.v_head, vec![0]);
        assert_eq!(scores.raw_scores[1], f32::NEG_INFINITY);
        assert_eq!(scores.raw_scores[2], f32::NEG_INFINITY);
    }

    #[test]
    fn alpha_zero_is_bitwise_plain_contrast() {
        let trace = trace_with(vec![
            vec![0.2, 0.8],
            vec![0.5, 0.5],
            vec![0.6, 0.4],
            vec![0.7, 0.3],
        ]);
        let mut cfg = dola_config(&[2]);
        cfg.strategy = Strategy::CreativeDola;
        cfg.alpha = 0.0;
        cfg.set_a = layers(&[1]);
        cfg.set_b = layers(&[3]);
        let creative = creative_dola_scores(&trace, &cfg).unwrap();
        let plain = dola_scores(&trace, &cfg).unwrap();
        assert_eq!(creative.premature_layer, plain.premature_layer);
        assert_eq!(creative.v_head, plain.v_head);
        for (c, p) in creative.raw_scores.iter().zip(&plain.raw_scores) {
            assert_eq!(c.to_bits(), p.to_bits());
        }
    }

    #[test]
    fn overlapping_sets_cancel_when_unchecked() {
        let trace = trace_with(vec![
            vec![0.2, 0.8],
            vec![0.5, 0.5],
            vec![0.6, 0.4],
            vec![0.7, 0.3],
        ]);
        let mut cfg = dola_config(&[2]);
        cfg.strategy = Strategy::CreativeDola;
        cfg.alpha = 1.0;
        cfg.set_a = layers(&[1, 3]);
        cfg.set_b = layers(&[1, 3]);
        assert!(matches!(
            creative_dola_scores(&trace, &cfg),
            Err(Error::Config(_))
        ));
        let creative = creative_dola_scores_unchecked(&trace, &cfg).unwrap();
        let plain = dola_scores(&trace, &cfg).unwrap();
        for (c, p) in creative.raw_scores.iter().zip(&plain.raw_scores) {
            assert_eq!(c.to_bits(), p.to_bits());
        }
    }

    #[test]
    fn creativity_term_matches_hand_arithmetic() {
        // 2-token vocab: q_N = (0.7, 0.3), q_M = q_2 = (0.5, 0.5),
        // A = {1} with q_1 = (0.2, 0.8), B = {3} with q_3 = (0.6, 0.4),
        // alpha = 1, gamma = 0.5.
        let trace = trace_with(vec![
            vec![0.2, 0.8],
            vec![0.5, 0.5],
            vec![0.6, 0.4],
            vec![0.7, 0.3],
        ]);
        let mut cfg = dola_config(&[2]);
        cfg.strategy = Strategy::CreativeDola;
        cfg.set_a = layers(&[1]);
        cfg.set_b = layers(&[3]);
        let creative = creative_dola_scores(&trace, &cfg).unwrap();
        let plain = dola_scores(&trace, &cfg).unwrap();

        let expect_t1 = (0.3f32 / 0.5).ln() + 0.5 * 0.8f32.ln() - 0.5 * 0.4f32.ln();
        assert!((creative.raw_scores[1] - expect_t1).abs() < 1e-6);
        let expect_t0 = (0.7f32 / 0.5).ln() + 0.5 * 0.2f32.ln() - 0.5 * 0.6f32.ln();
        assert!((creative.raw_scores[0] - expect_t0).abs() < 1e-6);

        // the creativity term shifts mass toward token 1 relative to plain
        let plain_gap = plain.raw_scores[0] - plain.raw_scores[1];
        let creative_gap = creative.raw_scores[0] - creative.raw_scores[1];
        assert!(creative_gap < plain_gap);
        assert!(creative.per_layer_contributions.is_some());
    }
}
