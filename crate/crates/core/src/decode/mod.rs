//! Decoding strategies: baseline sampling, layer-contrast (DoLa) decoding,
//! and the probe-guided creative variant that amplifies creativity-correlated
//! layers while suppressing anti-correlated ones.

mod config_text;
mod generate;
mod jsd;
mod sample;
mod scores;

pub use config_text::{parse_config_text, render_config_text};
pub use generate::{generate, Generation};
pub use jsd::jsd;
pub use sample::sample_next;
pub use scores::{
    creative_dola_scores, creative_dola_scores_unchecked, dola_scores, head_filter,
    select_premature_layer,
};

use crate::error::{Error, Result};
use crate::tinylm::TokenId;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Baseline,
    Dola,
    CreativeDola,
}

impl Strategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Baseline => "baseline",
            Strategy::Dola => "dola",
            Strategy::CreativeDola => "creative_dola",
        }
    }

    pub fn parse(s: &str) -> Result<Strategy> {
        match s {
            "baseline" => Ok(Strategy::Baseline),
            "dola" => Ok(Strategy::Dola),
            "creative_dola" => Ok(Strategy::CreativeDola),
            other => Err(Error::Config(format!("unknown strategy {other:?}"))),
        }
    }
}

/// Per-layer contrast weights: a default applied everywhere plus optional
/// per-layer overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaMap {
    pub default: f32,
    pub overrides: BTreeMap<usize, f32>,
}

impl GammaMap {
    pub fn constant(weight: f32) -> GammaMap {
        GammaMap {
            default: weight,
            overrides: BTreeMap::new(),
        }
    }

    pub fn get(&self, layer: usize) -> f32 {
        self.overrides.get(&layer).copied().unwrap_or(self.default)
    }
}

impl Default for GammaMap {
    fn default() -> Self {
        GammaMap::constant(0.5)
    }
}

/// All decoding knobs. Layer indices are 1-based; the final layer is N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub strategy: Strategy,
    /// Premature-layer candidates; when empty, filled per model with all
    /// even-indexed layers strictly below N.
    pub candidate_layers: BTreeSet<usize>,
    /// Adaptive-plausibility threshold in (0, 1].
    pub beta: f32,
    /// Creativity-term weight, >= 0. Zero reduces the creative strategy to
    /// plain layer contrast.
    pub alpha: f32,
    pub gamma: GammaMap,
    /// Creativity-correlated layers (amplified).
    pub set_a: BTreeSet<usize>,
    /// Anti-correlated layers (suppressed).
    pub set_b: BTreeSet<usize>,
    pub max_new_tokens: usize,
    pub temperature: f32,
    pub top_p: f32,
    pub do_sample: bool,
    pub rng_seed: u64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            strategy: Strategy::Baseline,
            candidate_layers: BTreeSet::new(),
            beta: 0.1,
            alpha: 1.0,
            gamma: GammaMap::default(),
            set_a: BTreeSet::new(),
            set_b: BTreeSet::new(),
            max_new_tokens: 800,
            temperature: 1.0,
            top_p: 1.0,
            do_sample: true,
            rng_seed: 0,
        }
    }
}

/// All even-indexed layers strictly below the final layer (1-based), the
/// default premature-layer candidate set.
pub fn default_candidate_layers(n_layers: usize) -> BTreeSet<usize> {
    (2..n_layers).step_by(2).collect()
}

impl DecodeConfig {
    /// Validate against a model of `n_layers` layers and fill in the
    /// default candidate set where needed.
    pub fn resolve(&self, n_layers: usize) -> Result<DecodeConfig> {
        let mut cfg = self.clone();
        if cfg.beta <= 0.0 || cfg.beta > 1.0 {
            return Err(Error::Config(format!(
                "beta must lie in (0, 1], got {}",
                cfg.beta
            )));
        }
        if cfg.alpha < 0.0 {
            return Err(Error::Config(format!(
                "alpha must be non-negative, got {}",
                cfg.alpha
            )));
        }
        if cfg.temperature <= 0.0 {
            return Err(Error::Config("temperature must be positive".into()));
        }
        if cfg.top_p <= 0.0 || cfg.top_p > 1.0 {
            return Err(Error::Config(format!(
                "top_p must lie in (0, 1], got {}",
                cfg.top_p
            )));
        }
        if matches!(cfg.strategy, Strategy::Dola | Strategy::CreativeDola) {
            if cfg.candidate_layers.is_empty() {
                cfg.candidate_layers = default_candidate_layers(n_layers);
            }
            if cfg.candidate_layers.is_empty() {
                return Err(Error::Config(format!(
                    "no premature-layer candidates available for {n_layers} layers"
                )));
            }
            if let Some(&bad) = cfg
                .candidate_layers
                .iter()
                .find(|&&l| l == 0 || l >= n_layers)
            {
                return Err(Error::Config(format!(
                    "candidate layer {bad} outside 1..{n_layers}"
                )));
            }
        }
        if cfg.strategy == Strategy::CreativeDola {
            if !cfg.set_a.is_disjoint(&cfg.set_b) {
                return Err(Error::Config(
                    "set_a and set_b must be disjoint".into(),
                ));
            }
            for &l in cfg.set_a.iter().chain(cfg.set_b.iter()) {
                if l == 0 || l > n_layers {
                    return Err(Error::Config(format!(
                        "layer {l} in set_a/set_b outside 1..={n_layers}"
                    )));
                }
            }
        }
        Ok(cfg)
    }
}

/// Contrast scores for one decoding step, in the log domain. Tokens outside
/// the plausibility set carry negative infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct StepScores {
    pub raw_scores: Vec<f32>,
    /// Sorted token ids passing the adaptive plausibility filter. Never
    /// empty: always contains the final layer's argmax.
    pub v_head: Vec<TokenId>,
    /// Premature layer chosen for the contrast (None for baseline scoring).
    pub premature_layer: Option<usize>,
    /// Per-layer gamma-weighted log-prob contributions for tokens in
    /// `v_head`, keyed by layer; populated by the creative strategy.
    pub per_layer_contributions: Option<BTreeMap<usize, Vec<f32>>>,
}

impl StepScores {
    /// Baseline scoring: log-probabilities of the final distribution, whole
    /// vocabulary plausible.
    pub fn baseline(final_dist: &[f32]) -> StepScores {
        let raw_scores = final_dist
            .iter()
            .map(|&p| p.max(crate::tinylm::EPS_PROB).ln())
            .collect();
        StepScores {
            raw_scores,
            v_head: (0..final_dist.len()).collect(),
            premature_layer: None,
            per_layer_contributions: None,
        }
    }
}
