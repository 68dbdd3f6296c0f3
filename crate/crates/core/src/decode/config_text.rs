//! Plain-text config format: one `key = value` per line, `#` comments,
//! layer sets as comma-separated indices. Every key matches the
//! corresponding `DecodeConfig` field and CLI flag name.
//!
//! ```text
//! strategy = creative_dola
//! candidate_layers = 2,4
//! beta = 0.1
//! alpha = 1.0
//! gamma = 0.5
//! gamma_overrides = 3:0.7
//! set_a = 1,2
//! set_b = 5,6
//! max_new_tokens = 800
//! temperature = 1.0
//! top_p = 1.0
//! do_sample = true
//! rng_seed = 0
//! ```

use std::collections::{BTreeMap, BTreeSet};

use super::{DecodeConfig, GammaMap, Strategy};
use crate::error::{Error, Result};

pub fn render_config_text(config: &DecodeConfig) -> String {
    let mut out = String::new();
    out.push_str(&format!("strategy = {}\n", config.strategy.as_str()));
    out.push_str(&format!(
        "candidate_layers = {}\n",
        join_set(&config.candidate_layers)
    ));
    out.push_str(&format!("beta = {}\n", config.beta));
    out.push_str(&format!("alpha = {}\n", config.alpha));
    out.push_str(&format!("gamma = {}\n", config.gamma.default));
    if !config.gamma.overrides.is_empty() {
        let pairs: Vec<String> = config
            .gamma
            .overrides
            .iter()
            .map(|(l, w)| format!("{l}:{w}"))
            .collect();
        out.push_str(&format!("gamma_overrides = {}\n", pairs.join(",")));
    }
    out.push_str(&format!("set_a = {}\n", join_set(&config.set_a)));
    out.push_str(&format!("set_b = {}\n", join_set(&config.set_b)));
    out.push_str(&format!("max_new_tokens = {}\n", config.max_new_tokens));
    out.push_str(&format!("temperature = {}\n", config.temperature));
    out.push_str(&format!("top_p = {}\n", config.top_p));
    out.push_str(&format!("do_sample = {}\n", config.do_sample));
    out.push_str(&format!("rng_seed = {}\n", config.rng_seed));
    out
}

/// Parse the text format, starting from defaults; unknown keys are errors.
pub fn parse_config_text(text: &str) -> Result<DecodeConfig> {
    let mut config = DecodeConfig::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad_line(lineno, "expected `key = value`"))?;
        let key = key.trim();
        let value = value.trim();
        match key {
            "strategy" => config.strategy = Strategy::parse(value)?,
            "candidate_layers" => config.candidate_layers = parse_set(value, lineno)?,
            "beta" => config.beta = parse_num(value, lineno)?,
            "alpha" => config.alpha = parse_num(value, lineno)?,
            "gamma" => config.gamma.default = parse_num(value, lineno)?,
            "gamma_overrides" => config.gamma.overrides = parse_overrides(value, lineno)?,
            "set_a" => config.set_a = parse_set(value, lineno)?,
            "set_b" => config.set_b = parse_set(value, lineno)?,
            "max_new_tokens" => {
                config.max_new_tokens = value
                    .parse()
                    .map_err(|_| bad_line(lineno, "max_new_tokens must be an integer"))?
            }
            "temperature" => config.temperature = parse_num(value, lineno)?,
            "top_p" => config.top_p = parse_num(value, lineno)?,
            "do_sample" => {
                config.do_sample = value
                    .parse()
                    .map_err(|_| bad_line(lineno, "do_sample must be true or false"))?
            }
            "rng_seed" => {
                config.rng_seed = value
                    .parse()
                    .map_err(|_| bad_line(lineno, "rng_seed must be a 64-bit integer"))?
            }
            other => return Err(bad_line(lineno, &format!("unknown key {other:?}"))),
        }
    }
    Ok(config)
}

fn join_set(set: &BTreeSet<usize>) -> String {
    set.iter()
        .map(|l| l.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_set(value: &str, lineno: usize) -> Result<BTreeSet<usize>> {
    if value.is_empty() {
        return Ok(BTreeSet::new());
    }
    value
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| bad_line(lineno, &format!("bad layer index {s:?}")))
        })
        .collect()
}

fn parse_overrides(value: &str, lineno: usize) -> Result<BTreeMap<usize, f32>> {
    let mut map = BTreeMap::new();
    if value.is_empty() {
        return Ok(map);
    }
    for pair in value.split(',') {
        let (l, w) = pair
            .split_once(':')
            .ok_or_else(|| bad_line(lineno, "gamma_overrides entries are layer:weight"))?;
        let layer = l
            .trim()
            .parse()
            .map_err(|_| bad_line(lineno, &format!("bad layer index {l:?}")))?;
        let weight = parse_num(w.trim(), lineno)?;
        map.insert(layer, weight);
    }
    Ok(map)
}

fn parse_num(value: &str, lineno: usize) -> Result<f32> {
    value
        .parse()
        .map_err(|_| bad_line(lineno, &format!("bad number {value:?}")))
}

fn bad_line(lineno: usize, message: &str) -> Error {
    Error::Load {
        line: Some(lineno + 1),
        message: message.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_roundtrip() {
        let cfg = DecodeConfig::default();
        let text = render_config_text(&cfg);
        assert_eq!(parse_config_text(&text).unwrap(), cfg);
    }

    #[test]
    fn comments_and_blanks_ignored() {
        let cfg = parse_config_text("# comment\n\nbeta = 0.2 # inline\n").unwrap();
        assert_eq!(cfg.beta, 0.2);
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(matches!(
            parse_config_text("bogus = 1\n"),
            Err(Error::Load { line: Some(1), .. })
        ));
    }

    proptest! {
        #[test]
        fn roundtrip_arbitrary_configs(
            strategy in prop_oneof![
                Just(Strategy::Baseline),
                Just(Strategy::Dola),
                Just(Strategy::CreativeDola)
            ],
            beta in 0.01f32..1.0,
            alpha in 0.0f32..4.0,
            gamma in 0.0f32..2.0,
            a in proptest::collection::btree_set(1usize..12, 0..4),
            b in proptest::collection::btree_set(12usize..20, 0..4),
            candidates in proptest::collection::btree_set(1usize..12, 0..5),
            max_new in 0usize..2000,
            seed in any::<u64>(),
        ) {
            let cfg = DecodeConfig {
                strategy,
                candidate_layers: candidates,
                beta,
                alpha,
                gamma: GammaMap::constant(gamma),
                set_a: a,
                set_b: b,
                max_new_tokens: max_new,
                temperature: 1.0,
                top_p: 1.0,
                do_sample: true,
                rng_seed: seed,
            };
            let parsed = parse_config_text(&render_config_text(&cfg)).unwrap();
            prop_assert_eq!(parsed, cfg);
        }
    }
}
