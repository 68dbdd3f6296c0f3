//! Judges: technique extraction, constraint satisfaction counting, and
//! coherence rating. Two implementations share the interface — a
//! deterministic rule-based judge that keeps the whole pipeline offline,
//! and a generator-backed judge with strict reply parsing.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use super::generator::Generator;
use super::templates::JudgeTemplates;
use crate::error::{Error, Result};

pub trait Judge: Send + Sync {
    /// Extract the set of technique identifiers used in `text`.
    fn extract_techniques(&self, text: &str) -> Result<BTreeSet<String>>;

    /// How many of `constraints` the story satisfies.
    fn count_satisfied(&self, story: &str, constraints: &[String]) -> Result<usize>;

    /// Coherence of `story` against `reference`, 1..=5 (clamped with a
    /// warning if the backend strays outside).
    fn coherence(&self, story: &str, reference: &str) -> Result<u8>;
}

/// technique id -> substring patterns (matched case-insensitively).
pub type Lexicon = BTreeMap<String, Vec<String>>;

/// Default lexicon of common programming techniques.
pub fn default_lexicon() -> Lexicon {
    let entries: &[(&str, &[&str])] = &[
        ("for-loop", &["for ", "for(", "loop"]),
        ("while-loop", &["while ", "while("]),
        ("recursion", &["recursion", "recursive", "recurse"]),
        ("binary-search", &["binary search", "bisect"]),
        ("sorting", &["sort"]),
        ("hash-map", &["hash map", "hashmap", "dict", "map "]),
        ("dynamic-programming", &["dynamic programming", "memoiz", "dp table"]),
        ("greedy", &["greedy"]),
        ("two-pointers", &["two pointer", "two-pointer"]),
        ("stack", &["stack"]),
        ("queue", &["queue"]),
        ("graph-traversal", &["bfs", "dfs", "graph"]),
        ("bit-manipulation", &["bitwise", "bitmask", "xor"]),
    ];
    entries
        .iter()
        .map(|(id, pats)| {
            (
                id.to_string(),
                pats.iter().map(|p| p.to_string()).collect(),
            )
        })
        .collect()
}

/// Load a lexicon from JSON: {"technique-id": ["pattern", ...], ...}.
pub fn load_lexicon(path: &Path) -> Result<Lexicon> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Load {
        line: None,
        message: format!("bad lexicon file: {e}"),
    })
}

/// Deterministic offline judge.
///
/// - techniques: lexicon substring lookup;
/// - constraints: a constraint is satisfied when the story contains its
///   marker — the first double-quoted span of the constraint text if
///   present, otherwise the whole constraint — case-insensitively;
/// - coherence: word-set Jaccard similarity with the reference mapped onto
///   1..=5.
pub struct RuleBasedJudge {
    lexicon: Lexicon,
}

impl RuleBasedJudge {
    pub fn new(lexicon: Lexicon) -> RuleBasedJudge {
        RuleBasedJudge { lexicon }
    }
}

impl Default for RuleBasedJudge {
    fn default() -> Self {
        RuleBasedJudge::new(default_lexicon())
    }
}

/// The marker a rule-based constraint check looks for.
pub fn constraint_marker(constraint: &str) -> &str {
    if let Some(open) = constraint.find('"') {
        if let Some(close) = constraint[open + 1..].find('"') {
            if close > 0 {
                return &constraint[open + 1..open + 1 + close];
            }
        }
    }
    constraint
}

impl Judge for RuleBasedJudge {
    fn extract_techniques(&self, text: &str) -> Result<BTreeSet<String>> {
        let lower = text.to_lowercase();
        Ok(self
            .lexicon
            .iter()
            .filter(|(_, patterns)| {
                patterns
                    .iter()
                    .any(|p| lower.contains(&p.to_lowercase()))
            })
            .map(|(id, _)| id.clone())
            .collect())
    }

    fn count_satisfied(&self, story: &str, constraints: &[String]) -> Result<usize> {
        if constraints.is_empty() {
            return Err(Error::Input("constraint list is empty".into()));
        }
        let lower = story.to_lowercase();
        Ok(constraints
            .iter()
            .filter(|c| lower.contains(&constraint_marker(c).to_lowercase()))
            .count())
    }

    fn coherence(&self, story: &str, reference: &str) -> Result<u8> {
        let a: BTreeSet<String> = crate::mitigate::retrieval::term_counts(story)
            .into_keys()
            .collect();
        let b: BTreeSet<String> = crate::mitigate::retrieval::term_counts(reference)
            .into_keys()
            .collect();
        let union = a.union(&b).count();
        let jaccard = if union == 0 {
            1.0
        } else {
            a.intersection(&b).count() as f64 / union as f64
        };
        Ok(1 + (4.0 * jaccard).round() as u8)
    }
}

/// Generator-backed judge with fixed prompt templates and strict parsing.
pub struct LlmJudge {
    generator: Arc<dyn Generator>,
    templates: JudgeTemplates,
}

impl LlmJudge {
    pub fn new(generator: Arc<dyn Generator>, templates: JudgeTemplates) -> LlmJudge {
        LlmJudge {
            generator,
            templates,
        }
    }
}

impl Judge for LlmJudge {
    fn extract_techniques(&self, text: &str) -> Result<BTreeSet<String>> {
        let prompt = self.templates.techniques.render(&[("output", text)]);
        let reply = self.generator.generate(&prompt)?;
        let mut out = BTreeSet::new();
        for line in reply.lines() {
            let line = strip_bullet(line.trim());
            if line.is_empty() || line.eq_ignore_ascii_case("none") {
                continue;
            }
            out.insert(normalize_technique(line));
        }
        Ok(out)
    }

    fn count_satisfied(&self, story: &str, constraints: &[String]) -> Result<usize> {
        if constraints.is_empty() {
            return Err(Error::Input("constraint list is empty".into()));
        }
        let numbered = constraints
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{}. {c}", i + 1))
            .collect::<Vec<_>>()
            .join("\n");
        let prompt = self
            .templates
            .constraints
            .render(&[("story", story), ("constraints", &numbered)]);
        let reply = self.generator.generate(&prompt)?;

        let mut verdicts: BTreeMap<usize, bool> = BTreeMap::new();
        for line in reply.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let Some((num, rest)) = split_leading_number(line) else {
                return Err(Error::Judge {
                    message: format!("line {line:?} is not `<number>: yes|no`"),
                    raw: reply.clone(),
                });
            };
            let verdict = match rest.trim().to_lowercase().as_str() {
                "yes" => true,
                "no" => false,
                other => {
                    return Err(Error::Judge {
                        message: format!("verdict {other:?} is neither yes nor no"),
                        raw: reply.clone(),
                    })
                }
            };
            verdicts.insert(num, verdict);
        }
        for i in 1..=constraints.len() {
            if !verdicts.contains_key(&i) {
                return Err(Error::Judge {
                    message: format!("no verdict for constraint {i}"),
                    raw: reply.clone(),
                });
            }
        }
        Ok(verdicts
            .iter()
            .filter(|&(&i, &v)| i <= constraints.len() && v)
            .count())
    }

    fn coherence(&self, story: &str, reference: &str) -> Result<u8> {
        let prompt = self
            .templates
            .coherence
            .render(&[("story", story), ("reference", reference)]);
        let reply = self.generator.generate(&prompt)?;
        let score: i64 = reply
            .split(|c: char| !c.is_ascii_digit() && c != '-')
            .find_map(|tok| tok.parse().ok())
            .ok_or_else(|| Error::Judge {
                message: "no integer rating in reply".into(),
                raw: reply.clone(),
            })?;
        if !(1..=5).contains(&score) {
            log::warn!("coherence reply {score} outside 1..=5; clamping");
        }
        Ok(score.clamp(1, 5) as u8)
    }
}

fn strip_bullet(line: &str) -> &str {
    for bullet in ["- ", "* ", "• "] {
        if let Some(rest) = line.strip_prefix(bullet) {
            return rest.trim();
        }
    }
    if let Some((_, rest)) = split_leading_number(line) {
        return rest.trim();
    }
    line
}

/// "3: yes" / "3. text" / "3) text" -> (3, "text")
fn split_leading_number(line: &str) -> Option<(usize, &str)> {
    let digits = line.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits == 0 {
        return None;
    }
    let num: usize = line[..digits].parse().ok()?;
    let rest = &line[digits..];
    for sep in [":", ".", ")"] {
        if let Some(rest) = rest.strip_prefix(sep) {
            return Some((num, rest));
        }
    }
    None
}

fn normalize_technique(raw: &str) -> String {
    raw.to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join("-")
}
