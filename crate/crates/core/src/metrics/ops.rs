//! The individual metric formulas. All return exact fractions of their
//! inputs; averaging across runs happens in the report builder.

use std::collections::{BTreeSet, HashMap, HashSet};

use super::{GenerationRecord, Verdict};
use crate::error::{Error, Result};

/// Convergent creativity: fraction of records that are correct and violate
/// no active constraint. Records with unknown correctness are excluded.
pub fn neocoder_convergent(records: &[&GenerationRecord]) -> Result<f64> {
    let usable: Vec<_> = records
        .iter()
        .filter(|r| r.correctness != Verdict::Unknown)
        .collect();
    if usable.is_empty() {
        return Err(Error::UndefinedMetric(
            "convergent creativity needs at least one record with known correctness".into(),
        ));
    }
    let hits = usable
        .iter()
        .filter(|r| r.correctness == Verdict::Correct && r.constraints_violated.is_empty())
        .count();
    Ok(hits as f64 / usable.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivergentOutcome {
    pub value: f64,
    /// Records dropped because their technique set was empty.
    pub excluded_empty: usize,
}

/// Divergent creativity: mean over records of |T \ T_hat| / |T|. Records
/// with empty technique sets are excluded and counted.
pub fn neocoder_divergent(
    records: &[&GenerationRecord],
    human_techniques: impl Fn(&str) -> Option<BTreeSet<String>>,
) -> Result<DivergentOutcome> {
    let mut sum = 0.0f64;
    let mut used = 0usize;
    let mut excluded = 0usize;
    for r in records {
        let human = human_techniques(&r.problem_id).ok_or_else(|| {
            Error::Input(format!("no human techniques for problem {}", r.problem_id))
        })?;
        match r.divergent_ratio(&human) {
            Some(ratio) => {
                sum += ratio;
                used += 1;
            }
            None => excluded += 1,
        }
    }
    if used == 0 {
        return Err(Error::UndefinedMetric(
            "divergent creativity needs at least one record with techniques".into(),
        ));
    }
    Ok(DivergentOutcome {
        value: sum / used as f64,
        excluded_empty: excluded,
    })
}

/// Proportion of fulfilled constraints.
pub fn constraint_satisfaction(satisfied: usize, total: usize) -> Result<f64> {
    if total == 0 {
        return Err(Error::UndefinedMetric(
            "constraint satisfaction with zero constraints".into(),
        ));
    }
    if satisfied > total {
        return Err(Error::Input(format!(
            "satisfied ({satisfied}) exceeds total ({total})"
        )));
    }
    Ok(satisfied as f64 / total as f64)
}

/// Mean coherence score (1-5) normalized by 5.
pub fn coherence_norm(mean_score: f64) -> Result<f64> {
    if !(1.0..=5.0).contains(&mean_score) {
        return Err(Error::Input(format!(
            "coherence score {mean_score} outside [1, 5]"
        )));
    }
    Ok(mean_score / 5.0)
}

/// Lexical diversity: product over n in 2..=4 of unique/total n-gram
/// ratios over whitespace words (lowercased, punctuation stripped).
pub fn dist_n(text: &str) -> Result<f64> {
    dist_n_range(text, 2, 4)
}

pub fn dist_n_range(text: &str, n_min: usize, n_max: usize) -> Result<f64> {
    let words = tokenize_words(text);
    if words.len() < n_max {
        return Err(Error::UndefinedMetric(format!(
            "text yields no {n_max}-gram ({} words)",
            words.len()
        )));
    }
    let mut product = 1.0f64;
    for n in n_min..=n_max {
        let total = words.len() - n + 1;
        let unique: HashSet<&[String]> = words.windows(n).collect();
        product *= unique.len() as f64 / total as f64;
    }
    Ok(product)
}

/// Word tokenization used by `dist_n`: lowercase, strip every
/// non-alphanumeric character, drop empty tokens.
pub(crate) fn tokenize_words(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.chars()
                .filter(|c| c.is_alphanumeric())
                .flat_map(|c| c.to_lowercase())
                .collect::<String>()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

/// Quality under constraints: normalized coherence times constraint
/// satisfaction.
pub fn quc(coherence_norm: f64, constraint_satisfaction: f64) -> Result<f64> {
    for (name, v) in [
        ("coherence_norm", coherence_norm),
        ("constraint_satisfaction", constraint_satisfaction),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Input(format!("{name} {v} outside [0, 1]")));
        }
    }
    Ok(coherence_norm * constraint_satisfaction)
}

/// Percentage difference from baseline; positive means improvement. A zero
/// baseline is an explicit error, never silently 0.
pub fn pct_diff(m_method: f64, m_baseline: f64) -> Result<f64> {
    if m_baseline == 0.0 {
        return Err(Error::UndefinedDelta("pct_diff".into()));
    }
    Ok((m_method - m_baseline) / m_baseline * 100.0)
}

/// Brute-force n-gram census, exposed for diagnostics: n-gram -> count.
pub fn ngram_counts(text: &str, n: usize) -> HashMap<Vec<String>, usize> {
    let words = tokenize_words(text);
    let mut counts = HashMap::new();
    if words.len() >= n {
        for w in words.windows(n) {
            *counts.entry(w.to_vec()).or_insert(0) += 1;
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{JudgeScores, Method};
    use std::collections::BTreeSet;

    fn record(correct: Verdict, violated: &[&str], techniques: &[&str]) -> GenerationRecord {
        GenerationRecord {
            problem_id: "p1".into(),
            state_t: 1,
            method: Method::Baseline,
            run_index: 1,
            prompt_text: String::new(),
            output_text: String::new(),
            techniques: techniques.iter().map(|s| s.to_string()).collect(),
            constraints_violated: violated.iter().map(|s| s.to_string()).collect(),
            correctness: correct,
            judge_scores: JudgeScores::default(),
        }
    }

    #[test]
    fn convergent_all_clean_correct() {
        let rs = vec![
            record(Verdict::Correct, &[], &["a"]),
            record(Verdict::Correct, &[], &["b"]),
        ];
        let refs: Vec<&GenerationRecord> = rs.iter().collect();
        assert_eq!(neocoder_convergent(&refs).unwrap(), 1.0);
    }

    #[test]
    fn convergent_mixed_is_one_third() {
        let rs = vec![
            record(Verdict::Correct, &[], &["a"]),
            record(Verdict::Correct, &["a"], &["a"]),
            record(Verdict::Incorrect, &[], &["a"]),
        ];
        let refs: Vec<&GenerationRecord> = rs.iter().collect();
        assert!((neocoder_convergent(&refs).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn convergent_state_zero_is_plain_correctness() {
        // no constraints -> violation set always empty
        let rs = vec![
            record(Verdict::Correct, &[], &[]),
            record(Verdict::Incorrect, &[], &[]),
        ];
        let refs: Vec<&GenerationRecord> = rs.iter().collect();
        assert_eq!(neocoder_convergent(&refs).unwrap(), 0.5);
    }

    #[test]
    fn convergent_empty_is_undefined() {
        assert!(matches!(
            neocoder_convergent(&[]),
            Err(Error::UndefinedMetric(_))
        ));
    }

    fn human(set: &[&str]) -> impl Fn(&str) -> Option<BTreeSet<String>> {
        let s: BTreeSet<String> = set.iter().map(|x| x.to_string()).collect();
        move |_| Some(s.clone())
    }

    #[test]
    fn divergent_all_human_is_zero() {
        let rs = vec![record(Verdict::Correct, &[], &["a", "b"])];
        let refs: Vec<&GenerationRecord> = rs.iter().collect();
        let out = neocoder_divergent(&refs, human(&["a", "b", "c"])).unwrap();
        assert_eq!(out.value, 0.0);
    }

    #[test]
    fn divergent_half_novel() {
        let rs = vec![record(Verdict::Correct, &[], &["a", "b"])];
        let refs: Vec<&GenerationRecord> = rs.iter().collect();
        let out = neocoder_divergent(&refs, human(&["a"])).unwrap();
        assert_eq!(out.value, 0.5);
    }

    #[test]
    fn divergent_averages_records_and_counts_empties() {
        let rs = vec![
            record(Verdict::Correct, &[], &["a", "b"]),  // ratio 0.5
            record(Verdict::Correct, &[], &["x"]),       // ratio 1.0
            record(Verdict::Correct, &[], &[]),          // excluded
        ];
        let refs: Vec<&GenerationRecord> = rs.iter().collect();
        let out = neocoder_divergent(&refs, human(&["a"])).unwrap();
        assert_eq!(out.value, 0.75);
        assert_eq!(out.excluded_empty, 1);
    }

    #[test]
    fn constraint_satisfaction_fractions() {
        assert_eq!(constraint_satisfaction(7, 7).unwrap(), 1.0);
        assert_eq!(constraint_satisfaction(0, 39).unwrap(), 0.0);
        assert!((constraint_satisfaction(23, 39).unwrap() - 0.58974).abs() < 1e-4);
        assert!(matches!(
            constraint_satisfaction(0, 0),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn coherence_norm_bounds() {
        assert_eq!(coherence_norm(5.0).unwrap(), 1.0);
        assert_eq!(coherence_norm(1.0).unwrap(), 0.2);
        assert!((coherence_norm(3.5).unwrap() - 0.7).abs() < 1e-12);
        assert!(matches!(coherence_norm(0.9), Err(Error::Input(_))));
        assert!(matches!(coherence_norm(5.1), Err(Error::Input(_))));
    }

    #[test]
    fn dist_n_all_unique_is_one() {
        assert_eq!(dist_n("a b c d e").unwrap(), 1.0);
    }

    #[test]
    fn dist_n_matches_hand_enumeration() {
        // "a b a b a b": bigrams 2/5, trigrams 2/4, 4-grams 2/3 -> 2/15
        let v = dist_n("a b a b a b").unwrap();
        assert!((v - 2.0 / 15.0).abs() < 1e-12);
    }

    #[test]
    fn duplicating_text_strictly_decreases_dist_n() {
        let s = "alpha beta gamma delta epsilon";
        let doubled = format!("{s} {s}");
        assert!(dist_n(&doubled).unwrap() < dist_n(s).unwrap());
    }

    #[test]
    fn dist_n_too_short_is_undefined() {
        assert!(matches!(dist_n("a b c"), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn dist_n_strips_punctuation_and_case() {
        assert_eq!(
            tokenize_words("Hello, World! don't stop"),
            vec!["hello", "world", "dont", "stop"]
        );
    }

    #[test]
    fn quc_products() {
        assert_eq!(quc(1.0, 1.0).unwrap(), 1.0);
        assert_eq!(quc(0.9, 0.0).unwrap(), 0.0);
        assert!((quc(0.7, 0.5897).unwrap() - 0.41279).abs() < 1e-5);
        assert!(matches!(quc(1.2, 0.5), Err(Error::Input(_))));
    }

    #[test]
    fn pct_diff_basics() {
        assert_eq!(pct_diff(0.5, 0.5).unwrap(), 0.0);
        assert!((pct_diff(0.55, 0.50).unwrap() - 10.0).abs() < 1e-12);
        assert!((pct_diff(0.45, 0.50).unwrap() + 10.0).abs() < 1e-12);
        assert!(matches!(pct_diff(0.5, 0.0), Err(Error::UndefinedDelta(_))));
    }

    #[test]
    fn pct_diff_scale_invariance() {
        for (b, c) in [(0.4, 0.7), (1.0, 0.2), (3.0, 3.3)] {
            for a in [0.5, 2.0, 17.0] {
                let lhs = pct_diff(a * b, a * c).unwrap();
                let rhs = pct_diff(b, c).unwrap();
                assert!((lhs - rhs).abs() < 1e-9, "a={a} b={b} c={c}");
            }
        }
    }
}
