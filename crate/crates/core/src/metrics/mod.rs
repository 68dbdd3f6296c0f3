//! Creativity metrics and percentage-difference reporting.

mod export;
mod ops;
mod report;

pub use export::{write_metrics_csv, write_plot_data};
pub use ops::{
    coherence_norm, constraint_satisfaction, dist_n, neocoder_convergent, neocoder_divergent,
    pct_diff, quc, DivergentOutcome,
};
pub use report::{build_report, CellKey, CellMetrics, MetricName, MetricReport, PctDiff};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Generation method label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Baseline,
    Cove,
    Dola,
    CreativeDola,
    Rag,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::Cove => "cove",
            Method::Dola => "dola",
            Method::CreativeDola => "creative_dola",
            Method::Rag => "rag",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        match s {
            "baseline" => Ok(Method::Baseline),
            "cove" => Ok(Method::Cove),
            "dola" => Ok(Method::Dola),
            "creative_dola" => Ok(Method::CreativeDola),
            "rag" => Ok(Method::Rag),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

/// Correctness verdict from a checker. `Unknown` records are excluded from
/// convergent creativity and counted in the report diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Correct,
    Incorrect,
    Unknown,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct JudgeScores {
    /// Coherence rating 1-5.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub coherence: Option<f64>,
    /// Constraints judged satisfied, out of the record's `state_t`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub satisfied_constraints: Option<usize>,
}

impl JudgeScores {
    fn is_empty(&self) -> bool {
        self.coherence.is_none() && self.satisfied_constraints.is_none()
    }
}

/// One generation attempt with everything the metrics need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub problem_id: String,
    /// Number of active constraints.
    pub state_t: usize,
    pub method: Method,
    /// 1-based repeat index within the cell.
    pub run_index: usize,
    /// The exact prompt sent to the generator (kept so probe datasets can
    /// re-condition the model on it).
    pub prompt_text: String,
    pub output_text: String,
    /// Techniques the judge extracted from the output.
    pub techniques: BTreeSet<String>,
    /// Techniques that are also active constraints (always a subset of
    /// `techniques`).
    pub constraints_violated: BTreeSet<String>,
    pub correctness: Verdict,
    #[serde(skip_serializing_if = "JudgeScores::is_empty", default)]
    pub judge_scores: JudgeScores,
}

impl GenerationRecord {
    pub fn validate(&self) -> Result<()> {
        if !self.constraints_violated.is_subset(&self.techniques) {
            return Err(Error::Input(format!(
                "record {}: constraints_violated is not a subset of techniques",
                self.problem_id
            )));
        }
        if self.run_index == 0 {
            return Err(Error::Input("run_index is 1-based".into()));
        }
        Ok(())
    }

    /// Per-record divergent ratio |T \ T_hat| / |T|; None when the record
    /// has no techniques.
    pub fn divergent_ratio(&self, human_techniques: &BTreeSet<String>) -> Option<f64> {
        if self.techniques.is_empty() {
            return None;
        }
        let novel = self.techniques.difference(human_techniques).count();
        Some(novel as f64 / self.techniques.len() as f64)
    }
}

/// A problem with its cumulative constraint schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub problem_id: String,
    pub statement: String,
    /// constraints_by_state[t-1] is the active set at state t; sets are
    /// cumulative.
    pub constraints_by_state: Vec<Vec<String>>,
    /// Techniques observed in reference human solutions.
    #[serde(default)]
    pub human_techniques: BTreeSet<String>,
    /// Expected output per test input (convergent correctness oracle).
    #[serde(default)]
    pub tests: Vec<TestCase>,
    /// Story-revision datasets carry a pre-generated base story.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub base_story: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub input: String,
    pub expected: String,
}

impl ProblemSpec {
    pub fn max_state(&self) -> usize {
        self.constraints_by_state.len()
    }

    /// Active constraints at state t (state 0 is the empty set).
    pub fn constraints_at(&self, t: usize) -> Result<&[String]> {
        if t == 0 {
            return Ok(&[]);
        }
        self.constraints_by_state
            .get(t - 1)
            .map(|v| v.as_slice())
            .ok_or_else(|| {
                Error::Input(format!(
                    "problem {} has no state {} (max {})",
                    self.problem_id,
                    t,
                    self.max_state()
                ))
            })
    }

    pub fn validate(&self) -> Result<()> {
        for (i, pair) in self.constraints_by_state.windows(2).enumerate() {
            let prev: BTreeSet<&String> = pair[0].iter().collect();
            let next: BTreeSet<&String> = pair[1].iter().collect();
            if !prev.is_subset(&next) {
                return Err(Error::Input(format!(
                    "problem {}: constraints at state {} are not a subset of state {}",
                    self.problem_id,
                    i + 1,
                    i + 2
                )));
            }
        }
        Ok(())
    }
}
