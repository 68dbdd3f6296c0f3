//! Report builder: per-(method, state) cell metrics averaged over repeated
//! runs, then percentage differences against the baseline method.

use std::collections::{BTreeMap, BTreeSet};

use super::ops::{
    coherence_norm, constraint_satisfaction, dist_n, neocoder_convergent, neocoder_divergent, quc,
};
use super::{GenerationRecord, Method};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct CellKey {
    pub method: Method,
    pub state: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MetricName {
    Convergent,
    Divergent,
    DistN,
    Quc,
}

impl MetricName {
    pub const ALL: [MetricName; 4] = [
        MetricName::Convergent,
        MetricName::Divergent,
        MetricName::DistN,
        MetricName::Quc,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MetricName::Convergent => "convergent",
            MetricName::Divergent => "divergent",
            MetricName::DistN => "dist_n",
            MetricName::Quc => "quc",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CellMetrics {
    pub convergent: Option<f64>,
    pub divergent: Option<f64>,
    pub dist_n: Option<f64>,
    pub quc: Option<f64>,
    pub n_samples: usize,
    pub n_runs: usize,
    /// Records excluded from convergent creativity (unknown correctness).
    pub n_unknown_correctness: usize,
    /// Records excluded from divergent creativity (empty technique set).
    pub n_empty_techniques: usize,
}

impl CellMetrics {
    pub fn get(&self, metric: MetricName) -> Option<f64> {
        match metric {
            MetricName::Convergent => self.convergent,
            MetricName::Divergent => self.divergent,
            MetricName::DistN => self.dist_n,
            MetricName::Quc => self.quc,
        }
    }
}

/// Percentage difference from baseline for one (cell, metric).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PctDiff {
    Value(f64),
    /// The baseline value is exactly zero; the ratio is undefined and must
    /// be reported as such, never as 0.
    ZeroBaseline,
    /// The metric is absent on this cell or on the baseline cell.
    Missing,
}

#[derive(Debug, Clone)]
pub struct MetricReport {
    pub baseline: Method,
    pub methods: Vec<Method>,
    pub states: Vec<usize>,
    pub cells: BTreeMap<CellKey, CellMetrics>,
    pub pct: BTreeMap<CellKey, BTreeMap<MetricName, PctDiff>>,
    /// Expected cells with no records at all.
    pub gaps: Vec<CellKey>,
}

/// Build the report. Cell values are the mean over run_index of per-run
/// metrics; the result is invariant to record ordering. `expected`
/// (methods, states) marks empty cells as gaps instead of dropping them
/// silently.
pub fn build_report(
    records: &[GenerationRecord],
    human_techniques: &BTreeMap<String, BTreeSet<String>>,
    baseline: Method,
    expected: Option<(&[Method], &[usize])>,
) -> Result<MetricReport> {
    for r in records {
        r.validate()?;
    }
    // canonical order makes every downstream mean independent of input order
    let mut sorted: Vec<&GenerationRecord> = records.iter().collect();
    sorted.sort_by_cached_key(|r| serde_json::to_string(r).expect("record serializes"));

    let mut by_cell: BTreeMap<CellKey, Vec<&GenerationRecord>> = BTreeMap::new();
    for r in &sorted {
        by_cell
            .entry(CellKey {
                method: r.method,
                state: r.state_t,
            })
            .or_default()
            .push(r);
    }

    let methods: Vec<Method> = match expected {
        Some((m, _)) => m.to_vec(),
        None => by_cell.keys().map(|k| k.method).collect::<BTreeSet<_>>().into_iter().collect(),
    };
    let states: Vec<usize> = match expected {
        Some((_, s)) => {
            let mut v = s.to_vec();
            v.sort_unstable();
            v
        }
        None => by_cell.keys().map(|k| k.state).collect::<BTreeSet<_>>().into_iter().collect(),
    };

    let mut cells = BTreeMap::new();
    let mut gaps = Vec::new();
    for &method in &methods {
        for &state in &states {
            let key = CellKey { method, state };
            match by_cell.get(&key) {
                Some(cell_records) => {
                    cells.insert(key, cell_metrics(cell_records, human_techniques)?);
                }
                None => gaps.push(key),
            }
        }
    }
    // record cells outside the expected grid too, rather than dropping them
    for (key, cell_records) in &by_cell {
        if !cells.contains_key(key) {
            cells.insert(*key, cell_metrics(cell_records, human_techniques)?);
        }
    }

    // every state being compared needs its baseline cell
    let mut missing_baseline = Vec::new();
    for key in cells.keys() {
        if key.method != baseline {
            let base_key = CellKey {
                method: baseline,
                state: key.state,
            };
            if !cells.contains_key(&base_key) {
                missing_baseline.push(format!("({}, state {})", baseline.as_str(), key.state));
            }
        }
    }
    if !missing_baseline.is_empty() {
        missing_baseline.sort();
        missing_baseline.dedup();
        return Err(Error::Report(format!(
            "missing baseline cells: {}",
            missing_baseline.join(", ")
        )));
    }

    let mut pct = BTreeMap::new();
    for (key, cell) in &cells {
        let base_cell = &cells[&CellKey {
            method: baseline,
            state: key.state,
        }];
        let mut per_metric = BTreeMap::new();
        for metric in MetricName::ALL {
            let entry = if key.method == baseline {
                match cell.get(metric) {
                    Some(_) => PctDiff::Value(0.0),
                    None => PctDiff::Missing,
                }
            } else {
                match (cell.get(metric), base_cell.get(metric)) {
                    (Some(v), Some(b)) if b == 0.0 => {
                        let _ = v;
                        PctDiff::ZeroBaseline
                    }
                    (Some(v), Some(b)) => PctDiff::Value((v - b) / b * 100.0),
                    _ => PctDiff::Missing,
                }
            };
            per_metric.insert(metric, entry);
        }
        pct.insert(*key, per_metric);
    }

    Ok(MetricReport {
        baseline,
        methods,
        states,
        cells,
        pct,
        gaps,
    })
}

/// Metrics for one cell: compute each metric per run, then average over the
/// runs where it is defined.
fn cell_metrics(
    records: &[&GenerationRecord],
    human_techniques: &BTreeMap<String, BTreeSet<String>>,
) -> Result<CellMetrics> {
    let mut by_run: BTreeMap<usize, Vec<&GenerationRecord>> = BTreeMap::new();
    for r in records {
        by_run.entry(r.run_index).or_default().push(r);
    }

    let mut convergent_runs = Vec::new();
    let mut divergent_runs = Vec::new();
    let mut dist_runs = Vec::new();
    let mut quc_runs = Vec::new();
    let mut n_unknown = 0usize;
    let mut n_empty = 0usize;

    for run_records in by_run.values() {
        n_unknown += run_records
            .iter()
            .filter(|r| r.correctness == super::Verdict::Unknown)
            .count();

        if let Ok(v) = neocoder_convergent(run_records) {
            convergent_runs.push(v);
        }
        match neocoder_divergent(run_records, |pid| {
            Some(
                human_techniques
                    .get(pid)
                    .cloned()
                    .unwrap_or_default(),
            )
        }) {
            Ok(out) => {
                divergent_runs.push(out.value);
                n_empty += out.excluded_empty;
            }
            Err(Error::UndefinedMetric(_)) => {
                n_empty += run_records.iter().filter(|r| r.techniques.is_empty()).count();
            }
            Err(e) => return Err(e),
        }

        let dists: Vec<f64> = run_records
            .iter()
            .filter_map(|r| dist_n(&r.output_text).ok())
            .collect();
        if !dists.is_empty() {
            dist_runs.push(dists.iter().sum::<f64>() / dists.len() as f64);
        }

        // QUC composes the run-level aggregates: mean coherence normalized,
        // times mean per-record constraint satisfaction.
        let coh: Vec<f64> = run_records
            .iter()
            .filter_map(|r| r.judge_scores.coherence)
            .collect();
        let cs: Vec<f64> = run_records
            .iter()
            .filter_map(|r| {
                r.judge_scores
                    .satisfied_constraints
                    .and_then(|s| constraint_satisfaction(s, r.state_t).ok())
            })
            .collect();
        if !coh.is_empty() && !cs.is_empty() {
            let coh_mean = coh.iter().sum::<f64>() / coh.len() as f64;
            let cs_mean = cs.iter().sum::<f64>() / cs.len() as f64;
            quc_runs.push(quc(coherence_norm(coh_mean)?, cs_mean)?);
        }
    }

    let mean = |v: &[f64]| -> Option<f64> {
        if v.is_empty() {
            None
        } else {
            Some(v.iter().sum::<f64>() / v.len() as f64)
        }
    };

    Ok(CellMetrics {
        convergent: mean(&convergent_runs),
        divergent: mean(&divergent_runs),
        dist_n: mean(&dist_runs),
        quc: mean(&quc_runs),
        n_samples: records.len(),
        n_runs: by_run.len(),
        n_unknown_correctness: n_unknown,
        n_empty_techniques: n_empty,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{JudgeScores, Verdict};

    fn record(
        method: Method,
        state: usize,
        run: usize,
        correct: Verdict,
        techniques: &[&str],
    ) -> GenerationRecord {
        GenerationRecord {
            problem_id: "p1".into(),
            state_t: state,
            method,
            run_index: run,
            prompt_text: "prompt".into(),
            output_text: "alpha beta gamma delta epsilon zeta".into(),
            techniques: techniques.iter().map(|s| s.to_string()).collect(),
            constraints_violated: BTreeSet::new(),
            correctness: correct,
            judge_scores: JudgeScores::default(),
        }
    }

    fn humans() -> BTreeMap<String, BTreeSet<String>> {
        let mut m = BTreeMap::new();
        m.insert("p1".to_string(), ["a".to_string()].into_iter().collect());
        m
    }

    #[test]
    fn baseline_only_report_has_zero_pct() {
        let records = vec![
            record(Method::Baseline, 1, 1, Verdict::Correct, &["a"]),
            record(Method::Baseline, 1, 2, Verdict::Correct, &["a", "b"]),
        ];
        let report = build_report(&records, &humans(), Method::Baseline, None).unwrap();
        let key = CellKey {
            method: Method::Baseline,
            state: 1,
        };
        assert_eq!(report.pct[&key][&MetricName::Convergent], PctDiff::Value(0.0));
        assert!(report.gaps.is_empty());
    }

    #[test]
    fn run_means_average_before_pct() {
        // three runs with convergent 0.4 / 0.5 / 0.6 (using 5-record runs)
        let mut records = Vec::new();
        for (run, hits) in [(1usize, 2usize), (2, 2), (3, 2)] {
            for i in 0..5 {
                let mut r = record(
                    Method::Baseline,
                    1,
                    run,
                    if i < hits { Verdict::Correct } else { Verdict::Incorrect },
                    &["a"],
                );
                r.output_text = format!("one two three four five {i}");
                records.push(r);
            }
        }
        // nudge run 1 to 0.4 (2/5) and run 3 to 0.6 (3/5)
        records[0].correctness = Verdict::Correct;
        records[1].correctness = Verdict::Correct;
        records[2].correctness = Verdict::Incorrect;
        records[12].correctness = Verdict::Correct;

        let report = build_report(&records, &humans(), Method::Baseline, None).unwrap();
        let key = CellKey {
            method: Method::Baseline,
            state: 1,
        };
        let cell = &report.cells[&key];
        assert!((cell.convergent.unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(cell.n_runs, 3);
        assert_eq!(cell.n_samples, 15);
    }

    #[test]
    fn shuffled_records_build_identical_reports() {
        let mut records = vec![
            record(Method::Baseline, 1, 1, Verdict::Correct, &["a", "b"]),
            record(Method::Dola, 1, 1, Verdict::Incorrect, &["b"]),
            record(Method::Baseline, 2, 1, Verdict::Correct, &["a"]),
            record(Method::Dola, 2, 1, Verdict::Correct, &["c", "d"]),
        ];
        let r1 = build_report(&records, &humans(), Method::Baseline, None).unwrap();
        records.reverse();
        let r2 = build_report(&records, &humans(), Method::Baseline, None).unwrap();
        assert_eq!(r1.cells, r2.cells);
        assert_eq!(r1.pct, r2.pct);
    }

    #[test]
    fn missing_baseline_cell_is_an_error() {
        let records = vec![record(Method::Dola, 1, 1, Verdict::Correct, &["a"])];
        let err = build_report(&records, &humans(), Method::Baseline, None).unwrap_err();
        match err {
            Error::Report(msg) => assert!(msg.contains("state 1"), "{msg}"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn expected_grid_marks_gaps() {
        let records = vec![record(Method::Baseline, 1, 1, Verdict::Correct, &["a"])];
        let report = build_report(
            &records,
            &humans(),
            Method::Baseline,
            Some((&[Method::Baseline], &[1, 2])),
        )
        .unwrap();
        assert_eq!(
            report.gaps,
            vec![CellKey {
                method: Method::Baseline,
                state: 2
            }]
        );
    }

    #[test]
    fn quc_composes_judge_scores() {
        let mut r = record(Method::Baseline, 20, 1, Verdict::Unknown, &[]);
        r.judge_scores = JudgeScores {
            coherence: Some(4.0),
            satisfied_constraints: Some(10),
        };
        let report = build_report(&[r], &humans(), Method::Baseline, None).unwrap();
        let cell = &report.cells[&CellKey {
            method: Method::Baseline,
            state: 20,
        }];
        // (4/5) * (10/20) = 0.4
        assert!((cell.quc.unwrap() - 0.4).abs() < 1e-12);
        assert_eq!(cell.convergent, None);
        assert_eq!(cell.n_unknown_correctness, 1);
    }
}
