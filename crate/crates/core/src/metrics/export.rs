//! Report serialization: a flat CSV and gnuplot-ready percentage-difference
//! tables (one file per metric, one column per method).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::report::{CellKey, MetricName, MetricReport, PctDiff};
use crate::error::Result;

/// CSV with one row per (method, state, metric). Undefined percentage
/// differences are written as the literal `undefined`; absent metric values
/// as `NA`.
pub fn render_metrics_csv(report: &MetricReport) -> String {
    let mut out = String::from("method,state,metric,value,pct_diff,n_samples\n");
    for (key, cell) in &report.cells {
        for metric in MetricName::ALL {
            let value = match cell.get(metric) {
                Some(v) => format!("{v:.9}"),
                None => "NA".to_string(),
            };
            let pct = match report.pct[key][&metric] {
                PctDiff::Value(v) => format!("{v:.9}"),
                PctDiff::ZeroBaseline => "undefined".to_string(),
                PctDiff::Missing => "NA".to_string(),
            };
            writeln!(
                out,
                "{},{},{},{},{},{}",
                key.method.as_str(),
                key.state,
                metric.as_str(),
                value,
                pct,
                cell.n_samples
            )
            .expect("string write");
        }
    }
    out
}

pub fn write_metrics_csv(report: &MetricReport, path: &Path) -> Result<()> {
    fs::write(path, render_metrics_csv(report))?;
    Ok(())
}

/// One plot-data table per metric that appears anywhere in the report:
/// `# state method...` header, then one row per state with the percentage
/// difference per method (baseline column is all zeros; undefined entries
/// are `nan`).
pub fn render_plot_data(report: &MetricReport, metric: MetricName) -> Option<String> {
    let present = report
        .cells
        .values()
        .any(|cell| cell.get(metric).is_some());
    if !present {
        return None;
    }
    let mut out = String::from("# state");
    for m in &report.methods {
        write!(out, " {}", m.as_str()).expect("string write");
    }
    out.push('\n');
    for &state in &report.states {
        write!(out, "{state}").expect("string write");
        for &method in &report.methods {
            let key = CellKey { method, state };
            let entry = report.pct.get(&key).and_then(|m| m.get(&metric));
            match entry {
                Some(PctDiff::Value(v)) => write!(out, " {v:.9}").expect("string write"),
                _ => write!(out, " nan").expect("string write"),
            }
        }
        out.push('\n');
    }
    Some(out)
}

/// Write every available `pct_diff_<metric>.dat` file into `dir`; returns
/// the file names written.
pub fn write_plot_data(report: &MetricReport, dir: &Path) -> Result<Vec<String>> {
    let mut written = Vec::new();
    for metric in MetricName::ALL {
        if let Some(table) = render_plot_data(report, metric) {
            let name = format!("pct_diff_{}.dat", metric.as_str());
            fs::write(dir.join(&name), table)?;
            written.push(name);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::report::build_report;
    use crate::metrics::{GenerationRecord, JudgeScores, Method, Verdict};
    use std::collections::{BTreeMap, BTreeSet};

    fn record(method: Method, state: usize, correct: bool) -> GenerationRecord {
        GenerationRecord {
            problem_id: "p".into(),
            state_t: state,
            method,
            run_index: 1,
            prompt_text: String::new(),
            output_text: "w x y z w x".into(),
            techniques: ["a".to_string()].into_iter().collect(),
            constraints_violated: BTreeSet::new(),
            correctness: if correct {
                Verdict::Correct
            } else {
                Verdict::Incorrect
            },
            judge_scores: JudgeScores::default(),
        }
    }

    #[test]
    fn csv_and_plots_are_deterministic() {
        let records = vec![
            record(Method::Baseline, 0, true),
            record(Method::Baseline, 1, false),
            record(Method::Dola, 0, true),
            record(Method::Dola, 1, true),
        ];
        let report =
            build_report(&records, &BTreeMap::new(), Method::Baseline, None).unwrap();
        let csv1 = render_metrics_csv(&report);
        let csv2 = render_metrics_csv(&report);
        assert_eq!(csv1, csv2);
        assert!(csv1.starts_with("method,state,metric,value,pct_diff,n_samples"));

        let plot = render_plot_data(&report, MetricName::Convergent).unwrap();
        let lines: Vec<&str> = plot.lines().collect();
        assert_eq!(lines[0], "# state baseline dola");
        // 2 states -> 2 data rows, 2 method columns each
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1].split_whitespace().count(), 3);
    }

    #[test]
    fn baseline_only_plot_rows_are_zero() {
        let records = vec![record(Method::Baseline, 0, true), record(Method::Baseline, 1, true)];
        let report =
            build_report(&records, &BTreeMap::new(), Method::Baseline, None).unwrap();
        let plot = render_plot_data(&report, MetricName::Convergent).unwrap();
        for line in plot.lines().skip(1) {
            let vals: Vec<&str> = line.split_whitespace().skip(1).collect();
            assert!(vals.iter().all(|v| v.parse::<f64>().unwrap() == 0.0));
        }
    }

    #[test]
    fn zero_baseline_surfaces_as_undefined() {
        let records = vec![
            record(Method::Baseline, 1, false), // convergent 0.0
            record(Method::Dola, 1, true),
        ];
        let report =
            build_report(&records, &BTreeMap::new(), Method::Baseline, None).unwrap();
        let csv = render_metrics_csv(&report);
        let dola_row = csv
            .lines()
            .find(|l| l.starts_with("dola,1,convergent"))
            .unwrap();
        assert!(dola_row.contains("undefined"), "{dola_row}");
    }
}
