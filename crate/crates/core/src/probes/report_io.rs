//! Probe report text format, version 1:
//!
//! ```text
//! tlmprobe v1
//! model <model id>
//! geometry <n_layers> <n_heads> <d_head>
//! head <layer> <head> <accuracy>        (one line per head)
//! set_a <comma-separated layers>
//! set_b <comma-separated layers>
//! ```

use std::collections::BTreeSet;

use super::{Geometry, ProbeReport};
use crate::error::{Error, Result};

pub fn render_probe_report(report: &ProbeReport) -> String {
    let mut out = String::from("tlmprobe v1\n");
    out.push_str(&format!("model {}\n", report.source_model_id));
    out.push_str(&format!(
        "geometry {} {} {}\n",
        report.geometry.n_layers, report.geometry.n_heads, report.geometry.d_head
    ));
    for (l, row) in report.head_scores.iter().enumerate() {
        for (h, acc) in row.iter().enumerate() {
            out.push_str(&format!("head {} {} {acc:.9}\n", l + 1, h));
        }
    }
    out.push_str(&format!("set_a {}\n", join(&report.set_a)));
    out.push_str(&format!("set_b {}\n", join(&report.set_b)));
    out
}

pub fn parse_probe_report(text: &str) -> Result<ProbeReport> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| bad(0, "empty probe report"))?;
    if header.trim() != "tlmprobe v1" {
        return Err(bad(0, "expected header `tlmprobe v1`"));
    }

    let mut model = None;
    let mut geometry = None;
    let mut heads: Vec<(usize, usize, f64)> = Vec::new();
    let mut set_a = None;
    let mut set_b = None;

    for (lineno, raw) in lines {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("model") => {
                model = Some(
                    parts
                        .next()
                        .ok_or_else(|| bad(lineno, "model line needs an id"))?
                        .to_string(),
                );
            }
            Some("geometry") => {
                let vals: Vec<usize> = parts
                    .map(|p| p.parse().map_err(|_| bad(lineno, "bad geometry value")))
                    .collect::<Result<_>>()?;
                if vals.len() != 3 {
                    return Err(bad(lineno, "geometry needs n_layers n_heads d_head"));
                }
                geometry = Some(Geometry {
                    n_layers: vals[0],
                    n_heads: vals[1],
                    d_head: vals[2],
                });
            }
            Some("head") => {
                let layer: usize = parse_next(&mut parts, lineno, "layer")?;
                let head: usize = parse_next(&mut parts, lineno, "head")?;
                let acc: f64 = parse_next(&mut parts, lineno, "accuracy")?;
                heads.push((layer, head, acc));
            }
            Some("set_a") => set_a = Some(parse_layers(parts.next().unwrap_or(""), lineno)?),
            Some("set_b") => set_b = Some(parse_layers(parts.next().unwrap_or(""), lineno)?),
            other => return Err(bad(lineno, &format!("unknown line kind {other:?}"))),
        }
    }

    let source_model_id = model.ok_or_else(|| bad(0, "missing model line"))?;
    let geometry = geometry.ok_or_else(|| bad(0, "missing geometry line"))?;
    let mut head_scores = vec![vec![f64::NAN; geometry.n_heads]; geometry.n_layers];
    for (layer, head, acc) in heads {
        if layer == 0 || layer > geometry.n_layers || head >= geometry.n_heads {
            return Err(bad(0, &format!("head ({layer}, {head}) outside geometry")));
        }
        head_scores[layer - 1][head] = acc;
    }
    if head_scores.iter().flatten().any(|v| v.is_nan()) {
        return Err(bad(0, "missing head lines for some (layer, head)"));
    }
    let layer_scores = super::aggregate_to_layers(&head_scores)?;

    let report = ProbeReport {
        source_model_id,
        geometry,
        head_scores,
        layer_scores,
        set_a: set_a.ok_or_else(|| bad(0, "missing set_a line"))?,
        set_b: set_b.ok_or_else(|| bad(0, "missing set_b line"))?,
    };
    report.validate()?;
    Ok(report)
}

fn parse_next<'a, T: std::str::FromStr>(
    parts: &mut impl Iterator<Item = &'a str>,
    lineno: usize,
    what: &str,
) -> Result<T> {
    parts
        .next()
        .and_then(|p| p.parse().ok())
        .ok_or_else(|| bad(lineno, &format!("bad or missing {what}")))
}

fn parse_layers(s: &str, lineno: usize) -> Result<BTreeSet<usize>> {
    if s.is_empty() {
        return Ok(BTreeSet::new());
    }
    s.split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| bad(lineno, &format!("bad layer index {p:?}")))
        })
        .collect()
}

fn join(set: &BTreeSet<usize>) -> String {
    set.iter()
        .map(|l| l.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn bad(lineno: usize, message: &str) -> Error {
    Error::Load {
        line: Some(lineno + 1),
        message: message.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> ProbeReport {
        let head_scores = vec![
            vec![0.9, 0.5],
            vec![0.6, 0.6],
            vec![0.5, 0.4],
            vec![0.3, 0.2],
        ];
        let layer_scores = super::super::aggregate_to_layers(&head_scores).unwrap();
        let (set_a, set_b) = super::super::select_layer_sets(&layer_scores).unwrap();
        ProbeReport {
            source_model_id: "tlm-4x2x16-v258-s7-abc123".into(),
            geometry: Geometry {
                n_layers: 4,
                n_heads: 2,
                d_head: 8,
            },
            head_scores,
            layer_scores,
            set_a,
            set_b,
        }
    }

    #[test]
    fn roundtrip() {
        let report = sample_report();
        let text = render_probe_report(&report);
        let parsed = parse_probe_report(&text).unwrap();
        assert_eq!(parsed, report);
    }

    #[test]
    fn missing_head_line_rejected() {
        let report = sample_report();
        let text = render_probe_report(&report);
        let broken: String = text.lines().filter(|l| !l.starts_with("head 2 1")).fold(
            String::new(),
            |mut acc, l| {
                acc.push_str(l);
                acc.push('\n');
                acc
            },
        );
        assert!(parse_probe_report(&broken).is_err());
    }

    #[test]
    fn wrong_header_rejected() {
        assert!(parse_probe_report("tlmprobe v9\n").is_err());
    }
}
