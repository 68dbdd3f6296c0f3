//! Probe dataset construction: condition the model on each record's prompt
//! plus a fraction of its own output, harvest head activations at the last
//! position, and label by a median split of the divergent scores.

use std::collections::{BTreeMap, BTreeSet};

use super::Geometry;
use crate::error::{Error, Result};
use crate::metrics::GenerationRecord;
use crate::tinylm::{ByteTokenizer, Model};

#[derive(Debug, Clone)]
pub struct ProbeExample {
    /// activations[layer-1][head] = that head's output vector (d_head) at
    /// the last position of the conditioned context.
    pub activations: Vec<Vec<Vec<f32>>>,
    pub label: bool,
}

#[derive(Debug, Clone)]
pub struct ProbeDataset {
    pub examples: Vec<ProbeExample>,
    pub conditioning_fraction: f64,
    pub source_model_id: String,
    pub geometry: Geometry,
    /// Records skipped because their divergent score was undefined.
    pub skipped_records: usize,
}

impl ProbeDataset {
    pub fn validate(&self) -> Result<()> {
        if self.examples.is_empty() {
            return Err(Error::Dataset("probe dataset is empty".into()));
        }
        let pos = self.examples.iter().filter(|e| e.label).count();
        if pos == 0 || pos == self.examples.len() {
            return Err(Error::Dataset(
                "probe dataset is degenerate: only one label class present".into(),
            ));
        }
        for e in &self.examples {
            if e.activations.len() != self.geometry.n_layers
                || e.activations
                    .iter()
                    .any(|l| l.len() != self.geometry.n_heads)
                || e.activations
                    .iter()
                    .any(|l| l.iter().any(|h| h.len() != self.geometry.d_head))
            {
                return Err(Error::Dataset(
                    "example activation geometry does not match the source model".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn from_examples(
        examples: Vec<ProbeExample>,
        conditioning_fraction: f64,
        source_model_id: String,
        geometry: Geometry,
    ) -> Result<ProbeDataset> {
        let ds = ProbeDataset {
            examples,
            conditioning_fraction,
            source_model_id,
            geometry,
            skipped_records: 0,
        };
        ds.validate()?;
        Ok(ds)
    }
}

/// Build the dataset from generation records. For each record, the prompt
/// concatenated with the first floor(fraction * output length) output
/// tokens is fed through the model; the label is 1 iff the record's
/// divergent score exceeds the median across the record set.
pub fn build_probe_dataset(
    records: &[GenerationRecord],
    human_techniques: &BTreeMap<String, BTreeSet<String>>,
    model: &Model,
    fraction: f64,
) -> Result<ProbeDataset> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Input(format!(
            "conditioning fraction {fraction} outside [0, 1]"
        )));
    }
    let tok = ByteTokenizer;
    let empty = BTreeSet::new();

    let mut scored: Vec<(&GenerationRecord, f64)> = Vec::new();
    let mut skipped = 0usize;
    for r in records {
        let human = human_techniques.get(&r.problem_id).unwrap_or(&empty);
        match r.divergent_ratio(human) {
            Some(score) => scored.push((r, score)),
            None => skipped += 1,
        }
    }
    if scored.is_empty() {
        return Err(Error::Dataset(
            "no record has a defined divergent score".into(),
        ));
    }

    let median = {
        let mut s: Vec<f64> = scored.iter().map(|(_, v)| *v).collect();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = s.len();
        if n % 2 == 1 {
            s[n / 2]
        } else {
            0.5 * (s[n / 2 - 1] + s[n / 2])
        }
    };

    let geometry = Geometry {
        n_layers: model.config().n_layers,
        n_heads: model.config().n_heads,
        d_head: model.config().d_head,
    };
    let mut examples = Vec::with_capacity(scored.len());
    for (r, score) in &scored {
        let mut context = tok.encode(&r.prompt_text);
        let output_tokens = tok.encode(&r.output_text);
        let take = ((fraction * output_tokens.len() as f64).floor() as usize)
            .min(output_tokens.len());
        context.extend_from_slice(&output_tokens[..take]);
        if context.is_empty() {
            return Err(Error::Input(format!(
                "record {} has an empty prompt; nothing to condition on",
                r.problem_id
            )));
        }
        // keep the most recent tokens when the context overflows
        let max = model.config().max_seq_len;
        if context.len() > max {
            context.drain(..context.len() - max);
        }
        let trace = model.forward(&context)?;
        examples.push(ProbeExample {
            activations: trace.head_activations,
            label: *score > median,
        });
    }

    let ds = ProbeDataset {
        examples,
        conditioning_fraction: fraction,
        source_model_id: model.model_id().to_string(),
        geometry,
        skipped_records: skipped,
    };
    ds.validate()?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{JudgeScores, Method, Verdict};
    use crate::tinylm::ModelConfig;

    fn model() -> Model {
        Model::init(ModelConfig {
            n_layers: 4,
            n_heads: 2,
            d_model: 16,
            d_head: 8,
            vocab_size: 258,
            max_seq_len: 64,
            seed: 4,
        })
        .unwrap()
    }

    fn record(id: &str, output: &str, techniques: &[&str]) -> GenerationRecord {
        GenerationRecord {
            problem_id: id.into(),
            state_t: 0,
            method: Method::Baseline,
            run_index: 1,
            prompt_text: format!("solve {id}"),
            output_text: output.into(),
            techniques: techniques.iter().map(|s| s.to_string()).collect(),
            constraints_violated: BTreeSet::new(),
            correctness: Verdict::Unknown,
            judge_scores: JudgeScores::default(),
        }
    }

    fn humans(novel_free: &[&str]) -> BTreeMap<String, BTreeSet<String>> {
        let mut m = BTreeMap::new();
        for id in novel_free {
            m.insert(
                id.to_string(),
                ["known".to_string()].into_iter().collect(),
            );
        }
        m
    }

    #[test]
    fn median_split_balances_labels() {
        let m = model();
        // 10 records with distinct divergent scores: k novel out of 10
        let records: Vec<GenerationRecord> = (0..10)
            .map(|k| {
                let mut techs: Vec<String> = (0..k).map(|i| format!("novel{i}")).collect();
                techs.extend((k..10).map(|_| "known".to_string()));
                let tech_refs: Vec<&str> = techs.iter().map(|s| s.as_str()).collect();
                record(&format!("p{k}"), "generated output text here", &tech_refs)
            })
            .collect();
        let ids: Vec<&str> = (0..10).map(|_| "x").collect();
        let mut human = humans(&ids);
        for k in 0..10 {
            human.insert(format!("p{k}"), ["known".to_string()].into_iter().collect());
        }
        let ds = build_probe_dataset(&records, &human, &m, 0.4).unwrap();
        let pos = ds.examples.iter().filter(|e| e.label).count();
        assert_eq!(pos, 5);
        assert_eq!(ds.examples.len(), 10);
    }

    #[test]
    fn fraction_point_four_conditions_on_40_percent() {
        let m = model();
        let out_100: String = "x".repeat(50); // 50 byte tokens
        let records = vec![
            record("p0", &out_100, &["novel0"]),
            record("p1", &out_100, &["known"]),
        ];
        let human = humans(&["p0", "p1"]);
        // prompt "solve p0" = 8 tokens; 0.4 * 50 = 20 output tokens
        let ds = build_probe_dataset(&records, &human, &m, 0.4).unwrap();
        assert_eq!(ds.conditioning_fraction, 0.4);
        assert_eq!(ds.examples.len(), 2);
    }

    #[test]
    fn fraction_zero_uses_prompt_only() {
        let m = model();
        let records = vec![
            record("p0", "ignored output", &["novel0"]),
            record("p1", "ignored output", &["known"]),
        ];
        let human = humans(&["p0", "p1"]);
        let ds = build_probe_dataset(&records, &human, &m, 0.0).unwrap();
        // prompt-only conditioning must be insensitive to the output text
        let records2 = vec![
            record("p0", "different text entirely", &["novel0"]),
            record("p1", "another different one", &["known"]),
        ];
        let ds2 = build_probe_dataset(&records2, &human, &m, 0.0).unwrap();
        for (a, b) in ds.examples.iter().zip(&ds2.examples) {
            assert_eq!(a.activations, b.activations);
        }
    }

    #[test]
    fn single_class_is_degenerate() {
        let m = model();
        let records = vec![
            record("p0", "out", &["known"]),
            record("p1", "out", &["known"]),
        ];
        let human = humans(&["p0", "p1"]);
        assert!(matches!(
            build_probe_dataset(&records, &human, &m, 0.4),
            Err(Error::Dataset(_))
        ));
    }

    #[test]
    fn empty_technique_records_are_skipped() {
        let m = model();
        let records = vec![
            record("p0", "out", &["novel0"]),
            record("p1", "out", &["known"]),
            record("p2", "out", &[]),
        ];
        let mut human = humans(&["p0", "p1"]);
        human.insert("p2".into(), BTreeSet::new());
        let ds = build_probe_dataset(&records, &human, &m, 0.4).unwrap();
        assert_eq!(ds.skipped_records, 1);
        assert_eq!(ds.examples.len(), 2);
    }
}
