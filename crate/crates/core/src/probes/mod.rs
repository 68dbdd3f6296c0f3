//! Linear probes over attention-head activations: predict whether a
//! generation will be divergently creative, aggregate head accuracies to
//! layer scores, and pick the layer sets that steer creative decoding.

mod dataset;
mod report_io;
mod select;
mod train;

pub use dataset::{build_probe_dataset, ProbeDataset, ProbeExample};
pub use report_io::{parse_probe_report, render_probe_report};
pub use select::{aggregate_to_layers, check_model_specificity, select_layer_sets};
pub use train::{train_head_probes, train_probes_full, TrainedProbes};

use crate::decode::DecodeConfig;
use crate::error::{Error, Result};
use std::collections::BTreeSet;

/// Activation geometry a probe set is bound to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Geometry {
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_head: usize,
}

/// Probe accuracies per head, aggregated layer scores, and the selected
/// layer sets. Bound to the model whose activations trained it.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub source_model_id: String,
    pub geometry: Geometry,
    /// head_scores[layer-1][head] = held-out validation accuracy.
    pub head_scores: Vec<Vec<f64>>,
    /// Mean of each layer's head scores.
    pub layer_scores: Vec<f64>,
    /// Creativity-correlated layers (1-based, top scores).
    pub set_a: BTreeSet<usize>,
    /// Anti-correlated layers (bottom scores).
    pub set_b: BTreeSet<usize>,
}

impl ProbeReport {
    /// Install this report's layer sets into a decode config, refusing a
    /// model mismatch: probes only transfer to the model they were trained
    /// on.
    pub fn apply_to_config(&self, config: &mut DecodeConfig, model_id: &str) -> Result<()> {
        if !check_model_specificity(self, model_id) {
            return Err(Error::Config(format!(
                "probe report was trained on {:?} but the model is {:?}",
                self.source_model_id, model_id
            )));
        }
        config.set_a = self.set_a.clone();
        config.set_b = self.set_b.clone();
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.head_scores.len() != self.geometry.n_layers {
            return Err(Error::Dataset(format!(
                "head_scores has {} rows, geometry says {}",
                self.head_scores.len(),
                self.geometry.n_layers
            )));
        }
        for (l, row) in self.head_scores.iter().enumerate() {
            if row.len() != self.geometry.n_heads {
                return Err(Error::Dataset(format!(
                    "layer {} has {} head scores, geometry says {}",
                    l + 1,
                    row.len(),
                    self.geometry.n_heads
                )));
            }
            if row.iter().any(|&s| !(0.0..=1.0).contains(&s)) {
                return Err(Error::Dataset(format!("layer {} accuracy outside [0,1]", l + 1)));
            }
        }
        if !self.set_a.is_disjoint(&self.set_b) {
            return Err(Error::Dataset("set_a and set_b overlap".into()));
        }
        Ok(())
    }
}
