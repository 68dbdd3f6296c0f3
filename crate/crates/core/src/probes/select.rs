//! Layer aggregation and the A/B layer-set selection rule.

use std::collections::BTreeSet;

use super::ProbeReport;
use crate::error::{Error, Result};

/// Layer score = arithmetic mean of its heads' scores.
pub fn aggregate_to_layers(head_scores: &[Vec<f64>]) -> Result<Vec<f64>> {
    if head_scores.is_empty() || head_scores.iter().any(|r| r.is_empty()) {
        return Err(Error::Input("head score matrix is empty".into()));
    }
    Ok(head_scores
        .iter()
        .map(|row| row.iter().sum::<f64>() / row.len() as f64)
        .collect())
}

/// Top-k layers by score into set A, bottom-k into set B, where
/// k = min(5, floor(n_layers / 2)). One ranking (score descending, lower
/// layer index first on ties) feeds both ends, so the sets are always
/// disjoint.
pub fn select_layer_sets(layer_scores: &[f64]) -> Result<(BTreeSet<usize>, BTreeSet<usize>)> {
    let n = layer_scores.len();
    let k = 5.min(n / 2);
    if k == 0 {
        return Err(Error::Config(format!(
            "need at least 2 layers to split into sets, got {n}"
        )));
    }
    let mut ranked: Vec<(usize, f64)> = layer_scores
        .iter()
        .enumerate()
        .map(|(i, &s)| (i + 1, s))
        .collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let set_a = ranked[..k].iter().map(|&(l, _)| l).collect();
    let set_b = ranked[n - k..].iter().map(|&(l, _)| l).collect();
    Ok((set_a, set_b))
}

/// Probes only transfer to the exact model that produced their training
/// activations.
pub fn check_model_specificity(report: &ProbeReport, model_id: &str) -> bool {
    report.source_model_id == model_id
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probes::Geometry;

    fn set(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    #[test]
    fn constant_heads_give_constant_layers() {
        let scores = aggregate_to_layers(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert_eq!(scores, vec![0.5, 0.5]);
    }

    #[test]
    fn mean_of_extremes() {
        let scores = aggregate_to_layers(&[vec![1.0, 0.0]]).unwrap();
        assert_eq!(scores, vec![0.5]);
    }

    #[test]
    fn strictly_increasing_twelve_layers() {
        let scores: Vec<f64> = (1..=12).map(|i| i as f64 / 12.0).collect();
        let (a, b) = select_layer_sets(&scores).unwrap();
        assert_eq!(a, set(&[8, 9, 10, 11, 12]));
        assert_eq!(b, set(&[1, 2, 3, 4, 5]));
    }

    #[test]
    fn six_layers_use_k_three() {
        let scores: Vec<f64> = (1..=6).map(|i| i as f64).collect();
        let (a, b) = select_layer_sets(&scores).unwrap();
        assert_eq!(a, set(&[4, 5, 6]));
        assert_eq!(b, set(&[1, 2, 3]));
    }

    #[test]
    fn all_equal_scores_split_by_index() {
        let scores = vec![0.5; 10];
        let (a, b) = select_layer_sets(&scores).unwrap();
        assert_eq!(a, set(&[1, 2, 3, 4, 5]));
        assert_eq!(b, set(&[6, 7, 8, 9, 10]));
    }

    #[test]
    fn single_layer_is_an_error() {
        assert!(matches!(
            select_layer_sets(&[0.5]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn specificity_is_exact_id_match() {
        let report = ProbeReport {
            source_model_id: "tlm-a".into(),
            geometry: Geometry {
                n_layers: 4,
                n_heads: 2,
                d_head: 8,
            },
            head_scores: vec![vec![0.5, 0.5]; 4],
            layer_scores: vec![0.5; 4],
            set_a: set(&[1, 2]),
            set_b: set(&[3, 4]),
        };
        assert!(check_model_specificity(&report, "tlm-a"));
        assert!(!check_model_specificity(&report, "tlm-b"));
    }
}
