//! Per-head logistic-regression probes: full-batch gradient descent with
//! fixed hyperparameters (500 iterations, learning rate 0.1, L2 1e-3),
//! validated on a seeded 80/20 split. Heads train independently and in
//! parallel; results merge in (layer, head) order.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use super::dataset::ProbeDataset;
use super::Geometry;
use crate::error::{Error, Result};

const ITERATIONS: usize = 500;
const LEARNING_RATE: f64 = 0.1;
const L2_WEIGHT: f64 = 1e-3;
const MIN_EXAMPLES: usize = 8;

/// Probe weights for every (layer, head), plus their validation scores.
#[derive(Debug, Clone)]
pub struct TrainedProbes {
    pub source_model_id: String,
    pub geometry: Geometry,
    /// (weights, bias) indexed by layer * n_heads + head.
    pub probes: Vec<(Array1<f64>, f64)>,
    /// Validation accuracy per (layer, head).
    pub head_scores: Vec<Vec<f64>>,
}

/// Validation accuracies only; the shape most callers need.
pub fn train_head_probes(dataset: &ProbeDataset, split_seed: u64) -> Result<Vec<Vec<f64>>> {
    Ok(train_probes_full(dataset, split_seed)?.head_scores)
}

pub fn train_probes_full(dataset: &ProbeDataset, split_seed: u64) -> Result<TrainedProbes> {
    dataset.validate()?;
    let n = dataset.examples.len();
    if n < MIN_EXAMPLES {
        return Err(Error::Dataset(format!(
            "need at least {MIN_EXAMPLES} examples, got {n}"
        )));
    }

    // one shuffle shared by every head keeps the split comparable
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(split_seed);
    indices.shuffle(&mut rng);
    let n_train = ((n as f64 * 0.8).floor() as usize).clamp(1, n - 1);
    let (train_idx, val_idx) = indices.split_at(n_train);

    let geo = dataset.geometry;
    let labels: Vec<f64> = dataset
        .examples
        .iter()
        .map(|e| if e.label { 1.0 } else { 0.0 })
        .collect();

    let head_ids: Vec<(usize, usize)> = (0..geo.n_layers)
        .flat_map(|l| (0..geo.n_heads).map(move |h| (l, h)))
        .collect();

    let trained: Vec<((Array1<f64>, f64), f64)> = head_ids
        .par_iter()
        .map(|&(layer, head)| {
            let features = |idx: &[usize]| -> Array2<f64> {
                let mut x = Array2::zeros((idx.len(), geo.d_head));
                for (row, &i) in idx.iter().enumerate() {
                    for (col, &v) in dataset.examples[i].activations[layer][head]
                        .iter()
                        .enumerate()
                    {
                        x[[row, col]] = v as f64;
                    }
                }
                x
            };
            let y = |idx: &[usize]| -> Array1<f64> {
                Array1::from_iter(idx.iter().map(|&i| labels[i]))
            };

            let x_train = features(train_idx);
            let y_train = y(train_idx);
            let (w, b) = fit_logistic(&x_train, &y_train);
            let acc = accuracy(&features(val_idx), &y(val_idx), &w, b);
            ((w, b), acc)
        })
        .collect();

    let mut probes = Vec::with_capacity(trained.len());
    let mut head_scores = vec![vec![0.0; geo.n_heads]; geo.n_layers];
    for ((layer, head), (probe, acc)) in head_ids.into_iter().zip(trained) {
        head_scores[layer][head] = acc;
        probes.push(probe);
    }

    Ok(TrainedProbes {
        source_model_id: dataset.source_model_id.clone(),
        geometry: geo,
        probes,
        head_scores,
    })
}

impl TrainedProbes {
    /// Evaluate every probe on another dataset (whole set, no split). The
    /// geometry must match; the model identity deliberately need not, so
    /// cross-model transfer can be measured.
    pub fn evaluate_on(&self, dataset: &ProbeDataset) -> Result<Vec<Vec<f64>>> {
        dataset.validate()?;
        if dataset.geometry != self.geometry {
            return Err(Error::Dataset(
                "activation geometry differs from the probes'".into(),
            ));
        }
        let geo = self.geometry;
        let labels: Vec<f64> = dataset
            .examples
            .iter()
            .map(|e| if e.label { 1.0 } else { 0.0 })
            .collect();
        let y = Array1::from_vec(labels);
        let mut scores = vec![vec![0.0; geo.n_heads]; geo.n_layers];
        for layer in 0..geo.n_layers {
            for head in 0..geo.n_heads {
                let mut x = Array2::zeros((dataset.examples.len(), geo.d_head));
                for (row, e) in dataset.examples.iter().enumerate() {
                    for (col, &v) in e.activations[layer][head].iter().enumerate() {
                        x[[row, col]] = v as f64;
                    }
                }
                let (w, b) = &self.probes[layer * geo.n_heads + head];
                scores[layer][head] = accuracy(&x, &y, w, *b);
            }
        }
        Ok(scores)
    }

    /// Mean accuracy over all heads.
    pub fn mean_score(scores: &[Vec<f64>]) -> f64 {
        let total: f64 = scores.iter().flatten().sum();
        let count: usize = scores.iter().map(|r| r.len()).sum();
        total / count as f64
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn fit_logistic(x: &Array2<f64>, y: &Array1<f64>) -> (Array1<f64>, f64) {
    let n = x.nrows() as f64;
    let mut w = Array1::<f64>::zeros(x.ncols());
    let mut b = 0.0f64;
    for _ in 0..ITERATIONS {
        let p = x.dot(&w).mapv(|z| sigmoid(z + b));
        let err = &p - y;
        let grad_w = x.t().dot(&err) / n + L2_WEIGHT * &w;
        let grad_b = err.sum() / n;
        w -= &(LEARNING_RATE * grad_w);
        b -= LEARNING_RATE * grad_b;
    }
    (w, b)
}

fn accuracy(x: &Array2<f64>, y: &Array1<f64>, w: &Array1<f64>, b: f64) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    let p = x.dot(w).mapv(|z| sigmoid(z + b));
    let hits = p
        .iter()
        .zip(y)
        .filter(|(&p, &y)| (p >= 0.5) == (y >= 0.5))
        .count();
    hits as f64 / y.len() as f64
}
