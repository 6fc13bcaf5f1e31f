use std::time::{Duration, Instant};

use rayon::prelude::*;

use super::adam::{adam_step, AdamState};
use super::model::{dropout, logits, loss, softmax, Gradients, HeadParameters};
use super::{HeadError, TrainConfig};
use crate::data::SeverityScore;
use crate::rng::SeededRng;
use crate::scalar::Scalar;

/// Row-major 32-bit feature matrix with one label per row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledFeatures {
    dim: usize,
    values: Vec<f32>,
    labels: Vec<SeverityScore>,
}

impl LabeledFeatures {
    pub fn new(dim: usize) -> Self {
        LabeledFeatures {
            dim,
            values: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn push(&mut self, row: &[f32], label: SeverityScore) -> Result<(), HeadError> {
        if row.len() != self.dim {
            return Err(HeadError::InconsistentDimensions);
        }
        self.values.extend_from_slice(row);
        self.labels.push(label);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn labels(&self) -> &[SeverityScore] {
        &self.labels
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.values.chunks_exact(self.dim.max(1)).take(self.len())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub params: HeadParameters<T>,
    /// Mean training loss (with dropout active) per epoch.
    pub epoch_losses: Vec<f64>,
    pub wall_time: Duration,
}

/// Trains from zero-initialized parameters on one fixed feature set.
pub fn train<T: Scalar>(data: &LabeledFeatures, config: &TrainConfig) -> Result<TrainOutcome<T>, HeadError> {
    train_epochs(&[data], config)
}

/// Trains with epoch `e` reading `views[e % views.len()]`. Every view must
/// hold the same samples in the same order (for example, features of
/// different augmented copies).
///
/// One RNG stream seeded with `config.seed` drives, per epoch, a
/// Fisher–Yates shuffle of the sample order and then one dropout mask per
/// sample visit in batch order.
pub fn train_epochs<T: Scalar>(
    views: &[&LabeledFeatures],
    config: &TrainConfig,
) -> Result<TrainOutcome<T>, HeadError> {
    config.validate()?;
    let first = views.first().ok_or(HeadError::EmptyTrainingSet)?;
    if first.is_empty() {
        return Err(HeadError::EmptyTrainingSet);
    }
    let dim = first.dim();
    if views
        .iter()
        .any(|v| v.dim() != dim || v.labels() != first.labels())
    {
        return Err(HeadError::InconsistentDimensions);
    }

    let start = Instant::now();
    let n = first.len();
    let sample_weights = class_weights::<T>(first.labels(), config.class_weights);
    let mut params = HeadParameters::<T>::zeros(dim);
    let mut state = AdamState::<T>::new(dim);
    let mut rng = SeededRng::new(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut x = vec![T::zero(); dim];
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let data = views[epoch % views.len()];
        rng.shuffle(&mut order);
        let mut loss_sum = 0f64;
        for batch in order.chunks(config.batch_size) {
            let mut grads = Gradients::zeros(dim);
            for &i in batch {
                for (dst, &src) in x.iter_mut().zip(data.row(i)) {
                    *dst = T::of(src as f64);
                }
                let dropped = dropout(&x, config.dropout_rate, &mut rng);
                let probs = softmax(&logits(&params, &dropped));
                let label = data.labels()[i];
                let w = sample_weights[label.index()];
                loss_sum += (loss(&probs, label) * w).as_f64();
                grads.accumulate(&dropped, &probs, label, w);
            }
            grads.scale(T::one() / T::of_usize(batch.len()));
            adam_step(&mut params, &mut state, &grads, config);
        }
        epoch_losses.push(loss_sum / n as f64);
    }

    Ok(TrainOutcome {
        params,
        epoch_losses,
        wall_time: start.elapsed(),
    })
}

/// Per-class loss weights: all ones, or `n / (4 · n_c)` (0 for absent
/// classes) when enabled.
fn class_weights<T: Scalar>(labels: &[SeverityScore], enabled: bool) -> [T; 4] {
    if !enabled {
        return [T::one(); 4];
    }
    let mut counts = [0usize; 4];
    for l in labels {
        counts[l.index()] += 1;
    }
    counts.map(|c| {
        if c == 0 {
            T::zero()
        } else {
            T::of(labels.len() as f64 / (4.0 * c as f64))
        }
    })
}

/// Class probabilities and argmax for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T> {
    pub image_id: String,
    pub probs: [T; 4],
    pub predicted: SeverityScore,
}

impl<T: Scalar> Prediction<T> {
    /// Argmax with ties resolved toward the lower class index.
    pub fn from_probs(image_id: impl Into<String>, probs: [T; 4]) -> Self {
        let mut best = 0;
        for c in 1..4 {
            if probs[c] > probs[best] {
                best = c;
            }
        }
        Prediction {
            image_id: image_id.into(),
            probs,
            predicted: SeverityScore::from_index(best),
        }
    }
}

/// Inference-mode predictions, in input order.
pub fn predict<T: Scalar>(
    params: &HeadParameters<T>,
    features: &[(&str, &[f32])],
) -> Result<Vec<Prediction<T>>, HeadError> {
    if let Some((_, bad)) = features.iter().find(|(_, f)| f.len() != params.feature_dim()) {
        return Err(HeadError::DimensionMismatch {
            expected: params.feature_dim(),
            found: bad.len(),
        });
    }
    Ok(features
        .par_iter()
        .map(|&(id, f)| {
            let x: Vec<T> = f.iter().map(|&v| T::of(v as f64)).collect();
            Prediction::from_probs(id, softmax(&logits(params, &x)))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_set() -> LabeledFeatures {
        let mut d = LabeledFeatures::new(4);
        for i in 0..40 {
            let c = i % 4;
            let mut row = [0f32; 4];
            row[c] = 3.0 + (i as f32) * 0.01;
            d.push(&row, SeverityScore::from_index(c)).unwrap();
        }
        d
    }

    #[test]
    fn argmax_ties_go_low() {
        let p = Prediction::from_probs("a", [0.25f64; 4]);
        assert_eq!(p.predicted.index(), 0);
        let p = Prediction::from_probs("a", [0.1f64, 0.4, 0.4, 0.1]);
        assert_eq!(p.predicted.index(), 1);
    }

    #[test]
    fn dominant_bias_predicts_class_three() {
        let p = HeadParameters::<f64>::from_parts(2, vec![0.0; 8], [0.0, 0.0, 0.0, 10.0]).unwrap();
        let rows = [[1.0f32, 2.0], [-5.0, 0.0]];
        let feats: Vec<(&str, &[f32])> = vec![("a", &rows[0]), ("b", &rows[1])];
        let preds = predict(&p, &feats).unwrap();
        assert_eq!(preds.len(), 2);
        for pr in &preds {
            assert_eq!(pr.predicted.index(), 3);
            assert!(pr.probs[3] > 0.9998);
        }
        assert_eq!(preds[1].image_id, "b");
        assert!(predict(&p, &[]).unwrap().is_empty());
    }

    #[test]
    fn predict_checks_dimension() {
        let p = HeadParameters::<f64>::zeros(2);
        let row = [1.0f32];
        assert!(predict(&p, &[("a", &row[..])]).is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = TrainConfig { seed: 5, ..Default::default() };
        let a = train::<f64>(&tiny_set(), &cfg).unwrap();
        let b = train::<f64>(&tiny_set(), &cfg).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.epoch_losses, b.epoch_losses);
        let c = train::<f64>(&tiny_set(), &TrainConfig { seed: 6, ..cfg }).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn training_errors() {
        let empty = LabeledFeatures::new(3);
        assert!(matches!(
            train::<f64>(&empty, &TrainConfig::default()),
            Err(HeadError::EmptyTrainingSet)
        ));
        let mut other = LabeledFeatures::new(5);
        other.push(&[0.0; 5], SeverityScore::from_index(0)).unwrap();
        let base = tiny_set();
        assert!(matches!(
            train_epochs::<f64>(&[&base, &other], &TrainConfig::default()),
            Err(HeadError::InconsistentDimensions)
        ));
        assert!(train::<f64>(&base, &TrainConfig { epochs: 0, ..Default::default() }).is_err());
        let mut d = LabeledFeatures::new(2);
        assert!(d.push(&[1.0], SeverityScore::from_index(0)).is_err());
    }

    #[test]
    fn learns_tiny_separable_set() {
        let out = train::<f64>(&tiny_set(), &TrainConfig { epochs: 20, ..Default::default() }).unwrap();
        let d = tiny_set();
        let feats: Vec<(&str, &[f32])> = d.rows().map(|r| ("x", r)).collect();
        let preds = predict(&out.params, &feats).unwrap();
        let correct = preds
            .iter()
            .zip(d.labels())
            .filter(|(p, l)| p.predicted == **l)
            .count();
        assert_eq!(correct, 40);
        assert!(out.epoch_losses.last().unwrap() < &out.epoch_losses[0]);
    }

    #[test]
    fn f32_head_trains_too() {
        let out = train::<f32>(&tiny_set(), &TrainConfig { epochs: 20, ..Default::default() }).unwrap();
        let d = tiny_set();
        let feats: Vec<(&str, &[f32])> = d.rows().map(|r| ("x", r)).collect();
        let preds = predict(&out.params, &feats).unwrap();
        assert!(preds.iter().zip(d.labels()).all(|(p, l)| p.predicted == *l));
    }

    #[test]
    fn class_weight_values() {
        let labels: Vec<SeverityScore> = [0, 0, 0, 1].iter().map(|&i| SeverityScore::from_index(i)).collect();
        let w = class_weights::<f64>(&labels, true);
        assert_eq!(w, [4.0 / 12.0, 1.0, 0.0, 0.0]);
        assert_eq!(class_weights::<f64>(&labels, false), [1.0; 4]);
    }
}
