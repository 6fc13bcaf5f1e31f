use crate::data::SeverityScore;
use crate::rng::SeededRng;
use crate::scalar::Scalar;

use super::HeadError;

const CLASSES: usize = SeverityScore::COUNT;

/// Weights `W` (feature_dim × 4, row-major) and bias `b` (4) of the
/// fully-connected layer.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParameters<T> {
    dim: usize,
    weights: Vec<T>,
    bias: [T; CLASSES],
}

impl<T: Scalar> HeadParameters<T> {
    pub fn zeros(dim: usize) -> Self {
        HeadParameters {
            dim,
            weights: vec![T::zero(); dim * CLASSES],
            bias: [T::zero(); CLASSES],
        }
    }

    pub fn from_parts(dim: usize, weights: Vec<T>, bias: [T; CLASSES]) -> Result<Self, HeadError> {
        if weights.len() != dim * CLASSES {
            return Err(HeadError::DimensionMismatch {
                expected: dim * CLASSES,
                found: weights.len(),
            });
        }
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(HeadError::InvalidConfig(
                "head parameters must be finite".into(),
            ));
        }
        Ok(HeadParameters { dim, weights, bias })
    }

    pub fn feature_dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [T] {
        &mut self.weights
    }

    pub fn bias(&self) -> &[T; CLASSES] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [T; CLASSES] {
        &mut self.bias
    }

    /// `W[feature][class]`.
    pub fn weight(&self, feature: usize, class: usize) -> T {
        self.weights[feature * CLASSES + class]
    }

    pub fn cast<U: Scalar>(&self) -> HeadParameters<U> {
        HeadParameters {
            dim: self.dim,
            weights: self.weights.iter().map(|v| U::of(v.as_f64())).collect(),
            bias: self.bias.map(|v| U::of(v.as_f64())),
        }
    }

    fn check(&self, x: &[T]) -> Result<(), HeadError> {
        if x.len() != self.dim {
            return Err(HeadError::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[T], mode: Mode<'_>) -> Result<[T; CLASSES], HeadError> {
        self.check(x)?;
        Ok(match mode {
            Mode::Infer => softmax(&logits(self, x)),
            Mode::Train { dropout_rate, rng } => {
                let dropped = dropout(x, dropout_rate, rng);
                softmax(&logits(self, &dropped))
            }
        })
    }
}

pub enum Mode<'r> {
    Infer,
    Train {
        dropout_rate: f64,
        rng: &'r mut SeededRng,
    },
}

/// Inverted dropout: each component is zeroed with probability `rate`
/// (one uniform draw per component, zeroed when the draw is below `rate`)
/// and survivors are scaled by `1 / (1 - rate)`. `rate == 0` draws nothing.
pub fn dropout<T: Scalar>(x: &[T], rate: f64, rng: &mut SeededRng) -> Vec<T> {
    if rate <= 0.0 {
        return x.to_vec();
    }
    let scale = T::of(1.0 / (1.0 - rate));
    x.iter()
        .map(|&v| {
            if rng.next_f64() < rate {
                T::zero()
            } else {
                v * scale
            }
        })
        .collect()
}

/// `z = Wᵀx + b`.
pub fn logits<T: Scalar>(params: &HeadParameters<T>, x: &[T]) -> [T; CLASSES] {
    let mut z = params.bias;
    for (row, &xi) in params.weights.chunks_exact(CLASSES).zip(x) {
        if xi == T::zero() {
            continue;
        }
        for c in 0..CLASSES {
            z[c] = z[c] + row[c] * xi;
        }
    }
    z
}

/// Softmax with the maximum logit subtracted first.
pub fn softmax<T: Scalar>(z: &[T; CLASSES]) -> [T; CLASSES] {
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    let mut e = z.map(|v| (v - max).exp());
    let sum = e.iter().copied().fold(T::zero(), |a, b| a + b);
    for v in &mut e {
        *v = *v / sum;
    }
    e
}

/// Cross-entropy `-ln p[label]`, with `p` floored at 1e-12.
pub fn loss<T: Scalar>(probs: &[T; CLASSES], label: SeverityScore) -> T {
    let p = probs[label.index()].max(T::of(1e-12));
    -p.ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    /// Same layout as [`HeadParameters::weights`].
    pub weights: Vec<T>,
    pub bias: [T; CLASSES],
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros(dim: usize) -> Self {
        Gradients {
            weights: vec![T::zero(); dim * CLASSES],
            bias: [T::zero(); CLASSES],
        }
    }

    /// Adds `weight · x (p − y)ᵀ` for one sample.
    pub(crate) fn accumulate(&mut self, x: &[T], probs: &[T; CLASSES], label: SeverityScore, weight: T) {
        let mut dz = *probs;
        dz[label.index()] = dz[label.index()] - T::one();
        for c in 0..CLASSES {
            dz[c] = dz[c] * weight;
            self.bias[c] = self.bias[c] + dz[c];
        }
        for (row, &xi) in self.weights.chunks_exact_mut(CLASSES).zip(x) {
            if xi == T::zero() {
                continue;
            }
            for c in 0..CLASSES {
                row[c] = row[c] + xi * dz[c];
            }
        }
    }

    pub(crate) fn scale(&mut self, s: T) {
        for v in self.weights.iter_mut().chain(self.bias.iter_mut()) {
            *v = *v * s;
        }
    }
}

/// Batch-mean gradient of the cross-entropy loss with respect to `W` and
/// `b`, for inputs that already went through dropout.
pub fn gradients<T: Scalar>(
    params: &HeadParameters<T>,
    inputs: &[&[T]],
    labels: &[SeverityScore],
) -> Result<Gradients<T>, HeadError> {
    if inputs.is_empty() {
        return Err(HeadError::EmptyBatch);
    }
    if inputs.len() != labels.len() {
        return Err(HeadError::DimensionMismatch {
            expected: inputs.len(),
            found: labels.len(),
        });
    }
    let mut g = Gradients::zeros(params.dim);
    for (x, &label) in inputs.iter().zip(labels) {
        params.check(x)?;
        let p = softmax(&logits(params, x));
        g.accumulate(x, &p, label, T::one());
    }
    g.scale(T::one() / T::of_usize(inputs.len()));
    Ok(g)
}
