use lus_core::head::{dropout, gradients, logits, loss, softmax, train, HeadParameters, LabeledFeatures, TrainConfig};
use lus_core::rng::SeededRng;
use lus_core::synthetic::{gen_synthetic_features, SyntheticSpec};
use lus_core::SeverityScore;
use proptest::prelude::*;

#[test]
fn dropout_mean_within_three_standard_errors() {
    const COPIES: usize = 100_000;
    let x = [1.0f64, -2.0, 0.5, 3.0, -0.25, 7.0, 0.0, 1.5];
    for q in [0.1, 0.5, 0.8] {
        let mut rng = SeededRng::new(17);
        let mut sum = [0f64; 8];
        for _ in 0..COPIES {
            for (s, v) in sum.iter_mut().zip(dropout(&x, q, &mut rng)) {
                *s += v;
            }
        }
        for (i, &xi) in x.iter().enumerate() {
            let mean = sum[i] / COPIES as f64;
            // Each masked value is x/(1-q) with probability 1-q, else 0.
            let se = xi.abs() * (q / (1.0 - q)).sqrt() / (COPIES as f64).sqrt();
            assert!((mean - xi).abs() <= 3.0 * se + 1e-12, "q={q} i={i}: {mean} vs {xi} (se {se})");
        }
    }
}

#[test]
fn zero_dropout_is_identity_and_consumes_nothing() {
    let x = [1.0f64, 2.0, 3.0];
    let mut a = SeededRng::new(1);
    let b = a.clone();
    assert_eq!(dropout(&x, 0.0, &mut a), x.to_vec());
    assert_eq!(a.clone().next_u64(), b.clone().next_u64());
}

#[test]
fn loss_falls_on_the_synthetic_fixture() {
    let ds = gen_synthetic_features(&SyntheticSpec::default()).unwrap();
    let out = train::<f64>(&ds.labeled_features(), &TrainConfig::default()).unwrap();
    assert_eq!(out.epoch_losses.len(), 3);
    assert!(out.epoch_losses[2] <= out.epoch_losses[0], "{:?}", out.epoch_losses);
}

#[test]
fn f32_and_f64_heads_agree_closely() {
    let spec = SyntheticSpec {
        n_per_class: 50,
        feature_dim: 8,
        ..SyntheticSpec::default()
    };
    let data = gen_synthetic_features(&spec).unwrap().labeled_features();
    let cfg = TrainConfig::default();
    let a = train::<f64>(&data, &cfg).unwrap().params;
    let b: HeadParameters<f64> = train::<f32>(&data, &cfg).unwrap().params.cast();
    for (x, y) in a.weights().iter().zip(b.weights()) {
        assert!((x - y).abs() < 1e-4, "{x} vs {y}");
    }
}

fn labeled(rows: &[(Vec<f32>, usize)]) -> LabeledFeatures {
    let mut d = LabeledFeatures::new(rows[0].0.len());
    for (x, y) in rows {
        d.push(x, SeverityScore::from_index(*y)).unwrap();
    }
    d
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_is_shift_invariant(z in proptest::array::uniform4(-50.0f64..50.0), c in -1e3f64..1e3) {
        let p = softmax(&z);
        let q = softmax(&z.map(|v| v + c));
        for i in 0..4 {
            prop_assert!((p[i] - q[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn gradient_matches_finite_difference(
        w in proptest::collection::vec(-2.0f64..2.0, 12),
        b in proptest::array::uniform4(-1.0f64..1.0),
        xs in proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 3), 1..5),
        ys in proptest::collection::vec(0usize..4, 5),
    ) {
        let params = HeadParameters::from_parts(3, w, b).unwrap();
        let labels: Vec<SeverityScore> = ys[..xs.len()].iter().map(|&y| SeverityScore::from_index(y)).collect();
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let g = gradients(&params, &refs, &labels).unwrap();
        let f = |p: &HeadParameters<f64>| {
            xs.iter().zip(&labels).map(|(x, &y)| loss(&softmax(&logits(p, x)), y)).sum::<f64>() / xs.len() as f64
        };
        let h = 1e-5;
        for i in 0..12 {
            let mut plus = params.clone();
            plus.weights_mut()[i] += h;
            let mut minus = params.clone();
            minus.weights_mut()[i] -= h;
            let numeric = (f(&plus) - f(&minus)) / (2.0 * h);
            prop_assert!((numeric - g.weights[i]).abs() <= 1e-6 + 1e-4 * numeric.abs());
        }
    }

    #[test]
    fn training_is_replayable(seed in any::<u64>(), rows in proptest::collection::vec((proptest::collection::vec(-1.0f32..1.0, 2), 0usize..4), 1..20)) {
        let data = labeled(&rows);
        let cfg = TrainConfig { seed, batch_size: 3, ..TrainConfig::default() };
        let a = train::<f64>(&data, &cfg).unwrap();
        let b = train::<f64>(&data, &cfg).unwrap();
        prop_assert_eq!(a.params, b.params);
        prop_assert_eq!(a.epoch_losses, b.epoch_losses);
    }
}
