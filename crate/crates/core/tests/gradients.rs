//! Whole-network gradient correctness and reduction determinism.

use emolyric::dataset::EncodedExample;
use emolyric::gradcheck::{gradient_check, gradient_check_with, Fault};
use emolyric::model::{self, ModelConfig, ParamId};
use emolyric::rng::SplitMix64;
use emolyric::text::{TokenSequence, Vocabulary};
use emolyric::{ModelBundle, Target};

fn tiny_bundle(seed: u64) -> ModelBundle {
    let config = ModelConfig {
        embed_size: 4,
        seq_len: 12,
        conv_filters: 8,
        ..ModelConfig::new(20)
    };
    let mut tokens = vec!["<pad>".to_string(), "<unk>".to_string()];
    tokens.extend((2..20).map(|i| format!("w{i}")));
    ModelBundle::initialize(config, Vocabulary::from_tokens(tokens).unwrap(), seed).unwrap()
}

fn random_batch(config: &ModelConfig, n: usize, seed: u64) -> Vec<EncodedExample> {
    let mut rng = SplitMix64::new(seed);
    (0..n)
        .map(|_| {
            let len = 1 + rng.below(config.seq_len as u64) as usize;
            let mut ids: Vec<u32> = (0..len)
                .map(|_| 1 + rng.below(config.vocab_size as u64 - 1) as u32)
                .collect();
            ids.resize(config.seq_len, 0);
            let target: Target = std::array::from_fn(|_| rng.below(2) as u8);
            EncodedExample {
                ids: TokenSequence::from_ids(ids).unwrap(),
                target,
            }
        })
        .collect()
}

#[test]
fn full_model_gradient_check_over_seeds() {
    for seed in [1u64, 2, 3] {
        let bundle = tiny_bundle(seed);
        let batch = random_batch(&bundle.config, 4, 100 + seed);
        let report = gradient_check_with(&bundle, &batch, 1e-4, seed, Fault::None).unwrap();
        assert!(report.max_rel_error < 1e-4, "seed {seed}: {report:?}");
        assert!(
            report.kink_crossings * 20 <= report.coordinates_checked,
            "seed {seed}: {report:?}"
        );
        assert_eq!(
            report.coordinates_checked + report.kink_crossings,
            bundle.config.param_count()
        );
    }
}

#[test]
fn sampled_check_on_default_architecture() {
    let mut tokens = vec!["<pad>".to_string(), "<unk>".to_string()];
    tokens.extend((2..50).map(|i| format!("w{i}")));
    let config = ModelConfig {
        seq_len: 16,
        ..ModelConfig::new(50)
    };
    let bundle = ModelBundle::initialize(config, Vocabulary::from_tokens(tokens).unwrap(), 4).unwrap();
    let batch = random_batch(&bundle.config, 2, 9);
    let report = gradient_check_with(&bundle, &batch, 1e-4, 4, Fault::None).unwrap();
    assert_eq!(report.coordinates_checked + report.kink_crossings, 1000);
    assert!(report.max_rel_error < 1e-4, "{report:?}");
}

#[test]
fn output_bias_gradient_is_mean_residual() {
    for seed in 0..10u64 {
        let bundle = tiny_bundle(seed);
        let batch = random_batch(&bundle.config, 1 + seed as usize, seed);
        let seqs: Vec<TokenSequence> = batch.iter().map(|e| e.ids.clone()).collect();
        let targets: Vec<Target> = batch.iter().map(|e| e.target).collect();
        let trace = model::forward(&bundle.params, &bundle.config, &seqs, true, seed).unwrap();
        let probs = trace.probs().clone();
        let grads = model::backward(trace, &bundle.params, &bundle.config, &targets).unwrap();
        let b = batch.len() as f64;
        for (j, &got) in grads.get(ParamId::OutputBias).data().iter().enumerate() {
            let residual: f64 = targets
                .iter()
                .enumerate()
                .map(|(i, t)| probs.row(i)[j] - t[j] as f64)
                .sum();
            let expected = residual / (b * 8.0);
            assert!(
                (got - expected).abs() < 1e-10,
                "seed {seed} unit {j}: {got} vs {expected}"
            );
        }
    }
}

#[test]
fn gradient_check_is_reproducible_and_catches_faults() {
    let bundle = tiny_bundle(11);
    let batch = random_batch(&bundle.config, 4, 12);
    let a = gradient_check(&bundle, &batch, 1e-4, 5).unwrap();
    let b = gradient_check(&bundle, &batch, 1e-4, 5).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
    let bad = gradient_check_with(&bundle, &batch, 1e-4, 5, Fault::SignFlip).unwrap();
    assert!(bad.max_rel_error >= 1e-4);
}

#[test]
fn gradients_do_not_depend_on_thread_count() {
    let bundle = tiny_bundle(21);
    let batch = random_batch(&bundle.config, 16, 22);
    let seqs: Vec<TokenSequence> = batch.iter().map(|e| e.ids.clone()).collect();
    let targets: Vec<Target> = batch.iter().map(|e| e.target).collect();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let trace = model::forward(&bundle.params, &bundle.config, &seqs, true, 3).unwrap();
            model::backward(trace, &bundle.params, &bundle.config, &targets).unwrap()
        })
    };
    let one = run(1);
    for threads in [2, 4] {
        let many = run(threads);
        for (a, b) in one.tensors().iter().zip(many.tensors()) {
            assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}

#[test]
fn batch_permutation_permutes_outputs() {
    let bundle = tiny_bundle(31);
    let batch = random_batch(&bundle.config, 6, 32);
    let seqs: Vec<TokenSequence> = batch.iter().map(|e| e.ids.clone()).collect();
    let mut order: Vec<usize> = (0..seqs.len()).collect();
    SplitMix64::new(5).shuffle(&mut order);
    let permuted: Vec<TokenSequence> = order.iter().map(|&i| seqs[i].clone()).collect();
    let a = bundle.predict_sequences(&seqs).unwrap();
    let b = bundle.predict_sequences(&permuted).unwrap();
    for (pos, &i) in order.iter().enumerate() {
        assert_eq!(a[i], b[pos]);
    }
    for row in &a {
        assert!(row.iter().all(|&p| p > 0.0 && p < 1.0));
    }
}
