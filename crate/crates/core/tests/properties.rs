//! Invariants of the text pipeline, dataset handling, and metrics.

use emolyric::dataset::{self, LabeledExample};
use emolyric::eval::{overlap_at_k, Prediction};
use emolyric::text::{build_vocab, encode, tokenize, PAD_ID};
use emolyric::{dataset::EvalSong, EmotionLabel};
use proptest::prelude::*;

fn word() -> impl Strategy<Value = String> {
    "[a-z]{1,4}"
}

fn labeled() -> impl Strategy<Value = LabeledExample> {
    ("[ -~]{0,30}", proptest::array::uniform8(0u8..=1)).prop_map(|(text, target)| LabeledExample { text, target })
}

fn three_labels() -> impl Strategy<Value = [EmotionLabel; 3]> {
    Just(EmotionLabel::ALL.to_vec())
        .prop_shuffle()
        .prop_map(|v| [v[0], v[1], v[2]])
}

fn songs_and_probs() -> impl Strategy<Value = Vec<([EmotionLabel; 3], [f64; 8])>> {
    proptest::collection::vec((three_labels(), proptest::array::uniform8(0.001f64..0.999)), 1..12)
}

fn build(items: &[([EmotionLabel; 3], [f64; 8])]) -> (Vec<EvalSong>, Vec<Prediction>) {
    items
        .iter()
        .enumerate()
        .map(|(i, (labels, probs))| {
            let id = format!("s{i}");
            (
                EvalSong {
                    id: id.clone(),
                    title: String::new(),
                    artist: String::new(),
                    lyrics: "x".into(),
                    human_labels: *labels,
                },
                Prediction::new(id, *probs),
            )
        })
        .unzip()
}

proptest! {
    #[test]
    fn tokenize_is_idempotent(text in "\\PC{0,60}") {
        let once = tokenize(&text);
        prop_assert_eq!(tokenize(&once.join(" ")), once);
    }

    #[test]
    fn encode_has_fixed_length_and_pad_suffix(
        words in proptest::collection::vec(word(), 0..40),
        len in 1usize..32,
    ) {
        let vocab = build_vocab(&[vec!["ab".to_string(), "cd".to_string()]], 1, 10).unwrap();
        let seq = encode(&words, &vocab, len);
        prop_assert_eq!(seq.len(), len);
        prop_assert!(seq.ids().iter().all(|&id| (id as usize) < vocab.len()));
        if let Some(first) = seq.ids().iter().position(|&id| id == PAD_ID) {
            prop_assert!(seq.ids()[first..].iter().all(|&id| id == PAD_ID));
        }
    }

    #[test]
    fn vocab_ignores_corpus_order(
        corpus in proptest::collection::vec(proptest::collection::vec(word(), 0..6), 1..10),
        seed in any::<u64>(),
    ) {
        let mut shuffled = corpus.clone();
        emolyric::rng::SplitMix64::new(seed).shuffle(&mut shuffled);
        prop_assert_eq!(build_vocab(&corpus, 1, 50).unwrap(), build_vocab(&shuffled, 1, 50).unwrap());
    }

    #[test]
    fn prepared_jsonl_round_trips(examples in proptest::collection::vec(labeled(), 0..10)) {
        let text = dataset::write_prepared(&examples).unwrap();
        prop_assert_eq!(dataset::parse_prepared(&text).unwrap(), examples);
    }

    #[test]
    fn split_is_a_reproducible_partition(n in 1usize..200, frac in 0.01f64..0.99, seed in any::<u64>()) {
        let data: Vec<usize> = (0..n).collect();
        let (train, val) = dataset::split_dataset(&data, frac, seed).unwrap();
        prop_assert_eq!(val.len(), (frac * n as f64).floor() as usize);
        let mut all: Vec<usize> = train.iter().chain(&val).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, data.clone());
        prop_assert_eq!(dataset::split_dataset(&data, frac, seed).unwrap(), (train, val));
    }

    #[test]
    fn overlap_is_monotone_in_k_and_full_at_8(items in songs_and_probs()) {
        // Hits never decrease with k. The ratio uses denominator min(k, 3),
        // so it is monotone once the denominator stops growing (k >= 3);
        // below that a top-1 hit (1/1) can outscore a top-2 with one hit (1/2).
        let (songs, preds) = build(&items);
        let mut prev_hits = vec![0; songs.len()];
        let mut prev = 0.0;
        for k in 1..=8 {
            let r = overlap_at_k(&preds, &songs, k).unwrap();
            prop_assert!((0.0..=1.0).contains(&r.overlap_at_k));
            for (row, prev) in r.songs.iter().zip(prev_hits.iter_mut()) {
                prop_assert!(row.hits >= *prev);
                *prev = row.hits;
            }
            if k > 3 {
                prop_assert!(r.overlap_at_k >= prev);
            }
            prev = r.overlap_at_k;
        }
        let full = overlap_at_k(&preds, &songs, 8).unwrap();
        prop_assert!(full.songs.iter().all(|s| s.overlap == 1.0));
    }

    #[test]
    fn overlap_ignores_song_order_and_monotone_transforms(items in songs_and_probs(), seed in any::<u64>()) {
        let (songs, preds) = build(&items);
        let base = overlap_at_k(&preds, &songs, 3).unwrap().overlap_at_k;

        let mut order: Vec<usize> = (0..songs.len()).collect();
        emolyric::rng::SplitMix64::new(seed).shuffle(&mut order);
        let s2: Vec<_> = order.iter().map(|&i| songs[i].clone()).collect();
        let p2: Vec<_> = order.iter().map(|&i| preds[i].clone()).collect();
        prop_assert_eq!(overlap_at_k(&p2, &s2, 3).unwrap().overlap_at_k, base);

        let transformed: Vec<_> = preds
            .iter()
            .map(|p| Prediction::new(p.song_id.clone(), p.probabilities.map(|x| (x * 3.0).ln() + 2.0)))
            .collect();
        prop_assert_eq!(overlap_at_k(&transformed, &songs, 3).unwrap().overlap_at_k, base);
    }
}
