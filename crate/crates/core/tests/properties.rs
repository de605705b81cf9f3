use proptest::collection::vec;
use proptest::prelude::*;

use bloomq_core::dataset::{class_distribution, stratified_split, validation_size, BloomLevel, QuestionRecord};
use bloomq_core::eval::{self, pearson};
use bloomq_core::features::{smoothed_idf, transform_tfidf, FeatureMatrix, Vocabulary};
use bloomq_core::models::{argmax, softmax, train_naive_bayes, NaiveBayesParams};
use bloomq_core::textmetrics::{analyze_text, tokenize};

fn word() -> impl Strategy<Value = String> {
    prop::sample::select(vec![
        "define",
        "the",
        "stack",
        "of",
        "algorithm",
        "queue",
        "explain",
        "why",
        "graph",
        "is",
        "table",
        "simple",
        "evaluate",
        "and",
        "memory",
        "a",
        "protocol",
        "cache",
        "design",
        "to",
    ])
    .prop_map(str::to_string)
}

fn sentence() -> impl Strategy<Value = Vec<String>> {
    vec(word(), 1..12)
}

fn level() -> impl Strategy<Value = BloomLevel> {
    prop::sample::select(BloomLevel::ALL.to_vec())
}

proptest! {
    #[test]
    fn word_order_within_a_sentence_does_not_change_metrics(words in sentence(), seed in any::<u64>()) {
        let mut shuffled = words.clone();
        let n = shuffled.len();
        // Deterministic rotation plus swap keeps the multiset of words.
        shuffled.rotate_left((seed as usize) % n);
        shuffled.swap(0, n - 1);
        let a = analyze_text(&format!("{}.", words.join(" "))).unwrap();
        let b = analyze_text(&format!("{}.", shuffled.join(" "))).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn repeating_a_text_keeps_rates_and_doubles_length(words in sentence()) {
        let once = format!("{}.", words.join(" "));
        let a = analyze_text(&once).unwrap();
        let b = analyze_text(&format!("{once} {once}")).unwrap();
        prop_assert_eq!(b.length_l, 2 * a.length_l);
        prop_assert!((a.fkgl - b.fkgl).abs() < 1e-9);
        prop_assert!((a.ld - b.ld).abs() < 1e-12);
        prop_assert!((a.ttr - 2.0 * b.ttr).abs() < 1e-12);
    }

    #[test]
    fn ratios_stay_in_unit_interval(text in "[a-zA-Z .!?']{1,80}") {
        if let Ok(m) = analyze_text(&text) {
            prop_assert!(m.length_l >= 1);
            prop_assert!(m.ttr > 0.0 && m.ttr <= 1.0);
            prop_assert!((0.0..=1.0).contains(&m.ld));
        }
    }

    #[test]
    fn tfidf_rows_are_unit_or_empty(
        train in vec(sentence(), 1..8),
        query in sentence(),
        sublinear in any::<bool>(),
    ) {
        let docs: Vec<_> = train.iter().map(|w| tokenize(&w.join(" ")).unwrap()).collect();
        let vocab = Vocabulary::fit(&docs, 1).unwrap();
        let x = transform_tfidf(&tokenize(&query.join(" ")).unwrap(), &vocab, sublinear);
        let norm = x.norm();
        prop_assert!(x.nnz() == 0 || (norm - 1.0).abs() < 1e-12, "norm {}", norm);
        prop_assert!(x.iter().all(|(_, v)| v > 0.0));
    }

    #[test]
    fn idf_never_rises_with_document_frequency(n in 1u32..500, a in 1u32..500, b in 1u32..500) {
        let (lo, hi) = (a.min(b).min(n), a.max(b).min(n));
        prop_assert!(smoothed_idf(n, lo) >= smoothed_idf(n, hi));
        prop_assert!(smoothed_idf(n, hi) >= 1.0);
    }

    #[test]
    fn report_scores_are_bounded(pairs in vec((0usize..4, 0usize..4), 1..80)) {
        let (gold, pred): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let cm = eval::confusion(&gold, &pred, &["a", "b", "c", "d"]).unwrap();
        let r = eval::classification_report(&cm).unwrap();
        for v in [r.accuracy, r.macro_precision, r.macro_recall, r.macro_f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        for c in &r.classes {
            let lo = c.precision.min(c.recall);
            let hi = c.precision.max(c.recall);
            prop_assert!(c.f1 >= lo - 1e-12 && c.f1 <= hi + 1e-12, "{:?}", c);
        }
        prop_assert!((r.accuracy - eval::accuracy(&gold, &pred)).abs() < 1e-15);
    }

    #[test]
    fn pearson_tracks_affine_maps_up_to_sign(
        xy in vec((-100.0f64..100.0, -100.0f64..100.0), 3..40),
        a in 0.1f64..10.0,
        b in -50.0f64..50.0,
        flip in any::<bool>(),
    ) {
        let (x, y): (Vec<f64>, Vec<f64>) = xy.into_iter().unzip();
        if let Some(r) = pearson(&x, &y) {
            let sign = if flip { -1.0 } else { 1.0 };
            let mapped: Vec<f64> = x.iter().map(|v| sign * a * v + b).collect();
            let r2 = pearson(&mapped, &y).unwrap();
            prop_assert!((r2 - sign * r).abs() < 1e-9, "{} vs {}", r2, r);
            prop_assert!((-1.0..=1.0).contains(&r));
        }
    }

    #[test]
    fn softmax_is_a_distribution_and_shift_invariant(
        scores in vec(-50.0f64..50.0, 1..8),
        shift in -100.0f64..100.0,
    ) {
        let p = softmax(&scores);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let shifted: Vec<f64> = scores.iter().map(|s| s + shift).collect();
        let q = softmax(&shifted);
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        prop_assert_eq!(argmax(&p), argmax(&scores));
    }

    #[test]
    fn duplicating_a_document_raises_its_class_posterior(
        docs in vec(vec(0u32..4, 4), 2..8),
        raw_labels in vec(0usize..2, 8),
        pick in any::<prop::sample::Index>(),
    ) {
        let n = docs.len();
        let mut labels = raw_labels[..n].to_vec();
        labels[0] = 0;
        labels[1] = 1;
        let dense = |ds: &[Vec<u32>]| ds.iter().map(|d| d.iter().map(|&c| c as f64).collect()).collect::<Vec<Vec<f64>>>();
        let i = pick.index(n);
        let before = train_naive_bayes(&FeatureMatrix::from_dense(&dense(&docs)), &labels, 2, &NaiveBayesParams::default()).unwrap();

        let mut docs2 = docs.clone();
        docs2.push(docs[i].clone());
        let mut labels2 = labels.clone();
        labels2.push(labels[i]);
        let after = train_naive_bayes(&FeatureMatrix::from_dense(&dense(&docs2)), &labels2, 2, &NaiveBayesParams::default()).unwrap();

        let x = FeatureMatrix::from_dense(&dense(&docs[i..=i]));
        let p0 = before.log_posterior(&x.rows[0]).unwrap()[labels[i]];
        let p1 = after.log_posterior(&x.rows[0]).unwrap()[labels[i]];
        prop_assert!(p1 >= p0 - 1e-12, "{} -> {}", p0, p1);
    }

    #[test]
    fn stratified_split_partitions_each_class(
        counts in vec(2usize..30, 6),
        fraction in 0.05f64..0.95,
        seed in any::<u64>(),
    ) {
        let corpus: Vec<QuestionRecord> = BloomLevel::ALL
            .iter()
            .zip(&counts)
            .flat_map(|(&l, &c)| (0..c).map(move |i| QuestionRecord::new(format!("q{i} {l}"), l)))
            .collect();
        let split = stratified_split(&corpus, fraction, seed).unwrap();
        prop_assert_eq!(split.train.len() + split.validation.len(), corpus.len());
        let (t, v) = (class_distribution(&split.train), class_distribution(&split.validation));
        for (l, &c) in BloomLevel::ALL.iter().zip(&counts) {
            prop_assert_eq!(v.get(*l), validation_size(c, fraction));
            prop_assert_eq!(t.get(*l) + v.get(*l), c);
        }
        let mut all: Vec<_> = split.train.iter().chain(&split.validation).map(|r| r.text.clone()).collect();
        let mut orig: Vec<_> = corpus.iter().map(|r| r.text.clone()).collect();
        all.sort();
        orig.sort();
        prop_assert_eq!(all, orig);
    }

    #[test]
    fn levels_survive_a_name_round_trip(l in level()) {
        prop_assert_eq!(l.name().to_uppercase().parse::<BloomLevel>().unwrap(), l);
    }
}
