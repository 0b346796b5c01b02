use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use ironia::classifier::{
    forward, load_checkpoint, metrics_from_confusion, parse_report_csv, render_csv, save_checkpoint, sigmoid, softmax,
    train, Averaging, ConfusionMatrix, Examples, HeadParams, Patience, StopReason, TrainingConfig, HIDDEN_DIM,
};
use ironia::corpus::{percent_2dp, split, Dataset, Entry, Label, Mode, SplitRatios};
use ironia::encoder::{Embedding, Pooling, EMBEDDING_DIM};
use ironia::llm::{format_classification_response, Annotation};
use ironia::review::{ReviewQueue, VerdictRequest};
use ironia::util::ManualClock;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn embedding(rng: &mut ChaCha8Rng) -> Embedding {
    Embedding::new((0..EMBEDDING_DIM).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn mode_of(k: usize) -> Mode {
    if k == 2 { Mode::Binary } else { Mode::Multiclass }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn softmax_is_a_shift_invariant_distribution(z in prop::collection::vec(-50.0f64..50.0, 4), c in -100.0f64..100.0) {
        let p = softmax(&z);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
        for (a, b) in p.iter().zip(softmax(&shifted)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn sigmoid_is_bounded_and_symmetric(z in -700.0f64..700.0) {
        let s = sigmoid(z);
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert!((s + sigmoid(-z) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn predicted_class_is_the_largest_logit(seed in any::<u64>(), binary in any::<bool>()) {
        let k = if binary { 2 } else { 4 };
        let head = HeadParams::init(k, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let x = embedding(&mut rng);
        let s = forward(&head, x.as_slice()).unwrap();
        let best_logit = (0..k).fold(0, |b, i| if s.logits[i] > s.logits[b] { i } else { b });
        prop_assert_eq!(s.argmax(), best_logit);
        prop_assert_eq!(s.probs.len(), k);
    }

    #[test]
    fn percent_rounds_half_up(total in 1usize..2_000_000, frac in 0.0f64..=1.0) {
        let count = ((total as f64) * frac) as usize;
        let h = (percent_2dp(count, total) * 100.0).round() as u128;
        // h - 1/2 <= 10000 c / t < h + 1/2
        let (c, t) = (count as u128, total as u128);
        prop_assert!(2 * h * t <= 20_000 * c + t);
        prop_assert!(20_000 * c + t < 2 * h * t + 2 * t);
        prop_assert!(percent_2dp(count, total) <= 100.0);
    }

    #[test]
    fn split_is_a_stratified_partition(
        counts in prop::collection::vec(3usize..40, 4),
        seed in any::<u64>(),
    ) {
        let mut entries = Vec::new();
        for (li, &n) in counts.iter().enumerate() {
            for j in 0..n {
                entries.push(Entry::new(format!("e{li}-{j}"), format!("texto {li} {j}"), Some(Label::MULTICLASS[li])));
            }
        }
        let ds = Dataset::new("d", Mode::Multiclass, entries).unwrap();
        let ratios = SplitRatios::default();
        let s = split(&ds, ratios, seed).unwrap();
        let ids = |d: &Dataset| d.entries().iter().map(|e| e.id.clone()).collect::<HashSet<_>>();
        let (a, b, c) = (ids(&s.train), ids(&s.val), ids(&s.test));
        prop_assert!(a.is_disjoint(&b) && a.is_disjoint(&c) && b.is_disjoint(&c));
        prop_assert_eq!(a.len() + b.len() + c.len(), ds.len());
        for (li, &n) in counts.iter().enumerate() {
            let label = Label::MULTICLASS[li];
            let in_train = s.train.entries().iter().filter(|e| e.label == Some(label)).count();
            prop_assert_eq!(in_train, ((n as f64) * ratios.train).round() as usize);
        }
        let again = split(&ds, ratios, seed).unwrap();
        prop_assert_eq!(s.test, again.test);
    }

    #[test]
    fn report_csv_is_lossless(
        cells in prop::collection::vec(0u64..1000, 16),
        binary in any::<bool>(),
        model in "[a-z][a-z0-9/_-]{0,20}",
    ) {
        let mode = if binary { Mode::Binary } else { Mode::Multiclass };
        let k = mode.num_classes();
        let mut rows: Vec<Vec<u64>> = cells.chunks(4).take(k).map(|c| c[..k].to_vec()).collect();
        rows[0][0] += 1;
        let cm = ConfusionMatrix::new(mode.labels().to_vec(), rows).unwrap();
        let report = metrics_from_confusion(&cm, Averaging::for_mode(mode)).unwrap().with_model(model.clone());
        let parsed = parse_report_csv(&render_csv(std::slice::from_ref(&report)).unwrap()).unwrap();
        prop_assert_eq!(parsed.len(), k + 1);
        for (row, c) in parsed.iter().zip(&report.classes) {
            prop_assert_eq!(&row.model, &model);
            prop_assert_eq!(&row.category, c.label.report_name());
            prop_assert_eq!((row.precision, row.recall, row.f1, row.support), (c.precision, c.recall, c.f1, c.support));
            prop_assert_eq!(row.accuracy, None);
        }
        let last = &parsed[k];
        prop_assert_eq!(&last.category, report.averaging.row_label());
        prop_assert_eq!((last.precision, last.recall, last.f1), (report.aggregate.precision, report.aggregate.recall, report.aggregate.f1));
        prop_assert_eq!((last.support, last.accuracy), (report.total, Some(report.accuracy)));
    }

    #[test]
    fn checkpoint_roundtrip_is_exact(seed in any::<u64>(), binary in any::<bool>()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.head");
        let head = HeadParams::init(if binary { 2 } else { 4 }, seed).unwrap();
        save_checkpoint(&path, &head, "enc/x", Pooling::Mean, seed).unwrap();
        let (header, back) = load_checkpoint(&path).unwrap();
        prop_assert_eq!(back, head);
        prop_assert_eq!(header.seed, seed);
        prop_assert_eq!(header.encoder_id, "enc/x");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn training_is_deterministic_and_unbounded_patience_runs_to_cap(
        seed in any::<u64>(),
        binary in any::<bool>(),
        max_epochs in 1usize..6,
    ) {
        let k = if binary { 2 } else { 4 };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut set = |n: usize| {
            let inputs = (0..n).map(|_| embedding(&mut rng)).collect();
            let targets = (0..n).map(|i| i % k).collect();
            Examples::new(inputs, targets).unwrap()
        };
        let (tr, va) = (set(24), set(8));
        let cfg = TrainingConfig { max_epochs, patience: Patience::Infinite, seed, mode: mode_of(k), ..Default::default() };
        let (h1, hist1) = train(HeadParams::init(k, seed).unwrap(), &tr, &va, &cfg).unwrap();
        let (h2, hist2) = train(HeadParams::init(k, seed).unwrap(), &tr, &va, &cfg).unwrap();
        prop_assert_eq!(h1, h2);
        prop_assert_eq!(&hist1, &hist2);
        prop_assert_eq!(hist1.len(), max_epochs);
        prop_assert_eq!(hist1.stop_reason, StopReason::MaxEpochs);
    }
}

fn queued(id: usize, tag: Label) -> (Entry, Annotation) {
    let id = format!("r{id:03}");
    let a = Annotation {
        entry_id: id.clone(),
        tag,
        explanation: "motivo".into(),
        raw_response: format_classification_response(tag, "motivo"),
        model_id: "mock".into(),
        created_at: chrono::DateTime::UNIX_EPOCH,
        warnings: vec![],
    };
    (Entry::new(id, "fragmento", None), a)
}

#[test]
fn agreement_matches_event_tally() {
    let mut runner = proptest::test_runner::TestRunner::new(ProptestConfig::with_cases(64));
    runner
        .run(&(1usize..=200, any::<u64>()), |(n, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut q = ReviewQueue::in_memory(Arc::new(ManualClock::epoch()));
            let tags: Vec<Label> = (0..n).map(|_| Label::MULTICLASS[rng.random_range(0..4)]).collect();
            q.enqueue(tags.iter().enumerate().map(|(i, &t)| queued(i, t)).collect()).unwrap();

            // oracle state: machine and final counts, unreadable count
            let mut machine: BTreeMap<Label, usize> = BTreeMap::new();
            let mut human: BTreeMap<Label, usize> = BTreeMap::new();
            let mut unreadable = 0usize;
            while let Some(item) = q.next_pending("r").unwrap() {
                let tag = item.annotation.tag;
                *machine.entry(tag).or_default() += 1;
                let roll = rng.random_range(0..10);
                let req = if roll == 0 {
                    unreadable += 1;
                    VerdictRequest::unreadable(&item.entry.id, "r")
                } else if roll < 4 {
                    let other = *Label::MULTICLASS.iter().find(|&&l| l != tag).unwrap();
                    *human.entry(other).or_default() += 1;
                    VerdictRequest::override_to(&item.entry.id, "r", other)
                } else {
                    *human.entry(tag).or_default() += 1;
                    VerdictRequest::accept(&item.entry.id, "r")
                };
                q.submit_verdict(&req).unwrap();
            }
            let report = q.agreement_report().unwrap();
            prop_assert_eq!(report.total, n);
            prop_assert_eq!(report.unreadable_count, unreadable);
            prop_assert_eq!(report.unreadable_percentage, percent_2dp(unreadable, n));
            for (col, oracle) in [(&report.machine, &machine), (&report.human, &human)] {
                for share in col.iter() {
                    let want = oracle.get(&share.label).copied().unwrap_or(0);
                    prop_assert_eq!(share.count, want);
                    prop_assert_eq!(share.percentage, percent_2dp(want, n));
                }
            }
            prop_assert_eq!(report.human.iter().map(|s| s.count).sum::<usize>() + unreadable, n);
            Ok(())
        })
        .unwrap();
}

#[test]
fn hidden_layer_width() {
    let head = HeadParams::zeros(4).unwrap();
    assert_eq!(head.num_params(), EMBEDDING_DIM * HIDDEN_DIM + HIDDEN_DIM + HIDDEN_DIM * 4 + 4);
}
