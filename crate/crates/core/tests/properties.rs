use std::collections::HashMap;

use oppo_core::agreement::{
    gamma_agreement, krippendorff_alpha, observed_agreement, pairwise_f1_agreement, Continuum,
    GammaConfig, PairwiseMode, ReliabilityMatrix,
};
use oppo_core::analysis::{lexicon_score, Lexicon};
use oppo_core::eval::{outcome_variables, span_f1, Outcome};
use oppo_core::gold::{merge_spans, AnnotatorSet, MergeConfig, RejectReason, Side};
use oppo_core::io::{read_records, write_records};
use oppo_core::pipeline::{
    filter_messages, index_channels, quality_score, rank_and_select, score_all, ChannelStats,
    CorpusDistributions, FilterConfig,
};
use oppo_core::stats::{chi_square_independence, kruskal_wallis, mann_whitney_u};
use oppo_core::{
    AnnotationRecord, Category, ExecMode, GoldDocument, Lang, Message, PredictionSet, Span, TextClass,
};
use proptest::prelude::*;

fn category() -> impl Strategy<Value = Category> {
    prop::sample::select(Category::ALL.to_vec())
}

fn span_in(len: usize) -> impl Strategy<Value = Span> {
    (category(), 0..len).prop_flat_map(move |(c, s)| (Just(c), Just(s), s + 1..=len))
        .prop_map(|(c, s, e)| Span::new(c, s, e))
}

fn spans_in(len: usize, max: usize) -> impl Strategy<Value = Vec<Span>> {
    prop::collection::vec(span_in(len), 0..=max)
}

fn word() -> impl Strategy<Value = String> {
    prop::sample::select(vec![
        "vaccine", "Truth", "ELITES", "plan", "fear", "hate", "angry", "the", "of", "http://x.io",
        "@watcher", "ñandú", "kill",
    ])
    .prop_map(String::from)
}

fn message(i: usize) -> impl Strategy<Value = Message> {
    (prop::collection::vec(word(), 1..20), 0..3usize, any::<bool>()).prop_map(move |(w, ch, en)| {
        Message::new(
            format!("m{i:03}"),
            if en { Lang::En } else { Lang::Es },
            w.join(" "),
            format!("c{ch}"),
            None,
        )
    })
}

fn corpus(max: usize) -> impl Strategy<Value = Vec<Message>> {
    (1..=max).prop_flat_map(|n| (0..n).map(message).collect::<Vec<_>>())
}

fn channels() -> HashMap<String, ChannelStats> {
    index_channels(
        (0..3)
            .map(|c| ChannelStats {
                channel_id: format!("c{c}"),
                audience: 100 * (c + 1),
                author_count: 3 + c,
                messages_per_author_mean: 2.0 + c as f64,
                messages_per_author_std: 0.5 * c as f64,
                message_count: 50,
            })
            .collect(),
    )
    .unwrap()
}

/// Per-category character-membership oracle for span precision and recall.
fn oracle_prf(pred: &[Span], gold: &[Span], len: usize) -> Option<(f64, f64, f64)> {
    let mut sums = (0.0, 0.0, 0.0);
    let mut n = 0;
    for cat in Category::ALL {
        let s: Vec<&Span> = pred.iter().filter(|x| x.category == cat).collect();
        let t: Vec<&Span> = gold.iter().filter(|x| x.category == cat).collect();
        if s.is_empty() && t.is_empty() {
            continue;
        }
        let shared = |a: &Span, b: &Span| {
            (0..len)
                .filter(|&c| a.start <= c && c < a.end && b.start <= c && c < b.end)
                .count() as f64
        };
        let mut p = 0.0;
        for a in &s {
            for b in &t {
                p += shared(a, b) / (a.end - a.start) as f64;
            }
        }
        let mut r = 0.0;
        for b in &t {
            for a in &s {
                r += shared(a, b) / (b.end - b.start) as f64;
            }
        }
        let p = if s.is_empty() { 0.0 } else { (p / s.len() as f64).min(1.0) };
        let r = if t.is_empty() { 0.0 } else { (r / t.len() as f64).min(1.0) };
        let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        sums = (sums.0 + p, sums.1 + r, sums.2 + f);
        n += 1;
    }
    (n > 0).then(|| (sums.0 / n as f64, sums.1 / n as f64, sums.2 / n as f64))
}

fn close(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() < tol,
        (None, None) => true,
        _ => false,
    }
}

fn chars_covered(spans: &[Span], cat: Category, c: usize) -> bool {
    spans.iter().any(|s| s.category == cat && s.start <= c && c < s.end)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn records_round_trip(msgs in corpus(12)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        write_records(&path, &msgs).unwrap();
        let back: Vec<Message> = read_records(&path).unwrap();
        prop_assert_eq!(back, msgs);
    }

    #[test]
    fn gold_round_trip(spans in spans_in(30, 6), critical in any::<bool>()) {
        let doc = GoldDocument {
            doc_id: "g".into(),
            lang: Some(Lang::Es),
            klass: if critical { TextClass::Critical } else { TextClass::Conspiracy },
            spans: oppo_core::model::normalize_spans(spans),
            text: Some("x".repeat(30)),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.jsonl");
        write_records(&path, std::slice::from_ref(&doc)).unwrap();
        let back: Vec<GoldDocument> = read_records(&path).unwrap();
        prop_assert_eq!(back, vec![doc]);
    }

    #[test]
    fn filtering_is_idempotent(msgs in corpus(20), min_tokens in 1..6usize, ratio in 0.0..1.0f64) {
        let cfg = FilterConfig { min_tokens, max_link_ratio: ratio };
        let once = filter_messages(&msgs, &cfg).unwrap();
        let twice = filter_messages(&once.kept, &cfg).unwrap();
        prop_assert_eq!(&twice.kept, &once.kept);
        prop_assert!(twice.dropped.is_empty());
        prop_assert_eq!(once.kept.len() + once.dropped.len(), msgs.len());
    }

    #[test]
    fn quality_score_is_monotone(msgs in corpus(15), pick in any::<prop::sample::Index>(), extra in 1..10usize) {
        let ch = channels();
        let dists = CorpusDistributions::build(&msgs, &ch).unwrap();
        let m = &msgs[pick.index(msgs.len())];
        let base = quality_score(m, &ch, &dists).unwrap();
        prop_assert!((base.total - base.per_criterion.iter().sum::<f64>()).abs() < 1e-9);
        prop_assert!(base.per_criterion.iter().all(|v| (0.0..=1.0).contains(v)));
        // more tokens on the same channel
        let longer = m.clone().with_text(format!("{} {}", m.text, vec!["word"; extra].join(" ")));
        prop_assert!(quality_score(&longer, &ch, &dists).unwrap().total >= base.total);
        // larger audience on a copy of its channel
        let mut bigger = ch.clone();
        bigger.get_mut(&m.channel_id).unwrap().audience += extra as u64;
        prop_assert!(quality_score(m, &bigger, &dists).unwrap().total >= base.total);
    }

    #[test]
    fn ranking_ignores_input_order(
        (msgs, shuffled) in corpus(15).prop_flat_map(|m| (Just(m.clone()), Just(m).prop_shuffle())),
        k in 1..20usize,
    ) {
        let ch = channels();
        let dists = CorpusDistributions::build(&msgs, &ch).unwrap();
        let scores = score_all(&msgs, &ch, &dists, ExecMode::Sequential).unwrap();
        let mut rev_scores = scores.clone();
        rev_scores.reverse();
        let a: Vec<&str> = rank_and_select(&msgs, &scores, k).unwrap().iter().map(|(m, _)| m.id.as_str()).collect();
        let b: Vec<&str> = rank_and_select(&shuffled, &rev_scores, k).unwrap().iter().map(|(m, _)| m.id.as_str()).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn parallel_scoring_matches_sequential(msgs in corpus(25)) {
        let ch = channels();
        let dists = CorpusDistributions::build(&msgs, &ch).unwrap();
        prop_assert_eq!(
            score_all(&msgs, &ch, &dists, ExecMode::Sequential).unwrap(),
            score_all(&msgs, &ch, &dists, ExecMode::Parallel).unwrap()
        );
    }

    #[test]
    fn span_f1_matches_character_oracle(pred in spans_in(40, 5), gold in spans_in(40, 5)) {
        let r = span_f1(&pred, &gold);
        let o = oracle_prf(&pred, &gold, 40);
        prop_assert!(close(r.macro_precision, o.map(|x| x.0), 1e-12));
        prop_assert!(close(r.macro_recall, o.map(|x| x.1), 1e-12));
        prop_assert!(close(r.macro_f1, o.map(|x| x.2), 1e-12));
    }

    #[test]
    fn span_f1_swap_exchanges_p_and_r(pred in spans_in(40, 5), gold in spans_in(40, 5)) {
        let a = span_f1(&pred, &gold);
        let b = span_f1(&gold, &pred);
        for cat in Category::ALL {
            let (x, y) = (a.per_category[&cat].prf, b.per_category[&cat].prf);
            prop_assert!(close(x.precision, y.recall, 1e-12));
            prop_assert!(close(x.recall, y.precision, 1e-12));
            prop_assert!(close(x.f1, y.f1, 1e-12));
        }
    }

    #[test]
    fn disjoint_extra_prediction_lowers_precision(
        cat in category(),
        gold_len in 1..8usize,
        pred in prop::collection::vec((0..20usize, 1..8usize), 1..4),
        extra_len in 1..10usize,
    ) {
        // gold occupies [0, gold_len); predictions live in [0, 28); the extra one sits past 30
        let gold = vec![Span::new(cat, 0, gold_len)];
        let mut preds: Vec<Span> = pred.iter().map(|&(s, l)| Span::new(cat, s, s + l)).collect();
        let before = span_f1(&preds, &gold).per_category[&cat].prf;
        preds.push(Span::new(cat, 30, 30 + extra_len));
        let after = span_f1(&preds, &gold).per_category[&cat].prf;
        let (p0, p1) = (before.precision.unwrap(), after.precision.unwrap());
        prop_assert_eq!(before.recall, after.recall);
        if p0 > 0.0 { prop_assert!(p1 < p0); } else { prop_assert_eq!(p1, 0.0); }
    }

    #[test]
    fn merge_is_symmetric(a in spans_in(60, 6), b in spans_in(60, 6), k in 1..4usize) {
        let (a, b) = (oppo_core::model::normalize_spans(a), oppo_core::model::normalize_spans(b));
        let cfg = MergeConfig { conflict_overlap: k };
        let ab = merge_spans(&a, &b, &cfg);
        let ba = merge_spans(&b, &a, &cfg);
        prop_assert_eq!(&ab.gold, &ba.gold);
        prop_assert_eq!(&ab.retained_near_conflict, &ba.retained_near_conflict);
        let mut flipped: Vec<_> = ba.rejected.iter().map(|r| (r.side.other(), r.span, r.reason)).collect();
        let mut direct: Vec<_> = ab.rejected.iter().map(|r| (r.side, r.span, r.reason)).collect();
        flipped.sort_by_key(|x| (x.0 == Side::Second, x.1));
        direct.sort_by_key(|x| (x.0 == Side::Second, x.1));
        prop_assert_eq!(direct, flipped);
    }

    #[test]
    fn merged_spans_stay_within_their_support(a in spans_in(60, 6), b in spans_in(60, 6)) {
        let (a, b) = (oppo_core::model::normalize_spans(a), oppo_core::model::normalize_spans(b));
        let m = merge_spans(&a, &b, &MergeConfig::default());
        for g in &m.gold {
            // every character is covered by an input span of the category
            for c in g.start..g.end {
                prop_assert!(chars_covered(&a, g.category, c) || chars_covered(&b, g.category, c));
            }
            // and some character is covered by both annotators
            prop_assert!((g.start..g.end).any(|c| chars_covered(&a, g.category, c) && chars_covered(&b, g.category, c)));
        }
        // every input span is either absorbed into a gold span or rejected
        for (side, spans) in [(Side::First, &a), (Side::Second, &b)] {
            for s in spans.iter() {
                let absorbed = m.gold.iter().any(|g| g.category == s.category && g.contains(s));
                let rejected = m.rejected.iter().any(|r| r.side == side && r.span == *s);
                prop_assert!(absorbed != rejected, "{s:?} absorbed={absorbed} rejected={rejected}");
            }
        }
        // single-annotator spans never reach the gold corpus
        for r in &m.rejected {
            let other = if r.side == Side::First { &b } else { &a };
            if r.reason == RejectReason::SingleAnnotator || r.reason == RejectReason::LabelConflict {
                prop_assert!(!other.iter().any(|o| o.category == r.span.category && o.overlap(&r.span) > 0));
            }
        }
    }

    #[test]
    fn rank_tests_ignore_monotone_transforms(
        a in prop::collection::vec(0..50i32, 3..15),
        b in prop::collection::vec(0..50i32, 3..15),
        c in prop::collection::vec(0..50i32, 3..15),
    ) {
        let f = |v: &[i32]| v.iter().map(|&x| x as f64).collect::<Vec<_>>();
        let g = |v: &[i32]| v.iter().map(|&x| (x as f64).powi(3) * 2.0 + 7.0).collect::<Vec<_>>();
        let (a1, b1, c1) = (f(&a), f(&b), f(&c));
        let (a2, b2, c2) = (g(&a), g(&b), g(&c));
        match (mann_whitney_u(&a1, &b1), mann_whitney_u(&a2, &b2)) {
            (Ok(x), Ok(y)) => { prop_assert_eq!(x.statistic, y.statistic); prop_assert_eq!(x.p, y.p); }
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "only one side failed"),
        }
        let k1 = kruskal_wallis(&[("a", &a1), ("b", &b1), ("c", &c1)]);
        let k2 = kruskal_wallis(&[("a", &a2), ("b", &b2), ("c", &c2)]);
        match (k1, k2) {
            (Ok(x), Ok(y)) => { prop_assert_eq!(x.statistic, y.statistic); prop_assert_eq!(x.p, y.p); }
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "only one side failed"),
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn chi_square_deviations_sum_to_zero(
        rows in 2..5usize,
        cols in 2..5usize,
        cells in prop::collection::vec(1..60u32, 16),
    ) {
        let t: Vec<Vec<f64>> = (0..rows).map(|i| (0..cols).map(|j| cells[i * 4 + j] as f64).collect()).collect();
        let r = chi_square_independence(&t).unwrap();
        for i in 0..rows {
            let s: f64 = (0..cols).map(|j| t[i][j] - r.expected[i][j]).sum();
            prop_assert!(s.abs() < 1e-9);
        }
        for j in 0..cols {
            let s: f64 = (0..rows).map(|i| t[i][j] - r.expected[i][j]).sum();
            prop_assert!(s.abs() < 1e-9);
        }
    }

    #[test]
    fn alpha_ignores_annotator_and_item_order(
        values in prop::collection::vec(prop::collection::vec(prop::option::weighted(0.85, 0..3u8), 3), 4..30),
        rot in 0..3usize,
    ) {
        let items: Vec<String> = (0..values.len()).map(|i| format!("i{i}")).collect();
        let names = vec!["x".to_string(), "y".into(), "z".into()];
        let Ok(m) = ReliabilityMatrix::new(items.clone(), names.clone(), values.clone()) else {
            return Ok(());
        };
        let mut rotated: Vec<Vec<Option<u8>>> = values.iter().map(|r| { let mut r = r.clone(); r.rotate_left(rot); r }).collect();
        rotated.reverse();
        let mut items2 = items.clone();
        items2.reverse();
        let mut names2 = names.clone();
        names2.rotate_left(rot);
        let m2 = ReliabilityMatrix::new(items2, vec!["p".into(), "q".into(), "r".into()], rotated).unwrap();
        prop_assert!((observed_agreement(&m) - observed_agreement(&m2)).abs() < 1e-12);
        match (krippendorff_alpha(&m), krippendorff_alpha(&m2)) {
            (Ok(x), Ok(y)) => {
                prop_assert!((x - y).abs() < 1e-12);
                prop_assert_eq!((x - 1.0).abs() < 1e-12, (observed_agreement(&m) - 1.0).abs() < 1e-12);
            }
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "only one side failed"),
        }
    }

    #[test]
    fn gamma_ignores_annotator_relabeling(
        docs in prop::collection::vec((spans_in(50, 4), spans_in(50, 4)), 1..5),
        seed in any::<u64>(),
    ) {
        let build = |names: (&str, &str), swap: bool| -> Vec<Continuum> {
            docs.iter().enumerate().map(|(i, (a, b))| {
                let (a, b) = if swap { (b, a) } else { (a, b) };
                Continuum {
                    doc_id: format!("d{i}"),
                    len: 50,
                    annotators: vec![(names.0.into(), a.clone()), (names.1.into(), b.clone())],
                }
            }).collect()
        };
        let cfg = GammaConfig { resamples: 10, seed };
        let base = gamma_agreement(&build(("a", "b"), false), &cfg, ExecMode::Sequential);
        let relabeled = gamma_agreement(&build(("zed", "amy"), true), &cfg, ExecMode::Parallel);
        match (base, relabeled) {
            (Ok(x), Ok(y)) => prop_assert_eq!(x, y),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "only one side failed"),
        }
        let mut reordered = build(("a", "b"), false);
        reordered.reverse();
        if let (Ok(x), Ok(y)) = (
            gamma_agreement(&build(("a", "b"), false), &cfg, ExecMode::Sequential),
            gamma_agreement(&reordered, &cfg, ExecMode::Sequential),
        ) {
            prop_assert!((x.gamma - y.gamma).abs() < 1e-12);
        }
    }

    #[test]
    fn pairwise_f1_is_symmetric_in_annotator_order(
        labels in prop::collection::vec(prop::collection::vec(0..3u8, 3), 3..25),
    ) {
        let sets: Vec<AnnotatorSet> = (0..3).map(|k| AnnotatorSet {
            name: format!("a{k}"),
            records: labels.iter().enumerate().map(|(i, row)| AnnotationRecord {
                doc_id: format!("d{i}"),
                annotator: format!("a{k}"),
                conspiracy: row[k] == 1,
                critical: row[k] == 2,
                spans: vec![],
                text: None,
            }).collect(),
        }).collect();
        let mut rev = sets.clone();
        rev.reverse();
        let x = pairwise_f1_agreement(&sets, PairwiseMode::HumanVsHuman, None).unwrap();
        let y = pairwise_f1_agreement(&rev, PairwiseMode::HumanVsHuman, None).unwrap();
        prop_assert!(close(x.conspiracy, y.conspiracy, 1e-12));
        prop_assert!(close(x.critical, y.critical, 1e-12));
    }

    #[test]
    fn outcome_marginals_cover_the_corpus(
        docs in prop::collection::vec((spans_in(30, 3), spans_in(30, 3)), 1..30),
        cat in category(),
    ) {
        let gold: Vec<GoldDocument> = docs.iter().enumerate().map(|(i, (g, _))| GoldDocument {
            doc_id: format!("d{i}"), lang: None, klass: TextClass::Conspiracy, spans: g.clone(), text: None,
        }).collect();
        let preds: Vec<PredictionSet> = docs.iter().enumerate().map(|(i, (_, p))| PredictionSet {
            doc_id: format!("d{i}"), klass: None, spans: Some(p.clone()), category_flags: None, text: None,
        }).collect();
        let out = outcome_variables(&preds, &gold, cat).unwrap();
        let counts = Outcome::ALL.map(|o| out.iter().filter(|v| v.outcome == o).count());
        prop_assert_eq!(counts.iter().sum::<usize>(), gold.len());
    }

    #[test]
    fn lexicon_score_ignores_order_and_case(words in prop::collection::vec(word(), 1..25), rot in 0..25usize) {
        let lex = Lexicon::parse("t", "hate\nangr*\nfear\n").unwrap();
        let text = words.join(" ");
        let mut w2 = words.clone();
        w2.rotate_left(rot % words.len());
        let shuffled = w2.join("  ").to_uppercase();
        prop_assert_eq!(
            lexicon_score(&text, &lex, None).unwrap(),
            lexicon_score(&shuffled, &lex, None).unwrap()
        );
    }
}
