use std::collections::BTreeSet;

use chrono::{TimeZone, Utc};
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use qsuggest::base_suggester::{build_hierarchy, HierarchyConfig};
use qsuggest::corpus_index::{Document, InvertedIndex};
use qsuggest::eval_harness::{
    average_precision, ndcg_at_k, paired_t_test, precision_at_k, reciprocal_rank_at_10,
};
use qsuggest::log_model::{assemble_sessions, EventType, LogEvent};
use qsuggest::pipeline::experiment::union_refinement;
use qsuggest::profiles::{decay_weights, profile_similarity};
use qsuggest::ranker::{group_lambdas, group_ndcg, rank_order};
use qsuggest::topic_model::TopicDistribution;

fn dist(k: usize) -> impl Strategy<Value = TopicDistribution> {
    prop::collection::vec(0.0f64..1.0, k).prop_filter_map("all zero", |w| {
        (w.iter().sum::<f64>() > 1e-6).then(|| TopicDistribution::from_weights(w))
    })
}

fn dist_pair() -> impl Strategy<Value = (TopicDistribution, TopicDistribution)> {
    (2usize..16).prop_flat_map(|k| (dist(k), dist(k)))
}

proptest! {
    #[test]
    fn metrics_lie_in_unit_interval(labels in prop::collection::vec(any::<bool>(), 1..30)) {
        for v in [
            precision_at_k(&labels, 1),
            precision_at_k(&labels, 5),
            reciprocal_rank_at_10(&labels),
            ndcg_at_k(&labels, 5),
            ndcg_at_k(&labels, 10),
        ] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        match average_precision(&labels) {
            Ok(ap) => prop_assert!(ap > 0.0 && ap <= 1.0),
            Err(_) => prop_assert!(labels.iter().all(|&l| !l)),
        }
    }

    #[test]
    fn perfect_ranking_scores_one(pos in 1usize..5, neg in 0usize..10) {
        let labels: Vec<bool> = (0..pos + neg).map(|i| i < pos).collect();
        prop_assert_eq!(average_precision(&labels).unwrap(), 1.0);
        prop_assert!((ndcg_at_k(&labels, 10) - 1.0).abs() < 1e-12);
        prop_assert_eq!(reciprocal_rank_at_10(&labels), 1.0);
    }

    #[test]
    fn decay_weights_are_normalized_and_nonincreasing(n in 1usize..30, alpha in 0.0f64..=1.0) {
        let w = decay_weights(n, alpha).unwrap();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(w.windows(2).all(|p| p[0] >= p[1]));
    }

    #[test]
    fn similarity_is_bounded_and_symmetric((p, q) in dist_pair()) {
        let s = profile_similarity(&p, &q);
        prop_assert!((-std::f64::consts::LN_2..=0.0).contains(&s));
        prop_assert!((s - profile_similarity(&q, &p)).abs() <= 1e-12);
        prop_assert_eq!(profile_similarity(&p, &p), 0.0);
    }

    #[test]
    fn lambdas_match_brute_force_swaps(
        labels in prop::collection::vec(any::<bool>(), 2..9),
        perm_seed in any::<u64>(),
        sigma in 0.5f64..2.0,
    ) {
        let n = labels.len();
        // Distinct scores so a swap of two scores swaps exactly their ranks.
        let scores: Vec<f64> = (0..n)
            .map(|i| ((i as u64 * 7919 + perm_seed) % 1009) as f64 + i as f64 * 1e-3)
            .collect();
        let (lambdas, _) = group_lambdas(&labels, &scores, 10, sigma);
        let base = group_ndcg(&labels, &scores, 10);
        let all_same = labels.iter().all(|&l| l == labels[0]);
        let mut expected = vec![0.0; n];
        if !all_same {
            for i in (0..n).filter(|&i| labels[i]) {
                for j in (0..n).filter(|&j| !labels[j]) {
                    let mut swapped = scores.clone();
                    swapped.swap(i, j);
                    let delta = (group_ndcg(&labels, &swapped, 10) - base).abs();
                    let rho = 1.0 / (1.0 + (sigma * (scores[i] - scores[j])).exp());
                    expected[i] += sigma * delta * rho;
                    expected[j] -= sigma * delta * rho;
                }
            }
        }
        for (got, want) in lambdas.iter().zip(&expected) {
            prop_assert!((got - want).abs() < 1e-10, "{} vs {}", got, want);
        }
        prop_assert!(lambdas.iter().sum::<f64>().abs() < 1e-10);
        for i in 0..n {
            let sign_ok = if labels[i] { lambdas[i] >= 0.0 } else { lambdas[i] <= 0.0 };
            prop_assert!(sign_ok);
        }
    }

    #[test]
    fn rank_order_is_a_stable_descending_permutation(scores in prop::collection::vec(-3i32..3, 0..20)) {
        let s: Vec<f64> = scores.iter().map(|&x| x as f64).collect();
        let order = rank_order(&s);
        let mut seen = order.clone();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..s.len()).collect::<Vec<_>>());
        for w in order.windows(2) {
            prop_assert!(s[w[0]] > s[w[1]] || (s[w[0]] == s[w[1]] && w[0] < w[1]));
        }
    }

    #[test]
    fn t_test_matches_reference_distribution(
        pairs in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..60),
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let r = paired_t_test(&a, &b).unwrap();
        prop_assume!(!r.degenerate);
        let df = (a.len() - 1) as f64;
        let reference = StudentsT::new(0.0, 1.0, df).unwrap();
        let p = 2.0 * (1.0 - reference.cdf(r.t.abs()));
        prop_assert!((r.p - p).abs() < 1e-9, "p {} vs reference {}", r.p, p);
    }

    #[test]
    fn union_inserts_the_refinement_once(
        len in 0usize..15,
        n in 1usize..12,
        seed in any::<u64>(),
        key in "[a-z]{1,6}",
    ) {
        let mut list: Vec<String> = (0..len).map(|i| format!("s{i}")).collect();
        list.truncate(n);
        let before = list.clone();
        union_refinement(&mut list, "target", n, seed, &key);
        prop_assert!(list.len() <= n);
        let at = list.iter().position(|s| s == "target");
        prop_assert!(at.is_some());
        prop_assert!(at.unwrap() < before.len().min(n - 1) + 1);
        prop_assert_eq!(list.iter().filter(|s| *s == "target").count(), 1);
        let rest: Vec<&String> = list.iter().filter(|s| *s != "target").collect();
        prop_assert!(rest.iter().zip(&before).all(|(a, b)| *a == b));
    }

    #[test]
    fn hierarchy_is_acyclic(
        docs in prop::collection::vec(prop::collection::vec(0usize..6, 1..6), 3..25),
        queries in prop::collection::vec(prop::collection::vec(0usize..6, 1..3), 2..40),
    ) {
        let words = ["alpha", "beta", "gamma", "delta", "eps", "zeta"];
        let text = |ids: &[usize]| ids.iter().map(|&i| words[i]).collect::<Vec<_>>().join(" ");
        let corpus: Vec<Document> = docs.iter().enumerate().map(|(i, d)| Document::new(format!("d{i}"), text(d))).collect();
        let t0 = Utc.with_ymd_and_hms(2012, 1, 2, 0, 0, 0).unwrap();
        let events: Vec<LogEvent> = queries
            .iter()
            .enumerate()
            .map(|(i, q)| LogEvent {
                session_id: format!("s{}", i / 3),
                event_type: EventType::Query,
                seq_id: (i % 3 + 1) as u64,
                content: text(q),
                timestamp: t0 + chrono::Duration::seconds(i as i64),
            })
            .collect();
        let sessions = assemble_sessions(events).unwrap();
        let config = HierarchyConfig { min_freq: 1, ..Default::default() };
        let h = build_hierarchy(&InvertedIndex::build(&corpus).unwrap(), &sessions, &config).unwrap();

        // Kahn's algorithm consumes every node iff there is no cycle.
        let n = h.nodes().len();
        let mut indegree = vec![0usize; n];
        for e in h.edges() {
            indegree[e.child] += 1;
        }
        let mut ready: Vec<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
        let mut done = BTreeSet::new();
        while let Some(v) = ready.pop() {
            done.insert(v);
            for e in h.edges().iter().filter(|e| e.parent == v) {
                indegree[e.child] -= 1;
                if indegree[e.child] == 0 {
                    ready.push(e.child);
                }
            }
        }
        prop_assert_eq!(done.len(), n);
        prop_assert!(h.edges().iter().all(|e| e.parent != e.child));
    }
}

#[test]
fn t_test_degenerate_cases() {
    let same = paired_t_test(&[0.5, 0.2, 0.9], &[0.5, 0.2, 0.9]).unwrap();
    assert_eq!((same.t, same.p), (0.0, 1.0));
    let shifted = paired_t_test(&[1.0, 0.5, 0.75], &[0.5, 0.0, 0.25]).unwrap();
    assert_eq!(shifted.p, 0.0);
    assert!(shifted.t.is_infinite() && shifted.t > 0.0);
    assert!(paired_t_test(&[1.0], &[0.0]).is_err());
}
