use std::collections::BTreeMap;

use qsuggest::log_model::{assemble_sessions, compute_log_stats};
use qsuggest::pipeline::{synth_generate, SynthConfig};

#[test]
fn generator_matches_its_configured_rates() {
    let cfg = SynthConfig::default();
    let out = synth_generate(&cfg).unwrap();
    let sessions = assemble_sessions(out.events.clone()).unwrap();
    let stats = compute_log_stats(&sessions);
    assert_eq!(stats.sessions, cfg.num_sessions);

    let within = |got: f64, want: f64| (got - want).abs() <= 0.05 * want;
    let queries = cfg.mean_session_length();
    assert!(
        within(stats.queries_per_session, queries),
        "{} vs {queries}",
        stats.queries_per_session
    );
    let clicks = queries * cfg.click_prob * 1.3;
    assert!(
        within(stats.clicks_per_session, clicks),
        "{} vs {clicks}",
        stats.clicks_per_session
    );

    let mut per_week: BTreeMap<String, usize> = BTreeMap::new();
    for s in &sessions {
        let w = s.start_time().unwrap().format("%G-W%V").to_string();
        *per_week.entry(w).or_default() += 1;
    }
    assert_eq!(per_week.len(), cfg.weeks, "{per_week:?}");
    let even = cfg.num_sessions as f64 / cfg.weeks as f64;
    assert!(
        per_week.values().all(|&n| within(n as f64, even)),
        "{per_week:?}"
    );
}

#[test]
fn noiseless_clicks_stay_on_the_intent_topic() {
    let cfg = SynthConfig {
        click_noise: 0.0,
        num_sessions: 500,
        ..SynthConfig::default()
    };
    let out = synth_generate(&cfg).unwrap();
    let mut clicks = 0;
    for e in out.events.iter().filter(|e| e.is_click()) {
        let intent = out.truth.sessions[&e.session_id].intent;
        assert_eq!(out.truth.doc_topics[&e.content], intent);
        clicks += 1;
    }
    assert!(clicks > 0);
}

#[test]
fn recorded_queries_replay_the_log() {
    let out = synth_generate(&SynthConfig {
        num_sessions: 300,
        ..SynthConfig::default()
    })
    .unwrap();
    for s in assemble_sessions(out.events.clone()).unwrap() {
        let logged: Vec<&str> = s
            .events
            .iter()
            .filter(|e| e.is_query())
            .map(|e| e.content.as_str())
            .collect();
        let truth = &out.truth.sessions[&s.session_id];
        assert_eq!(logged, truth.queries);
        for (i, q) in logged.iter().enumerate().skip(1) {
            assert_eq!(out.truth.next_query(&s.session_id, i), Some(*q));
        }
    }
}

#[test]
fn planted_oracle_is_perfect_and_base_lists_are_the_hierarchy_order() {
    use qsuggest::eval_harness::{Metric, MetricSet};
    use qsuggest::log_model::preprocess_sessions;
    use qsuggest::pipeline::experiment::{
        build_topic_space, resolve_weeks, train_hierarchy, train_topic_model,
    };
    use qsuggest::pipeline::{ExperimentConfig, ImpressionBuilder};

    let mut cfg = ExperimentConfig {
        num_topics: 5,
        gibbs_iterations: 60,
        burn_in: 20,
        ..Default::default()
    };
    cfg.synth = SynthConfig {
        num_topics: 5,
        num_docs: 300,
        num_users: 80,
        num_sessions: 800,
        click_noise: 0.0,
        ..SynthConfig::default()
    };
    let data = synth_generate(&cfg.synth).unwrap();
    let sessions = preprocess_sessions(assemble_sessions(data.events.clone()).unwrap());
    let (start, end) = resolve_weeks(&cfg, &sessions).unwrap();
    let model = train_topic_model(&cfg, &data.corpus).unwrap();
    let space = build_topic_space(&model, &data.corpus).unwrap();
    let h = train_hierarchy(&cfg, &data.corpus, &sessions, start).unwrap();
    let builder = ImpressionBuilder::new(&cfg, &space, &h).unwrap();

    let (impressions, _) = builder.prepare(&sessions, start, end);
    assert!(!impressions.is_empty());
    let mut oracle = Vec::new();
    for imp in &impressions {
        let (sid, pos) = imp.id.rsplit_once('#').unwrap();
        let planted = data.truth.next_query(sid, pos.parse().unwrap()).unwrap();
        let mut order: Vec<usize> = (0..imp.suggestions.len()).collect();
        order.sort_by_key(|&i| imp.suggestions[i] != planted);
        let labels: Vec<bool> = order.iter().map(|&i| imp.labels[i]).collect();
        oracle.push(MetricSet::from_labels(&labels).unwrap());
    }
    assert_eq!(
        MetricSet::mean(oracle.iter()).unwrap().get(Metric::Map),
        1.0
    );

    for q in impressions.iter().map(|i| i.query.as_str()).take(200) {
        assert_eq!(builder.base_list(q), h.suggest(q, cfg.list_size).texts());
    }
}
