//! Build the decayed click and query profiles of a session and score
//! suggestions against them, then assemble the full ten-feature vectors.
//!
//! `cargo run --example session_profiles`

use std::collections::BTreeSet;

use qsuggest::corpus_index::{Document, InvertedIndex};
use qsuggest::features::{extract_features, SuggestionContext, FEATURE_NAMES};
use qsuggest::profiles::{
    build_click_profile, build_query_profile, decay_weights, profile_similarity, DecayParams,
    TopicSpace,
};
use qsuggest::topic_model::TopicDistribution;

fn td(p: &[f64]) -> TopicDistribution {
    TopicDistribution::new(p.to_vec()).expect("normalized")
}

fn main() -> qsuggest::Result<()> {
    println!(
        "decay weights, 3 events, alpha 0.95: {:.5?}",
        decay_weights(3, 0.95)?
    );

    // Two topics: study (0) and travel (1). Distributions are per document.
    let docs = vec![
        Document::new("d1", "library opening hours"),
        Document::new("d2", "library loan renewal"),
        Document::new("d3", "bus timetable campus"),
        Document::new("d4", "campus parking permit"),
    ];
    let dists = vec![
        td(&[0.9, 0.1]),
        td(&[0.8, 0.2]),
        td(&[0.2, 0.8]),
        td(&[0.1, 0.9]),
    ];
    let space = TopicSpace::new(InvertedIndex::build(&docs)?, dists)?;
    let decay = DecayParams::default();

    // Session so far, most recent first: queries "library loan", "library";
    // one click on d2.
    let queries = ["library loan", "library"].map(|q| space.query_dist(q));
    let query_profile = build_query_profile(&queries, decay).ok();
    let clicked: Vec<TopicDistribution> = ["d2"]
        .iter()
        .filter_map(|d| space.doc_dist(d).cloned())
        .collect();
    let click_profile = build_click_profile(&clicked, decay).ok();
    println!(
        "query profile {:.3?}",
        query_profile.as_ref().map(|p| p.dist.probs())
    );
    println!(
        "click profile {:.3?}",
        click_profile.as_ref().map(|p| p.dist.probs())
    );

    let ctx = SuggestionContext {
        current_query: "library loan".into(),
        previous_query: Some("library".into()),
        query_count: 2,
        previous_queries: BTreeSet::from(["library".to_string()]),
        click_profile,
        query_profile,
    };
    println!("\n{:<22} {}", "suggestion", FEATURE_NAMES.join(" "));
    for (rank, s) in [
        "library loan renewal",
        "campus parking",
        "library",
        "unseen words",
    ]
    .iter()
    .enumerate()
    {
        let dist = space.query_dist(s);
        if let (Some(d), Some(p)) = (&dist, &ctx.query_profile) {
            debug_assert_eq!(
                profile_similarity(d, &p.dist),
                extract_features(&ctx, s, Some(d), 1).0[1]
            );
        }
        let f = extract_features(&ctx, s, dist.as_ref(), rank + 1);
        let cells: Vec<String> = f.0.iter().map(|v| format!("{v:.3}")).collect();
        println!("{s:<22} {}", cells.join(" "));
    }
    Ok(())
}
