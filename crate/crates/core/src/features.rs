//! The ten per-suggestion re-ranking features.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use crate::corpus_index::tokenize;
use crate::error::Result;
use crate::log_model::normalize_query;
use crate::profiles::{profile_similarity, ClickProfile, QueryProfile};
use crate::topic_model::TopicDistribution;

pub const NUM_FEATURES: usize = 10;

/// Feature order. Never reorder within a model version: serialized
/// ensembles record this order and refuse mismatching inputs.
pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "ClickPersonalisedScore",
    "QueryPersonalisedScore",
    "QueryRank",
    "QuerySim",
    "QueryNo",
    "SuggestedQueryCosine",
    "SuggestedQueryJaccard",
    "SuggestedQueryEdit",
    "SuggestedQueryLevenshtein",
    "SuggestedQueryPreUsed",
];

pub const CLICK_PERSONALISED: usize = 0;
pub const QUERY_PERSONALISED: usize = 1;

/// Value of a personalised score when the profile or the suggestion's topic
/// distribution is unavailable. Valid scores lie in `[-ln 2, 0]`.
pub const MISSING_PROFILE_SCORE: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; NUM_FEATURES]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| self.0[i])
    }
}

/// Everything known about the session when a suggestion list is shown.
#[derive(Debug, Clone, PartialEq)]
pub struct SuggestionContext {
    pub current_query: String,
    pub previous_query: Option<String>,
    /// Queries submitted so far in the session, the current one included.
    pub query_count: usize,
    /// Normalized texts of earlier queries in the session.
    pub previous_queries: BTreeSet<String>,
    pub click_profile: Option<ClickProfile>,
    pub query_profile: Option<QueryProfile>,
}

fn term_counts(text: &str) -> BTreeMap<String, usize> {
    let mut tf = BTreeMap::new();
    for t in tokenize(text) {
        *tf.entry(t).or_default() += 1;
    }
    tf
}

/// Cosine of term-frequency vectors; 0 if either side has no terms.
pub fn cosine_sim(a: &str, b: &str) -> f64 {
    let (ta, tb) = (term_counts(a), term_counts(b));
    if ta.is_empty() || tb.is_empty() {
        return 0.0;
    }
    let dot: usize = ta.iter().map(|(t, c)| c * tb.get(t).unwrap_or(&0)).sum();
    let norm =
        |m: &BTreeMap<String, usize>| (m.values().map(|c| c * c).sum::<usize>() as f64).sqrt();
    (dot as f64 / (norm(&ta) * norm(&tb))).min(1.0)
}

/// Jaccard overlap of token sets; 0 if both are empty.
pub fn jaccard(a: &str, b: &str) -> f64 {
    let sa: BTreeSet<String> = tokenize(a).into_iter().collect();
    let sb: BTreeSet<String> = tokenize(b).into_iter().collect();
    let union = sa.union(&sb).count();
    if union == 0 {
        return 0.0;
    }
    sa.intersection(&sb).count() as f64 / union as f64
}

fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Levenshtein distance over whole words.
pub fn word_edit_distance(a: &str, b: &str) -> usize {
    levenshtein(&tokenize(a), &tokenize(b))
}

/// Levenshtein distance over characters.
pub fn char_levenshtein(a: &str, b: &str) -> usize {
    let ca: Vec<char> = a.chars().collect();
    let cb: Vec<char> = b.chars().collect();
    levenshtein(&ca, &cb)
}

fn personalised(
    suggestion: Option<&TopicDistribution>,
    profile: Option<&TopicDistribution>,
) -> f64 {
    match (suggestion, profile) {
        (Some(s), Some(p)) => profile_similarity(s, p),
        _ => MISSING_PROFILE_SCORE,
    }
}

pub fn extract_features(
    ctx: &SuggestionContext,
    suggestion: &str,
    suggestion_dist: Option<&TopicDistribution>,
    base_rank: usize,
) -> FeatureVector {
    debug_assert!(base_rank >= 1);
    let current = &ctx.current_query;
    FeatureVector([
        personalised(suggestion_dist, ctx.click_profile.as_ref().map(|p| &p.dist)),
        personalised(suggestion_dist, ctx.query_profile.as_ref().map(|p| &p.dist)),
        base_rank as f64,
        ctx.previous_query
            .as_deref()
            .map_or(0.0, |prev| cosine_sim(current, prev)),
        ctx.query_count as f64,
        cosine_sim(current, suggestion),
        jaccard(current, suggestion),
        word_edit_distance(current, suggestion) as f64,
        char_levenshtein(current, suggestion) as f64,
        if ctx.previous_queries.contains(&normalize_query(suggestion)) {
            1.0
        } else {
            0.0
        },
    ])
}

/// One row of a feature-matrix dump.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow<'a> {
    pub impression_id: &'a str,
    pub label: bool,
    pub features: &'a [f64],
}

/// Writes a CSV feature matrix: `impression_id,label,<feature names...>`.
pub fn write_feature_matrix<'a, W, I>(mut w: W, names: &[&str], rows: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = FeatureRow<'a>>,
{
    writeln!(w, "impression_id,label,{}", names.join(","))?;
    for row in rows {
        let vals: Vec<String> = row.features.iter().map(|v| v.to_string()).collect();
        writeln!(
            w,
            "{},{},{}",
            row.impression_id,
            u8::from(row.label),
            vals.join(",")
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{build_click_profile, build_query_profile, DecayParams};

    fn td(v: &[f64]) -> TopicDistribution {
        TopicDistribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn cosine_cases() {
        assert!((cosine_sim("university webmail", "university email") - 0.5).abs() < 1e-12);
        assert!((cosine_sim("campus map", "campus map") - 1.0).abs() < 1e-12);
        assert_eq!(cosine_sim("a b", "c d"), 0.0);
        assert_eq!(cosine_sim("", "c d"), 0.0);
    }

    #[test]
    fn jaccard_cases() {
        assert!((jaccard("university webmail", "university email") - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(jaccard("a b", "b a a"), 1.0);
        assert_eq!(jaccard("a", "b"), 0.0);
        assert_eq!(jaccard("", ""), 0.0);
    }

    #[test]
    fn edit_distances() {
        assert_eq!(word_edit_distance("campus map", "campus parking map"), 1);
        assert_eq!(word_edit_distance("campus map", "campus map"), 0);
        assert_eq!(word_edit_distance("a b", "c d"), 2);
        assert_eq!(char_levenshtein("kitten", "sitting"), 3);
        assert_eq!(char_levenshtein("same", "same"), 0);
        assert_eq!(char_levenshtein("", "abc"), 3);
    }

    #[test]
    fn first_query_has_no_click_profile() {
        let ctx = SuggestionContext {
            current_query: "campus".into(),
            previous_query: None,
            query_count: 1,
            previous_queries: BTreeSet::new(),
            click_profile: None,
            query_profile: build_query_profile(&[Some(td(&[0.9, 0.1]))], DecayParams::default())
                .ok(),
        };
        let f = extract_features(&ctx, "campus map", Some(&td(&[0.9, 0.1])), 1);
        assert_eq!(f.get("ClickPersonalisedScore"), Some(MISSING_PROFILE_SCORE));
        assert_eq!(f.get("QueryPersonalisedScore"), Some(0.0));
        assert_eq!(f.get("QuerySim"), Some(0.0));
        assert_eq!(f.get("QueryNo"), Some(1.0));
        // unknown suggestion topics also give the sentinel
        let f = extract_features(&ctx, "campus map", None, 1);
        assert_eq!(f.get("QueryPersonalisedScore"), Some(MISSING_PROFILE_SCORE));
    }

    #[test]
    fn full_vector_by_hand() {
        let decay = DecayParams::default();
        let click = build_click_profile(&[td(&[1.0, 0.0])], decay).unwrap();
        let query = build_query_profile(&[Some(td(&[0.5, 0.5]))], decay).unwrap();
        let ctx = SuggestionContext {
            current_query: "university webmail".into(),
            previous_query: Some("university email".into()),
            query_count: 3,
            previous_queries: ["university email".to_string(), "webmail login".to_string()]
                .into_iter()
                .collect(),
            click_profile: Some(click),
            query_profile: Some(query),
        };
        let f = extract_features(&ctx, "Webmail Login", Some(&td(&[0.0, 1.0])), 4);
        // mixture of (0,1) and (0.5,0.5)
        let m = [0.25f64, 0.75];
        let js_q = 0.5 * (1.0f64 * (1.0 / m[1]).ln())
            + 0.5 * (0.5 * (0.5f64 / m[0]).ln() + 0.5 * (0.5f64 / m[1]).ln());
        let expect = [
            -std::f64::consts::LN_2,
            -js_q,
            4.0,
            0.5,
            3.0,
            cosine_sim("university webmail", "webmail login"),
            1.0 / 3.0,
            2.0,
            char_levenshtein("university webmail", "Webmail Login") as f64,
            1.0,
        ];
        for (i, (a, b)) in f.0.iter().zip(expect).enumerate() {
            assert!((a - b).abs() < 1e-12, "{}: {a} vs {b}", FEATURE_NAMES[i]);
        }
        assert!((expect[5] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn dumps_csv() {
        let mut out = Vec::new();
        let feats = [1.0, 2.5];
        write_feature_matrix(
            &mut out,
            &["A", "B"],
            [FeatureRow {
                impression_id: "s#1",
                label: true,
                features: &feats,
            }],
        )
        .unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "impression_id,label,A,B\ns#1,1,1,2.5\n"
        );
    }
}
