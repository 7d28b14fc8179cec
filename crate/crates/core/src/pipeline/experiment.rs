//! Stage functions shared by the command line and the examples: loading
//! inputs, training the topic model and hierarchy, turning sessions into
//! labelled impressions, and running the weekly replay.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ExperimentConfig;
use super::methods::{build_method_pipelines, ConfiguredMethod};
use crate::base_suggester::{build_hierarchy, ConceptHierarchy};
use crate::corpus_index::{read_corpus, Document, InvertedIndex};
use crate::error::{Error, Result};
use crate::eval_harness::{
    rolling_weekly_eval, EvalImpression, EvaluationRun, RankingMethod, WeekId,
};
use crate::features::{extract_features, FeatureVector, SuggestionContext};
use crate::log_model::{
    assemble_sessions, label_suggestions, normalize_query, preprocess_sessions, read_log,
    validated_refinement, DiscardReason, LabelOutcome, QueryImpression, SearchSession,
};
use crate::profiles::{build_click_profile, build_query_profile, DecayParams, TopicSpace};
use crate::topic_model::{select_topic_count, train_lda, TopicDistribution, TopicModel};

pub fn open(path: &Path, stage: &'static str) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingArtifact {
                stage,
                path: path.to_path_buf(),
            },
            _ => Error::Io(e),
        })
}

/// Sessions from a log file, preprocessed, with the number of rejected lines.
pub fn load_sessions(path: &Path) -> Result<(Vec<SearchSession>, usize)> {
    let parsed = read_log(open(path, "synth")?)?;
    for r in parsed.rejected.iter().take(5) {
        log::warn!("{}:{}: {}", path.display(), r.line, r.reason);
    }
    let rejected = parsed.rejected.len();
    Ok((
        preprocess_sessions(assemble_sessions(parsed.events)?),
        rejected,
    ))
}

pub fn load_corpus(path: &Path) -> Result<Vec<Document>> {
    read_corpus(open(path, "synth")?)
}

/// Trains LDA, first choosing K by held-out perplexity when candidates are configured.
pub fn train_topic_model(cfg: &ExperimentConfig, docs: &[Document]) -> Result<TopicModel> {
    let mut hyper = cfg.lda_hyperparams();
    if !cfg.topic_candidates.is_empty() {
        let sel = select_topic_count(docs, &cfg.topic_candidates, 0.1, &hyper)?;
        hyper = hyper.with_topics(sel.best);
    }
    train_lda(docs, &hyper)
}

pub fn build_topic_space(model: &TopicModel, docs: &[Document]) -> Result<TopicSpace> {
    TopicSpace::new(InvertedIndex::build(docs)?, model.doc_topics(docs))
}

pub fn session_week(s: &SearchSession) -> Option<WeekId> {
    s.start_time().map(WeekId::of)
}

/// Replay window: configured weeks, or the first and last logged weeks.
pub fn resolve_weeks(
    cfg: &ExperimentConfig,
    sessions: &[SearchSession],
) -> Result<(WeekId, WeekId)> {
    let weeks: Vec<WeekId> = sessions
        .iter()
        .flat_map(|s| s.events.iter().map(|e| WeekId::of(e.timestamp)))
        .collect();
    let (Some(&lo), Some(&hi)) = (weeks.iter().min(), weeks.iter().max()) else {
        return Err(Error::InvalidInput("the log contains no sessions".into()));
    };
    let start = cfg.start_week.unwrap_or(lo);
    let end = cfg.end_week.unwrap_or(hi);
    if end <= start {
        return Err(Error::InvalidInput(format!(
            "logs must span at least two ISO weeks (found {start} to {end})"
        )));
    }
    Ok((start, end))
}

/// Sessions that start no later than `cutoff`: the only history the
/// hierarchy may learn from.
pub fn sessions_through(sessions: &[SearchSession], cutoff: WeekId) -> Vec<SearchSession> {
    sessions
        .iter()
        .filter(|s| session_week(s).is_some_and(|w| w <= cutoff))
        .cloned()
        .collect()
}

pub fn train_hierarchy(
    cfg: &ExperimentConfig,
    docs: &[Document],
    sessions: &[SearchSession],
    cutoff: WeekId,
) -> Result<ConceptHierarchy> {
    let index = InvertedIndex::build(docs)?;
    build_hierarchy(&index, &sessions_through(sessions, cutoff), &cfg.hierarchy)
}

fn fnv1a(seed: u64, text: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    for b in text.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Inserts `refinement` at a uniform position in `1..=min(len + 1, n)` unless
/// it is already listed, then truncates to `n`. The position depends only on
/// `seed` and `key`.
pub fn union_refinement(list: &mut Vec<String>, refinement: &str, n: usize, seed: u64, key: &str) {
    let target = normalize_query(refinement);
    if list.iter().any(|s| normalize_query(s) == target) {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(seed, key));
    let pos = rng.random_range(1..=(list.len() + 1).min(n));
    list.insert(pos - 1, target);
    list.truncate(n);
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DiscardCounts {
    pub no_refinement: usize,
    pub no_click_after_refinement: usize,
    pub no_positive: usize,
}

impl DiscardCounts {
    fn add(&mut self, r: DiscardReason) {
        match r {
            DiscardReason::NoRefinement => self.no_refinement += 1,
            DiscardReason::NoClickAfterRefinement => self.no_click_after_refinement += 1,
            DiscardReason::NoPositive => self.no_positive += 1,
        }
    }
}

/// Builds suggestion contexts and feature vectors for session impressions.
pub struct ImpressionBuilder<'a> {
    space: &'a TopicSpace,
    hierarchy: &'a ConceptHierarchy,
    decay: DecayParams,
    list_size: usize,
    union: bool,
    seed: u64,
    cache: Mutex<HashMap<String, Option<TopicDistribution>>>,
}

impl<'a> ImpressionBuilder<'a> {
    pub fn new(
        cfg: &ExperimentConfig,
        space: &'a TopicSpace,
        hierarchy: &'a ConceptHierarchy,
    ) -> Result<Self> {
        Ok(ImpressionBuilder {
            space,
            hierarchy,
            decay: DecayParams::new(cfg.decay_alpha)?,
            list_size: cfg.list_size,
            union: cfg.union_refinement,
            seed: cfg.rng_seed,
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// Topic distribution of a query or suggestion text, memoised.
    pub fn text_dist(&self, text: &str) -> Option<TopicDistribution> {
        let key = normalize_query(text);
        let mut cache = self.cache.lock().expect("cache lock");
        cache
            .entry(key)
            .or_insert_with_key(|k| self.space.query_dist(k))
            .clone()
    }

    /// Context at `current_query`, given earlier queries and clicked document
    /// ids, each most recent first.
    pub fn context(
        &self,
        current_query: &str,
        prior_queries: &[String],
        prior_clicks: &[String],
    ) -> SuggestionContext {
        let click_dists: Vec<TopicDistribution> = prior_clicks
            .iter()
            .filter_map(|d| self.space.doc_dist(d).cloned())
            .collect();
        let query_dists: Vec<Option<TopicDistribution>> = std::iter::once(current_query)
            .chain(prior_queries.iter().map(String::as_str))
            .map(|q| self.text_dist(q))
            .collect();
        SuggestionContext {
            current_query: current_query.to_string(),
            previous_query: prior_queries.first().cloned(),
            query_count: prior_queries.len() + 1,
            previous_queries: prior_queries.iter().map(|q| normalize_query(q)).collect(),
            click_profile: build_click_profile(&click_dists, self.decay).ok(),
            query_profile: build_query_profile(&query_dists, self.decay).ok(),
        }
    }

    pub fn features(&self, ctx: &SuggestionContext, suggestions: &[String]) -> Vec<FeatureVector> {
        suggestions
            .iter()
            .enumerate()
            .map(|(i, s)| extract_features(ctx, s, self.text_dist(s).as_ref(), i + 1))
            .collect()
    }

    pub fn base_list(&self, query: &str) -> Vec<String> {
        self.hierarchy.suggest(query, self.list_size).texts()
    }

    /// Labelled, featurised impression, or why it was discarded.
    pub fn build(
        &self,
        session: &SearchSession,
        imp: &QueryImpression,
    ) -> Result<EvalImpression, DiscardReason> {
        let refinement = validated_refinement(session, imp)?;
        let mut list = self.base_list(&imp.query_text);
        if self.union {
            union_refinement(&mut list, refinement, self.list_size, self.seed, &imp.id());
        }
        let labeled = match label_suggestions(session, imp, &list) {
            LabelOutcome::Labeled(l) => l,
            LabelOutcome::Discard(r) => return Err(r),
        };
        let ctx = self.context(&imp.query_text, &imp.prior_queries, &imp.prior_clicks);
        Ok(EvalImpression {
            id: imp.id(),
            week: WeekId::of(imp.timestamp),
            position: imp.position,
            query: imp.query_text.clone(),
            features: self.features(&ctx, &labeled.suggestions),
            suggestions: labeled.suggestions,
            labels: labeled.labels,
        })
    }

    /// Impressions of every query submitted within `[start, end]`.
    pub fn prepare(
        &self,
        sessions: &[SearchSession],
        start: WeekId,
        end: WeekId,
    ) -> (Vec<EvalImpression>, DiscardCounts) {
        let mut out = Vec::new();
        let mut discards = DiscardCounts::default();
        for s in sessions {
            for imp in s.impressions() {
                if !(start..=end).contains(&WeekId::of(imp.timestamp)) {
                    continue;
                }
                match self.build(s, &imp) {
                    Ok(e) => out.push(e),
                    Err(r) => discards.add(r),
                }
            }
        }
        (out, discards)
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub start_week: WeekId,
    pub end_week: WeekId,
    pub impressions: usize,
    pub discards: DiscardCounts,
    pub runs: Vec<EvaluationRun>,
}

/// Replays the weekly protocol for Base, Click and Ours. The topic model
/// and hierarchy must have been trained on data through the start week.
pub fn evaluate_methods(
    cfg: &ExperimentConfig,
    sessions: &[SearchSession],
    space: &TopicSpace,
    hierarchy: &ConceptHierarchy,
) -> Result<Evaluation> {
    let (start, end) = resolve_weeks(cfg, sessions)?;
    let builder = ImpressionBuilder::new(cfg, space, hierarchy)?;
    let (impressions, discards) = builder.prepare(sessions, start, end);
    log::info!("{} impressions, discarded {discards:?}", impressions.len());
    let methods = build_method_pipelines(cfg);
    let refs: Vec<&dyn RankingMethod> = methods.iter().map(|m| m as &dyn RankingMethod).collect();
    let runs = rolling_weekly_eval(&impressions, &refs, start, end, &cfg.fingerprint())?;
    Ok(Evaluation {
        start_week: start,
        end_week: end,
        impressions: impressions.len(),
        discards,
        runs,
    })
}

/// Everything trained from raw inputs in memory: topic model, hierarchy and
/// the weekly evaluation.
pub struct ExperimentOutcome {
    pub topic_model: TopicModel,
    pub hierarchy: ConceptHierarchy,
    pub evaluation: Evaluation,
}

pub fn run_experiment(
    cfg: &ExperimentConfig,
    docs: &[Document],
    sessions: &[SearchSession],
) -> Result<ExperimentOutcome> {
    let (start, _) = resolve_weeks(cfg, sessions)?;
    let topic_model = train_topic_model(cfg, docs)?;
    let hierarchy = train_hierarchy(cfg, docs, sessions, start)?;
    let space = build_topic_space(&topic_model, docs)?;
    let evaluation = evaluate_methods(cfg, sessions, &space, &hierarchy)?;
    Ok(ExperimentOutcome {
        topic_model,
        hierarchy,
        evaluation,
    })
}

/// Per-method impressions used to train a deployable ranker: every
/// impression from the replay window.
pub fn train_deployed(
    cfg: &ExperimentConfig,
    sessions: &[SearchSession],
    space: &TopicSpace,
    hierarchy: &ConceptHierarchy,
) -> Result<BTreeMap<&'static str, crate::ranker::RankingEnsemble>> {
    let (start, end) = resolve_weeks(cfg, sessions)?;
    let builder = ImpressionBuilder::new(cfg, space, hierarchy)?;
    let (impressions, _) = builder.prepare(sessions, start, end);
    let refs: Vec<&EvalImpression> = impressions.iter().collect();
    let mut out = BTreeMap::new();
    for m in build_method_pipelines(cfg) {
        let ConfiguredMethod { spec, train_config } = m;
        if let Some(e) = spec.train(&refs, &train_config)? {
            out.insert(spec.name, e);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn union_inserts_once_within_bounds() {
        for seed in 0..50 {
            let mut list: Vec<String> = (0..10).map(|i| format!("s{i}")).collect();
            union_refinement(&mut list, "Target", 10, seed, "x#1");
            assert_eq!(list.len(), 10);
            assert_eq!(list.iter().filter(|s| *s == "target").count(), 1);
        }
        let mut short = vec!["a".to_string()];
        union_refinement(&mut short, "b", 10, 1, "k");
        assert_eq!(short.len(), 2);
        let mut present = vec!["a".to_string(), "B".to_string()];
        union_refinement(&mut present, "b", 10, 1, "k");
        assert_eq!(present, vec!["a", "B"]);
    }
}
