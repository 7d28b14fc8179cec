//! Experiment configuration: a flat `key = value` file with `[section]`
//! headers, overridable through `SUGGEST_<SECTION>_<KEY>` variables.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::synth::SynthConfig;
use crate::base_suggester::HierarchyConfig;
use crate::error::{Error, Result};
use crate::eval_harness::WeekId;
use crate::profiles::DEFAULT_DECAY_ALPHA;
use crate::ranker::TrainConfig;
use crate::topic_model::LdaHyperparams;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Paths as written; relative ones resolve against `base_dir`.
    pub logs: String,
    pub corpus: String,
    pub model_dir: String,
    pub report_dir: String,
    pub base_dir: PathBuf,

    pub num_topics: usize,
    /// When non-empty, the topic count is chosen among these by held-out perplexity.
    pub topic_candidates: Vec<usize>,
    pub gibbs_iterations: usize,
    pub burn_in: usize,
    pub sample_lag: usize,
    pub inference_iterations: usize,
    pub inference_burn_in: usize,
    pub min_doc_freq: usize,

    pub hierarchy: HierarchyConfig,
    pub decay_alpha: f64,
    pub list_size: usize,
    /// Insert a validated refinement missing from the base list at a seeded
    /// random position so that every labelled impression has a positive.
    pub union_refinement: bool,

    pub ranker: TrainConfig,
    /// First week of the replay; the topic model and hierarchy see only
    /// sessions up to and including it. Defaults to the first logged week.
    pub start_week: Option<WeekId>,
    pub end_week: Option<WeekId>,

    pub rng_seed: u64,
    pub synth: SynthConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let lda = LdaHyperparams::new(50, 42);
        ExperimentConfig {
            logs: "data/log.tsv".into(),
            corpus: "data/corpus.tsv".into(),
            model_dir: "models".into(),
            report_dir: "reports".into(),
            base_dir: PathBuf::from("."),
            num_topics: lda.num_topics,
            topic_candidates: Vec::new(),
            gibbs_iterations: lda.gibbs_iterations,
            burn_in: lda.burn_in,
            sample_lag: lda.sample_lag,
            inference_iterations: lda.inference_iterations,
            inference_burn_in: lda.inference_burn_in,
            min_doc_freq: lda.min_doc_freq,
            hierarchy: HierarchyConfig::default(),
            decay_alpha: DEFAULT_DECAY_ALPHA,
            list_size: 10,
            union_refinement: true,
            ranker: TrainConfig::default(),
            start_week: None,
            end_week: None,
            rng_seed: 42,
            synth: SynthConfig::default(),
        }
    }
}

fn parse<T: FromStr>(section: &str, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{section}.{key}: cannot parse {value:?}")))
}

fn parse_bool(section: &str, key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!(
            "{section}.{key}: expected a boolean, got {value:?}"
        ))),
    }
}

fn parse_list<T: FromStr>(section: &str, key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(section, key, s))
        .collect()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn week_opt(w: Option<WeekId>) -> String {
    w.map_or("auto".to_string(), |w| w.to_string())
}

impl ExperimentConfig {
    /// Every setting as `(section, key, value)`, in file order.
    pub fn entries(&self) -> Vec<(&'static str, &'static str, String)> {
        let s = &self.synth;
        vec![
            ("paths", "logs", self.logs.clone()),
            ("paths", "corpus", self.corpus.clone()),
            ("paths", "model_dir", self.model_dir.clone()),
            ("paths", "report_dir", self.report_dir.clone()),
            ("topics", "num_topics", self.num_topics.to_string()),
            ("topics", "candidates", join(&self.topic_candidates)),
            (
                "topics",
                "gibbs_iterations",
                self.gibbs_iterations.to_string(),
            ),
            ("topics", "burn_in", self.burn_in.to_string()),
            ("topics", "sample_lag", self.sample_lag.to_string()),
            (
                "topics",
                "inference_iterations",
                self.inference_iterations.to_string(),
            ),
            (
                "topics",
                "inference_burn_in",
                self.inference_burn_in.to_string(),
            ),
            ("topics", "min_doc_freq", self.min_doc_freq.to_string()),
            ("hierarchy", "min_freq", self.hierarchy.min_freq.to_string()),
            (
                "hierarchy",
                "subsume_threshold",
                self.hierarchy.subsume_threshold.to_string(),
            ),
            (
                "hierarchy",
                "max_phrase_words",
                self.hierarchy.max_phrase_words.to_string(),
            ),
            (
                "hierarchy",
                "corpus_terms",
                self.hierarchy.corpus_terms.to_string(),
            ),
            ("profiles", "decay_alpha", self.decay_alpha.to_string()),
            ("suggest", "list_size", self.list_size.to_string()),
            (
                "suggest",
                "union_refinement",
                self.union_refinement.to_string(),
            ),
            ("ranker", "num_trees", self.ranker.num_trees.to_string()),
            ("ranker", "num_leaves", self.ranker.num_leaves.to_string()),
            (
                "ranker",
                "min_leaf",
                self.ranker.min_instances_per_leaf.to_string(),
            ),
            (
                "ranker",
                "learning_rate",
                self.ranker.learning_rate.to_string(),
            ),
            (
                "ranker",
                "ndcg_truncation",
                self.ranker.ndcg_truncation.to_string(),
            ),
            ("eval", "start_week", week_opt(self.start_week)),
            ("eval", "end_week", week_opt(self.end_week)),
            ("run", "seed", self.rng_seed.to_string()),
            ("synth", "topics", s.num_topics.to_string()),
            ("synth", "words_per_topic", s.words_per_topic.to_string()),
            (
                "synth",
                "query_words_per_topic",
                s.query_words_per_topic.to_string(),
            ),
            ("synth", "topics_per_head", s.topics_per_head.to_string()),
            ("synth", "documents", s.num_docs.to_string()),
            ("synth", "doc_length", s.doc_length.to_string()),
            ("synth", "users", s.num_users.to_string()),
            (
                "synth",
                "interests_per_user",
                s.interests_per_user.to_string(),
            ),
            ("synth", "sessions", s.num_sessions.to_string()),
            (
                "synth",
                "session_length_weights",
                join(&s.session_length_weights),
            ),
            ("synth", "click_noise", s.click_noise.to_string()),
            ("synth", "click_prob", s.click_prob.to_string()),
            (
                "synth",
                "ambiguous_first_query",
                s.ambiguous_first_query.to_string(),
            ),
            ("synth", "child_refinement", s.child_refinement.to_string()),
            ("synth", "query_word_skew", s.query_word_skew.to_string()),
            ("synth", "weeks", s.weeks.to_string()),
            ("synth", "start_date", s.start_date.to_string()),
            ("synth", "seed", s.rng_seed.to_string()),
        ]
    }

    pub fn set(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let (sec, k) = (section, key);
        let s = &mut self.synth;
        match (sec, k) {
            ("paths", "logs") => self.logs = v.to_string(),
            ("paths", "corpus") => self.corpus = v.to_string(),
            ("paths", "model_dir") => self.model_dir = v.to_string(),
            ("paths", "report_dir") => self.report_dir = v.to_string(),
            ("topics", "num_topics") => self.num_topics = parse(sec, k, v)?,
            ("topics", "candidates") => self.topic_candidates = parse_list(sec, k, v)?,
            ("topics", "gibbs_iterations") => self.gibbs_iterations = parse(sec, k, v)?,
            ("topics", "burn_in") => self.burn_in = parse(sec, k, v)?,
            ("topics", "sample_lag") => self.sample_lag = parse(sec, k, v)?,
            ("topics", "inference_iterations") => self.inference_iterations = parse(sec, k, v)?,
            ("topics", "inference_burn_in") => self.inference_burn_in = parse(sec, k, v)?,
            ("topics", "min_doc_freq") => self.min_doc_freq = parse(sec, k, v)?,
            ("hierarchy", "min_freq") => self.hierarchy.min_freq = parse(sec, k, v)?,
            ("hierarchy", "subsume_threshold") => {
                self.hierarchy.subsume_threshold = parse(sec, k, v)?
            }
            ("hierarchy", "max_phrase_words") => {
                self.hierarchy.max_phrase_words = parse(sec, k, v)?
            }
            ("hierarchy", "corpus_terms") => self.hierarchy.corpus_terms = parse(sec, k, v)?,
            ("profiles", "decay_alpha") => self.decay_alpha = parse(sec, k, v)?,
            ("suggest", "list_size") => self.list_size = parse(sec, k, v)?,
            ("suggest", "union_refinement") => self.union_refinement = parse_bool(sec, k, v)?,
            ("ranker", "num_trees") => self.ranker.num_trees = parse(sec, k, v)?,
            ("ranker", "num_leaves") => self.ranker.num_leaves = parse(sec, k, v)?,
            ("ranker", "min_leaf") => self.ranker.min_instances_per_leaf = parse(sec, k, v)?,
            ("ranker", "learning_rate") => self.ranker.learning_rate = parse(sec, k, v)?,
            ("ranker", "ndcg_truncation") => self.ranker.ndcg_truncation = parse(sec, k, v)?,
            ("eval", "start_week") => self.start_week = parse_week(sec, k, v)?,
            ("eval", "end_week") => self.end_week = parse_week(sec, k, v)?,
            ("run", "seed") => self.rng_seed = parse(sec, k, v)?,
            ("synth", "topics") => s.num_topics = parse(sec, k, v)?,
            ("synth", "words_per_topic") => s.words_per_topic = parse(sec, k, v)?,
            ("synth", "query_words_per_topic") => s.query_words_per_topic = parse(sec, k, v)?,
            ("synth", "topics_per_head") => s.topics_per_head = parse(sec, k, v)?,
            ("synth", "documents") => s.num_docs = parse(sec, k, v)?,
            ("synth", "doc_length") => s.doc_length = parse(sec, k, v)?,
            ("synth", "users") => s.num_users = parse(sec, k, v)?,
            ("synth", "interests_per_user") => s.interests_per_user = parse(sec, k, v)?,
            ("synth", "sessions") => s.num_sessions = parse(sec, k, v)?,
            ("synth", "session_length_weights") => {
                s.session_length_weights = parse_list(sec, k, v)?
            }
            ("synth", "click_noise") => s.click_noise = parse(sec, k, v)?,
            ("synth", "click_prob") => s.click_prob = parse(sec, k, v)?,
            ("synth", "ambiguous_first_query") => s.ambiguous_first_query = parse(sec, k, v)?,
            ("synth", "child_refinement") => s.child_refinement = parse(sec, k, v)?,
            ("synth", "query_word_skew") => s.query_word_skew = parse(sec, k, v)?,
            ("synth", "weeks") => s.weeks = parse(sec, k, v)?,
            ("synth", "start_date") => s.start_date = parse(sec, k, v)?,
            ("synth", "seed") => s.rng_seed = parse(sec, k, v)?,
            _ => return Err(Error::Config(format!("unknown setting {sec}.{k}"))),
        }
        Ok(())
    }

    /// Parses config text on top of the defaults.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            if section.is_empty() {
                return Err(Error::Config(format!(
                    "line {}: setting outside a [section]",
                    i + 1
                )));
            }
            cfg.set(&section, k.trim(), v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// Applies `SUGGEST_<SECTION>_<KEY>` overrides from `vars`.
    pub fn apply_overrides<I, K, V>(&mut self, vars: I) -> Result<()>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let known: BTreeMap<String, (&str, &str)> = self
            .entries()
            .into_iter()
            .map(|(s, k, _)| {
                (
                    format!("SUGGEST_{}_{}", s.to_uppercase(), k.to_uppercase()),
                    (s, k),
                )
            })
            .collect();
        for (name, value) in vars {
            if let Some(&(s, k)) = known.get(name.as_ref()) {
                self.set(s, k, value.as_ref())?;
            }
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.0..=1.0).contains(&self.decay_alpha) {
            return bad(format!(
                "profiles.decay_alpha must lie in [0, 1], got {}",
                self.decay_alpha
            ));
        }
        if self.list_size == 0 {
            return bad("suggest.list_size must be positive".into());
        }
        if let (Some(a), Some(b)) = (self.start_week, self.end_week) {
            if b <= a {
                return bad(format!("eval.end_week {b} must come after start_week {a}"));
            }
        }
        self.lda_hyperparams()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.ranker
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.synth
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn lda_hyperparams(&self) -> LdaHyperparams {
        LdaHyperparams {
            gibbs_iterations: self.gibbs_iterations,
            burn_in: self.burn_in,
            sample_lag: self.sample_lag,
            inference_iterations: self.inference_iterations,
            inference_burn_in: self.inference_burn_in,
            min_doc_freq: self.min_doc_freq,
            ..LdaHyperparams::new(self.num_topics, self.rng_seed)
        }
    }

    pub fn resolve(&self, p: &str) -> PathBuf {
        let path = Path::new(p);
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// The effective configuration in the file format; re-parses to `self`.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        let mut current = "";
        for (s, k, v) in self.entries() {
            if s != current {
                if !current.is_empty() {
                    out.push('\n');
                }
                out.push_str(&format!("[{s}]\n"));
                current = s;
            }
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    /// Flattened `section.key` pairs for report headers.
    pub fn echo(&self) -> Vec<(String, String)> {
        self.entries()
            .into_iter()
            .map(|(s, k, v)| (format!("{s}.{k}"), v))
            .collect()
    }

    /// Short stable digest of the effective configuration.
    pub fn fingerprint(&self) -> String {
        // FNV-1a over the echoed settings
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.to_config_string().bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

fn parse_week(sec: &str, key: &str, v: &str) -> Result<Option<WeekId>> {
    if v == "auto" || v.is_empty() {
        return Ok(None);
    }
    v.parse().map(Some).map_err(|_| {
        Error::Config(format!(
            "{sec}.{key}: expected a week like 2012-W01 or auto, got {v:?}"
        ))
    })
}
