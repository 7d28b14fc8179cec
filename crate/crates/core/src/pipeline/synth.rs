//! Seeded synthetic corpus and query-log generator.
//!
//! Each planted topic owns a block of words. Ambiguous head words are shared
//! by a few neighbouring topics and occur in most of their documents. A user
//! has a few topic interests; a session picks one of them as its intent.
//!
//! A session starts either with a bare head word `a` or with `a x`, where `x`
//! is a word of the intent topic. Refinements add an intent word to a bare
//! head, swap the topic word (`a x` to `a x'`, a sibling in the concept
//! hierarchy) or append one (`a x y`, a child). The base suggester sees the
//! same lexical shapes for every topic sharing `a`, so only the session's
//! topic tells the right refinement apart. Clicks land on documents of the
//! intent topic unless noise redirects them to a random document.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use chrono::{DateTime, Duration, NaiveDate, TimeZone, Utc};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus_index::Document;
use crate::error::{Error, Result};
use crate::log_model::{EventType, LogEvent};
use crate::textio::Lines;

const TRUTH_HEADER: &str = "qsuggest-truth v1";
const SYLLABLES: [&str; 16] = [
    "ba", "ko", "mi", "nu", "pe", "ra", "si", "vo", "za", "de", "fi", "go", "hu", "la", "ne", "ty",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub num_topics: usize,
    pub words_per_topic: usize,
    /// Leading words of each block that users type into queries.
    pub query_words_per_topic: usize,
    /// Topics sharing each ambiguous head word.
    pub topics_per_head: usize,
    pub num_docs: usize,
    pub doc_length: usize,
    pub num_users: usize,
    pub interests_per_user: usize,
    pub num_sessions: usize,
    /// Relative weights of sessions with 1, 2, 3, ... queries.
    pub session_length_weights: Vec<f64>,
    /// Probability that a click goes to a uniformly random document.
    pub click_noise: f64,
    /// Probability that a query is followed by at least one click.
    pub click_prob: f64,
    /// Probability that a session opens with a bare head word.
    pub ambiguous_first_query: f64,
    /// Probability that a two-word query is refined by appending a word.
    pub child_refinement: f64,
    /// Zipf exponent of query-word popularity within a topic.
    pub query_word_skew: f64,
    pub weeks: usize,
    /// Sessions start uniformly within `weeks` weeks from this date.
    pub start_date: NaiveDate,
    pub rng_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_topics: 20,
            words_per_topic: 25,
            query_words_per_topic: 3,
            topics_per_head: 2,
            num_docs: 2000,
            doc_length: 60,
            num_users: 500,
            interests_per_user: 2,
            num_sessions: 5000,
            session_length_weights: vec![0.25, 0.3, 0.2, 0.15, 0.1],
            click_noise: 0.2,
            click_prob: 0.9,
            ambiguous_first_query: 0.5,
            child_refinement: 0.3,
            query_word_skew: 1.0,
            weeks: 4,
            start_date: NaiveDate::from_ymd_opt(2012, 1, 2).expect("valid date"),
            rng_seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(format!("synthetic config: {m}")));
        if [
            self.num_topics,
            self.words_per_topic,
            self.topics_per_head,
            self.num_docs,
            self.doc_length,
            self.num_users,
            self.interests_per_user,
            self.num_sessions,
            self.weeks,
        ]
        .contains(&0)
        {
            return bad("all counts must be positive");
        }
        if self.num_topics < 2 {
            return bad("at least two topics are required");
        }
        if self.query_words_per_topic < 2 || self.query_words_per_topic > self.words_per_topic {
            return bad("query_words_per_topic must lie in [2, words_per_topic]");
        }
        if self.interests_per_user > self.num_topics {
            return bad("interests_per_user exceeds the number of topics");
        }
        if self.num_docs < self.num_topics {
            return bad("need at least one document per topic");
        }
        if self.topics_per_head > self.num_topics {
            return bad("topics_per_head exceeds the number of topics");
        }
        let words = self.num_topics * (self.words_per_topic + 1);
        if words > SYLLABLES.len().pow(3) {
            return bad("vocabulary too large for the word generator");
        }
        for p in [
            self.click_noise,
            self.click_prob,
            self.ambiguous_first_query,
            self.child_refinement,
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad("probabilities must lie in [0, 1]");
            }
        }
        if self.query_word_skew.is_nan() || self.query_word_skew < 0.0 {
            return bad("query_word_skew must be non-negative");
        }
        if self.session_length_weights.is_empty()
            || self
                .session_length_weights
                .iter()
                .any(|w| w.is_nan() || *w < 0.0)
            || self.session_length_weights.iter().sum::<f64>() <= 0.0
        {
            return bad("session_length_weights must be non-negative with a positive sum");
        }
        Ok(())
    }

    /// Expected queries per session under `session_length_weights`.
    pub fn mean_session_length(&self) -> f64 {
        let total: f64 = self.session_length_weights.iter().sum();
        self.session_length_weights
            .iter()
            .enumerate()
            .map(|(i, w)| (i + 1) as f64 * w)
            .sum::<f64>()
            / total
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionTruth {
    pub user: String,
    pub intent: usize,
    /// Planted queries in submission order.
    pub queries: Vec<String>,
}

/// What the generator planted: each document's dominant topic and each
/// session's intent and queries.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GroundTruth {
    pub doc_topics: BTreeMap<String, usize>,
    pub sessions: BTreeMap<String, SessionTruth>,
}

impl GroundTruth {
    /// The planted query after position `position` (1-based) of a session.
    pub fn next_query(&self, session_id: &str, position: usize) -> Option<&str> {
        self.sessions
            .get(session_id)
            .and_then(|s| s.queries.get(position))
            .map(String::as_str)
    }

    pub fn save<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{TRUTH_HEADER}")?;
        for (d, t) in &self.doc_topics {
            writeln!(w, "doc\t{d}\t{t}")?;
        }
        for (sid, s) in &self.sessions {
            writeln!(w, "session\t{sid}\t{}\t{}", s.user, s.intent)?;
            for (i, q) in s.queries.iter().enumerate() {
                writeln!(w, "query\t{sid}\t{}\t{q}", i + 1)?;
            }
        }
        Ok(())
    }

    pub fn load<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = Lines::new(r, "ground truth");
        if lines.next_line()? != TRUTH_HEADER {
            return Err(lines.err("unsupported header"));
        }
        let mut truth = GroundTruth::default();
        while let Ok(line) = lines.next_line() {
            let f: Vec<&str> = line.split('\t').collect();
            match f.as_slice() {
                ["doc", d, t] => {
                    truth.doc_topics.insert(d.to_string(), lines.parse(t)?);
                }
                ["session", sid, user, intent] => {
                    truth.sessions.insert(
                        sid.to_string(),
                        SessionTruth {
                            user: user.to_string(),
                            intent: lines.parse(intent)?,
                            queries: Vec::new(),
                        },
                    );
                }
                ["query", sid, _, q] => truth
                    .sessions
                    .get_mut(*sid)
                    .ok_or_else(|| lines.err("query before its session"))?
                    .queries
                    .push(q.to_string()),
                _ => return Err(lines.err(format!("bad record {line:?}"))),
            }
        }
        Ok(truth)
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub corpus: Vec<Document>,
    pub events: Vec<LogEvent>,
    pub truth: GroundTruth,
}

impl SynthOutput {
    pub fn corpus_text(&self) -> String {
        let mut s = String::new();
        for d in &self.corpus {
            writeln!(s, "{}\t{}", d.doc_id, d.text).expect("string write");
        }
        s
    }

    pub fn log_text(&self) -> String {
        let mut s = String::from("# session_id\ttype\tseq_id\tcontent\ttimestamp\n");
        for e in &self.events {
            s.push_str(&e.to_log_line());
            s.push('\n');
        }
        s
    }

    /// Writes `corpus.tsv`, `log.tsv` and `truth.tsv` into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("corpus.tsv"), self.corpus_text())?;
        std::fs::write(dir.join("log.tsv"), self.log_text())?;
        let mut truth = Vec::new();
        self.truth.save(&mut truth)?;
        std::fs::write(dir.join("truth.tsv"), truth)?;
        Ok(())
    }
}

/// Pronounceable, unique word for a vocabulary index.
fn word(index: usize) -> String {
    let n = SYLLABLES.len();
    // odd multiplier permutes indices mod 16^3 so neighbours look unrelated
    let scrambled = (index * 1_237 + 389) % n.pow(3);
    (0..3)
        .map(|i| SYLLABLES[(scrambled / n.pow(i)) % n])
        .collect()
}

struct Lexicon {
    /// Per topic, query words first.
    blocks: Vec<Vec<String>>,
    /// Head word `h` is shared by topics `h, h + 1, ..., h + topics_per_head - 1`.
    heads: Vec<String>,
}

impl Lexicon {
    fn new(cfg: &SynthConfig) -> Self {
        let t = cfg.num_topics;
        let w = cfg.words_per_topic;
        let heads = (0..t).map(|h| word(t * w + h)).collect();
        let blocks = (0..t)
            .map(|z| (0..w).map(|j| word(z * w + j)).collect())
            .collect();
        Lexicon { blocks, heads }
    }

    /// Head words whose topic group includes `topic`.
    fn heads_of(&self, topic: usize, per_head: usize) -> Vec<usize> {
        let t = self.heads.len();
        (0..per_head).map(|k| (topic + t - k) % t).collect()
    }
}

fn pick_doc(
    rng: &mut ChaCha8Rng,
    by_topic: &[Vec<usize>],
    topic: usize,
    num_docs: usize,
    noise: f64,
) -> usize {
    if rng.random::<f64>() < noise {
        rng.random_range(0..num_docs)
    } else {
        *by_topic[topic]
            .choose(rng)
            .expect("every topic has documents")
    }
}

/// Generates corpus, log and ground truth. Identical configs give identical output.
pub fn synth_generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let lex = Lexicon::new(cfg);
    let t = cfg.num_topics;

    // documents: dominant topic plus a secondary one; the dominant topic's
    // head words are mostly present
    let block_weights: Vec<f64> = (0..cfg.words_per_topic)
        .map(|j| 1.0 / ((j + 1) as f64).powf(0.6))
        .collect();
    let in_block = WeightedIndex::new(&block_weights).expect("positive weights");
    let mut corpus = Vec::with_capacity(cfg.num_docs);
    let mut by_topic = vec![Vec::new(); t];
    let mut doc_topics = BTreeMap::new();
    let width = cfg.num_docs.to_string().len();
    for i in 0..cfg.num_docs {
        let z = i % t;
        let second = (z + rng.random_range(1..t)) % t;
        let mut tokens: Vec<&str> = (0..cfg.doc_length)
            .map(|_| {
                let topic = if rng.random::<f64>() < 0.85 {
                    z
                } else {
                    second
                };
                lex.blocks[topic][in_block.sample(&mut rng)].as_str()
            })
            .collect();
        for h in lex.heads_of(z, cfg.topics_per_head) {
            if rng.random::<f64>() < 0.9 {
                let at = rng.random_range(0..=tokens.len());
                tokens.insert(at, &lex.heads[h]);
            }
        }
        let id = format!("d{i:0width$}");
        doc_topics.insert(id.clone(), z);
        by_topic[z].push(i);
        corpus.push(Document::new(id, tokens.join(" ")));
    }

    let users: Vec<Vec<usize>> = (0..cfg.num_users)
        .map(|_| {
            let mut topics: Vec<usize> = (0..t).collect();
            topics.shuffle(&mut rng);
            topics.truncate(cfg.interests_per_user);
            topics
        })
        .collect();

    let lengths = WeightedIndex::new(&cfg.session_length_weights).expect("validated weights");
    let q = cfg.query_words_per_topic;
    let popularity: Vec<f64> = (0..q)
        .map(|j| 1.0 / ((j + 1) as f64).powf(cfg.query_word_skew))
        .collect();
    let popular = WeightedIndex::new(&popularity).expect("positive weights");
    let start = Utc.from_utc_datetime(&cfg.start_date.and_hms_opt(0, 0, 0).expect("midnight"));
    let span_secs = (cfg.weeks * 7 * 86_400 - 3_600) as i64;
    let sid_width = cfg.num_sessions.to_string().len();
    let uid_width = cfg.num_users.to_string().len();
    let mut events = Vec::new();
    let mut sessions = BTreeMap::new();
    for s in 0..cfg.num_sessions {
        let user = rng.random_range(0..cfg.num_users);
        let intent = *users[user].choose(&mut rng).expect("user has interests");
        let n_queries = lengths.sample(&mut rng) + 1;
        let heads = lex.heads_of(intent, cfg.topics_per_head);
        let head = lex.heads[*heads.choose(&mut rng).expect("head words")].as_str();
        let topic_words = &lex.blocks[intent][..q];

        let mut queries: Vec<Vec<&str>> = Vec::with_capacity(n_queries);
        if rng.random::<f64>() < cfg.ambiguous_first_query {
            queries.push(vec![head]);
        } else {
            let w = popular.sample(&mut rng);
            queries.push(vec![head, topic_words[w].as_str()]);
        }
        while queries.len() < n_queries {
            let cur = queries.last().expect("non-empty").clone();
            let used: Vec<&str> = queries.iter().flatten().copied().collect();
            let fresh: Vec<usize> = (0..q)
                .filter(|&j| !cur.contains(&topic_words[j].as_str()))
                .collect();
            let unused: Vec<usize> = fresh
                .iter()
                .copied()
                .filter(|&j| !used.contains(&topic_words[j].as_str()))
                .collect();
            let pool = if unused.is_empty() { &fresh } else { &unused };
            let pick = WeightedIndex::new(pool.iter().map(|&j| popularity[j]))
                .expect("at least two query words per topic");
            let w = topic_words[pool[pick.sample(&mut rng)]].as_str();
            let next = match cur.len() {
                1 => vec![head, w],
                2 if rng.random::<f64>() < cfg.child_refinement => vec![head, cur[1], w],
                _ => vec![head, w],
            };
            queries.push(next);
        }

        let sid = format!("s{s:0sid_width$}");
        let mut ts: DateTime<Utc> = start + Duration::seconds(rng.random_range(0..span_secs));
        let mut seq = 0u64;
        let mut push = |kind: EventType, content: String, ts: DateTime<Utc>| {
            seq += 1;
            events.push(LogEvent {
                session_id: sid.clone(),
                event_type: kind,
                seq_id: seq,
                content,
                timestamp: ts,
            });
        };
        for query in &queries {
            push(EventType::Query, query.join(" "), ts);
            ts += Duration::seconds(rng.random_range(5..60));
            if rng.random::<f64>() < cfg.click_prob {
                let clicks = 1 + usize::from(rng.random::<f64>() < 0.3);
                for _ in 0..clicks {
                    let d = pick_doc(&mut rng, &by_topic, intent, cfg.num_docs, cfg.click_noise);
                    push(EventType::Click, corpus[d].doc_id.clone(), ts);
                    ts += Duration::seconds(rng.random_range(5..90));
                }
            }
        }
        sessions.insert(
            sid.clone(),
            SessionTruth {
                user: format!("u{user:0uid_width$}"),
                intent,
                queries: queries.iter().map(|q| q.join(" ")).collect(),
            },
        );
    }

    Ok(SynthOutput {
        corpus,
        events,
        truth: GroundTruth {
            doc_topics,
            sessions,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn small() -> SynthConfig {
        SynthConfig {
            num_docs: 200,
            num_sessions: 300,
            num_users: 50,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn words_are_unique() {
        let words: BTreeSet<String> = (0..4096).map(word).collect();
        assert_eq!(words.len(), 4096);
    }

    #[test]
    fn deterministic() {
        let a = synth_generate(&small()).unwrap();
        let b = synth_generate(&small()).unwrap();
        assert_eq!(a.log_text(), b.log_text());
        assert_eq!(a.corpus_text(), b.corpus_text());
        assert_eq!(a.truth, b.truth);
    }

    #[test]
    fn zero_noise_clicks_follow_intent() {
        let cfg = SynthConfig {
            click_noise: 0.0,
            ..small()
        };
        let out = synth_generate(&cfg).unwrap();
        for e in out.events.iter().filter(|e| e.is_click()) {
            let intent = out.truth.sessions[&e.session_id].intent;
            assert_eq!(out.truth.doc_topics[&e.content], intent);
        }
    }

    #[test]
    fn truth_round_trips() {
        let out = synth_generate(&small()).unwrap();
        let mut buf = Vec::new();
        out.truth.save(&mut buf).unwrap();
        assert_eq!(GroundTruth::load(buf.as_slice()).unwrap(), out.truth);
    }

    #[test]
    fn rejects_inconsistent_config() {
        let cfg = SynthConfig {
            query_words_per_topic: 30,
            ..small()
        };
        assert!(synth_generate(&cfg).is_err());
        let cfg = SynthConfig {
            click_noise: 1.5,
            ..small()
        };
        assert!(synth_generate(&cfg).is_err());
    }
}
