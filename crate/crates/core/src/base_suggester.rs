//! Non-personalised base suggestions from a concept subsumption hierarchy.
//!
//! Concepts are query n-grams (up to three words) mined from the training
//! logs plus the most frequent corpus terms. A concept is present in a
//! document when the document contains all of its words. Concept `x`
//! subsumes `y` when `P(x|y) >= threshold` and `P(y|x) < threshold` over
//! document co-occurrence; the edge `x -> y` carries weight `P(x|y)`.
//!
//! The two conditions imply `|D_y| < |D_x|`, so document-set sizes strictly
//! decrease along every edge and the hierarchy cannot contain a cycle.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};

use crate::corpus_index::{tokenize, InvertedIndex};
use crate::error::{Error, Result};
use crate::log_model::{normalize_query, SearchSession};
use crate::textio::{fmt_f64, Lines};
use crate::topic_model::STOPWORDS;

const FORMAT_HEADER: &str = "qsuggest-hierarchy v1";
const FALLBACK_SIZE: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyConfig {
    /// Minimum combined corpus and log frequency for a concept.
    pub min_freq: usize,
    pub subsume_threshold: f64,
    /// Longest query n-gram turned into a concept.
    pub max_phrase_words: usize,
    /// How many of the most frequent corpus terms join the log concepts.
    pub corpus_terms: usize,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        HierarchyConfig {
            min_freq: 5,
            subsume_threshold: 0.8,
            max_phrase_words: 3,
            corpus_terms: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptNode {
    pub text: String,
    /// Documents containing every word of the concept.
    pub corpus_freq: usize,
    /// Log queries containing the concept as a contiguous n-gram.
    pub log_freq: usize,
    /// Times the concept was submitted as a whole query.
    pub query_freq: usize,
}

impl ConceptNode {
    /// Popularity prior used in base scores: `ln(2 + query_freq)`.
    pub fn prior(&self) -> f64 {
        (2.0 + self.query_freq as f64).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub parent: usize,
    pub child: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConceptHierarchy {
    nodes: Vec<ConceptNode>,
    by_text: HashMap<String, usize>,
    edges: Vec<Edge>,
    children: Vec<Vec<(usize, f64)>>,
    parents: Vec<Vec<(usize, f64)>>,
    /// Most frequent refinements in the training logs, most frequent first.
    fallback: Vec<(String, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Suggestion {
    pub text: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuggestionList {
    pub query: String,
    pub suggestions: Vec<Suggestion>,
    /// True when the query had no concept and the fallback list was used.
    pub from_fallback: bool,
}

impl SuggestionList {
    pub fn texts(&self) -> Vec<String> {
        self.suggestions.iter().map(|s| s.text.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.suggestions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.suggestions.is_empty()
    }
}

fn ngrams(words: &[String], max_len: usize) -> impl Iterator<Item = String> + '_ {
    (1..=max_len.min(words.len())).flat_map(move |n| words.windows(n).map(|w| w.join(" ")))
}

struct BitSet(Vec<u64>);

impl BitSet {
    fn from_ordinals(ords: &[u32], n: usize) -> Self {
        let mut bits = vec![0u64; n.div_ceil(64)];
        for &o in ords {
            bits[o as usize / 64] |= 1 << (o % 64);
        }
        BitSet(bits)
    }

    fn intersection_len(&self, other: &BitSet) -> usize {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }
}

/// Builds the subsumption hierarchy from the corpus index and training sessions.
pub fn build_hierarchy(
    index: &InvertedIndex,
    sessions: &[SearchSession],
    config: &HierarchyConfig,
) -> Result<ConceptHierarchy> {
    if index.num_docs() == 0 || sessions.is_empty() {
        return Err(Error::InvalidInput(
            "hierarchy needs a non-empty corpus and non-empty logs".into(),
        ));
    }
    if !(config.subsume_threshold > 0.0 && config.subsume_threshold <= 1.0) {
        return Err(Error::InvalidInput(
            "subsume_threshold must lie in (0, 1]".into(),
        ));
    }

    let mut log_freq: BTreeMap<String, usize> = BTreeMap::new();
    let mut query_freq: BTreeMap<String, usize> = BTreeMap::new();
    let mut refinements: BTreeMap<String, usize> = BTreeMap::new();
    for s in sessions {
        let queries: Vec<String> = s
            .events
            .iter()
            .filter(|e| e.is_query())
            .map(|e| normalize_query(&e.content))
            .filter(|q| !q.is_empty())
            .collect();
        for q in &queries {
            *query_freq.entry(q.clone()).or_default() += 1;
            let words = tokenize(q);
            let distinct: BTreeSet<String> = ngrams(&words, config.max_phrase_words).collect();
            for g in distinct {
                *log_freq.entry(g).or_default() += 1;
            }
        }
        for pair in queries.windows(2) {
            if pair[0] != pair[1] {
                *refinements.entry(pair[1].clone()).or_default() += 1;
            }
        }
    }

    // candidate concepts: log n-grams plus the most frequent corpus terms
    let mut candidates: BTreeSet<String> = log_freq.keys().cloned().collect();
    let stop: BTreeSet<&str> = STOPWORDS.iter().copied().collect();
    let mut corpus_terms: Vec<(&str, usize)> = index
        .terms()
        .filter(|(t, df)| !stop.contains(t) && *df >= config.min_freq)
        .collect();
    corpus_terms.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    candidates.extend(
        corpus_terms
            .into_iter()
            .take(config.corpus_terms)
            .map(|(t, _)| t.to_string()),
    );

    let mut nodes = Vec::new();
    let mut doc_sets = Vec::new();
    for text in candidates {
        let words: BTreeSet<String> = tokenize(&text).into_iter().collect();
        let docs = index.docs_containing_all(words.iter().map(String::as_str));
        let node = ConceptNode {
            corpus_freq: docs.len(),
            log_freq: log_freq.get(&text).copied().unwrap_or(0),
            query_freq: query_freq.get(&text).copied().unwrap_or(0),
            text,
        };
        if node.corpus_freq + node.log_freq >= config.min_freq {
            doc_sets.push(BitSet::from_ordinals(&docs, index.num_docs()));
            nodes.push(node);
        }
    }

    let theta = config.subsume_threshold;
    let mut edges = Vec::new();
    for y in 0..nodes.len() {
        let ny = nodes[y].corpus_freq;
        if ny == 0 {
            continue;
        }
        for x in 0..nodes.len() {
            let nx = nodes[x].corpus_freq;
            if x == y || nx <= ny {
                continue;
            }
            let both = doc_sets[x].intersection_len(&doc_sets[y]) as f64;
            let p_x_given_y = both / ny as f64;
            let p_y_given_x = both / nx as f64;
            if p_x_given_y >= theta && p_y_given_x < theta {
                edges.push(Edge {
                    parent: x,
                    child: y,
                    weight: p_x_given_y,
                });
            }
        }
    }
    edges.sort_by_key(|e| (e.parent, e.child));

    let mut fallback: Vec<(String, usize)> = refinements.into_iter().collect();
    fallback.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    fallback.truncate(FALLBACK_SIZE);

    ConceptHierarchy::from_parts(nodes, edges, fallback)
}

impl ConceptHierarchy {
    pub fn from_parts(
        nodes: Vec<ConceptNode>,
        edges: Vec<Edge>,
        fallback: Vec<(String, usize)>,
    ) -> Result<Self> {
        let mut by_text = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if by_text.insert(n.text.clone(), i).is_some() {
                return Err(Error::InvalidInput(format!(
                    "duplicate concept {:?}",
                    n.text
                )));
            }
        }
        let mut children = vec![Vec::new(); nodes.len()];
        let mut parents = vec![Vec::new(); nodes.len()];
        for e in &edges {
            if e.parent >= nodes.len() || e.child >= nodes.len() || e.parent == e.child {
                return Err(Error::InvalidInput("edge endpoint out of range".into()));
            }
            if !(e.weight > 0.0 && e.weight <= 1.0) {
                return Err(Error::InvalidInput(format!(
                    "edge weight {} outside (0, 1]",
                    e.weight
                )));
            }
            children[e.parent].push((e.child, e.weight));
            parents[e.child].push((e.parent, e.weight));
        }
        Ok(ConceptHierarchy {
            nodes,
            by_text,
            edges,
            children,
            parents,
            fallback,
        })
    }

    pub fn nodes(&self) -> &[ConceptNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, text: &str) -> Option<&ConceptNode> {
        self.by_text.get(text).map(|&i| &self.nodes[i])
    }

    pub fn children_of(&self, text: &str) -> Vec<(&str, f64)> {
        self.by_text.get(text).map_or_else(Vec::new, |&i| {
            self.children[i]
                .iter()
                .map(|&(c, w)| (self.nodes[c].text.as_str(), w))
                .collect()
        })
    }

    pub fn fallback(&self) -> &[(String, usize)] {
        &self.fallback
    }

    /// Concepts standing for `query`: the query itself if it is a concept,
    /// otherwise every n-gram of it that is.
    fn query_nodes(&self, query: &str) -> Vec<usize> {
        if let Some(&i) = self.by_text.get(query) {
            return vec![i];
        }
        let words = tokenize(query);
        let mut found: BTreeSet<usize> = BTreeSet::new();
        for g in ngrams(&words, words.len()) {
            if let Some(&i) = self.by_text.get(&g) {
                found.insert(i);
            }
        }
        found.into_iter().collect()
    }

    /// Top-`n` suggestions for `query`.
    ///
    /// Children of the query's concepts score `w(q->c) * prior(c)`, parents
    /// `w(p->q) * prior(p)` and siblings `w(p->s) * w(p->q) * prior(s)`. The best
    /// score per text is kept; ties are broken lexicographically. Queries with
    /// no concept get the most frequent training refinements instead.
    pub fn suggest(&self, query: &str, n: usize) -> SuggestionList {
        let q = normalize_query(query);
        let mut scores: HashMap<usize, f64> = HashMap::new();
        let mut offer = |node: usize, score: f64| {
            let e = scores.entry(node).or_insert(f64::NEG_INFINITY);
            if score > *e {
                *e = score;
            }
        };
        let qnodes = self.query_nodes(&q);
        for &x in &qnodes {
            for &(c, w) in &self.children[x] {
                offer(c, w * self.nodes[c].prior());
            }
            for &(p, wp) in &self.parents[x] {
                offer(p, wp * self.nodes[p].prior());
                for &(s, ws) in &self.children[p] {
                    if s != x {
                        offer(s, ws * wp * self.nodes[s].prior());
                    }
                }
            }
        }

        let mut ranked: Vec<Suggestion> = scores
            .into_iter()
            .filter(|&(i, _)| self.nodes[i].text != q)
            .map(|(i, score)| Suggestion {
                text: self.nodes[i].text.clone(),
                score,
            })
            .collect();
        let from_fallback = qnodes.is_empty();
        if from_fallback {
            ranked = self
                .fallback
                .iter()
                .filter(|(t, _)| *t != q)
                .map(|(t, c)| Suggestion {
                    text: t.clone(),
                    score: (2.0 + *c as f64).ln(),
                })
                .collect();
        }
        ranked.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.text.cmp(&b.text))
        });
        ranked.truncate(n);
        SuggestionList {
            query: q,
            suggestions: ranked,
            from_fallback,
        }
    }

    pub fn save<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{FORMAT_HEADER}")?;
        writeln!(w, "nodes {}", self.nodes.len())?;
        for n in &self.nodes {
            writeln!(
                w,
                "{} {} {} {}",
                n.corpus_freq, n.log_freq, n.query_freq, n.text
            )?;
        }
        writeln!(w, "edges {}", self.edges.len())?;
        for e in &self.edges {
            writeln!(w, "{} {} {}", e.parent, e.child, fmt_f64(e.weight))?;
        }
        writeln!(w, "fallback {}", self.fallback.len())?;
        for (t, c) in &self.fallback {
            writeln!(w, "{c} {t}")?;
        }
        writeln!(w, "end")?;
        Ok(())
    }

    pub fn load<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = Lines::new(r, "hierarchy");
        let header = lines.next_line()?;
        if header != FORMAT_HEADER {
            return Err(lines.err(format!("unsupported header {header:?}")));
        }
        let n: usize = lines.parse_key("nodes")?;
        let mut nodes = Vec::with_capacity(n);
        for _ in 0..n {
            let line = lines.next_line()?;
            let mut parts = line.splitn(4, ' ');
            let mut num = || -> Result<usize> {
                let tok = parts.next().unwrap_or("");
                lines.parse(tok)
            };
            let (corpus_freq, log_freq, query_freq) = (num()?, num()?, num()?);
            let text = parts
                .next()
                .filter(|t| !t.is_empty())
                .ok_or_else(|| lines.err("node without text"))?;
            nodes.push(ConceptNode {
                text: text.to_string(),
                corpus_freq,
                log_freq,
                query_freq,
            });
        }
        let m: usize = lines.parse_key("edges")?;
        let mut edges = Vec::with_capacity(m);
        for _ in 0..m {
            let line = lines.next_line()?;
            let parts: Vec<&str> = line.split(' ').collect();
            if parts.len() != 3 {
                return Err(lines.err("edge needs 3 fields"));
            }
            edges.push(Edge {
                parent: lines.parse(parts[0])?,
                child: lines.parse(parts[1])?,
                weight: lines.parse(parts[2])?,
            });
        }
        let f: usize = lines.parse_key("fallback")?;
        let mut fallback = Vec::with_capacity(f);
        for _ in 0..f {
            let line = lines.next_line()?;
            let (c, t) = line
                .split_once(' ')
                .ok_or_else(|| lines.err("fallback entry needs a count and text"))?;
            fallback.push((t.to_string(), lines.parse(c)?));
        }
        lines.expect_key("end")?;
        ConceptHierarchy::from_parts(nodes, edges, fallback)
    }
}
