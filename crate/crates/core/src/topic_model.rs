//! LDA topic model trained by collapsed Gibbs sampling.
//!
//! Training runs on the clicked documents only. Every other document in the
//! collection gets its topic mixture by fold-in sampling against the frozen
//! topic-word matrix.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus_index::Document;
use crate::error::{Error, Result};
use crate::textio::{fmt_f64, Lines};

const FORMAT_HEADER: &str = "qsuggest-lda v1";

/// Tolerance used when checking that a distribution sums to one.
pub const NORM_TOLERANCE: f64 = 1e-9;

/// Stopwords removed before topic modelling. Containment lookups keep them.
pub const STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "an", "and", "any", "are", "as", "at", "be", "been",
    "but", "by", "can", "could", "do", "does", "for", "from", "had", "has", "have", "he", "her",
    "his", "how", "i", "if", "in", "into", "is", "it", "its", "more", "my", "no", "not", "of",
    "on", "or", "our", "she", "so", "some", "such", "than", "that", "the", "their", "them", "then",
    "there", "these", "they", "this", "to", "up", "us", "was", "we", "were", "what", "when",
    "which", "who", "will", "with", "would", "you", "your",
];

#[derive(Debug, Clone, PartialEq)]
pub struct LdaHyperparams {
    pub num_topics: usize,
    /// Symmetric document-topic prior.
    pub dirichlet_alpha: f64,
    /// Symmetric topic-word prior.
    pub dirichlet_beta: f64,
    pub gibbs_iterations: usize,
    pub burn_in: usize,
    pub sample_lag: usize,
    pub rng_seed: u64,
    /// Terms must occur in at least this many training documents.
    pub min_doc_freq: usize,
    pub inference_iterations: usize,
    pub inference_burn_in: usize,
}

impl LdaHyperparams {
    /// Defaults for `num_topics` topics: alpha 50/K, beta 0.01, 500 sweeps with
    /// 100 burn-in and a lag of 10, fold-in with 100 sweeps and 50 burn-in.
    pub fn new(num_topics: usize, rng_seed: u64) -> Self {
        LdaHyperparams {
            num_topics,
            dirichlet_alpha: 50.0 / num_topics.max(1) as f64,
            dirichlet_beta: 0.01,
            gibbs_iterations: 500,
            burn_in: 100,
            sample_lag: 10,
            rng_seed,
            min_doc_freq: 2,
            inference_iterations: 100,
            inference_burn_in: 50,
        }
    }

    /// Copy with a different topic count and the matching 50/K alpha.
    pub fn with_topics(&self, num_topics: usize) -> Self {
        LdaHyperparams {
            num_topics,
            dirichlet_alpha: 50.0 / num_topics.max(1) as f64,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::TopicModel(m.to_string()));
        if self.num_topics < 2 {
            return bad("at least 2 topics are required");
        }
        if !(self.dirichlet_alpha > 0.0 && self.dirichlet_beta > 0.0) {
            return bad("dirichlet priors must be positive");
        }
        if self.burn_in >= self.gibbs_iterations {
            return bad("burn_in must be smaller than gibbs_iterations");
        }
        if self.inference_burn_in >= self.inference_iterations {
            return bad("inference_burn_in must be smaller than inference_iterations");
        }
        if self.sample_lag == 0 {
            return bad("sample_lag must be positive");
        }
        Ok(())
    }
}

/// A probability vector over topics.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicDistribution(Vec<f64>);

impl TopicDistribution {
    /// Validates non-negativity and unit mass.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidInput("empty topic distribution".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidInput(
                "negative or non-finite probability".into(),
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidInput(format!("distribution sums to {sum}")));
        }
        Ok(TopicDistribution(probs))
    }

    /// Scales non-negative weights to unit mass. All-zero input gives uniform.
    pub fn from_weights(mut weights: Vec<f64>) -> Self {
        let sum: f64 = weights.iter().sum();
        if sum > 0.0 {
            weights.iter_mut().for_each(|w| *w /= sum);
            TopicDistribution(weights)
        } else {
            Self::uniform(weights.len())
        }
    }

    pub fn uniform(k: usize) -> Self {
        TopicDistribution(vec![1.0 / k as f64; k])
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Bidirectional term/index map.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn from_terms(terms: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(terms.len());
        for (i, t) in terms.iter().enumerate() {
            if t.is_empty() || t.contains(char::is_whitespace) {
                return Err(Error::TopicModel(format!("invalid vocabulary term {t:?}")));
            }
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::TopicModel(format!(
                    "duplicate vocabulary term {t:?}"
                )));
            }
        }
        Ok(Vocabulary { terms, index })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }

    pub fn term(&self, id: u32) -> &str {
        &self.terms[id as usize]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    /// Maps tokens to ids, dropping unknown ones.
    pub fn encode(&self, tokens: &[String]) -> Vec<u32> {
        tokens.iter().filter_map(|t| self.get(t)).collect()
    }
}

/// Builds the modelling vocabulary: stopwords dropped, minimum document frequency applied.
pub fn build_vocabulary(docs: &[Document], min_doc_freq: usize) -> Result<Vocabulary> {
    let stop: BTreeSet<&str> = STOPWORDS.iter().copied().collect();
    let mut df: HashMap<&str, usize> = HashMap::new();
    for doc in docs {
        let distinct: BTreeSet<&str> = doc.tokens.iter().map(String::as_str).collect();
        for t in distinct {
            if !stop.contains(t) {
                *df.entry(t).or_default() += 1;
            }
        }
    }
    let mut terms: Vec<String> = df
        .into_iter()
        .filter(|&(_, n)| n >= min_doc_freq)
        .map(|(t, _)| t.to_string())
        .collect();
    terms.sort();
    Vocabulary::from_terms(terms)
}

/// Collapsed Gibbs sampler state over a fixed token corpus.
///
/// Exposed so that the sampler itself can be checked against exact posteriors
/// on toy corpora.
#[derive(Debug, Clone)]
pub struct GibbsSampler {
    num_topics: usize,
    vocab_size: usize,
    alpha: f64,
    beta: f64,
    tokens: Vec<u32>,
    offsets: Vec<usize>,
    assignments: Vec<u32>,
    doc_topic: Vec<u32>,
    topic_word: Vec<u32>,
    topic_total: Vec<u32>,
    weights: Vec<f64>,
    rng: ChaCha8Rng,
}

impl GibbsSampler {
    /// Random initial assignment. `docs` holds word ids below `vocab_size`.
    pub fn new(
        docs: &[Vec<u32>],
        num_topics: usize,
        vocab_size: usize,
        alpha: f64,
        beta: f64,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut offsets = Vec::with_capacity(docs.len() + 1);
        offsets.push(0);
        let mut tokens = Vec::new();
        for d in docs {
            tokens.extend_from_slice(d);
            offsets.push(tokens.len());
        }
        let mut s = GibbsSampler {
            num_topics,
            vocab_size,
            alpha,
            beta,
            assignments: vec![0; tokens.len()],
            doc_topic: vec![0; docs.len() * num_topics],
            topic_word: vec![0; num_topics * vocab_size],
            topic_total: vec![0; num_topics],
            weights: vec![0.0; num_topics],
            tokens,
            offsets,
            rng: ChaCha8Rng::seed_from_u64(0),
        };
        for d in 0..docs.len() {
            for i in s.offsets[d]..s.offsets[d + 1] {
                let z = rng.random_range(0..num_topics) as u32;
                s.assignments[i] = z;
                s.add(d, s.tokens[i], z);
            }
        }
        s.rng = rng;
        s
    }

    fn add(&mut self, d: usize, w: u32, z: u32) {
        let z = z as usize;
        self.doc_topic[d * self.num_topics + z] += 1;
        self.topic_word[z * self.vocab_size + w as usize] += 1;
        self.topic_total[z] += 1;
    }

    fn remove(&mut self, d: usize, w: u32, z: u32) {
        let z = z as usize;
        self.doc_topic[d * self.num_topics + z] -= 1;
        self.topic_word[z * self.vocab_size + w as usize] -= 1;
        self.topic_total[z] -= 1;
    }

    /// One full pass resampling every token's topic.
    pub fn sweep(&mut self) {
        let k = self.num_topics;
        let v_beta = self.vocab_size as f64 * self.beta;
        for d in 0..self.offsets.len() - 1 {
            for i in self.offsets[d]..self.offsets[d + 1] {
                let w = self.tokens[i];
                self.remove(d, w, self.assignments[i]);
                let mut total = 0.0;
                for z in 0..k {
                    let p = (self.doc_topic[d * k + z] as f64 + self.alpha)
                        * (self.topic_word[z * self.vocab_size + w as usize] as f64 + self.beta)
                        / (self.topic_total[z] as f64 + v_beta);
                    total += p;
                    self.weights[z] = total;
                }
                let z = draw_cumulative(&self.weights, total, &mut self.rng) as u32;
                self.assignments[i] = z;
                self.add(d, w, z);
            }
        }
    }

    /// Topic assignment of every token, documents concatenated in order.
    pub fn assignments(&self) -> &[u32] {
        &self.assignments
    }

    pub fn num_docs(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Current smoothed estimate of the document's topic mixture.
    pub fn theta(&self, d: usize) -> Vec<f64> {
        let k = self.num_topics;
        let len = (self.offsets[d + 1] - self.offsets[d]) as f64;
        let denom = len + k as f64 * self.alpha;
        (0..k)
            .map(|z| (self.doc_topic[d * k + z] as f64 + self.alpha) / denom)
            .collect()
    }

    /// Current smoothed estimate of the topic's word distribution.
    pub fn phi(&self, z: usize) -> Vec<f64> {
        let denom = self.topic_total[z] as f64 + self.vocab_size as f64 * self.beta;
        self.topic_word[z * self.vocab_size..(z + 1) * self.vocab_size]
            .iter()
            .map(|&c| (c as f64 + self.beta) / denom)
            .collect()
    }
}

fn draw_cumulative(cumulative: &[f64], total: f64, rng: &mut ChaCha8Rng) -> usize {
    let u = rng.random::<f64>() * total;
    cumulative
        .iter()
        .position(|&c| u < c)
        .unwrap_or(cumulative.len() - 1)
}

/// FNV-1a, used to derive per-document RNG streams independent of std hashing.
fn stream_seed(seed: u64, key: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for b in key.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    hyper: LdaHyperparams,
    vocab: Vocabulary,
    /// Row-major K x V.
    phi: Vec<f64>,
    training_docs: Vec<String>,
    theta: Vec<TopicDistribution>,
    theta_by_doc: HashMap<String, usize>,
}

/// Trains LDA on `docs` (the clicked documents).
pub fn train_lda(docs: &[Document], hyper: &LdaHyperparams) -> Result<TopicModel> {
    hyper.validate()?;
    let vocab = build_vocabulary(docs, hyper.min_doc_freq)?;
    if vocab.is_empty() {
        return Err(Error::TopicModel("empty effective vocabulary".into()));
    }
    if hyper.num_topics > vocab.len() {
        return Err(Error::TopicModel(format!(
            "{} topics exceed the effective vocabulary of {} terms",
            hyper.num_topics,
            vocab.len()
        )));
    }
    let encoded: Vec<Vec<u32>> = docs.iter().map(|d| vocab.encode(&d.tokens)).collect();
    if encoded.iter().filter(|d| !d.is_empty()).count() < 2 {
        return Err(Error::TopicModel(
            "need at least two documents with in-vocabulary tokens".into(),
        ));
    }

    let k = hyper.num_topics;
    let v = vocab.len();
    let mut sampler = GibbsSampler::new(
        &encoded,
        k,
        v,
        hyper.dirichlet_alpha,
        hyper.dirichlet_beta,
        hyper.rng_seed,
    );
    let mut phi_acc = vec![0.0; k * v];
    let mut theta_acc = vec![0.0; encoded.len() * k];
    let mut samples = 0usize;
    let mut accumulate = |s: &GibbsSampler| {
        for z in 0..k {
            for (acc, p) in phi_acc[z * v..(z + 1) * v].iter_mut().zip(s.phi(z)) {
                *acc += p;
            }
        }
        for d in 0..s.num_docs() {
            for (acc, p) in theta_acc[d * k..(d + 1) * k].iter_mut().zip(s.theta(d)) {
                *acc += p;
            }
        }
    };
    for iter in 1..=hyper.gibbs_iterations {
        sampler.sweep();
        if iter > hyper.burn_in && (iter - hyper.burn_in).is_multiple_of(hyper.sample_lag) {
            accumulate(&sampler);
            samples += 1;
        }
    }
    if samples == 0 {
        accumulate(&sampler);
    }

    let mut phi = Vec::with_capacity(k * v);
    for z in 0..k {
        phi.extend(TopicDistribution::from_weights(phi_acc[z * v..(z + 1) * v].to_vec()).0);
    }
    let theta: Vec<TopicDistribution> = (0..encoded.len())
        .map(|d| {
            if encoded[d].is_empty() {
                TopicDistribution::uniform(k)
            } else {
                TopicDistribution::from_weights(theta_acc[d * k..(d + 1) * k].to_vec())
            }
        })
        .collect();
    TopicModel::from_parts(
        hyper.clone(),
        vocab,
        phi,
        docs.iter().map(|d| d.doc_id.clone()).collect(),
        theta,
    )
}

impl TopicModel {
    /// Assembles a model from explicit parameters, checking every invariant.
    pub fn from_parts(
        hyper: LdaHyperparams,
        vocab: Vocabulary,
        phi: Vec<f64>,
        training_docs: Vec<String>,
        theta: Vec<TopicDistribution>,
    ) -> Result<Self> {
        hyper.validate()?;
        let (k, v) = (hyper.num_topics, vocab.len());
        if phi.len() != k * v {
            return Err(Error::TopicModel("phi has the wrong shape".into()));
        }
        for z in 0..k {
            TopicDistribution::new(phi[z * v..(z + 1) * v].to_vec())
                .map_err(|e| Error::TopicModel(format!("phi row {z}: {e}")))?;
        }
        if training_docs.len() != theta.len() || theta.iter().any(|t| t.len() != k) {
            return Err(Error::TopicModel("theta has the wrong shape".into()));
        }
        let mut theta_by_doc = HashMap::with_capacity(training_docs.len());
        for (i, id) in training_docs.iter().enumerate() {
            if theta_by_doc.insert(id.clone(), i).is_some() {
                return Err(Error::DuplicateDocument(id.clone()));
            }
        }
        Ok(TopicModel {
            hyper,
            vocab,
            phi,
            training_docs,
            theta,
            theta_by_doc,
        })
    }

    pub fn hyperparams(&self) -> &LdaHyperparams {
        &self.hyper
    }

    pub fn num_topics(&self) -> usize {
        self.hyper.num_topics
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn phi_row(&self, z: usize) -> &[f64] {
        let v = self.vocab.len();
        &self.phi[z * v..(z + 1) * v]
    }

    pub fn training_doc_ids(&self) -> &[String] {
        &self.training_docs
    }

    pub fn training_thetas(&self) -> &[TopicDistribution] {
        &self.theta
    }

    /// Topic mixture estimated during training, if `doc_id` was a training document.
    pub fn training_theta(&self, doc_id: &str) -> Option<&TopicDistribution> {
        self.theta_by_doc.get(doc_id).map(|&i| &self.theta[i])
    }

    /// Fold-in inference with phi frozen. `stream_key` selects the RNG stream.
    pub fn infer_tokens(&self, tokens: &[String], stream_key: &str) -> TopicDistribution {
        let ids = self.vocab.encode(tokens);
        self.fold_in(&ids, stream_key)
    }

    pub fn infer_doc_topics(&self, doc: &Document) -> TopicDistribution {
        self.infer_tokens(&doc.tokens, &doc.doc_id)
    }

    /// P(Z|d) for every document: training estimates for training documents,
    /// fold-in for the rest. Output is aligned with `docs`.
    pub fn doc_topics(&self, docs: &[Document]) -> Vec<TopicDistribution> {
        docs.iter()
            .map(|d| match self.training_theta(&d.doc_id) {
                Some(t) => t.clone(),
                None => self.infer_doc_topics(d),
            })
            .collect()
    }

    fn fold_in(&self, ids: &[u32], stream_key: &str) -> TopicDistribution {
        let k = self.num_topics();
        if ids.is_empty() {
            return TopicDistribution::uniform(k);
        }
        let alpha = self.hyper.dirichlet_alpha;
        let v = self.vocab.len();
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(self.hyper.rng_seed, stream_key));
        let mut counts = vec![0u32; k];
        let mut z: Vec<usize> = ids
            .iter()
            .map(|_| {
                let t = rng.random_range(0..k);
                counts[t] += 1;
                t
            })
            .collect();
        let mut cumulative = vec![0.0; k];
        let mut acc = vec![0.0; k];
        let mut samples = 0usize;
        for iter in 1..=self.hyper.inference_iterations {
            for (i, &w) in ids.iter().enumerate() {
                counts[z[i]] -= 1;
                let mut total = 0.0;
                for t in 0..k {
                    total += (counts[t] as f64 + alpha) * self.phi[t * v + w as usize];
                    cumulative[t] = total;
                }
                z[i] = draw_cumulative(&cumulative, total, &mut rng);
                counts[z[i]] += 1;
            }
            if iter > self.hyper.inference_burn_in {
                let denom = ids.len() as f64 + k as f64 * alpha;
                for t in 0..k {
                    acc[t] += (counts[t] as f64 + alpha) / denom;
                }
                samples += 1;
            }
        }
        debug_assert!(samples > 0);
        TopicDistribution::from_weights(acc)
    }

    /// Document-completion perplexity: for each held-out document, theta is
    /// folded in on the even-position in-vocabulary tokens and
    /// exp(-mean log p(w|d)) is taken over the odd-position ones, with
    /// p(w|d) = sum_z theta(z|d) phi(w|z). Scoring tokens that theta was not
    /// fitted to keeps larger K from being rewarded for memorising.
    pub fn perplexity(&self, heldout: &[Document]) -> Result<f64> {
        if heldout.is_empty() {
            return Err(Error::TopicModel("no held-out documents".into()));
        }
        let k = self.num_topics();
        let v = self.vocab.len();
        let mut log_lik = 0.0;
        let mut n_tokens = 0usize;
        for doc in heldout {
            let ids = self.vocab.encode(&doc.tokens);
            let observed: Vec<u32> = ids.iter().step_by(2).copied().collect();
            let scored: Vec<u32> = ids.iter().skip(1).step_by(2).copied().collect();
            if scored.is_empty() {
                continue;
            }
            let theta = self.fold_in(&observed, &doc.doc_id);
            for &w in &scored {
                let p: f64 = (0..k)
                    .map(|z| theta.0[z] * self.phi[z * v + w as usize])
                    .sum();
                log_lik += p.ln();
            }
            n_tokens += scored.len();
        }
        if n_tokens == 0 {
            return Err(Error::TopicModel(
                "held-out documents have fewer than two in-vocabulary tokens".into(),
            ));
        }
        Ok((-log_lik / n_tokens as f64).exp())
    }

    pub fn save<W: Write>(&self, mut w: W) -> Result<()> {
        let h = &self.hyper;
        writeln!(w, "{FORMAT_HEADER}")?;
        writeln!(w, "topics {}", h.num_topics)?;
        writeln!(w, "vocab {}", self.vocab.len())?;
        writeln!(w, "dirichlet_alpha {}", fmt_f64(h.dirichlet_alpha))?;
        writeln!(w, "dirichlet_beta {}", fmt_f64(h.dirichlet_beta))?;
        writeln!(w, "seed {}", h.rng_seed)?;
        writeln!(
            w,
            "sampling {} {} {} {} {} {}",
            h.gibbs_iterations,
            h.burn_in,
            h.sample_lag,
            h.min_doc_freq,
            h.inference_iterations,
            h.inference_burn_in
        )?;
        writeln!(w, "vocabulary")?;
        for t in self.vocab.terms() {
            writeln!(w, "{t}")?;
        }
        writeln!(w, "phi")?;
        for z in 0..h.num_topics {
            let row: Vec<String> = self.phi_row(z).iter().map(|&p| fmt_f64(p)).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        writeln!(w, "theta {}", self.theta.len())?;
        for (id, t) in self.training_docs.iter().zip(&self.theta) {
            let row: Vec<String> = t.probs().iter().map(|&p| fmt_f64(p)).collect();
            writeln!(w, "{id}\t{}", row.join(" "))?;
        }
        writeln!(w, "end")?;
        Ok(())
    }

    pub fn load<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = Lines::new(r, "topic model");
        let header = lines.next_line()?;
        if header != FORMAT_HEADER {
            return Err(lines.err(format!("unsupported header {header:?}")));
        }
        let k: usize = lines.parse_key("topics")?;
        let v: usize = lines.parse_key("vocab")?;
        let alpha: f64 = lines.parse_key("dirichlet_alpha")?;
        let beta: f64 = lines.parse_key("dirichlet_beta")?;
        let seed: u64 = lines.parse_key("seed")?;
        let sampling = lines.expect_key("sampling")?;
        let s: Vec<usize> = sampling
            .split_whitespace()
            .map(|t| lines.parse(t))
            .collect::<Result<_>>()?;
        if s.len() != 6 {
            return Err(lines.err("sampling line needs 6 values"));
        }
        let hyper = LdaHyperparams {
            num_topics: k,
            dirichlet_alpha: alpha,
            dirichlet_beta: beta,
            gibbs_iterations: s[0],
            burn_in: s[1],
            sample_lag: s[2],
            rng_seed: seed,
            min_doc_freq: s[3],
            inference_iterations: s[4],
            inference_burn_in: s[5],
        };
        lines.expect_key("vocabulary")?;
        let terms = (0..v)
            .map(|_| lines.next_line())
            .collect::<Result<Vec<_>>>()?;
        let vocab = Vocabulary::from_terms(terms)?;
        lines.expect_key("phi")?;
        let mut phi = Vec::with_capacity(k * v);
        for _ in 0..k {
            let line = lines.next_line()?;
            phi.extend(lines.parse_row(&line, v)?);
        }
        let n: usize = lines.parse_key("theta")?;
        let mut docs = Vec::with_capacity(n);
        let mut theta = Vec::with_capacity(n);
        for _ in 0..n {
            let line = lines.next_line()?;
            let (id, row) = line
                .split_once('\t')
                .ok_or_else(|| lines.err("theta row needs a tab after the doc id"))?;
            docs.push(id.to_string());
            theta.push(
                TopicDistribution::new(lines.parse_row(row, k)?)
                    .map_err(|e| lines.err(e.to_string()))?,
            );
        }
        lines.expect_key("end")?;
        TopicModel::from_parts(hyper, vocab, phi, docs, theta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicCountSelection {
    pub best: usize,
    /// (K, held-out perplexity) in candidate order.
    pub perplexities: Vec<(usize, f64)>,
}

/// Picks the topic count with the lowest held-out perplexity.
///
/// A seeded shuffle holds out `validation_fraction` of the documents (at
/// least one); each candidate K is trained on the rest with `template`
/// hyperparameters re-derived for that K. Perplexities within 1e-12 of each
/// other are ties, resolved toward the smaller K.
pub fn select_topic_count(
    docs: &[Document],
    candidates: &[usize],
    validation_fraction: f64,
    template: &LdaHyperparams,
) -> Result<TopicCountSelection> {
    if candidates.is_empty() {
        return Err(Error::TopicModel("no candidate topic counts".into()));
    }
    if !(0.0..1.0).contains(&validation_fraction) || validation_fraction == 0.0 {
        return Err(Error::TopicModel(
            "validation fraction must be in (0, 1)".into(),
        ));
    }
    let mut order: Vec<usize> = (0..docs.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(template.rng_seed));
    let n_heldout = ((docs.len() as f64 * validation_fraction).round() as usize).max(1);
    if n_heldout >= docs.len() {
        return Err(Error::TopicModel("not enough documents to hold out".into()));
    }
    let heldout: Vec<Document> = order[..n_heldout]
        .iter()
        .map(|&i| docs[i].clone())
        .collect();
    let mut train_idx = order[n_heldout..].to_vec();
    train_idx.sort_unstable();
    let train: Vec<Document> = train_idx.iter().map(|&i| docs[i].clone()).collect();

    let mut perplexities = Vec::with_capacity(candidates.len());
    for &k in candidates {
        let model = train_lda(&train, &template.with_topics(k))?;
        let p = model.perplexity(&heldout)?;
        log::info!("topic count {k}: held-out perplexity {p:.4}");
        perplexities.push((k, p));
    }
    Ok(TopicCountSelection {
        best: pick_lowest(&perplexities),
        perplexities,
    })
}

fn pick_lowest(scores: &[(usize, f64)]) -> usize {
    let mut best = scores[0];
    for &(k, p) in &scores[1..] {
        if p < best.1 - 1e-12 || ((p - best.1).abs() <= 1e-12 && k < best.0) {
            best = (k, p);
        }
    }
    best.0
}
