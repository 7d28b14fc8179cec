//! Temporal session profiles and profile/suggestion similarity.
//!
//! Both profiles are decayed mixtures of topic distributions. Position 1 is
//! the most recent item and receives weight proportional to `decay_alpha^0`;
//! position t receives `decay_alpha^(t-1)`; the weights are normalized to one.

use std::fmt;

use crate::corpus_index::InvertedIndex;
use crate::error::{Error, Result};
use crate::topic_model::TopicDistribution;

/// Default recency decay.
pub const DEFAULT_DECAY_ALPHA: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayParams {
    decay_alpha: f64,
}

impl DecayParams {
    pub fn new(decay_alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&decay_alpha) {
            return Err(Error::InvalidInput(format!(
                "decay_alpha must lie in [0, 1], got {decay_alpha}"
            )));
        }
        Ok(DecayParams { decay_alpha })
    }

    pub fn decay_alpha(&self) -> f64 {
        self.decay_alpha
    }
}

impl Default for DecayParams {
    fn default() -> Self {
        DecayParams {
            decay_alpha: DEFAULT_DECAY_ALPHA,
        }
    }
}

/// Normalized exponential-decay weights for `n` items, most recent first.
/// `0^0` is taken as 1, so `decay_alpha = 0` puts all mass on the newest item.
pub fn decay_weights(n: usize, decay_alpha: f64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidInput(
            "decay weights need at least one item".into(),
        ));
    }
    let raw: Vec<f64> = (0..n).map(|t| decay_alpha.powi(t as i32)).collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|r| r / total).collect())
}

/// No profile can be built: there is nothing in the session to build it from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProfileUnavailable;

impl fmt::Display for ProfileUnavailable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("profile unavailable")
    }
}

impl std::error::Error for ProfileUnavailable {}

#[derive(Debug, Clone, PartialEq)]
pub struct ClickProfile {
    pub dist: TopicDistribution,
    pub n_clicks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryProfile {
    pub dist: TopicDistribution,
    /// Queries that contributed, i.e. those whose containment set was non-empty.
    pub n_queries: usize,
}

fn decayed_mixture(dists: &[&TopicDistribution], decay: DecayParams) -> TopicDistribution {
    let weights = decay_weights(dists.len(), decay.decay_alpha).expect("non-empty");
    let k = dists[0].len();
    let mut mix = vec![0.0; k];
    for (d, w) in dists.iter().zip(&weights) {
        assert_eq!(d.len(), k, "topic distributions of different sizes");
        for (m, p) in mix.iter_mut().zip(d.probs()) {
            *m += w * p;
        }
    }
    TopicDistribution::from_weights(mix)
}

/// Decayed mixture of clicked-document topic distributions, most recent first.
pub fn build_click_profile(
    doc_dists: &[TopicDistribution],
    decay: DecayParams,
) -> Result<ClickProfile, ProfileUnavailable> {
    if doc_dists.is_empty() {
        return Err(ProfileUnavailable);
    }
    let refs: Vec<&TopicDistribution> = doc_dists.iter().collect();
    Ok(ClickProfile {
        dist: decayed_mixture(&refs, decay),
        n_clicks: doc_dists.len(),
    })
}

/// Decayed mixture of query topic distributions, most recent first.
///
/// `None` entries (queries matching no document) are skipped and decay
/// positions are assigned over the remaining queries.
pub fn build_query_profile(
    query_dists: &[Option<TopicDistribution>],
    decay: DecayParams,
) -> Result<QueryProfile, ProfileUnavailable> {
    let refs: Vec<&TopicDistribution> = query_dists.iter().flatten().collect();
    if refs.is_empty() {
        return Err(ProfileUnavailable);
    }
    Ok(QueryProfile {
        dist: decayed_mixture(&refs, decay),
        n_queries: refs.len(),
    })
}

/// Document topic distributions joined with the containment index: the space
/// in which queries and suggestions are represented.
#[derive(Debug, Clone)]
pub struct TopicSpace {
    index: InvertedIndex,
    /// Aligned with index ordinals.
    doc_dists: Vec<TopicDistribution>,
    num_topics: usize,
}

impl TopicSpace {
    pub fn new(index: InvertedIndex, doc_dists: Vec<TopicDistribution>) -> Result<Self> {
        if doc_dists.len() != index.num_docs() {
            return Err(Error::InvalidInput(format!(
                "{} topic distributions for {} documents",
                doc_dists.len(),
                index.num_docs()
            )));
        }
        let num_topics = doc_dists.first().map_or(0, TopicDistribution::len);
        if doc_dists.iter().any(|d| d.len() != num_topics) {
            return Err(Error::InvalidInput("inconsistent topic counts".into()));
        }
        Ok(TopicSpace {
            index,
            doc_dists,
            num_topics,
        })
    }

    pub fn index(&self) -> &InvertedIndex {
        &self.index
    }

    pub fn num_topics(&self) -> usize {
        self.num_topics
    }

    pub fn doc_dist(&self, doc_id: &str) -> Option<&TopicDistribution> {
        self.index.ordinal(doc_id).map(|o| &self.doc_dists[o])
    }

    /// Uniform average of P(Z|d) over the documents containing every query
    /// word; `None` when no document does.
    pub fn query_dist(&self, query: &str) -> Option<TopicDistribution> {
        let docs = self.index.docs_containing_all_terms(query);
        if docs.is_empty() {
            return None;
        }
        let mut acc = vec![0.0; self.num_topics];
        for &o in &docs {
            for (a, p) in acc.iter_mut().zip(self.doc_dists[o as usize].probs()) {
                *a += p;
            }
        }
        let n = docs.len() as f64;
        Some(TopicDistribution::from_weights(
            acc.into_iter().map(|a| a / n).collect(),
        ))
    }
}

/// Kullback-Leibler divergence in nats. Terms with `p(z) = 0` contribute 0.
pub fn kl_divergence(p: &TopicDistribution, q: &TopicDistribution) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::InvalidInput(
            "distributions of different sizes".into(),
        ));
    }
    let mut kl = 0.0;
    for (&pz, &qz) in p.probs().iter().zip(q.probs()) {
        if pz > 0.0 {
            if qz <= 0.0 {
                return Err(Error::InvalidInput(
                    "KL undefined: q(z) = 0 where p(z) > 0".into(),
                ));
            }
            kl += pz * (pz / qz).ln();
        }
    }
    Ok(kl.max(0.0))
}

/// Negative Jensen-Shannon divergence, in `[-ln 2, 0]`; 0 for identical inputs.
pub fn profile_similarity(suggestion: &TopicDistribution, profile: &TopicDistribution) -> f64 {
    assert_eq!(
        suggestion.len(),
        profile.len(),
        "distributions of different sizes"
    );
    let mut js = 0.0;
    for (&q, &p) in suggestion.probs().iter().zip(profile.probs()) {
        let m = 0.5 * (q + p);
        let term = |x: f64| if x > 0.0 { x * (x / m).ln() } else { 0.0 };
        js += 0.5 * (term(q) + term(p));
    }
    -js.clamp(0.0, std::f64::consts::LN_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus_index::Document;

    fn td(v: &[f64]) -> TopicDistribution {
        TopicDistribution::new(v.to_vec()).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn decay_weight_cases() {
        close(
            &decay_weights(3, 0.95).unwrap(),
            &[0.35057, 0.33304, 0.31639],
            1e-5,
        );
        close(&decay_weights(4, 1.0).unwrap(), &[0.25; 4], 1e-15);
        assert_eq!(decay_weights(3, 0.0).unwrap(), vec![1.0, 0.0, 0.0]);
        assert!(decay_weights(0, 0.95).is_err());
        assert!(DecayParams::new(1.5).is_err());
        assert!(DecayParams::new(-0.1).is_err());
    }

    #[test]
    fn click_profile_cases() {
        let d = DecayParams::default();
        let p = build_click_profile(&[td(&[1.0, 0.0]), td(&[0.0, 1.0])], d).unwrap();
        close(p.dist.probs(), &[0.51282, 0.48718], 1e-5);
        assert_eq!(p.n_clicks, 2);

        let p = build_click_profile(&[td(&[0.3, 0.7])], d).unwrap();
        close(p.dist.probs(), &[0.3, 0.7], 1e-15);

        let same = vec![td(&[0.2, 0.5, 0.3]); 4];
        for a in [0.0, 0.5, 1.0] {
            let p = build_click_profile(&same, DecayParams::new(a).unwrap()).unwrap();
            close(p.dist.probs(), &[0.2, 0.5, 0.3], 1e-15);
        }
        assert_eq!(build_click_profile(&[], d), Err(ProfileUnavailable));
    }

    #[test]
    fn query_profile_cases() {
        let d = DecayParams::default();
        let p = build_query_profile(&[Some(td(&[1.0, 0.0])), Some(td(&[0.0, 1.0]))], d).unwrap();
        close(p.dist.probs(), &[0.51282, 0.48718], 1e-5);

        let p = build_query_profile(&[Some(td(&[0.4, 0.6]))], d).unwrap();
        close(p.dist.probs(), &[0.4, 0.6], 1e-15);

        let flat = DecayParams::new(1.0).unwrap();
        let p = build_query_profile(
            &[
                Some(td(&[1.0, 0.0])),
                Some(td(&[0.0, 1.0])),
                Some(td(&[1.0, 0.0])),
            ],
            flat,
        )
        .unwrap();
        close(p.dist.probs(), &[2.0 / 3.0, 1.0 / 3.0], 1e-15);

        // Undefined entries are skipped before positions are assigned.
        let p = build_query_profile(
            &[None, Some(td(&[1.0, 0.0])), None, Some(td(&[0.0, 1.0]))],
            d,
        )
        .unwrap();
        close(p.dist.probs(), &[0.51282, 0.48718], 1e-5);
        assert_eq!(p.n_queries, 2);
        assert_eq!(
            build_query_profile(&[None, None], d),
            Err(ProfileUnavailable)
        );
    }

    fn space() -> TopicSpace {
        let docs = vec![
            Document::new("d1", "campus map"),
            Document::new("d2", "campus parking"),
            Document::new("d3", "library"),
        ];
        let idx = InvertedIndex::build(&docs).unwrap();
        TopicSpace::new(idx, vec![td(&[0.8, 0.2]), td(&[0.4, 0.6]), td(&[0.1, 0.9])]).unwrap()
    }

    #[test]
    fn query_dist_averages_containing_docs() {
        let s = space();
        close(s.query_dist("campus").unwrap().probs(), &[0.6, 0.4], 1e-15);
        close(
            s.query_dist("campus map").unwrap().probs(),
            &[0.8, 0.2],
            1e-15,
        );
        assert_eq!(s.query_dist("campus library"), None);
        assert_eq!(s.query_dist(""), None);
    }

    #[test]
    fn kl_cases() {
        let p = td(&[0.3, 0.7]);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let v = kl_divergence(&td(&[1.0, 0.0]), &td(&[0.5, 0.5])).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-12);
        let v = kl_divergence(&td(&[0.75, 0.25]), &td(&[0.5, 0.5])).unwrap();
        assert!((v - 0.130812).abs() < 1e-6, "{v}");
        assert!(kl_divergence(&td(&[0.5, 0.5]), &td(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn similarity_cases() {
        let p = td(&[0.2, 0.3, 0.5]);
        assert_eq!(profile_similarity(&p, &p), 0.0);
        let s = profile_similarity(&td(&[1.0, 0.0]), &td(&[0.0, 1.0]));
        assert!((s + std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn similarity_matches_kl_definition() {
        let q = td(&[0.1, 0.6, 0.3]);
        let p = td(&[0.5, 0.25, 0.25]);
        let m = TopicDistribution::from_weights(
            q.probs()
                .iter()
                .zip(p.probs())
                .map(|(a, b)| 0.5 * (a + b))
                .collect(),
        );
        let expect = -(0.5 * kl_divergence(&q, &m).unwrap() + 0.5 * kl_divergence(&p, &m).unwrap());
        assert!((profile_similarity(&q, &p) - expect).abs() < 1e-12);
    }
}
