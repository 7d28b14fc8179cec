//! Per-impression ranking metrics over binary labels in ranked order.

use std::fmt;

use crate::error::{Error, Result};

/// Mean over positive ranks r of (positives at or above r) / r.
pub fn average_precision(labels: &[bool]) -> Result<f64> {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, _) in labels.iter().enumerate().filter(|(_, &l)| l) {
        hits += 1;
        sum += hits as f64 / (i + 1) as f64;
    }
    if hits == 0 {
        return Err(Error::Evaluation(
            "average precision needs a positive label".into(),
        ));
    }
    Ok(sum / hits as f64)
}

/// Positives among the first `k`, divided by `k`. Short lists count as padded with negatives.
pub fn precision_at_k(labels: &[bool], k: usize) -> f64 {
    assert!(k >= 1, "precision cutoff must be positive");
    labels.iter().take(k).filter(|&&l| l).count() as f64 / k as f64
}

/// 1 / rank of the first positive within the top `k`; 0 if there is none.
pub fn reciprocal_rank_at(labels: &[bool], k: usize) -> f64 {
    labels
        .iter()
        .take(k)
        .position(|&l| l)
        .map_or(0.0, |i| 1.0 / (i + 1) as f64)
}

pub fn reciprocal_rank_at_10(labels: &[bool]) -> f64 {
    reciprocal_rank_at(labels, 10)
}

/// DCG@k with gain = label and discount 1/log2(rank + 1), over the ideal
/// DCG@k of the same labels. A list without positives scores 0.
pub fn ndcg_at_k(labels: &[bool], k: usize) -> f64 {
    let disc = |i: usize| 1.0 / ((i + 2) as f64).log2();
    let positives = labels.iter().filter(|&&l| l).count();
    let ideal: f64 = (0..positives.min(k)).map(disc).sum();
    if ideal == 0.0 {
        return 0.0;
    }
    let dcg: f64 = labels
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, &l)| l)
        .map(|(i, _)| disc(i))
        .sum();
    dcg / ideal
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    Map,
    P1,
    P5,
    Mrr10,
    Ndcg5,
    Ndcg10,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Map,
        Metric::P1,
        Metric::P5,
        Metric::Mrr10,
        Metric::Ndcg5,
        Metric::Ndcg10,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Map => "MAP",
            Metric::P1 => "P@1",
            Metric::P5 => "P@5",
            Metric::Mrr10 => "MRR@10",
            Metric::Ndcg5 => "nDCG@5",
            Metric::Ndcg10 => "nDCG@10",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One value per [`Metric`]. Per impression these are AP, P@1, ...;
/// after aggregation they are the means (MAP, mean P@1, ...).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricSet(pub [f64; 6]);

impl MetricSet {
    pub fn from_labels(labels: &[bool]) -> Result<Self> {
        Ok(MetricSet([
            average_precision(labels)?,
            precision_at_k(labels, 1),
            precision_at_k(labels, 5),
            reciprocal_rank_at_10(labels),
            ndcg_at_k(labels, 5),
            ndcg_at_k(labels, 10),
        ]))
    }

    pub fn get(&self, m: Metric) -> f64 {
        self.0[m.index()]
    }

    /// Unweighted mean of each metric.
    pub fn mean<'a, I: IntoIterator<Item = &'a MetricSet>>(sets: I) -> Result<Self> {
        let mut sum = [0.0; 6];
        let mut n = 0usize;
        for s in sets {
            for (acc, v) in sum.iter_mut().zip(s.0) {
                *acc += v;
            }
            n += 1;
        }
        if n == 0 {
            return Err(Error::Evaluation("cannot aggregate an empty run".into()));
        }
        Ok(MetricSet(sum.map(|v| v / n as f64)))
    }
}

/// `100 (candidate - baseline) / baseline`, or `None` when the baseline is 0.
pub fn relative_change(candidate: f64, baseline: f64) -> Option<f64> {
    (baseline > 0.0).then(|| 100.0 * (candidate - baseline) / baseline)
}

/// Per-metric relative change of `candidate` over `baseline`.
pub fn relative_improvement(candidate: &MetricSet, baseline: &MetricSet) -> [Option<f64>; 6] {
    Metric::ALL.map(|m| relative_change(candidate.get(m), baseline.get(m)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l(bits: &[u8]) -> Vec<bool> {
        bits.iter().map(|&b| b == 1).collect()
    }

    #[test]
    fn ap_cases() {
        assert!((average_precision(&l(&[1, 0, 1])).unwrap() - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(average_precision(&l(&[1, 0, 0])).unwrap(), 1.0);
        assert_eq!(average_precision(&l(&[0, 0, 0, 1])).unwrap(), 0.25);
        assert!(average_precision(&l(&[0, 0])).is_err());
    }

    #[test]
    fn precision_cases() {
        assert!((precision_at_k(&l(&[1, 0, 1, 0, 0]), 5) - 0.4).abs() < 1e-12);
        assert_eq!(precision_at_k(&l(&[0, 0, 0]), 3), 0.0);
        assert_eq!(precision_at_k(&l(&[1]), 1), 1.0);
        assert_eq!(precision_at_k(&l(&[1]), 5), 0.2);
    }

    #[test]
    fn reciprocal_rank_cases() {
        assert!((reciprocal_rank_at_10(&l(&[0, 0, 1])) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(
            reciprocal_rank_at_10(&l(&[0; 12].iter().chain(&[1]).copied().collect::<Vec<_>>())),
            0.0
        );
        assert_eq!(reciprocal_rank_at_10(&l(&[1, 1])), 1.0);
    }

    #[test]
    fn ndcg_cases() {
        let v = ndcg_at_k(&l(&[0, 1, 0, 0, 0]), 5);
        assert!((v - 1.0 / 3f64.log2()).abs() < 1e-12);
        assert!((v - 0.6309).abs() < 1e-4);
        assert_eq!(ndcg_at_k(&l(&[1, 1, 0]), 5), 1.0);
        assert_eq!(ndcg_at_k(&l(&[0, 0, 0, 0, 0, 1]), 5), 0.0);
    }

    #[test]
    fn aggregation_and_relative() {
        let a = MetricSet::from_labels(&l(&[1, 0])).unwrap();
        let b = MetricSet::from_labels(&l(&[0, 1])).unwrap();
        let m = MetricSet::mean([&a, &b]).unwrap();
        assert_eq!(m.get(Metric::Map), 0.75);
        assert_eq!(MetricSet::mean([&a]).unwrap(), a);
        assert!(MetricSet::mean(std::iter::empty()).is_err());

        assert!((relative_change(0.6037, 0.5440).unwrap() - 10.97).abs() < 0.01);
        assert!((relative_change(0.5833, 0.5440).unwrap() - 7.22).abs() < 0.01);
        assert_eq!(relative_change(0.5, 0.5), Some(0.0));
        assert_eq!(relative_change(0.5, 0.0), None);
    }
}
