//! Rolling weekly replay: train on week i, test on week i + 1.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, Utc};

use super::metrics::{relative_improvement, Metric, MetricSet};
use super::stats::{paired_t_test, TTest};
use crate::corpus_index::tokenize;
use crate::error::{Error, Result};
use crate::features::FeatureVector;

/// ISO-8601 week.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WeekId {
    pub year: i32,
    pub week: u32,
}

impl WeekId {
    pub fn of(ts: DateTime<Utc>) -> Self {
        let w = ts.iso_week();
        WeekId {
            year: w.year(),
            week: w.week(),
        }
    }
}

impl fmt::Display for WeekId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-W{:02}", self.year, self.week)
    }
}

impl FromStr for WeekId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("expected a week like 2012-W01, got {s:?}"));
        let (y, w) = s.split_once("-W").ok_or_else(bad)?;
        let year = y.parse().map_err(|_| bad())?;
        let week = w.parse().map_err(|_| bad())?;
        if !(1..=53).contains(&week) {
            return Err(bad());
        }
        Ok(WeekId { year, week })
    }
}

/// A labelled suggestion list with one feature vector per suggestion, in
/// base-list order.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalImpression {
    pub id: String,
    pub week: WeekId,
    /// 1-based position of the query within its session.
    pub position: usize,
    pub query: String,
    pub suggestions: Vec<String>,
    pub labels: Vec<bool>,
    pub features: Vec<FeatureVector>,
}

impl EvalImpression {
    pub fn query_length(&self) -> usize {
        tokenize(&self.query).len()
    }

    /// Has both a positive and a negative label.
    pub fn trainable(&self) -> bool {
        self.labels.contains(&true) && self.labels.contains(&false)
    }
}

/// A way of ordering suggestion lists, fitted on one week of impressions.
pub trait RankingMethod {
    fn name(&self) -> &str;
    fn fit(&self, train: &[&EvalImpression]) -> Result<Box<dyn FittedMethod>>;
}

pub trait FittedMethod {
    /// Permutation of suggestion indices, best first.
    fn order(&self, impression: &EvalImpression) -> Result<Vec<usize>>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpressionRecord {
    pub impression_id: String,
    pub position: usize,
    pub query_length: usize,
    pub metrics: MetricSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationRun {
    pub method: String,
    pub train_week: WeekId,
    pub test_week: WeekId,
    pub config_fingerprint: String,
    pub records: Vec<ImpressionRecord>,
}

pub fn aggregate(run: &EvaluationRun) -> Result<MetricSet> {
    MetricSet::mean(run.records.iter().map(|r| &r.metrics))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dimension {
    QueryPosition,
    QueryLength,
}

impl Dimension {
    pub fn name(self) -> &'static str {
        match self {
            Dimension::QueryPosition => "position",
            Dimension::QueryLength => "length",
        }
    }

    fn value(self, r: &ImpressionRecord) -> usize {
        match self {
            Dimension::QueryPosition => r.position,
            Dimension::QueryLength => r.query_length,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bucket {
    One,
    Two,
    Three,
    FourPlus,
}

impl Bucket {
    pub const ALL: [Bucket; 4] = [Bucket::One, Bucket::Two, Bucket::Three, Bucket::FourPlus];

    /// Zero (an empty query) falls into the first bucket.
    pub fn of(n: usize) -> Self {
        match n {
            0 | 1 => Bucket::One,
            2 => Bucket::Two,
            3 => Bucket::Three,
            _ => Bucket::FourPlus,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Bucket::One => "1",
            Bucket::Two => "2",
            Bucket::Three => "3",
            Bucket::FourPlus => ">=4",
        }
    }

    pub fn contains(self, dim: Dimension, r: &ImpressionRecord) -> bool {
        Bucket::of(dim.value(r)) == self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketSummary {
    pub bucket: Bucket,
    pub count: usize,
    /// `None` marks an empty bucket.
    pub summary: Option<MetricSet>,
}

/// Per-bucket aggregates for all four buckets.
pub fn breakdown(records: &[ImpressionRecord], dim: Dimension) -> Vec<BucketSummary> {
    Bucket::ALL
        .iter()
        .map(|&bucket| {
            let sets: Vec<&MetricSet> = records
                .iter()
                .filter(|r| bucket.contains(dim, r))
                .map(|r| &r.metrics)
                .collect();
            BucketSummary {
                bucket,
                count: sets.len(),
                summary: MetricSet::mean(sets).ok(),
            }
        })
        .collect()
}

/// Candidate against baseline on the same impressions.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub n: usize,
    pub candidate: MetricSet,
    pub baseline: MetricSet,
    pub relative: [Option<f64>; 6],
    /// `None` when fewer than two impressions are paired.
    pub tests: [Option<TTest>; 6],
}

impl Comparison {
    pub fn relative(&self, m: Metric) -> Option<f64> {
        self.relative[m as usize]
    }

    pub fn test(&self, m: Metric) -> Option<TTest> {
        self.tests[m as usize]
    }
}

/// Pairs records by impression id; both sides must cover the same ids.
pub fn compare(
    candidate: &[&ImpressionRecord],
    baseline: &[&ImpressionRecord],
) -> Result<Comparison> {
    let index = |rs: &[&ImpressionRecord]| -> Result<BTreeMap<String, MetricSet>> {
        let mut m = BTreeMap::new();
        for r in rs {
            if m.insert(r.impression_id.clone(), r.metrics).is_some() {
                return Err(Error::Evaluation(format!(
                    "duplicate impression {}",
                    r.impression_id
                )));
            }
        }
        Ok(m)
    };
    let (c, b) = (index(candidate)?, index(baseline)?);
    if c.keys().ne(b.keys()) {
        return Err(Error::Evaluation(
            "compared runs cover different impressions".into(),
        ));
    }
    let cs = MetricSet::mean(c.values())?;
    let bs = MetricSet::mean(b.values())?;
    let tests = Metric::ALL.map(|m| {
        let x: Vec<f64> = c.values().map(|s| s.get(m)).collect();
        let y: Vec<f64> = b.values().map(|s| s.get(m)).collect();
        paired_t_test(&x, &y).ok()
    });
    Ok(Comparison {
        n: c.len(),
        candidate: cs,
        baseline: bs,
        relative: relative_improvement(&cs, &bs),
        tests,
    })
}

/// Records of `method`, optionally restricted to one test week and one bucket.
pub fn select<'a>(
    runs: &'a [EvaluationRun],
    method: &str,
    week: Option<WeekId>,
    bucket: Option<(Dimension, Bucket)>,
) -> Vec<&'a ImpressionRecord> {
    runs.iter()
        .filter(|r| r.method == method && week.is_none_or(|w| r.test_week == w))
        .flat_map(|r| &r.records)
        .filter(|r| bucket.is_none_or(|(d, b)| b.contains(d, r)))
        .collect()
}

fn evaluate(fitted: &dyn FittedMethod, imp: &EvalImpression) -> Result<ImpressionRecord> {
    let order = fitted.order(imp)?;
    let mut seen = vec![false; imp.labels.len()];
    for &i in &order {
        if i >= seen.len() || std::mem::replace(&mut seen[i], true) {
            return Err(Error::Evaluation(format!(
                "method returned an invalid order for {}",
                imp.id
            )));
        }
    }
    if seen.contains(&false) {
        return Err(Error::Evaluation(format!(
            "method dropped suggestions for {}",
            imp.id
        )));
    }
    let ranked: Vec<bool> = order.iter().map(|&i| imp.labels[i]).collect();
    Ok(ImpressionRecord {
        impression_id: imp.id.clone(),
        position: imp.position,
        query_length: imp.query_length(),
        metrics: MetricSet::from_labels(&ranked)?,
    })
}

/// Replays weeks in `[start_week, end_week]`: each method is fitted on the
/// impressions of one week and scored on the next week present. Folds whose
/// training week has no trainable impression are skipped with a warning.
pub fn rolling_weekly_eval(
    impressions: &[EvalImpression],
    methods: &[&dyn RankingMethod],
    start_week: WeekId,
    end_week: WeekId,
    config_fingerprint: &str,
) -> Result<Vec<EvaluationRun>> {
    let names: BTreeSet<&str> = methods.iter().map(|m| m.name()).collect();
    if names.len() != methods.len() {
        return Err(Error::Evaluation("method names must be unique".into()));
    }
    let mut by_week: BTreeMap<WeekId, Vec<&EvalImpression>> = BTreeMap::new();
    for imp in impressions
        .iter()
        .filter(|i| (start_week..=end_week).contains(&i.week))
    {
        by_week.entry(imp.week).or_default().push(imp);
    }
    if by_week.len() < 2 {
        return Err(Error::Evaluation(format!(
            "need impressions in at least two weeks between {start_week} and {end_week}, found {}",
            by_week.len()
        )));
    }
    let ids: BTreeSet<&str> = impressions.iter().map(|i| i.id.as_str()).collect();
    if ids.len() != impressions.len() {
        return Err(Error::Evaluation("impression ids must be unique".into()));
    }
    let weeks: Vec<WeekId> = by_week.keys().copied().collect();
    let mut runs = Vec::new();
    for pair in weeks.windows(2) {
        let (train_week, test_week) = (pair[0], pair[1]);
        let train = &by_week[&train_week];
        if !train.iter().any(|i| i.trainable()) {
            log::warn!("skipping fold {train_week} -> {test_week}: no trainable impressions");
            continue;
        }
        let test = &by_week[&test_week];
        for method in methods {
            let fitted = method.fit(train)?;
            let records = test
                .iter()
                .map(|imp| evaluate(fitted.as_ref(), imp))
                .collect::<Result<Vec<_>>>()?;
            runs.push(EvaluationRun {
                method: method.name().to_string(),
                train_week,
                test_week,
                config_fingerprint: config_fingerprint.to_string(),
                records,
            });
        }
    }
    Ok(runs)
}
