//! LambdaMART: gradient-boosted regression trees fitted to nDCG lambdas.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::textio::{fmt_f64, Lines};

const FORMAT_HEADER: &str = "qsuggest-lambdamart v1";

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub num_trees: usize,
    pub num_leaves: usize,
    pub min_instances_per_leaf: usize,
    pub learning_rate: f64,
    pub ndcg_truncation: usize,
    /// Steepness of the pairwise logistic.
    pub sigma: f64,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    /// Production setting: 100 trees, 10 leaves, 200 per leaf, rate 0.15.
    fn default() -> Self {
        TrainConfig {
            num_trees: 100,
            num_leaves: 10,
            min_instances_per_leaf: 200,
            learning_rate: 0.15,
            ndcg_truncation: 10,
            sigma: 1.0,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    /// Small-data setting: as the default but 10 instances per leaf.
    pub fn desk() -> Self {
        TrainConfig {
            min_instances_per_leaf: 10,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_trees == 0
            || self.min_instances_per_leaf == 0
            || self.ndcg_truncation == 0
            || self.learning_rate.is_nan()
            || self.learning_rate <= 0.0
            || self.sigma.is_nan()
            || self.sigma <= 0.0
        {
            return Err(Error::Ranker("training parameters must be positive".into()));
        }
        if self.num_leaves < 2 {
            return Err(Error::Ranker("num_leaves must be at least 2".into()));
        }
        Ok(())
    }
}

/// Candidates of one impression: one feature row and one binary label each.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryGroup {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
}

impl QueryGroup {
    fn trainable(&self) -> bool {
        self.labels.iter().any(|&l| l) && self.labels.iter().any(|&l| !l)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// Go left iff `x[feature] < threshold`.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Binary regression tree; node 0 is the root and nodes are stored in preorder.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn leaf(value: f64) -> Self {
        RegressionTree {
            nodes: vec![Node::Leaf { value }],
        }
    }

    /// A single split with two leaves.
    pub fn stump(feature: usize, threshold: f64, left: f64, right: f64) -> Self {
        RegressionTree {
            nodes: vec![
                Node::Split {
                    feature,
                    threshold,
                    left: 1,
                    right: 2,
                },
                Node::Leaf { value: left },
                Node::Leaf { value: right },
            ],
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] < threshold { left } else { right },
            }
        }
    }

    fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }
}

/// Additive tree ensemble: `score(x) = sum_t learning_rate * tree_t(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingEnsemble {
    trees: Vec<RegressionTree>,
    learning_rate: f64,
    feature_names: Vec<String>,
}

impl RankingEnsemble {
    pub fn new(
        feature_names: Vec<String>,
        learning_rate: f64,
        trees: Vec<RegressionTree>,
    ) -> Result<Self> {
        let width = feature_names.len();
        if feature_names
            .iter()
            .any(|n| n.is_empty() || n.contains([',', '\n']))
        {
            return Err(Error::Ranker("invalid feature name".into()));
        }
        if trees
            .iter()
            .any(|t| t.max_feature().is_some_and(|f| f >= width))
        {
            return Err(Error::Ranker(
                "tree splits on a feature outside the vector".into(),
            ));
        }
        Ok(RankingEnsemble {
            trees,
            learning_rate,
            feature_names,
        })
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn width(&self) -> usize {
        self.feature_names.len()
    }

    /// Comma-joined feature order.
    pub fn fingerprint(&self) -> String {
        self.feature_names.join(",")
    }

    pub fn check_fingerprint(&self, names: &[&str]) -> Result<()> {
        let got = names.join(",");
        if got != self.fingerprint() {
            return Err(Error::Fingerprint {
                expected: self.fingerprint(),
                got,
            });
        }
        Ok(())
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.width() {
            return Err(Error::FeatureWidth {
                expected: self.width(),
                got: x.len(),
            });
        }
        Ok(self.score_unchecked(x))
    }

    fn score_unchecked(&self, x: &[f64]) -> f64 {
        self.trees
            .iter()
            .map(|t| self.learning_rate * t.evaluate(x))
            .sum()
    }

    pub fn save<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{FORMAT_HEADER}")?;
        writeln!(w, "features {}", self.fingerprint())?;
        writeln!(w, "learning_rate {}", fmt_f64(self.learning_rate))?;
        writeln!(w, "trees {}", self.trees.len())?;
        for t in &self.trees {
            writeln!(w, "tree {}", t.nodes.len())?;
            write_preorder(&mut w, t, 0)?;
        }
        writeln!(w, "end")?;
        Ok(())
    }

    pub fn load<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = Lines::new(r, "ensemble");
        let header = lines.next_line()?;
        if header != FORMAT_HEADER {
            return Err(lines.err(format!("unsupported header {header:?}")));
        }
        let names: Vec<String> = lines
            .expect_key("features")?
            .split(',')
            .map(str::to_string)
            .collect();
        let learning_rate: f64 = lines.parse_key("learning_rate")?;
        let n: usize = lines.parse_key("trees")?;
        let mut trees = Vec::with_capacity(n);
        for _ in 0..n {
            let m: usize = lines.parse_key("tree")?;
            let mut records = Vec::with_capacity(m);
            for _ in 0..m {
                let line = lines.next_line()?;
                let parts: Vec<&str> = line.split(' ').collect();
                let rec = match parts.as_slice() {
                    ["S", f, t] => Record::Split(lines.parse(f)?, lines.parse(t)?),
                    ["L", v] => Record::Leaf(lines.parse(v)?),
                    _ => return Err(lines.err(format!("bad tree record {line:?}"))),
                };
                records.push(rec);
            }
            let mut nodes = Vec::with_capacity(m);
            let mut pos = 0;
            rebuild_preorder(&records, &mut pos, &mut nodes)
                .ok_or_else(|| lines.err("tree records do not form a binary tree"))?;
            if pos != records.len() {
                return Err(lines.err("trailing tree records"));
            }
            trees.push(RegressionTree { nodes });
        }
        lines.expect_key("end")?;
        RankingEnsemble::new(names, learning_rate, trees)
    }
}

enum Record {
    Split(usize, f64),
    Leaf(f64),
}

fn write_preorder<W: Write>(w: &mut W, tree: &RegressionTree, i: usize) -> Result<()> {
    match tree.nodes[i] {
        Node::Leaf { value } => writeln!(w, "L {}", fmt_f64(value))?,
        Node::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            writeln!(w, "S {feature} {}", fmt_f64(threshold))?;
            write_preorder(w, tree, left)?;
            write_preorder(w, tree, right)?;
        }
    }
    Ok(())
}

fn rebuild_preorder(records: &[Record], pos: &mut usize, nodes: &mut Vec<Node>) -> Option<usize> {
    let rec = records.get(*pos)?;
    *pos += 1;
    let me = nodes.len();
    match *rec {
        Record::Leaf(value) => nodes.push(Node::Leaf { value }),
        Record::Split(feature, threshold) => {
            nodes.push(Node::Leaf { value: 0.0 });
            let left = rebuild_preorder(records, pos, nodes)?;
            let right = rebuild_preorder(records, pos, nodes)?;
            nodes[me] = Node::Split {
                feature,
                threshold,
                left,
                right,
            };
        }
    }
    Some(me)
}

/// Indices sorted by descending score; equal scores keep input order.
pub fn rank_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Re-ranks candidates by ensemble score. Returns the new order as indices
/// into `rows` together with each candidate's score.
pub fn rerank(ensemble: &RankingEnsemble, rows: &[Vec<f64>]) -> Result<(Vec<usize>, Vec<f64>)> {
    let scores = rows
        .iter()
        .map(|r| ensemble.predict(r))
        .collect::<Result<Vec<f64>>>()?;
    Ok((rank_order(&scores), scores))
}

fn discount(rank: usize, truncation: usize) -> f64 {
    if rank < truncation {
        1.0 / ((rank + 2) as f64).log2()
    } else {
        0.0
    }
}

/// nDCG@truncation of binary labels under `scores` (ties keep input order).
/// Groups without a positive score 0.
pub fn group_ndcg(labels: &[bool], scores: &[f64], truncation: usize) -> f64 {
    let positives = labels.iter().filter(|&&l| l).count();
    let ideal: f64 = (0..positives).map(|r| discount(r, truncation)).sum();
    if ideal == 0.0 {
        return 0.0;
    }
    let dcg: f64 = rank_order(scores)
        .iter()
        .enumerate()
        .filter(|&(_, &i)| labels[i])
        .map(|(r, _)| discount(r, truncation))
        .sum();
    dcg / ideal
}

/// Per-document lambdas and Newton weights of one group under `scores`.
///
/// For every (positive i, negative j) pair, with `rho = 1 / (1 + exp(sigma (s_i - s_j)))`
/// and `delta = |nDCG change when i and j swap ranks|`, i gains
/// `sigma * delta * rho` and j loses the same; both accumulate
/// `sigma^2 * delta * rho * (1 - rho)` of weight.
pub fn group_lambdas(
    labels: &[bool],
    scores: &[f64],
    truncation: usize,
    sigma: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = labels.len();
    let mut lambdas = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let positives = labels.iter().filter(|&&l| l).count();
    let ideal: f64 = (0..positives).map(|r| discount(r, truncation)).sum();
    if ideal == 0.0 || positives == n {
        return (lambdas, weights);
    }
    let mut rank = vec![0; n];
    for (r, i) in rank_order(scores).into_iter().enumerate() {
        rank[i] = r;
    }
    for i in (0..n).filter(|&i| labels[i]) {
        for j in (0..n).filter(|&j| !labels[j]) {
            let delta =
                (discount(rank[i], truncation) - discount(rank[j], truncation)).abs() / ideal;
            if delta == 0.0 {
                continue;
            }
            let rho = 1.0 / (1.0 + (sigma * (scores[i] - scores[j])).exp());
            let lambda = sigma * delta * rho;
            let weight = sigma * sigma * delta * rho * (1.0 - rho);
            lambdas[i] += lambda;
            lambdas[j] -= lambda;
            weights[i] += weight;
            weights[j] += weight;
        }
    }
    (lambdas, weights)
}

/// Trains a ranking ensemble. Groups lacking a positive or a negative label
/// add no gradient but are still scored.
pub fn train_lambdamart(
    groups: &[QueryGroup],
    feature_names: &[&str],
    config: &TrainConfig,
) -> Result<RankingEnsemble> {
    Ok(train_lambdamart_traced(groups, feature_names, config)?.0)
}

/// As [`train_lambdamart`], also returning mean training nDCG@truncation
/// before the first tree and after each tree.
pub fn train_lambdamart_traced(
    groups: &[QueryGroup],
    feature_names: &[&str],
    config: &TrainConfig,
) -> Result<(RankingEnsemble, Vec<f64>)> {
    config.validate()?;
    let width = feature_names.len();
    for g in groups {
        if g.rows.len() != g.labels.len() {
            return Err(Error::Ranker("rows and labels differ in length".into()));
        }
        if let Some(r) = g.rows.iter().find(|r| r.len() != width) {
            return Err(Error::FeatureWidth {
                expected: width,
                got: r.len(),
            });
        }
    }
    if !groups.iter().any(QueryGroup::trainable) {
        return Err(Error::Ranker(
            "no group has both a positive and a negative label".into(),
        ));
    }

    let rows: Vec<&[f64]> = groups
        .iter()
        .flat_map(|g| g.rows.iter().map(Vec::as_slice))
        .collect();
    let mut offsets = vec![0];
    for g in groups {
        offsets.push(offsets.last().unwrap() + g.rows.len());
    }
    let mut scores = vec![0.0; rows.len()];
    let mut trees = Vec::with_capacity(config.num_trees);
    let mean_ndcg = |scores: &[f64]| -> f64 {
        let trainable: Vec<usize> = (0..groups.len())
            .filter(|&g| groups[g].trainable())
            .collect();
        trainable
            .iter()
            .map(|&g| {
                group_ndcg(
                    &groups[g].labels,
                    &scores[offsets[g]..offsets[g + 1]],
                    config.ndcg_truncation,
                )
            })
            .sum::<f64>()
            / trainable.len() as f64
    };
    let mut history = vec![mean_ndcg(&scores)];

    let mut lambdas = vec![0.0; rows.len()];
    let mut weights = vec![0.0; rows.len()];
    for iter in 0..config.num_trees {
        for (g, group) in groups.iter().enumerate() {
            let span = offsets[g]..offsets[g + 1];
            let (l, w) = if group.trainable() {
                group_lambdas(
                    &group.labels,
                    &scores[span.clone()],
                    config.ndcg_truncation,
                    config.sigma,
                )
            } else {
                (vec![0.0; span.len()], vec![0.0; span.len()])
            };
            lambdas[span.clone()].copy_from_slice(&l);
            weights[span].copy_from_slice(&w);
        }
        if lambdas.iter().chain(&weights).any(|v| !v.is_finite()) {
            return Err(Error::Ranker(format!(
                "non-finite gradient at iteration {iter}; check feature values"
            )));
        }
        let tree = fit_tree(&rows, &lambdas, &weights, config);
        for (s, x) in scores.iter_mut().zip(&rows) {
            *s += config.learning_rate * tree.evaluate(x);
        }
        trees.push(tree);
        history.push(mean_ndcg(&scores));
        log::debug!(
            "tree {}: training nDCG {:.4}",
            iter + 1,
            history.last().unwrap()
        );
    }
    let names = feature_names.iter().map(|s| s.to_string()).collect();
    Ok((
        RankingEnsemble::new(names, config.learning_rate, trees)?,
        history,
    ))
}

struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

/// Best variance-reducing split of `members`, honoring the leaf minimum.
#[allow(clippy::needless_range_loop)]
fn best_split(
    rows: &[&[f64]],
    targets: &[f64],
    members: &[usize],
    min_leaf: usize,
) -> Option<Candidate> {
    let n = members.len();
    if n < 2 * min_leaf {
        return None;
    }
    let total: f64 = members.iter().map(|&i| targets[i]).sum();
    let parent = total * total / n as f64;
    let width = rows[members[0]].len();
    let mut best: Option<(usize, f64, f64)> = None;
    let mut sorted = members.to_vec();
    for f in 0..width {
        sorted.sort_by(|&a, &b| rows[a][f].total_cmp(&rows[b][f]).then(a.cmp(&b)));
        let mut left_sum = 0.0;
        for k in 0..n - 1 {
            left_sum += targets[sorted[k]];
            let (lo, hi) = (rows[sorted[k]][f], rows[sorted[k + 1]][f]);
            let n_left = k + 1;
            if lo == hi || n_left < min_leaf || n - n_left < min_leaf {
                continue;
            }
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / n_left as f64
                + right_sum * right_sum / (n - n_left) as f64
                - parent;
            if gain > 1e-12 && best.is_none_or(|(_, _, g)| gain > g) {
                best = Some((f, lo + (hi - lo) / 2.0, gain));
            }
        }
    }
    let (feature, threshold, gain) = best?;
    let (left, right) = members.iter().partition(|&&i| rows[i][feature] < threshold);
    Some(Candidate {
        feature,
        threshold,
        gain,
        left,
        right,
    })
}

/// Best-first regression tree on the lambdas; leaves take one Newton step.
fn fit_tree(
    rows: &[&[f64]],
    lambdas: &[f64],
    weights: &[f64],
    config: &TrainConfig,
) -> RegressionTree {
    enum Slot {
        Open(Vec<usize>, Option<Candidate>),
        Done(Node),
    }
    let split = |m: &[usize]| best_split(rows, lambdas, m, config.min_instances_per_leaf);
    let all: Vec<usize> = (0..rows.len()).collect();
    let root = split(&all);
    let mut slots = vec![Slot::Open(all, root)];
    let mut leaves = 1;
    while leaves < config.num_leaves {
        let pick = slots
            .iter()
            .enumerate()
            .filter_map(|(i, s)| match s {
                Slot::Open(_, Some(c)) => Some((i, c.gain)),
                _ => None,
            })
            .fold(None, |acc: Option<(usize, f64)>, (i, g)| match acc {
                Some((_, bg)) if bg >= g => acc,
                _ => Some((i, g)),
            });
        let Some((i, _)) = pick else { break };
        let Slot::Open(_, Some(c)) =
            std::mem::replace(&mut slots[i], Slot::Done(Node::Leaf { value: 0.0 }))
        else {
            unreachable!()
        };
        let (l, r) = (slots.len(), slots.len() + 1);
        let left_split = split(&c.left);
        let right_split = split(&c.right);
        slots.push(Slot::Open(c.left, left_split));
        slots.push(Slot::Open(c.right, right_split));
        slots[i] = Slot::Done(Node::Split {
            feature: c.feature,
            threshold: c.threshold,
            left: l,
            right: r,
        });
        leaves += 1;
    }
    let nodes: Vec<Node> = slots
        .into_iter()
        .map(|s| match s {
            Slot::Done(n) => n,
            Slot::Open(members, _) => {
                let num: f64 = members.iter().map(|&i| lambdas[i]).sum();
                let den: f64 = members.iter().map(|&i| weights[i]).sum();
                Node::Leaf {
                    value: if den > 0.0 { num / den } else { 0.0 },
                }
            }
        })
        .collect();
    to_preorder(&nodes)
}

fn to_preorder(nodes: &[Node]) -> RegressionTree {
    fn walk(nodes: &[Node], i: usize, out: &mut Vec<Node>) -> usize {
        let me = out.len();
        match nodes[i] {
            Node::Leaf { value } => out.push(Node::Leaf { value }),
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                out.push(Node::Leaf { value: 0.0 });
                let l = walk(nodes, left, out);
                let r = walk(nodes, right, out);
                out[me] = Node::Split {
                    feature,
                    threshold,
                    left: l,
                    right: r,
                };
            }
        }
        me
    }
    let mut out = Vec::with_capacity(nodes.len());
    walk(nodes, 0, &mut out);
    RegressionTree { nodes: out }
}
