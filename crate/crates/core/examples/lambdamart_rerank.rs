//! Train a LambdaMART ensemble on query groups, watch training nDCG@10
//! rise, save and reload the model, and re-rank a fresh list with it.
//!
//! `cargo run --release --example lambdamart_rerank`

use qsuggest::ranker::{
    group_ndcg, rerank, train_lambdamart_traced, QueryGroup, RankingEnsemble, TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FEATURES: [&str; 3] = ["relevance_hint", "popularity", "noise"];

fn group(rng: &mut ChaCha8Rng) -> QueryGroup {
    let n = 10;
    let target = rng.random_range(0..n);
    let rows = (0..n)
        .map(|i| {
            let hint = if i == target { 0.7 } else { 0.3 } + rng.random_range(-0.35..0.35);
            vec![hint, rng.random::<f64>(), rng.random::<f64>()]
        })
        .collect();
    QueryGroup {
        rows,
        labels: (0..n).map(|i| i == target).collect(),
    }
}

fn main() -> qsuggest::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let groups: Vec<QueryGroup> = (0..300).map(|_| group(&mut rng)).collect();
    let cfg = TrainConfig::desk();
    let (ensemble, history) = train_lambdamart_traced(&groups, &FEATURES, &cfg)?;
    for t in [0, 1, 5, 20, 50, 100] {
        println!("after {t:>3} trees: mean nDCG@10 {:.4}", history[t]);
    }

    let heldout: Vec<QueryGroup> = (0..200).map(|_| group(&mut rng)).collect();
    let mut total = 0.0;
    for g in &heldout {
        let (_, scores) = rerank(&ensemble, &g.rows)?;
        total += group_ndcg(&g.labels, &scores, 10);
    }
    println!("held-out mean nDCG@10 {:.4}", total / heldout.len() as f64);

    let mut saved = Vec::new();
    ensemble.save(&mut saved)?;
    let model = RankingEnsemble::load(saved.as_slice())?;
    model.check_fingerprint(&FEATURES)?;
    println!(
        "\nmodel: {} trees, {} bytes, features {}",
        model.trees().len(),
        saved.len(),
        model.fingerprint()
    );

    let fresh = group(&mut rng);
    let (order, scores) = rerank(&model, &fresh.rows)?;
    println!("re-ranked list (original position, score, label):");
    for i in order {
        println!(
            "  {i:>2}  {:+.4}  {}",
            scores[i],
            if fresh.labels[i] { "relevant" } else { "" }
        );
    }
    Ok(())
}
