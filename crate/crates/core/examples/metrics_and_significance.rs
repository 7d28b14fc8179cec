//! Score ranked label lists, compare two systems impression by impression,
//! break the comparison down by query position and test it for significance.
//!
//! `cargo run --example metrics_and_significance`

use qsuggest::eval_harness::{
    breakdown, compare, paired_t_test, Dimension, ImpressionRecord, Metric, MetricSet,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ranked(rng: &mut ChaCha8Rng, skill: f64) -> Vec<bool> {
    // One relevant item; a better system puts it nearer the top.
    let n = 10;
    let pos = ((rng.random::<f64>() * (1.0 - skill)) * n as f64) as usize;
    (0..n).map(|i| i == pos.min(n - 1)).collect()
}

fn main() -> qsuggest::Result<()> {
    let labels = [false, true, false, false, true, false];
    let m = MetricSet::from_labels(&labels)?;
    for k in Metric::ALL {
        println!("{:<8} {:.4}", k.name(), m.get(k));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut base = Vec::new();
    let mut better = Vec::new();
    for i in 0..400 {
        let position = 1 + i % 5;
        // The better system only helps after the first query of a session.
        let skill = if position > 1 { 0.6 } else { 0.1 };
        for (records, s) in [(&mut base, 0.0), (&mut better, skill)] {
            records.push(ImpressionRecord {
                impression_id: format!("s{i}#{position}"),
                position,
                query_length: 1 + i % 3,
                metrics: MetricSet::from_labels(&ranked(&mut rng, s))?,
            });
        }
    }

    let c = compare(
        &better.iter().collect::<Vec<_>>(),
        &base.iter().collect::<Vec<_>>(),
    )?;
    println!(
        "\nMAP {:.4} vs {:.4}: {:+.2}% (t {:.2}, p {:.2e}, n {})",
        c.candidate.get(Metric::Map),
        c.baseline.get(Metric::Map),
        c.relative(Metric::Map).unwrap_or(f64::NAN),
        c.test(Metric::Map).map_or(f64::NAN, |t| t.t),
        c.test(Metric::Map).map_or(f64::NAN, |t| t.p),
        c.n
    );

    println!("\nby query position:");
    let (a, b) = (
        breakdown(&better, Dimension::QueryPosition),
        breakdown(&base, Dimension::QueryPosition),
    );
    for (x, y) in a.iter().zip(&b) {
        if let (Some(sx), Some(sy)) = (&x.summary, &y.summary) {
            println!(
                "  {:<4} n={:<4} MAP {:.4} vs {:.4}",
                x.bucket.label(),
                x.count,
                sx.get(Metric::Map),
                sy.get(Metric::Map)
            );
        }
    }

    let t = paired_t_test(
        &[0.61, 0.72, 0.55, 0.80, 0.67],
        &[0.58, 0.70, 0.49, 0.74, 0.66],
    )?;
    println!("\nsmall paired test: t {:.3}, p {:.4}", t.t, t.p);
    Ok(())
}
