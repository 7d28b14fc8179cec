//! End-to-end run on the seeded synthetic benchmark: generate data, train
//! the topic model and hierarchy, replay the weekly folds for Base, Click and
//! Ours, and print MAP with relative improvements and p-values.
//!
//! `cargo run --release --example synthetic_benchmark [sessions]`

use std::time::Instant;

use qsuggest::eval_harness::{compare, select, Bucket, Dimension, Metric, MetricSet};
use qsuggest::log_model::{assemble_sessions, preprocess_sessions};
use qsuggest::pipeline::{run_experiment, synth_generate, ExperimentConfig, BASE, CLICK, OURS};

fn main() -> qsuggest::Result<()> {
    let mut cfg = ExperimentConfig::default();
    if let Some(n) = std::env::args().nth(1) {
        cfg.synth.num_sessions = n.parse().expect("session count");
    }
    let t0 = Instant::now();
    let data = synth_generate(&cfg.synth)?;
    let sessions = preprocess_sessions(assemble_sessions(data.events.clone())?);
    let outcome = run_experiment(&cfg, &data.corpus, &sessions)?;
    let runs = &outcome.evaluation.runs;
    println!(
        "{} sessions, {} impressions, {:?} discarded, {:.1}s",
        sessions.len(),
        outcome.evaluation.impressions,
        outcome.evaluation.discards,
        t0.elapsed().as_secs_f64()
    );

    for m in [BASE, CLICK, OURS] {
        let s = MetricSet::mean(select(runs, m, None, None).iter().map(|r| &r.metrics))?;
        let cells: Vec<String> = Metric::ALL
            .iter()
            .map(|&k| format!("{k} {:.4}", s.get(k)))
            .collect();
        println!("{m:<6} {}", cells.join("  "));
    }

    let weeks: std::collections::BTreeSet<_> = runs.iter().map(|r| r.test_week).collect();
    let mut scopes: Vec<_> = weeks.into_iter().map(Some).collect();
    scopes.push(None);
    for week in scopes {
        let label = week.map_or("all".to_string(), |w| w.to_string());
        for (cand, base) in [(OURS, BASE), (CLICK, BASE), (OURS, CLICK)] {
            let c = compare(
                &select(runs, cand, week, None),
                &select(runs, base, week, None),
            )?;
            let t = c.test(Metric::Map).expect("enough impressions");
            println!(
                "{label:<9} {cand} vs {base}: MAP {:+.2}%  p={:.2e}",
                c.relative(Metric::Map).unwrap_or(f64::NAN),
                t.p
            );
        }
    }
    for b in Bucket::ALL {
        let key = Some((Dimension::QueryPosition, b));
        let c = compare(
            &select(runs, OURS, None, key),
            &select(runs, BASE, None, key),
        );
        let k = compare(
            &select(runs, CLICK, None, key),
            &select(runs, BASE, None, key),
        );
        if let (Ok(c), Ok(k)) = (c, k) {
            println!(
                "position {:<3} n={:<5} Click {:+.2}%  Ours {:+.2}% (p={:.2e})",
                b.label(),
                c.n,
                k.relative(Metric::Map).unwrap_or(f64::NAN),
                c.relative(Metric::Map).unwrap_or(f64::NAN),
                c.test(Metric::Map).map_or(f64::NAN, |t| t.p)
            );
        }
    }
    Ok(())
}
