//! Plain-text evaluation reports. Output depends only on its inputs, so two
//! runs with the same configuration produce identical bytes.

use std::collections::BTreeSet;
use std::io::Write;

use super::metrics::{Metric, MetricSet};
use super::replay::{compare, select, Bucket, Dimension, EvaluationRun, WeekId};
use crate::error::Result;

const REPORT_HEADER: &str = "qsuggest-report v1";

fn fmt_metrics(m: &MetricSet) -> String {
    Metric::ALL
        .iter()
        .map(|&k| format!("{}={:.6}", k.name(), m.get(k)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn scopes(runs: &[EvaluationRun]) -> Vec<(String, Option<WeekId>)> {
    let weeks: BTreeSet<WeekId> = runs.iter().map(|r| r.test_week).collect();
    let mut out: Vec<(String, Option<WeekId>)> = weeks
        .into_iter()
        .map(|w| (w.to_string(), Some(w)))
        .collect();
    out.push(("all".to_string(), None));
    out
}

fn slices() -> Vec<(String, Option<(Dimension, Bucket)>)> {
    let mut out = vec![("overall".to_string(), None)];
    for dim in [Dimension::QueryPosition, Dimension::QueryLength] {
        for b in Bucket::ALL {
            out.push((format!("{}={}", dim.name(), b.label()), Some((dim, b))));
        }
    }
    out
}

/// Writes the evaluation report.
///
/// `methods` fixes the row order; each method is compared against every
/// method listed before it. `config` is echoed verbatim.
pub fn write_report<W: Write>(
    mut w: W,
    config: &[(String, String)],
    methods: &[&str],
    runs: &[EvaluationRun],
) -> Result<()> {
    writeln!(w, "{REPORT_HEADER}")?;
    writeln!(w, "[config]")?;
    for (k, v) in config {
        writeln!(w, "{k} = {v}")?;
    }
    writeln!(w, "[folds]")?;
    for r in runs {
        writeln!(
            w,
            "train={} test={} method={} impressions={} config={}",
            r.train_week,
            r.test_week,
            r.method,
            r.records.len(),
            r.config_fingerprint
        )?;
    }
    writeln!(w, "[summary]")?;
    for (scope, week) in scopes(runs) {
        for (slice, bucket) in slices() {
            for m in methods {
                let recs = select(runs, m, week, bucket);
                match MetricSet::mean(recs.iter().map(|r| &r.metrics)) {
                    Ok(s) => writeln!(
                        w,
                        "scope={scope} slice={slice} method={m} n={} {}",
                        recs.len(),
                        fmt_metrics(&s)
                    )?,
                    Err(_) => writeln!(w, "scope={scope} slice={slice} method={m} n=0 empty")?,
                }
            }
        }
    }
    writeln!(w, "[comparisons]")?;
    for (scope, week) in scopes(runs) {
        for (slice, bucket) in slices() {
            for (i, cand) in methods.iter().enumerate() {
                for base in &methods[..i] {
                    let c = select(runs, cand, week, bucket);
                    let b = select(runs, base, week, bucket);
                    let prefix = format!("scope={scope} slice={slice} {cand} vs {base}");
                    if c.is_empty() {
                        writeln!(w, "{prefix} n=0 empty")?;
                        continue;
                    }
                    let cmp = compare(&c, &b)?;
                    let mut parts = vec![format!("n={}", cmp.n)];
                    for m in Metric::ALL {
                        let rel = cmp
                            .relative(m)
                            .map_or("undefined".to_string(), |v| format!("{v:+.2}%"));
                        let p = cmp
                            .test(m)
                            .map_or("na".to_string(), |t| format!("{:.4e}", t.p));
                        parts.push(format!("{}:rel={rel},p={p}", m.name()));
                    }
                    writeln!(w, "{prefix} {}", parts.join(" "))?;
                }
            }
        }
    }
    Ok(())
}

/// Tab-separated per-impression metrics, one row per method and impression.
pub fn write_impression_table<W: Write>(mut w: W, runs: &[EvaluationRun]) -> Result<()> {
    let names: Vec<&str> = Metric::ALL.iter().map(|m| m.name()).collect();
    writeln!(
        w,
        "method\ttrain_week\ttest_week\timpression_id\tposition\tquery_length\t{}",
        names.join("\t")
    )?;
    for run in runs {
        for r in &run.records {
            let vals: Vec<String> = r.metrics.0.iter().map(|v| format!("{v:.6}")).collect();
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                run.method,
                run.train_week,
                run.test_week,
                r.impression_id,
                r.position,
                r.query_length,
                vals.join("\t")
            )?;
        }
    }
    Ok(())
}
