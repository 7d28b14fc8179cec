//! Parse a raw query log, group it into sessions and label suggestion lists
//! with click-validated refinements.
//!
//! `cargo run --example log_labelling`

use qsuggest::log_model::{
    assemble_sessions, compute_log_stats, label_suggestions, preprocess_sessions, read_log,
    LabelOutcome,
};

const LOG: &str = "\
# session  type  seq  content  timestamp
s1\tQ\t1\tlibrary\t2012-01-03T09:00:00Z
s1\tC\t2\td017\t2012-01-03T09:00:20Z
s1\tQ\t3\tlibrary opening hours\t2012-01-03T09:01:05Z
s1\tC\t4\td042\t2012-01-03T09:01:30Z
s1\tQ\t5\tlibrary opening hours sunday\t2012-01-03T09:02:10Z
s2\tQ\t1\tparking\t2012-01-03T10:15:00Z
s2\tQ\t2\tparking permit\t2012-01-03T10:15:40Z
s3\tQ\t1\tsingle event session\t2012-01-03T11:00:00Z
s4\tX\t1\tbroken line\t2012-01-03T11:00:00Z
";

fn main() -> qsuggest::Result<()> {
    let parsed = read_log(LOG.as_bytes())?;
    for r in &parsed.rejected {
        println!("rejected line {}: {}", r.line, r.reason);
    }
    let sessions = preprocess_sessions(assemble_sessions(parsed.events)?);
    println!("{}\n", compute_log_stats(&sessions));

    let suggestions: Vec<String> = [
        "library opening hours",
        "library catalogue",
        "parking permit",
    ]
    .map(String::from)
    .to_vec();
    for session in &sessions {
        for imp in session.impressions() {
            match label_suggestions(session, &imp, &suggestions) {
                LabelOutcome::Labeled(l) => println!(
                    "{:<6} {:<28} labels {:?}",
                    imp.id(),
                    imp.query_text,
                    l.labels
                ),
                LabelOutcome::Discard(reason) => {
                    println!("{:<6} {:<28} discarded: {reason}", imp.id(), imp.query_text)
                }
            }
        }
    }
    Ok(())
}
