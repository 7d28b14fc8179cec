//! Mine a concept subsumption hierarchy from a corpus and a query log, then
//! produce non-personalised suggestion lists from it.
//!
//! `cargo run --release --example base_suggestions`

use qsuggest::base_suggester::{build_hierarchy, HierarchyConfig};
use qsuggest::corpus_index::InvertedIndex;
use qsuggest::log_model::{assemble_sessions, preprocess_sessions};
use qsuggest::pipeline::{synth_generate, SynthConfig};

fn main() -> qsuggest::Result<()> {
    let data = synth_generate(&SynthConfig {
        num_sessions: 1500,
        ..SynthConfig::default()
    })?;
    let sessions = preprocess_sessions(assemble_sessions(data.events)?);
    let index = InvertedIndex::build(&data.corpus)?;
    let h = build_hierarchy(&index, &sessions, &HierarchyConfig::default())?;
    println!(
        "{} concepts, {} subsumption edges",
        h.nodes().len(),
        h.edges().len()
    );

    // A frequent two-word query and its leading word.
    let mut queries: Vec<(&str, usize)> = h
        .nodes()
        .iter()
        .filter(|n| n.text.split(' ').count() == 2)
        .map(|n| (n.text.as_str(), n.query_freq))
        .collect();
    queries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let two_words = queries[0].0;
    let head = two_words.split(' ').next().unwrap_or(two_words);

    for q in [head, two_words, "never seen before"] {
        let node = h.node(q);
        println!(
            "\n{q:?}: query freq {}, {} children{}",
            node.map_or(0, |n| n.query_freq),
            h.children_of(q).len(),
            if h.suggest(q, 10).from_fallback {
                ", fallback list"
            } else {
                ""
            }
        );
        for s in h.suggest(q, 5).suggestions {
            println!("  {:>7.3}  {}", s.score, s.text);
        }
    }
    Ok(())
}
