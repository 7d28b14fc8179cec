//! Tokenize a small collection and answer conjunctive "contains every query
//! word" lookups, which is how queries are mapped onto documents.
//!
//! `cargo run --example containment_index`

use qsuggest::corpus_index::{tokenize, Document, InvertedIndex};

fn main() -> qsuggest::Result<()> {
    let docs = vec![
        Document::new("d1", "Library opening hours during term time"),
        Document::new("d2", "Opening hours of the sports centre"),
        Document::new("d3", "Library catalogue and e-book access"),
        Document::new("d4", "Parking permits for staff and students"),
    ];
    println!("tokens of d3: {:?}", tokenize(&docs[2].text));

    let index = InvertedIndex::build(&docs)?;
    println!(
        "{} documents, {} distinct terms",
        index.num_docs(),
        index.num_terms()
    );
    for query in [
        "library",
        "opening hours",
        "library hours",
        "Library HOURS",
        "swimming",
    ] {
        println!(
            "{query:<14} df(first) {:<2} -> {:?}",
            index.document_frequency(&tokenize(query)[0]),
            index.doc_ids_containing_all_terms(query)
        );
    }
    Ok(())
}
