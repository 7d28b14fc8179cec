//! Train LDA with collapsed Gibbs sampling on a corpus with planted topics,
//! inspect the learned topics, fold in unseen text and pick the topic count
//! by held-out perplexity.
//!
//! `cargo run --release --example topic_model`

use qsuggest::corpus_index::Document;
use qsuggest::topic_model::{select_topic_count, train_lda, LdaHyperparams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const THEMES: [&[&str]; 3] = [
    &[
        "library",
        "book",
        "loan",
        "catalogue",
        "journal",
        "reading",
        "archive",
        "shelf",
    ],
    &[
        "parking", "permit", "car", "bus", "bike", "travel", "route", "ticket",
    ],
    &[
        "exam",
        "timetable",
        "module",
        "grade",
        "coursework",
        "deadline",
        "lecture",
        "seminar",
    ],
];

fn main() -> qsuggest::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let docs: Vec<Document> = (0..240)
        .map(|i| {
            let words: Vec<&str> = (0..30)
                .map(|_| {
                    // Mostly one theme with some spill-over from the next.
                    let theme = if rng.random::<f64>() < 0.85 {
                        i % 3
                    } else {
                        (i + 1) % 3
                    };
                    THEMES[theme][rng.random_range(0..8)]
                })
                .collect();
            Document::new(format!("d{i:03}"), words.join(" "))
        })
        .collect();

    let hyper = LdaHyperparams {
        gibbs_iterations: 200,
        ..LdaHyperparams::new(3, 1)
    };
    let model = train_lda(&docs, &hyper)?;
    for z in 0..model.num_topics() {
        let phi = model.phi_row(z);
        let mut top: Vec<usize> = (0..phi.len()).collect();
        top.sort_by(|&a, &b| phi[b].total_cmp(&phi[a]));
        let words: Vec<&str> = top[..5]
            .iter()
            .map(|&w| model.vocabulary().term(w as u32))
            .collect();
        println!("topic {z}: {}", words.join(" "));
    }

    // With alpha = 50/K a few tokens only tilt the estimate away from uniform.
    let unseen = Document::new("new", "overdue book loan from the library archive");
    println!(
        "fold-in of {:?}: {:.3?}",
        unseen.text,
        model.infer_doc_topics(&unseen).probs()
    );

    let selection = select_topic_count(&docs, &[2, 3, 6], 0.1, &hyper)?;
    for (k, p) in &selection.perplexities {
        println!("K={k}: held-out perplexity {p:.2}");
    }
    println!("selected K={}", selection.best);
    Ok(())
}
