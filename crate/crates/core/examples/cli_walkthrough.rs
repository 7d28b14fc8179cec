//! Drive the command-line stages end to end in a scratch directory:
//! synth, ingest, stats, train-lda, build-hierarchy, train-ranker,
//! evaluate and suggest. The same stages are available from the
//! `qsuggest` binary.
//!
//! `cargo run --release --example cli_walkthrough`

use std::fs;

use qsuggest::pipeline::run_command;

// Small enough to finish in seconds; every other setting keeps its default.
const CONFIG: &str = "\
[topics]
num_topics = 10
gibbs_iterations = 150

[ranker]
min_leaf = 20

[synth]
topics = 10
documents = 600
sessions = 2000
";

fn main() -> std::io::Result<()> {
    let dir = tempfile::tempdir()?;
    let config = dir.path().join("experiment.conf");
    fs::write(&config, CONFIG)?;
    let config = config.to_string_lossy().into_owned();

    let mut stdout = std::io::stdout();
    let mut stderr = std::io::stderr();
    let stages: [&[&str]; 7] = [
        &["synth"],
        &["ingest"],
        &["stats"],
        &["train-lda"],
        &["build-hierarchy"],
        &["train-ranker"],
        &["evaluate"],
    ];
    for stage in stages {
        println!("$ qsuggest {}", stage.join(" "));
        let args = ["qsuggest", "--config", &config]
            .into_iter()
            .chain(stage.iter().copied());
        let code = run_command(args, &mut stdout, &mut stderr);
        if code != 0 {
            std::process::exit(code);
        }
    }

    let report = fs::read_to_string(dir.path().join("reports/report.txt"))?;
    println!("\nreport, overall MAP comparisons:");
    for line in report
        .lines()
        .skip_while(|l| *l != "[comparisons]")
        .filter(|l| l.starts_with("scope=all slice=overall"))
    {
        let map = line
            .split(' ')
            .find(|p| p.starts_with("MAP:"))
            .unwrap_or("");
        println!(
            "  {} {map}",
            line.split(' ')
                .skip(2)
                .take(3)
                .collect::<Vec<_>>()
                .join(" ")
        );
    }

    let log = fs::read_to_string(dir.path().join("data/log.tsv"))?;
    let query = log
        .lines()
        .find_map(|l| l.split('\t').nth(3).filter(|_| l.contains("\tQ\t")))
        .unwrap_or("x");
    println!("\n$ qsuggest suggest --query {query:?}");
    let code = run_command(
        ["qsuggest", "--config", &config, "suggest", "--query", query],
        &mut stdout,
        &mut stderr,
    );
    std::process::exit(code);
}
