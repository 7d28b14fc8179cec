//! Command-line front end. Each subcommand runs one pipeline stage and
//! exchanges versioned artifacts with the others through `paths.model_dir`.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use super::config::ExperimentConfig;
use super::experiment::{
    build_topic_space, evaluate_methods, load_corpus, load_sessions, open, resolve_weeks,
    train_deployed, train_hierarchy, train_topic_model, ImpressionBuilder,
};
use super::methods::{MethodSpec, BASE, CLICK, OURS};
use super::synth::synth_generate;
use crate::base_suggester::ConceptHierarchy;
use crate::error::{Error, Result};
use crate::eval_harness::{write_impression_table, write_report, WeekId};
use crate::features::FEATURE_NAMES;
use crate::log_model::{assemble_sessions, compute_log_stats, read_log};
use crate::ranker::{rank_order, RankingEnsemble};
use crate::topic_model::TopicModel;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_MISSING_ARTIFACT: i32 = 3;
pub const EXIT_DATA: i32 = 4;

const INGESTED: &str = "sessions.tsv";
const LDA: &str = "lda.model";
const HIERARCHY: &str = "hierarchy.model";
const PROVENANCE: &str = "hierarchy.provenance";

#[derive(Debug, Parser)]
#[command(
    name = "qsuggest",
    version,
    about = "Session-personalised query suggestion"
)]
struct Cli {
    /// Configuration file; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus, log and ground truth.
    Synth {
        /// Output directory; defaults to the directory of `paths.logs`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate the log and corpus and store the cleaned sessions.
    Ingest,
    /// Print log statistics of the ingested sessions.
    Stats,
    /// Train the topic model on the corpus.
    TrainLda,
    /// Build the concept hierarchy from sessions up to the start week.
    BuildHierarchy,
    /// Train the Click and Ours ensembles on the replay window.
    TrainRanker,
    /// Run the rolling weekly evaluation and write the report.
    Evaluate {
        /// Report path; defaults to `<report_dir>/report.txt`.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Re-rank suggestions for a query given the session so far.
    Suggest {
        #[arg(long)]
        query: String,
        /// Earlier query in the session, oldest first; repeatable.
        #[arg(long = "prior-query")]
        prior_queries: Vec<String>,
        /// Clicked document id, oldest first; repeatable.
        #[arg(long = "click")]
        clicks: Vec<String>,
        #[arg(long, default_value = OURS)]
        method: String,
    },
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::MissingArtifact { .. } => EXIT_MISSING_ARTIFACT,
        _ => EXIT_DATA,
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the exit status.
pub fn run_command<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return EXIT_CONFIG;
            }
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
    };
    match run(cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply_overrides(std::env::vars())?;
    Ok(cfg)
}

struct Paths {
    logs: PathBuf,
    corpus: PathBuf,
    models: PathBuf,
    reports: PathBuf,
}

impl Paths {
    fn new(cfg: &ExperimentConfig) -> Self {
        Paths {
            logs: cfg.resolve(&cfg.logs),
            corpus: cfg.resolve(&cfg.corpus),
            models: cfg.resolve(&cfg.model_dir),
            reports: cfg.resolve(&cfg.report_dir),
        }
    }

    fn model(&self, name: &str) -> PathBuf {
        self.models.join(name)
    }

    fn ranker(&self, method: &str) -> PathBuf {
        self.models
            .join(format!("ranker-{}.model", method.to_lowercase()))
    }
}

fn write_artifact(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn ingested_sessions(paths: &Paths) -> Result<Vec<crate::log_model::SearchSession>> {
    let parsed = read_log(open(&paths.model(INGESTED), "ingest")?)?;
    assemble_sessions(parsed.events)
}

fn topic_model(paths: &Paths) -> Result<TopicModel> {
    TopicModel::load(open(&paths.model(LDA), "train-lda")?)
}

fn hierarchy(paths: &Paths) -> Result<ConceptHierarchy> {
    ConceptHierarchy::load(open(&paths.model(HIERARCHY), "build-hierarchy")?)
}

/// Last week of sessions the hierarchy was built from.
fn hierarchy_cutoff(paths: &Paths) -> Result<WeekId> {
    let mut line = String::new();
    open(&paths.model(PROVENANCE), "build-hierarchy")?.read_line(&mut line)?;
    line.trim()
        .strip_prefix("trained_through ")
        .ok_or_else(|| Error::format("provenance", 1, "expected `trained_through <week>`"))?
        .parse()
}

fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let cfg = load_config(cli.config.as_deref())?;
    let paths = Paths::new(&cfg);
    match cli.command {
        Command::Synth { out: dir } => {
            let generated = synth_generate(&cfg.synth).map_err(|e| Error::Config(e.to_string()))?;
            let dir = dir.unwrap_or_else(|| {
                paths
                    .logs
                    .parent()
                    .map(Path::to_path_buf)
                    .unwrap_or_default()
            });
            generated.write_to_dir(&dir)?;
            writeln!(
                out,
                "wrote {} documents, {} events, {} sessions to {}",
                generated.corpus.len(),
                generated.events.len(),
                generated.truth.sessions.len(),
                dir.display()
            )?;
        }
        Command::Ingest => {
            let (sessions, rejected) = load_sessions(&paths.logs)?;
            let docs = load_corpus(&paths.corpus)?;
            crate::corpus_index::InvertedIndex::build(&docs)?;
            write_artifact(&paths.model(INGESTED), |w| {
                for e in sessions.iter().flat_map(|s| &s.events) {
                    writeln!(w, "{}", e.to_log_line())?;
                }
                Ok(())
            })?;
            writeln!(
                out,
                "ingested {} sessions and {} documents; rejected {rejected} log lines",
                sessions.len(),
                docs.len()
            )?;
        }
        Command::Stats => {
            let sessions = ingested_sessions(&paths)?;
            writeln!(out, "{}", compute_log_stats(&sessions))?;
        }
        Command::TrainLda => {
            let docs = load_corpus(&paths.corpus)?;
            let model = train_topic_model(&cfg, &docs)?;
            write_artifact(&paths.model(LDA), |w| model.save(w))?;
            writeln!(
                out,
                "trained {} topics over {} terms",
                model.num_topics(),
                model.vocabulary().len()
            )?;
        }
        Command::BuildHierarchy => {
            let sessions = ingested_sessions(&paths)?;
            let docs = load_corpus(&paths.corpus)?;
            let (start, _) = resolve_weeks(&cfg, &sessions)?;
            let h = train_hierarchy(&cfg, &docs, &sessions, start)?;
            write_artifact(&paths.model(HIERARCHY), |w| h.save(w))?;
            write_artifact(&paths.model(PROVENANCE), |w| {
                Ok(writeln!(w, "trained_through {start}")?)
            })?;
            writeln!(
                out,
                "built {} concepts and {} edges from sessions through {start}",
                h.nodes().len(),
                h.edges().len()
            )?;
        }
        Command::TrainRanker => {
            let sessions = ingested_sessions(&paths)?;
            let docs = load_corpus(&paths.corpus)?;
            let space = build_topic_space(&topic_model(&paths)?, &docs)?;
            let h = hierarchy(&paths)?;
            for (name, ensemble) in train_deployed(&cfg, &sessions, &space, &h)? {
                write_artifact(&paths.ranker(name), |w| ensemble.save(w))?;
                writeln!(
                    out,
                    "trained {name} ensemble with {} trees",
                    ensemble.trees().len()
                )?;
            }
        }
        Command::Evaluate { report } => {
            let sessions = ingested_sessions(&paths)?;
            let docs = load_corpus(&paths.corpus)?;
            let space = build_topic_space(&topic_model(&paths)?, &docs)?;
            let h = hierarchy(&paths)?;
            let cutoff = hierarchy_cutoff(&paths)?;
            let eval = evaluate_methods(&cfg, &sessions, &space, &h)?;
            if let Some(r) = eval.runs.iter().find(|r| r.test_week <= cutoff) {
                return Err(Error::Evaluation(format!(
                    "hierarchy trained through {cutoff} but evaluated on {}; rebuild it",
                    r.test_week
                )));
            }
            let report = report.unwrap_or_else(|| paths.reports.join("report.txt"));
            let dir = report.parent().map(Path::to_path_buf).unwrap_or_default();
            let mut echo = cfg.echo();
            echo.push((
                "eval.resolved_weeks".into(),
                format!("{}..{}", eval.start_week, eval.end_week),
            ));
            echo.push(("eval.impressions".into(), eval.impressions.to_string()));
            let methods = [BASE, CLICK, OURS];
            write_artifact(&report, |w| write_report(w, &echo, &methods, &eval.runs))?;
            write_artifact(&dir.join("impressions.tsv"), |w| {
                write_impression_table(w, &eval.runs)
            })?;
            write_artifact(&dir.join("effective.conf"), |w| {
                Ok(w.write_all(cfg.to_config_string().as_bytes())?)
            })?;
            writeln!(
                out,
                "evaluated {} folds over {} impressions; report at {}",
                eval.runs.len() / methods.len(),
                eval.impressions,
                report.display()
            )?;
        }
        Command::Suggest {
            query,
            prior_queries,
            clicks,
            method,
        } => {
            let spec = MethodSpec::by_name(&method).ok_or_else(|| {
                Error::Config(format!(
                    "unknown method {method:?}; use Base, Click or Ours"
                ))
            })?;
            let ensemble = match spec.mask {
                Some(_) => Some(RankingEnsemble::load(open(
                    &paths.ranker(spec.name),
                    "train-ranker",
                )?)?),
                None => None,
            };
            let docs = load_corpus(&paths.corpus)?;
            let space = build_topic_space(&topic_model(&paths)?, &docs)?;
            let h = hierarchy(&paths)?;
            let builder = ImpressionBuilder::new(&cfg, &space, &h)?;
            let prior_q: Vec<String> = prior_queries.into_iter().rev().collect();
            let prior_c: Vec<String> = clicks.into_iter().rev().collect();
            let ctx = builder.context(&query, &prior_q, &prior_c);
            let list = builder.base_list(&query);
            let feats = builder.features(&ctx, &list);
            let scores: Vec<f64> = match &ensemble {
                Some(e) => {
                    e.check_fingerprint(&spec.feature_names())?;
                    feats
                        .iter()
                        .map(|f| {
                            e.predict(
                                &spec
                                    .mask
                                    .as_ref()
                                    .expect("ranked method")
                                    .iter()
                                    .map(|&i| f.0[i])
                                    .collect::<Vec<_>>(),
                            )
                        })
                        .collect::<Result<_>>()?
                }
                None => vec![0.0; list.len()],
            };
            writeln!(out, "rank\tscore\tsuggestion\t{}", FEATURE_NAMES.join("\t"))?;
            for (rank, i) in rank_order(&scores).into_iter().enumerate() {
                let f: Vec<String> = feats[i].0.iter().map(|v| format!("{v:.4}")).collect();
                writeln!(
                    out,
                    "{}\t{:.4}\t{}\t{}",
                    rank + 1,
                    scores[i],
                    list[i],
                    f.join("\t")
                )?;
            }
        }
    }
    Ok(())
}
