//! Session-personalised query suggestion.
//!
//! The crate re-ranks a non-personalised suggestion list using two temporal
//! topic profiles built from the current search session: one from clicked
//! documents and one from submitted queries. Around that core sit the
//! pieces needed to train and evaluate it by replaying query logs:
//!
//! - [`log_model`]: log parsing, sessions, click-validated refinement labels
//! - [`corpus_index`]: tokenizer and conjunctive containment index
//! - [`topic_model`]: LDA by collapsed Gibbs sampling, fold-in, perplexity
//! - [`profiles`]: decayed click/query profiles and Jensen-Shannon similarity
//! - [`base_suggester`]: co-occurrence subsumption hierarchy and base lists
//! - [`features`]: the ten re-ranking features
//! - [`ranker`]: LambdaMART regression-tree ensembles
//! - [`eval_harness`]: ranking metrics, weekly replay, breakdowns, t-tests
//! - [`pipeline`]: configuration, synthetic benchmark, method registry, CLI
//!
//! Runnable walkthroughs for each area live under `examples/`.

pub mod base_suggester;
pub mod corpus_index;
pub mod error;
pub mod eval_harness;
pub mod features;
pub mod log_model;
pub mod pipeline;
pub mod profiles;
pub mod ranker;
pub mod topic_model;

mod textio;

pub use error::{Error, Result};
