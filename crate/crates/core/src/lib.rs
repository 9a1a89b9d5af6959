//! Patient-to-clinical-trial retrieval.
//!
//! The pipeline parses trial records ([`corpus`]), extracts disease and drug
//! mentions with negation, temporality and experiencer modifiers and turns them
//! into enrichment tokens ([`annotate`]), indexes trials for BM25+, TF-IDF or
//! In_expB2 ranking ([`index`]), turns patient descriptions into enriched
//! queries ([`topics`]), prunes rankings by demographics ([`filter`]) and scores
//! the result against graded judgments ([`eval`]). [`pipeline`] wires the
//! stages together for the command-line driver.

pub mod annotate;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod filter;
pub mod index;
pub mod pipeline;
pub mod topics;

pub use error::{Error, Result};
