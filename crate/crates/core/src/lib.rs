//! Aspect-based sentiment analysis for restaurant review corpora.
//!
//! The crate covers every stage of the pipeline: ingesting Yelp-format
//! review dumps, text normalization, TF-IDF and subword skip-gram features,
//! per-aspect sentiment classifiers (one-stage and two-stage), evaluation
//! statistics, restaurant-level aggregation with OLS regression, an LDA
//! topic baseline, LLM aspect-discovery bookkeeping, and a synthetic corpus
//! generator with known ground truth.

pub mod aspect;
pub mod aspects;
pub mod classify;
pub mod error;
pub mod evaluate;
pub mod ingest;
pub mod lda;
pub mod regress;
pub mod rng;
pub mod testkit;
pub mod textprep;
pub mod vectorize;

pub use aspect::{Aspect, Sentiment};
pub use error::{Error, Result};
