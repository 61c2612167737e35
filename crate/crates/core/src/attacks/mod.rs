// SPDX-License-Identifier: Apache-2.0

//! Adversary-side analyses: masking-pattern statistics, composition
//! correlation against a corpus of known designs, search-space shrinkage and
//! a desk-scale brute-force key search.
//!
//! Patterns of every width are compared in 6-input space: a narrower mask is
//! replicated over the unused inputs (see [`LutMask::lift_to_6`]).

mod bruteforce;
mod composition;
mod structural;

use thiserror::Error;

pub use bruteforce::{brute_force_key, BruteForceOutcome, DEFAULT_MAX_KEY_BITS};
pub use composition::{composition_attack, correlate, Classification, CorrelationReport, DEFAULT_THRESHOLD};
pub use structural::{
    corpus_union, fit_trendline, pattern_histogram, search_space_of, search_space_report, HistEntry, PatternHistogram, Scope,
    SearchSpaceReport, SettlePoint, Trendline, UniquePatternSet,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttackError {
    #[error("scope `{0}` needs the conversion trace of the design")]
    ScopeUnavailable(String),
    #[error("fit of degree {degree} needs at least {} points, got {points}", degree + 1)]
    Underdetermined { degree: usize, points: usize },
    #[error("composition attack needs at least two corpus designs, got {0}")]
    CorpusTooSmall(usize),
    #[error("key has {required} bits, brute force allows at most {allowed}")]
    KeyTooLarge { required: usize, allowed: usize },
    #[error("no key reproduces the oracle ({0} keys tried)")]
    Exhausted(u64),
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Sim(#[from] crate::sim::SimError),
}
