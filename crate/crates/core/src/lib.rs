//! Core algorithms for measuring how well candidate relevance judgments
//! reproduce the significance-test conclusions of ground-truth judgments.
//!
//! The crate is `no_std` (with `alloc`) and performs no IO. It contains:
//!
//! * [`trec`]: TREC run and qrels parsing/serialization over in-memory text.
//! * [`measures`]: nDCG@k and the systems × topics [`ScoreMatrix`](measures::ScoreMatrix).
//! * [`sigtest`]: the paired randomised Tukey HSD test over all system pairs.
//! * [`discrim`]: Type I / Type II confusion counts and the metric suite
//!   (precision/recall of significant and non-significant pairs, BAC, MCC,
//!   sensitivity, Cohen's κ, Kendall's τ-b).
//! * [`synth`]: candidate qrel generators (percentage sampling, popularity-biased labelling).
//! * [`seed`]: counter-based seed derivation shared by every randomised routine.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod discrim;
pub mod measures;
pub mod seed;
pub mod sigtest;
pub mod synth;
pub mod trec;

pub use discrim::{full_report, ConfusionCounts, DiscrimError, DiscrimReport};
pub use measures::{ndcg_at_k, score_matrix, Gain, MeasureError, MeasureSpec, ScoreMatrix};
pub use sigtest::{tukey_hsd_pvalues, PairKey, SigTestConfig, SigTestError, SignificanceSet};
pub use trec::{parse_qrels, parse_run, serialize_qrels, Qrels, RunSet, TrecError};
