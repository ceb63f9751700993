//! Speech emotion recognition: MFCC and prosody features, per-emotion
//! continuous-density HMMs, maximum-likelihood classification and
//! confusion-matrix evaluation, plus a synthetic corpus generator.

// `!(x > 0.0)` is how parameter checks reject NaN along with bad values, and
// the numeric kernels index several parallel arrays by the same counter.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod audio;
pub mod classifier;
pub mod config;
pub mod corpus;
pub mod features;
pub mod hmm;
pub mod rng;
