//! Worst-case and easiest-case forget set identification for machine
//! unlearning, together with a small catalog of unlearning procedures and
//! the evaluation metrics used to compare them.
//!
//! The pieces build on each other:
//!
//! - [`numcore`]: dense matrices, seeded random streams, scalar root finding.
//! - [`models`]: linear softmax and one-hidden-layer MLP classifiers with
//!   analytic cross-entropy gradients.
//! - [`data`]: datasets, synthetic generators, CSV I/O and forget masks.
//! - [`projection`]: Euclidean projection onto the capped simplex.
//! - [`unlearn`]: Retrain, fine-tuning, gradient ascent, random labeling and
//!   l1-sparse unlearning.
//! - [`blo`]: the bi-level selector (projected gradient on selection weights,
//!   sign-descent unrolling for the unlearned model).
//! - [`metrics`]: UA, MIA, RA, TA, average gap and class entropy.
//! - [`oracle`]: brute-force references for tiny instances.

pub mod blo;
pub mod data;
pub mod error;
pub mod metrics;
pub mod models;
pub mod numcore;
pub mod oracle;
pub mod projection;
pub mod unlearn;

pub use error::{Error, Result};
