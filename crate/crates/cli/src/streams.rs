//! Random stream ids. Every stream is keyed by the experiment seed; the id
//! separates the experiment arms.

pub const TRAIN_DATA: u64 = 1;
pub const TEST_DATA: u64 = 2;
pub const PRETRAIN: u64 = 3;
pub const BLO: u64 = 4;
pub const ORACLE: u64 = 5;
/// Plus the random-mask seed.
pub const RANDOM_MASK: u64 = 1_000;
/// Plus the evaluation seed.
pub const EVAL: u64 = 2_000;
/// Plus the mixture seed.
pub const MIXTURE: u64 = 3_000;
