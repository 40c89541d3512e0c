//! Deterministic seed derivation.
//!
//! Every experiment has a single root seed; scenario `i` uses
//! [`scenario_seed`]`(root, i)`, so batches can be generated in any order.

/// Tag mixed into the root seed for out-of-sample validation scenarios.
pub const VALIDATION_TAG: u64 = 0x5641_4c49_4441_5445;

/// Tag for the second (accuracy-only) step of two-step design.
pub const SECOND_STEP_TAG: u64 = 0x5354_4550_5f54_574f;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn scenario_seed(root: u64, index: u64) -> u64 {
    splitmix64(splitmix64(root) ^ splitmix64(index.wrapping_mul(0x2545_f491_4f6c_dd1d)))
}

/// Root seed of the validation domain, disjoint from the training domain.
pub fn validation_root(root: u64) -> u64 {
    root ^ VALIDATION_TAG
}
