#![allow(dead_code)]

pub mod props;

use proptest::test_runner::{Config, RngSeed};

/// Fixed-seed proptest settings so every run draws the same cases.
pub fn cases(n: u32) -> Config {
    Config {
        cases: n,
        rng_seed: RngSeed::Fixed(0x6d61_7468),
        failure_persistence: None,
        ..Config::default()
    }
}
