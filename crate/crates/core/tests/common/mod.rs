//! Property machinery shared by the core test targets and the acceptance suite.
#![allow(dead_code)]

pub mod budget;
pub mod memory_laws;
pub mod protocol;
pub mod worlds;

use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

/// A seeded runner for `cases` cases with no failure persistence, so suites
/// behave the same inside and outside the crate that defines them.
pub fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(Config { cases, failure_persistence: None, ..Config::default() }, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}
