//! Inputs shared by the benchmarks.

use waring_core::waring::synthesize_target;
use waring_core::{Format, SeedSplitter, Section};
use num_complex::Complex64;

pub fn format(s: &str) -> Format {
    s.parse().expect("valid format")
}

/// Target with a known decomposition into `k + 1` terms, fixed seed.
pub fn target(s: &str, k: usize) -> Section<Complex64> {
    synthesize_target(&format(s), k, SeedSplitter::new(7)).expect("target").0
}
