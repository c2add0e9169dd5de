//! Compiles every Rust code block in the book as a doc-test.
//!
//! Nothing here is meant to be used as a library. Each module below pulls a
//! chapter of `book/src/` in as its documentation, so `cargo test --doc`
//! fails when a sample in the prose stops compiling or asserting. Keep the
//! module list in sync with `book/src/SUMMARY.md`.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/problem-geometry.md")]
pub mod problem_geometry {}

#[doc = include_str!("../../../book/src/penalty-sequence.md")]
pub mod penalty_sequence {}

#[doc = include_str!("../../../book/src/choosing-m.md")]
pub mod choosing_m {}

#[doc = include_str!("../../../book/src/running-the-solver.md")]
pub mod running_the_solver {}

#[doc = include_str!("../../../book/src/arithmetic-circuits.md")]
pub mod arithmetic_circuits {}

#[doc = include_str!("../../../book/src/min-of-two.md")]
pub mod min_of_two {}

#[doc = include_str!("../../../book/src/command-line.md")]
pub mod command_line {}
