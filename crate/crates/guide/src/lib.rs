//! The book's chapters, compiled as module docs so `cargo test --doc`
//! runs every Rust snippet in them.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/hybrid-loop.md")]
pub mod hybrid_loop {}
#[doc = include_str!("../../../book/src/certificates.md")]
pub mod certificates {}
#[doc = include_str!("../../../book/src/policies.md")]
pub mod policies {}
#[doc = include_str!("../../../book/src/budget.md")]
pub mod budget {}
#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
#[doc = include_str!("../../../book/src/scenario-files.md")]
pub mod scenario_files {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
