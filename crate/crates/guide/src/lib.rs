//! The user guide's chapters, compiled so their code samples run as doc-tests.
//!
//! The book itself lives in `book/` and is built with mdbook.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/logs.md")]
pub mod logs {}

#[doc = include_str!("../../../book/src/pass-rates.md")]
pub mod pass_rates {}

#[doc = include_str!("../../../book/src/variance.md")]
pub mod variance {}

#[doc = include_str!("../../../book/src/meltdown.md")]
pub mod meltdown {}

#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}

#[doc = include_str!("../../../book/src/reports.md")]
pub mod reports {}
