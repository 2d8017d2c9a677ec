//! The book chapters from `book/src/` compiled as doc-tests.
//!
//! mdBook cannot run snippet tests against an external crate, so every
//! chapter is included here as a doc comment and `cargo test --doc` keeps
//! the book's code blocks honest. One module per chapter so a failing
//! snippet points at its chapter.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/models.md")]
pub mod models {}

#[doc = include_str!("../../../book/src/closed-forms.md")]
pub mod closed_forms {}

#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}

#[doc = include_str!("../../../book/src/coupled-payoffs.md")]
pub mod coupled_payoffs {}

#[doc = include_str!("../../../book/src/fixed-point.md")]
pub mod fixed_point {}

#[doc = include_str!("../../../book/src/moment-bounds.md")]
pub mod moment_bounds {}
