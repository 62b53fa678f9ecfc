//! The guide in `book/src` is compiled into this crate so that
//! `cargo test --doc` runs every code block in it. One module per chapter,
//! so a failing doctest names its chapter.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/problem-model.md")]
pub mod problem_model {}
#[doc = include_str!("../../../book/src/evolution.md")]
pub mod evolution {}
#[doc = include_str!("../../../book/src/volterra.md")]
pub mod volterra {}
#[doc = include_str!("../../../book/src/inversion.md")]
pub mod inversion {}
#[doc = include_str!("../../../book/src/forward.md")]
pub mod forward {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
#[doc = include_str!("../../../book/src/verification.md")]
pub mod verification {}
