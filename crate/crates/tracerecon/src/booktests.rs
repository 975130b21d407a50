//! Runs the book's code snippets as doctests, so the guide can never drift
//! from the library. (mdbook itself cannot test snippets that depend on
//! the crate; `#[doc = include_str!]` makes rustdoc do it instead.)

#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}

#[doc = include_str!("../../../book/src/channel.md")]
mod channel {}

#[doc = include_str!("../../../book/src/periodicity.md")]
mod periodicity {}

#[doc = include_str!("../../../book/src/deserts.md")]
mod deserts {}

#[doc = include_str!("../../../book/src/bma.md")]
mod bma {}

#[doc = include_str!("../../../book/src/alignment.md")]
mod alignment {}

#[doc = include_str!("../../../book/src/pipeline.md")]
mod pipeline {}

#[doc = include_str!("../../../book/src/harness.md")]
mod harness {}
