//! Moonflower analysis toolkit: set-family structure search, covering linear
//! programs with certified dual pairs, randomized universe puncturing, weight
//! sparsifiers for Boolean codes, and independent small-scale oracles used to
//! cross-check every fast path.
//!
//! The library is deterministic end to end: all randomized procedures take an
//! explicit 64-bit seed and use a counter-based generator, so identical
//! inputs and seeds reproduce identical outputs on any platform.

pub mod bits;
pub mod cover;
pub mod lp;
pub mod oracle;
pub mod puncture;
pub mod setfam;
pub mod sparsify;
