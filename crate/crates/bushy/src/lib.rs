//! Exact combinatorics of bushy trees: largeness decisions with certificates,
//! forest systems, monotone functional tables and finite-depth simulations of
//! the forcing conditions built from them.
//!
//! Everything here is finite. Infinite trees become truncations with a depth
//! bound, and every check is relative to that truncation.

#![no_std]

extern crate alloc;

pub mod error;
pub mod strings;
pub mod grow;
pub mod forest;
pub mod largeness;
pub mod universe;
pub mod system;
pub mod functional;
pub mod forcing;
pub mod oracle;
pub mod fuzz;

pub use error::{Error, Result};
pub use strings::{Str, Sym, Tuple, TupleSet};
