//! Finite-dimensional laboratory for von Neumann algebras and von Neumann
//! modules.
//!
//! A Hilbert module `E` over `B ⊂ B(G)` is realized concretely inside
//! `B(G, H)` with `H = E ⊙ G`. From there the crate computes the commutant
//! lifting `ρ'` of `B'` to `H`, the `B'`-intertwiner space
//! `C_{B'}(B(G,H))`, the adjointable operators `B^a(E)`, the linking algebra
//! `[[B, E*], [E, B^a(E)]]` and Riesz representatives of `B`-functionals,
//! and checks the identities relating them.

pub mod algebra;
pub mod error;
pub mod hilbmod;
pub mod instances;
pub mod intertwine;
pub mod linops;
pub mod pipeline;
pub mod rng;
pub mod selfdual;

pub use error::{Error, Result};
pub use linops::{CMat, Tolerance, C64};
