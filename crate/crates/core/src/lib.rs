//! Zero-temperature Schelling segregation on the 2D and 3D torus.
//!
//! Two node types with (possibly different) intolerances live on an `n`-periodic
//! lattice. A node is happy when the share of its own type in its
//! `(2w+1)^dim` Chebyshev neighbourhood reaches its intolerance; at each stage
//! the nodes that were hopeful at the end of the previous stage switch type in
//! lexicographic order, provided they are still hopeful.
//!
//! The crate is split into:
//!
//! * [`lattice`]: torus geometry, configurations, neighbourhood counts, PPM frames.
//! * [`dynamics`]: the staged update engine, a brute-force reference engine and
//!   the Lyapunov diagnostic.
//! * [`structures`]: stable structures, firewalls, the local event family and
//!   the actual/idealised density functions.
//! * [`math`]: the threshold equations, sufficient-inequality predicates, exact
//!   binomial tails and ratio bases.
//! * [`experiments`]: behaviour classification, trials, phase sweeps, Monte Carlo
//!   event estimation and planted-structure runs.

pub mod dynamics;
mod error;
pub mod experiments;
pub mod lattice;
pub mod math;
pub mod structures;

pub use error::{Error, Result};
pub use lattice::{Configuration, Dim, Fraction, ModelParams, NeighborCounts, NodeType, Torus};

/// Identifier embedded in every output artifact.
pub const VERSION: &str = concat!("schelling ", env!("CARGO_PKG_VERSION"));

/// Name of the generator behind every seeded stream in the crate.
pub const RNG_NAME: &str = "ChaCha8Rng::seed_from_u64";
