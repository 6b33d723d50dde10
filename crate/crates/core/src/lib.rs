//! Explosive (best-of-m product rule) bond percolation on open square
//! lattices, and the infinite-time transport efficiency of coherent
//! (continuous-time quantum walk) and incoherent (random walk) excitations
//! injected on the left edge and absorbed on the right edge.
//!
//! The crate is organised bottom-up:
//!
//! - [`lattice`]: geometry, canonical bond order, source/sink columns.
//! - [`percolation`]: union-find cluster growth under the product rule.
//! - [`spectral`]: Laplacian, sink Hamiltonian and transfer operators plus
//!   dense eigensolvers with residual checks.
//! - [`transport`]: survival probabilities (dark-state, complex-spectral,
//!   time evolution and connectivity routes).
//! - [`eigenstats`]: participation ratios and edge-spanning indicators.
//! - [`ensemble`]: deterministic parallel Monte Carlo over realizations.
//! - [`analysis`]: thresholds, crossovers and power-law fits on curves.
//! - [`validate`]: cross-method consistency suite.
//!
//! ```
//! use perctrans::lattice::Lattice;
//! use perctrans::percolation::grow_trajectory;
//! use perctrans::ensemble::derive_stream;
//!
//! let lattice = Lattice::new(7).unwrap();
//! let mut rng = derive_stream(42, 2, 0);
//! let traj = grow_trajectory(&lattice, 2, &mut rng).unwrap();
//! assert_eq!(traj.order().len(), 84);
//! assert!(traj.first_wrapping().is_some());
//! ```

pub mod analysis;
pub mod eigenstats;
pub mod ensemble;
mod error;
pub mod lattice;
pub mod manifest;
pub mod percolation;
pub mod spectral;
pub mod transport;
pub mod validate;

pub use error::{Error, Result};
