//! One-dimensional interacting particle systems with `n >= 2` conservation
//! laws, and their Eulerian hydrodynamic limits.
//!
//! The crate is organised around one pipeline:
//!
//! - [`model`] defines nearest-neighbour spin systems with a table of
//!   conserved quantities and mechanically validates the four structural
//!   conditions (pairwise conservation, irreducibility on shells, pair
//!   detailed balance, the cyclic total-rate identity);
//! - [`thermo`] builds the tilted single-site measures, the log partition
//!   function, densities, covariance, and the conjugate entropy with its
//!   Hessian;
//! - [`flux`] evaluates microscopic and macroscopic fluxes by exact
//!   summation and certifies the structural identities (flux-potential
//!   symmetry, `S''D` symmetry, real characteristic speeds) that make the
//!   limiting system hyperbolic with a convex Lax entropy;
//! - [`pde`] integrates the limiting system `d_t u + d_x Phi(u) = 0` on the
//!   torus with a first-order Rusanov scheme and carries the entropy and
//!   dual-field diagnostics;
//! - [`kmc`] simulates the microscopic dynamics with a direct-method event
//!   loop under Eulerian scaling (macro time t = micro time / N);
//! - [`harness`] orchestrates certification pipelines and the
//!   lattice-versus-PDE convergence experiments with machine-readable
//!   output.

pub mod domain;
pub mod flux;
pub mod harness;
pub mod kmc;
pub mod model;
pub mod pde;
pub mod thermo;
