//! Self-consistent field theory of atomic electron pairs.
//!
//! Electrons are grouped into pairs and each pair is treated as a ring
//! polymer in imaginary time: its statistics follow from a propagator
//! q(beta) = exp(-beta H_mu) built in a Gaussian basis, where the pair
//! Hamiltonian contains the bare nuclear attraction, the mean field of the
//! full density, a self-interaction correction, and a contact repulsion
//! between distinct pairs standing in for Pauli exclusion. Iterating the
//! fields to self-consistency gives ground-state densities, a free energy
//! that decomposes into physically labelled pieces, and binding energies
//! for the first ten elements.
//!
//! Layout:
//! - [`basis`]: even-tempered Gaussian shells times real solid harmonics
//! - [`angular`]: Wigner 3-j and real Gaunt coefficients
//! - [`tensors`]: overlap, Laplacian and triple-product tensors
//! - [`solver`]: generalized eigenproblem, propagator, pair densities
//! - [`fields`]: Poisson solves for the four interaction fields
//! - [`scf`]: the self-consistency loop
//! - [`observables`]: energies, entropies, densities on grids
//! - [`runner`] / `main`: batch driver and CLI

pub mod angular;
pub mod basis;
pub mod config;
pub mod elements;
pub mod error;
pub mod fields;
pub mod grid;
pub mod math;
pub mod observables;
pub mod oracle;
pub mod reference;
pub mod runner;
pub mod scf;
pub mod solver;
pub mod tensors;

pub use basis::{build_basis, parse_channels, BasisSet, ChannelSpec};
pub use error::{Error, Result};
pub use grid::{GridSpec, QuadGrid};
pub use observables::{
    check_constraints, default_grid, density_on_grid, eigen_density_on_grid, energy_report,
    kinetic_energy, DensityGrid, EnergyReport, EnergyRow,
};
pub use scf::{run_scf, run_scf_warm, ScfConfig, ScfContext, ScfState};
