//! Numerical toolkit for strong time operators of quantum walks.
//!
//! The crate builds the momentum-space machinery of one-dimensional quantum
//! walks — continuous-time walks generated by the nearest-neighbour
//! Hamiltonian and discrete-time coined and three-step walks — and the
//! symmetric operators `T` that advance by one unit under conjugation with
//! the evolution (`U* T U = T + 1` in the discrete case,
//! `e^{itH} T e^{-itH} = T + t` in the continuous case).
//!
//! Modules:
//! - [`spectral`]: momentum grids, lattice Fourier transforms, spectral
//!   differentiation and quadrature;
//! - [`dispersion`]: coin parametrization, dispersion branches, winding
//!   numbers, derivative zeros and eigenvector frames;
//! - [`models`]: concrete evolutions (continuous-time walk on the line and
//!   the plane, coined walk, three-step walk, shift toy model);
//! - [`timeop`]: construction, application and classification of the time
//!   operators, energy representation and deficiency vectors;
//! - [`decay`]: transition-amplitude series and decay-bound verification.

pub mod decay;
pub mod dispersion;
pub mod error;
pub mod mat2;
pub mod models;
pub mod spectral;
pub mod timeop;

pub use error::{QwError, Result};
