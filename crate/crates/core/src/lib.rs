//! Numerical and exact-arithmetic tools for the Reeb dynamics of convex
//! contact spheres in R^2n.
//!
//! The crate has two sides that validate each other:
//!
//! * a numerical pipeline built on the dual action functional: Fourier
//!   discretization of loop space ([`clarke`]), Hamiltonian flow integration
//!   ([`reeb_flow`]) and Morse index counting along symplectic paths
//!   ([`symplectic_index`]);
//! * exact rational arithmetic for ellipsoids ([`besse_spectra`]): action
//!   spectra, strata, closed-form orbit indices and spectral-invariant
//!   sequences.
//!
//! Convex bodies are specified through their dual Hamiltonian, see
//! [`convex_body`].

pub mod besse_spectra;
pub mod clarke;
pub mod convex_body;
mod error;
pub mod fft;
pub mod linalg;
pub mod ode;
pub mod reeb_flow;
pub mod symplectic_index;

pub use convex_body::ConvexBody;
pub use error::{Error, Result};

/// Points of R^2n, coordinates ordered (x_1, y_1, ..., x_n, y_n).
pub type Point = nalgebra::DVector<f64>;
