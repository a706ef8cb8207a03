//! Numerical toolkit for planar wave trains of reaction-diffusion systems
//! `u_t = D(u_xx + u_yy) + f(u)`.
//!
//! The crate covers the whole measurement chain: wave-train profiles
//! ([`wavetrain`]), Floquet–Bloch spectra and dispersion coefficients
//! ([`bloch`]), the explicit translational Green's kernel and its integral
//! identities ([`kernel`]), linear and nonlinear simulations in the co-moving
//! frame ([`greens`], [`sim2d`]), phase extraction ([`phase`]), the
//! modulated nonlinearities ([`nonlin`]) and decay-rate analysis plus run
//! orchestration ([`analysis`]).

pub mod analysis;
pub mod bloch;
pub mod error;
pub mod field;
pub mod fourier;
pub mod greens;
pub mod kernel;
pub mod model;
pub mod nonlin;
pub mod phase;
pub mod quadrature;
pub mod sim2d;
pub mod stepper;
pub mod wavetrain;

pub use error::{Error, Result};
