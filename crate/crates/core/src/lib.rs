//! Generalized scattering matrices (GSM) of waveguide-fed PEC antennas.
//!
//! The crate computes the full four-block GSM (port reflection `Γ`, receive
//! `R`, transmit `T` and spherical scattering `S`) of an antenna from a
//! method-of-moments surface-integral-equation solution, compresses the
//! result spectrally, and composes multi-element array S-parameters from
//! per-element GSMs through spherical-wave translation.
//!
//! Module map:
//! - [`sphwave`]: real-valued vector spherical wavefunctions, plane-wave
//!   expansion, far fields and translation operators.
//! - [`mesh`]: triangle-mesh ingestion (OFF / gmsh v2 subset) and RWG basis
//!   construction with waveport surface extraction.
//! - [`waveguide`]: analytic modal bases for rectangular and coaxial ports.
//! - [`mom`]: operator assembly (`L`, `K±`, port Gram blocks), the magnetic-
//!   and electric-type impedance systems and the projection operators.
//! - [`gsm`]: GSM assembly, post-processing, spectral compression and the
//!   characteristic-mode cross-check; container / Touchstone / CSV output.
//! - [`array`]: translation-coupled array composition, direct and iterative.

pub mod array;
pub mod error;
pub mod geom;
pub mod gsm;
pub mod mesh;
pub mod mom;
pub mod sphwave;
pub mod vec3;
pub mod waveguide;

pub(crate) mod quadrature;
pub(crate) mod special;

pub use error::{Error, Result};
pub use vec3::Vec3;

/// Free-space wave impedance in ohms.
pub const ETA0: f64 = 376.730_313_412;
/// Speed of light in vacuum, m/s.
pub const C0: f64 = 299_792_458.0;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

/// `j` (the engineering imaginary unit; time convention `e^{+jωt}`).
pub const J: C64 = C64::new(0.0, 1.0);
