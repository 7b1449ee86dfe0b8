//! Large-n behaviour of non-intersecting squared Bessel paths with one
//! positive starting point `a` and one positive ending point `b`.
//!
//! The crate is organised bottom-up:
//!
//! * [`specfun`]: modified Bessel function `I_nu` and squared Bessel
//!   transition densities.
//! * [`spectral`]: the quartic spectral curve, phase classification, branch
//!   points and sheet-labelled roots.
//! * [`measures`]: limiting measures `mu_1, mu_2, mu_3`, logarithmic
//!   potentials, variational checks and balayage.
//! * [`equilibrium`]: a discretised vector equilibrium problem solved by
//!   projected gradient, used as an independent cross-check.
//! * [`kernel`]: the finite-n correlation kernel of the biorthogonal ensemble.
//! * [`simulate`]: Metropolis-Hastings sampling of positions and path fans.

// comparisons are negated on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod equilibrium;
pub mod error;
pub mod export;
pub mod kernel;
pub(crate) mod linalg;
pub mod measures;
pub mod quad;
pub mod simulate;
pub mod specfun;
pub mod spectral;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use spectral::{BranchPoints, CurveCoeffs, ModelParams, Phase, XiBranches};
