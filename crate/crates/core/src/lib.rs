//! Normalized Ricci flow on genus-one conformal tori and the
//! zeta-regularized determinant of the Laplacian along the flow.
//!
//! * [`geometry`]: conformal metrics e^u |dz|^2 on C/(Z + tau Z), curvature,
//!   volume, Gauss-Bonnet diagnostics.
//! * [`flow`]: RK4 integration of d/dt u = R0 - R with volume projection.
//! * [`spectral`]: log det' by the conformal anomaly and by zeta
//!   regularization of a computed spectrum; the instantaneous rate.
//! * [`analysis`]: monotonicity certificates, maximality sweeps,
//!   convergence-rate fits.
//! * [`io`] and [`cli`]: run configs, snapshots, CSV tables, subcommands.

// `!(x > 0.0)` is used on purpose so NaN inputs fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
mod eigen;
pub mod error;
pub mod fields;
pub mod flow;
mod fourier;
pub mod geometry;
pub mod io;
pub mod par;
pub mod special;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{ConformalMetric, CurvatureField, TorusModulus};
