//! Sobolev-type metrics on spaces of closed curves.
//!
//! The crate works with closed curves sampled at `N` points in `R^n`
//! ([`Curve`]) and vector fields along them ([`DeformationField`]). On top of
//! the discrete geometry it provides inner products and norms
//! ([`metrics`]), energies and their gradients ([`energies`]), explicit
//! gradient flows ([`flows`]), path lengths, geodesic and Fréchet distances
//! ([`paths`]), smoothing homotopies ([`smoothing`]) and an executable suite
//! of the Poincaré-type inequalities relating these metrics
//! ([`inequalities`]).
//!
//! ```
//! use curveflow::{shapes, metrics::{self, MetricSpec}, DeformationField};
//!
//! let c = shapes::circle(64, 1.0).unwrap();
//! let h = DeformationField::constant(64, &[1.0, 0.0]);
//! let v = metrics::norm(&MetricSpec::hj(1, 1.0), &c, &h).unwrap();
//! assert!((v - 1.0).abs() < 1e-12);
//! ```

pub mod curve;
pub mod energies;
pub mod error;
pub mod flows;
pub mod inequalities;
pub mod io;
pub mod metrics;
pub mod paths;
pub mod random;
pub mod shapes;
pub mod smoothing;
pub mod spectral;


pub use curve::{ArcTable, Curve, DeformationField};
pub use error::{Error, Result};
