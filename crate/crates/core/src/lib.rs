//! Numerical laboratory for K-dimensional trio coherent states (KTCS).
//!
//! The crate builds the states `|ξ, p, q⟩_{Kj}` on the correlated three-mode
//! Fock chain, evaluates their photon statistics and Husimi function, checks
//! the resolution of unity through the Bessel-function weight, and simulates
//! the trapped-ion scheme that prepares the `K = 2` states as dark states.
//!
//! Every routine is generic over [`Real`]; the aliases below fix `f64`, which
//! is what the command-line front end and the tolerances in the test-suite use.

// `!(x > 0)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod completeness;
pub mod error;
pub mod fock;
pub mod iontrap;
pub mod output;
pub mod phase_space;
pub mod quadrature;
pub mod scalar;
pub mod special;
pub mod statistics;
pub mod transforms;

pub use error::{KtcsError, Result};
pub use fock::{
    build_ktcs, build_tcs, log_rho, normalization_series, overlap, overlap_closed_form, KtcsParams, ModeId,
    SeriesCache, StateDump, TrioState,
};
pub use scalar::Real;

pub use num_complex::{Complex, Complex64};

pub type KtcsParamsF64 = fock::KtcsParams<f64>;
pub type TrioStateF64 = fock::TrioState<f64>;
pub type SeriesCacheF64 = fock::SeriesCache<f64>;
pub type TcsSuperpositionF64 = transforms::TcsSuperposition<f64>;
pub type MandelTripleF64 = statistics::MandelTriple<f64>;
pub type CsiMeasuresF64 = statistics::CsiMeasures<f64>;
pub type QGridF64 = phase_space::QGrid<f64>;
pub type ChainDensityF64 = iontrap::ChainDensity<f64>;
pub type SimConfigF64 = iontrap::SimConfig<f64>;
pub type LaserConfigF64 = iontrap::LaserConfig<f64>;
