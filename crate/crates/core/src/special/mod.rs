//! Special functions needed by the state algebra and the weight function.

mod bessel;
mod gamma;

pub use bessel::{bessel_k, bessel_k_scaled};
pub use gamma::{ln_factorial, ln_gamma};
