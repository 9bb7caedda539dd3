//! Trapped-ion preparation of the `K = 2` states as dark states of
//! `ζ[(âb̂ĉ)² − ξ²]σ₊ + h.c.` with spontaneous decay.
//!
//! The Hamiltonian and the jump operator conserve both charges and the
//! chain parity, so everything runs on the reduced basis `|s, j, m⟩` with
//! `s ∈ {g, e}`, `j ∈ {0, 1}` and chain index `n = 2m + j`.

mod chain;
mod density;
mod laser;
mod linalg;
mod mcwf;

pub use chain::{basis_index, build_hamiltonian, chain_coupling, dark_state_residual, ChainDensity, ChainHamiltonian, SparseOperator};
pub use density::{evolve_density, lindblad_rhs_norm, DensityRun, DensitySnapshot};
pub use laser::{
    laser_coupling_residual, laser_identity_sides, verify_laser_identity, xi_from_lasers, LaserConfig, ThreeModeSpace,
};
pub use linalg::DenseLinalg;
pub use mcwf::{mcwf_run, trajectory_seed, McwfRun, McwfSnapshot, MAX_JUMP_PROBABILITY, TARGET_JUMP_PROBABILITY};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{KtcsError, Result};
use crate::fock::{build_ktcs, truncation_tail, KtcsParams};
use crate::scalar::{lit, Real};

/// Target-state tail probability the default truncation leaves out.
pub const M_MAX_TAIL: f64 = 1e-12;
/// Levels added above the tail criterion.
pub const GUARD_LEVELS: usize = 5;
/// Bound on `dt·(Γ + spectral radius of H)` for the density integrator.
pub const MAX_STIFFNESS_PRODUCT: f64 = 0.05;
/// Allowed trace drift of the density integrator over a run.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-8;
/// Lamb–Dicke parameters above this are flagged.
pub const ETA_WARNING: f64 = 0.3;

/// Parameters of one simulation. Times are in units of `1/Γ` when
/// `gamma = 1`, which is what [`RunConfig`] produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig<T> {
    /// Target eigenvalue `ξ` of `(âb̂ĉ)²` is `ξ²`.
    pub xi: Complex<T>,
    pub zeta: Complex<T>,
    pub gamma: T,
    pub p: usize,
    pub q: usize,
    /// Weight of the odd sector in the initial state.
    pub w: T,
    pub l: usize,
    pub m_max: usize,
    pub dt: T,
    pub t_max: T,
    pub n_traj: usize,
    pub seed: u64,
    /// Number of equal recording intervals on `[0, t_max]`.
    pub records: usize,
}

impl<T: Real> SimConfig<T> {
    pub fn xi_squared(&self) -> Complex<T> {
        self.xi * self.xi
    }

    /// Target `|ξ, p, q⟩_{2j}` for `j = 0, 1`.
    pub fn target_params(&self, j: usize) -> Result<KtcsParams<T>> {
        KtcsParams::new(self.xi, self.p, self.q, 2, j)
    }

    /// Smallest `m_max` leaving target tails below [`M_MAX_TAIL`] in both
    /// sectors, lifted to cover the initial level, plus [`GUARD_LEVELS`].
    pub fn auto_m_max(xi: Complex<T>, p: usize, q: usize, l: usize) -> Result<usize> {
        let mut m_tail = 0;
        for j in 0..2 {
            let params = KtcsParams::new(xi, p, q, 2, j)?;
            let mut m = 0;
            while truncation_tail(&params, 2 * m + j)? >= lit(M_MAX_TAIL) {
                m += 1;
            }
            m_tail = m_tail.max(m);
        }
        Ok(m_tail.max(l) + GUARD_LEVELS)
    }

    /// Upper bound on the spectral radius of `H`: the largest row sum of
    /// the coupling block `B = ζ[(âb̂ĉ)² − ξ²]`.
    pub fn spectral_radius_estimate(&self) -> T {
        let z = self.zeta.norm();
        let x2 = self.xi_squared().norm();
        (0..2)
            .flat_map(|j| (1..=self.m_max).map(move |m| chain_coupling::<T>(self.p, self.q, j, m)))
            .fold(T::zero(), T::max)
            * z
            + z * x2
    }

    /// Largest density-integrator step allowed by [`MAX_STIFFNESS_PRODUCT`].
    pub fn stable_dt(&self) -> T {
        lit::<T>(MAX_STIFFNESS_PRODUCT) / (self.gamma + self.spectral_radius_estimate())
    }

    pub fn record_interval(&self) -> T {
        self.t_max / T::from_usize_lossy(self.records)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w >= T::zero() && self.w <= T::one()) {
            return Err(KtcsError::InvalidParams(format!("w must lie in [0, 1], got {}", self.w)));
        }
        if !(self.gamma > T::zero()) || !(self.t_max > T::zero()) || !(self.dt > T::zero()) {
            return Err(KtcsError::InvalidParams("gamma, t_max and dt must be positive".into()));
        }
        if self.n_traj == 0 || self.records == 0 {
            return Err(KtcsError::InvalidParams("n_traj and records must be at least 1".into()));
        }
        if !(self.xi.norm() > T::zero()) || !self.xi.norm().is_finite() || !self.zeta.norm().is_finite() {
            return Err(KtcsError::InvalidParams("xi must be finite and nonzero".into()));
        }
        if 2 * self.l + 1 >= 2 * self.m_max {
            return Err(KtcsError::InvalidParams(format!(
                "initial level l={} does not fit below m_max={}",
                self.l, self.m_max
            )));
        }
        for j in 0..2 {
            let tail = truncation_tail(&self.target_params(j)?, 2 * self.m_max + j)?;
            if tail >= lit(M_MAX_TAIL) {
                return Err(KtcsError::TruncationTooSmall {
                    n_max: 2 * self.m_max + j,
                    tail: tail.as_f64(),
                    limit: M_MAX_TAIL,
                });
            }
        }
        let product = self.dt * (self.gamma + self.spectral_radius_estimate());
        if product >= lit(MAX_STIFFNESS_PRODUCT) {
            return Err(KtcsError::StepTooLarge(format!(
                "dt·(Γ + ‖H‖) = {product} exceeds {MAX_STIFFNESS_PRODUCT}; largest allowed dt is {}",
                self.stable_dt()
            )));
        }
        Ok(())
    }

    /// `|e⟩(√(1−w)|Ψ_{l0}⟩ + √w|Ψ_{l1}⟩)` on the chain basis.
    pub fn initial_state(&self) -> Vec<Complex<T>> {
        let mut psi = vec![Complex::new(T::zero(), T::zero()); 4 * (self.m_max + 1)];
        psi[basis_index(self.m_max, 1, 0, self.l)] = Complex::new((T::one() - self.w).sqrt(), T::zero());
        psi[basis_index(self.m_max, 1, 1, self.l)] = Complex::new(self.w.sqrt(), T::zero());
        psi
    }

    /// Normalized target amplitudes `c_m` of `|ξ, p, q⟩_{2j}` on `m ≤ m_max`.
    pub fn target_vector(&self, j: usize) -> Result<Vec<Complex<T>>> {
        let params = self.target_params(j)?;
        let n_top = 2 * self.m_max + j;
        let state = build_ktcs(&params, Some(n_top.max(crate::fock::auto_n_max(&params)?)))?;
        let mut v: Vec<Complex<T>> = (0..=self.m_max).map(|m| state.amplitudes[2 * m + j]).collect();
        let norm = v.iter().map(|c| c.norm_sqr()).sum::<T>().sqrt();
        for c in v.iter_mut() {
            *c = *c / norm;
        }
        Ok(v)
    }
}

/// JSON run description; `ζ` is given relative to `Γ = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub xi: [f64; 2],
    pub zeta_over_gamma: f64,
    #[serde(default)]
    pub zeta_phase: f64,
    pub p: usize,
    pub q: usize,
    pub w: f64,
    pub l: usize,
    #[serde(default)]
    pub m_max: Option<usize>,
    /// Density-integrator step; the stiffness bound when absent.
    #[serde(default)]
    pub dt_gamma: Option<f64>,
    pub t_max_gamma: f64,
    pub n_traj: usize,
    pub seed: u64,
    #[serde(default = "default_records")]
    pub records: usize,
    /// Times at which phonon-distribution snapshots are written.
    #[serde(default)]
    pub snapshots: Vec<f64>,
}

fn default_records() -> usize {
    100
}

impl RunConfig {
    pub fn to_sim(&self) -> Result<SimConfig<f64>> {
        if !(0.0..=1.0).contains(&self.w) {
            return Err(KtcsError::InvalidParams(format!("w must lie in [0, 1], got {}", self.w)));
        }
        let xi = Complex::new(self.xi[0], self.xi[1]);
        let m_max = match self.m_max {
            Some(m) => m,
            None => SimConfig::auto_m_max(xi, self.p, self.q, self.l)?,
        };
        let mut sim = SimConfig {
            xi,
            zeta: Complex::from_polar(self.zeta_over_gamma, self.zeta_phase),
            gamma: 1.0,
            p: self.p,
            q: self.q,
            w: self.w,
            l: self.l,
            m_max,
            dt: 1.0,
            t_max: self.t_max_gamma,
            n_traj: self.n_traj,
            seed: self.seed,
            records: self.records,
        };
        sim.dt = match self.dt_gamma {
            Some(dt) => dt,
            None => 0.99 * sim.stable_dt(),
        };
        sim.validate()?;
        Ok(sim)
    }
}
