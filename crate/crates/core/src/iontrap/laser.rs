use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{KtcsError, Result};
use crate::scalar::{lit, polar, Real};

use super::ETA_WARNING;

/// Laser parameters: base Rabi frequency `Ω` (lasers 1–13 run at
/// `Ω, 2Ω, 4Ω` by group), carrier Rabi frequency `Ω₁₄`, common Lamb–Dicke
/// parameter and phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaserConfig<T> {
    pub omega: T,
    pub omega14: T,
    pub eta: T,
    pub phi: T,
}

impl<T: Real> LaserConfig<T> {
    /// Outside the Lamb–Dicke regime the `m = 0` truncation is doubtful.
    pub fn lamb_dicke_warning(&self) -> bool {
        self.eta > lit(ETA_WARNING)
    }

    /// `(Ω_l, φ_l)` for lasers 1–14.
    pub fn lasers(&self) -> Vec<(T, T)> {
        let pi = T::PI();
        let mut v = vec![(self.omega, self.phi + pi); 4];
        v.extend(std::iter::repeat((self.omega * lit(2.0), self.phi)).take(6));
        v.extend(std::iter::repeat((self.omega * lit(4.0), self.phi + pi)).take(3));
        v.push((self.omega14, pi));
        v
    }
}

/// `ζ = (Ωη⁶/2)e^{−iφ}` and `ξ² = (2Ω₁₄/(Ωη⁶))e^{iφ}`.
pub fn xi_from_lasers<T: Real>(cfg: &LaserConfig<T>) -> Result<(Complex<T>, Complex<T>)> {
    if !(cfg.omega > T::zero()) || !(cfg.omega14 > T::zero()) || !(cfg.eta > T::zero()) {
        return Err(KtcsError::InvalidParams("Rabi frequencies and eta must be positive".into()));
    }
    let e6 = cfg.eta.powi(6);
    let zeta = polar(cfg.omega * e6 * lit(0.5), -cfg.phi);
    let xi2 = polar(cfg.omega14 * lit(2.0) / (cfg.omega * e6), cfg.phi);
    Ok((zeta, xi2))
}

/// Three-mode Fock space truncated at `n_max` quanta per mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThreeModeSpace {
    pub n_max: usize,
}

impl ThreeModeSpace {
    pub fn dim(&self) -> usize {
        (self.n_max + 1).pow(3)
    }

    pub fn index(&self, na: usize, nb: usize, nc: usize) -> usize {
        let s = self.n_max + 1;
        (na * s + nb) * s + nc
    }

    pub fn basis<T: Real>(&self, na: usize, nb: usize, nc: usize) -> Vec<Complex<T>> {
        let mut v = vec![Complex::new(T::zero(), T::zero()); self.dim()];
        v[self.index(na, nb, nc)] = Complex::new(T::one(), T::zero());
        v
    }

    /// `Σ_k coeff_k â_k x` for modes `k = a, b, c`.
    fn lower<T: Real>(&self, coeff: [T; 3], x: &[Complex<T>]) -> Vec<Complex<T>> {
        let s = self.n_max + 1;
        let mut y = vec![Complex::new(T::zero(), T::zero()); self.dim()];
        for na in 0..s {
            for nb in 0..s {
                for nc in 0..s {
                    let v = x[self.index(na, nb, nc)];
                    if v == Complex::new(T::zero(), T::zero()) {
                        continue;
                    }
                    let occ = [na, nb, nc];
                    for k in 0..3 {
                        if coeff[k] == T::zero() || occ[k] == 0 {
                            continue;
                        }
                        let mut to = occ;
                        to[k] -= 1;
                        let amp = coeff[k] * T::from_usize_lossy(occ[k]).sqrt();
                        y[self.index(to[0], to[1], to[2])] += v * amp;
                    }
                }
            }
        }
        y
    }

    fn power<T: Real>(&self, coeff: [T; 3], x: &[Complex<T>], k: usize) -> Vec<Complex<T>> {
        (0..k).fold(x.to_vec(), |v, _| self.lower(coeff, &v))
    }

    /// `(âb̂ĉ)² x`
    pub fn abc_squared<T: Real>(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut v = x.to_vec();
        for _ in 0..2 {
            for k in 0..3 {
                let mut c = [T::zero(); 3];
                c[k] = T::one();
                v = self.lower(c, &v);
            }
        }
        v
    }
}

/// Mode combinations `Â₁ … Â₁₃` along the laser directions.
pub fn laser_modes<T: Real>() -> Vec<[T; 3]> {
    let dirs: [[f64; 3]; 13] = [
        [1.0, 1.0, 1.0],
        [1.0, -1.0, 1.0],
        [1.0, 1.0, -1.0],
        [1.0, -1.0, -1.0],
        [1.0, 1.0, 0.0],
        [1.0, -1.0, 0.0],
        [1.0, 0.0, 1.0],
        [1.0, 0.0, -1.0],
        [0.0, 1.0, 1.0],
        [0.0, 1.0, -1.0],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
    ];
    dirs.iter().map(|d| [lit(d[0]), lit(d[1]), lit(d[2])]).collect()
}

/// `(Σ_{1..4} Â⁶ − 2Σ_{5..10} Â⁶ + 4Σ_{11..13} Â⁶) x` and `360 (âb̂ĉ)² x`.
pub fn laser_identity_sides<T: Real>(space: &ThreeModeSpace, x: &[Complex<T>]) -> (Vec<Complex<T>>, Vec<Complex<T>>) {
    let mut lhs = vec![Complex::new(T::zero(), T::zero()); space.dim()];
    for (l, mode) in laser_modes::<T>().into_iter().enumerate() {
        let weight: T = match l {
            0..=3 => T::one(),
            4..=9 => lit(-2.0),
            _ => lit(4.0),
        };
        for (acc, v) in lhs.iter_mut().zip(space.power(mode, x, 6)) {
            *acc += v * weight;
        }
    }
    let rhs = space.abc_squared(x).into_iter().map(|v| v * lit::<T>(360.0)).collect();
    (lhs, rhs)
}

fn norm<T: Real>(v: &[Complex<T>]) -> T {
    v.iter().map(|c| c.norm_sqr()).sum::<T>().sqrt()
}

fn random_unit<T: Real>(rng: &mut ChaCha8Rng, dim: usize) -> Vec<Complex<T>> {
    let v: Vec<Complex<T>> =
        (0..dim).map(|_| Complex::new(lit(rng.gen_range(-1.0..1.0)), lit(rng.gen_range(-1.0..1.0)))).collect();
    let s = norm(&v);
    v.into_iter().map(|c| c / s).collect()
}

/// `360 ‖(âb̂ĉ)²‖` on the truncated space.
fn operator_scale<T: Real>(n_max: usize) -> T {
    let n = T::from_usize_lossy(n_max);
    lit::<T>(360.0) * (n * (n - T::one())).max(T::zero()).powi(3).sqrt()
}

/// Largest `‖lhs − rhs‖` over random unit vectors, relative to the operator
/// norm of `360 (âb̂ĉ)²`. Both sides are polynomials in commuting ladder
/// operators, so the truncated identity is exact up to rounding.
pub fn verify_laser_identity<T: Real>(n_max: usize, trials: usize, seed: u64) -> Result<T> {
    if n_max > 8 || n_max < 2 {
        return Err(KtcsError::InvalidParams(format!("n_max must lie in 2..=8, got {n_max}")));
    }
    let space = ThreeModeSpace { n_max };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = T::zero();
    for _ in 0..trials {
        let x = random_unit::<T>(&mut rng, space.dim());
        let (l, r) = laser_identity_sides(&space, &x);
        let diff: Vec<Complex<T>> = l.iter().zip(&r).map(|(a, b)| *a - *b).collect();
        worst = worst.max(norm(&diff));
    }
    Ok(worst / operator_scale(n_max))
}

/// Builds the lowest-order sideband coupling
/// `−(η⁶/6!) Σ Ω_l e^{−iφ_l} Â_l⁶ + Ω₁₄ e^{−iφ₁₄}` from the fourteen lasers and
/// compares it with `ζ[(âb̂ĉ)² − ξ²]` on random vectors.
pub fn laser_coupling_residual<T: Real>(cfg: &LaserConfig<T>, n_max: usize, trials: usize, seed: u64) -> Result<T> {
    let (zeta, xi2) = xi_from_lasers(cfg)?;
    let space = ThreeModeSpace { n_max };
    let modes = laser_modes::<T>();
    let lasers = cfg.lasers();
    let e6 = cfg.eta.powi(6) / lit(720.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = T::zero();
    for _ in 0..trials {
        let x = random_unit::<T>(&mut rng, space.dim());
        let (o14, p14) = lasers[13];
        let mut built: Vec<Complex<T>> = x.iter().map(|v| *v * polar(o14, -p14)).collect();
        for (mode, &(om, ph)) in modes.iter().zip(&lasers) {
            let c = polar(-e6 * om, -ph);
            for (acc, v) in built.iter_mut().zip(space.power(*mode, &x, 6)) {
                *acc += v * c;
            }
        }
        let expected: Vec<Complex<T>> =
            space.abc_squared(&x).iter().zip(&x).map(|(a, v)| zeta * (*a - xi2 * *v)).collect();
        let diff: Vec<Complex<T>> = built.iter().zip(&expected).map(|(a, b)| *a - *b).collect();
        worst = worst.max(norm(&diff));
    }
    let scale = zeta.norm() * (operator_scale::<T>(n_max) / lit(360.0) + xi2.norm());
    Ok(worst / scale)
}
