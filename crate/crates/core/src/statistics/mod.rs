//! Number distribution, factorial moments, Mandel parameters and
//! Cauchy–Schwarz measures of KTCS's.
//!
//! Moments are evaluated from their closed forms: nested `z`-derivatives of
//! `z^offset S(z)` applied term by term to the normalization series. The
//! [`oracle`] submodule recomputes the same numbers by brute-force summation
//! over the probability table.

pub mod oracle;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{KtcsError, Result};
use crate::fock::{log_rho, normalization_series_for, ChainClass, KtcsParams, ModeId};
use crate::scalar::{lit, Real};

/// Smallest mean occupation accepted in a ratio.
pub const MIN_MEAN: f64 = 1e-300;

/// Probe point standing in for `z → 0`.
pub const SMALL_Z: f64 = 1e-8;

/// `P_n = z^n N² I((n-j)/K) / ρ(n)` for chain index `n`.
pub fn number_distribution<T: Real>(params: &KtcsParams<T>, n: usize) -> Result<T> {
    if !params.supports(n) {
        return Ok(T::zero());
    }
    let z = params.z();
    let cache = normalization_series_for(&params.chain(), z)?;
    cache.norm()?;
    if z == T::zero() {
        return Ok(if n == 0 { T::one() } else { T::zero() });
    }
    Ok((T::from_usize_lossy(n) * z.ln() - log_rho::<T>(n, params.p, params.q) - cache.ln_s()).exp())
}

/// `P_0..=P_{n_max}`.
pub fn distribution_table<T: Real>(params: &KtcsParams<T>, n_max: usize) -> Result<Vec<T>> {
    let z = params.z();
    let cache = normalization_series_for(&params.chain(), z)?;
    cache.norm()?;
    let ln_z = z.ln();
    Ok((0..=n_max)
        .map(|n| {
            if !params.supports(n) {
                T::zero()
            } else if z == T::zero() {
                if n == 0 { T::one() } else { T::zero() }
            } else {
                (T::from_usize_lossy(n) * ln_z - log_rho::<T>(n, params.p, params.q) - cache.ln_s()).exp()
            }
        })
        .collect())
}

/// A step of a closed-form moment expression acting on `z^e`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    /// multiply by `z^k`
    Mul(i64),
    /// `d^l/dz^l`
    Diff(usize),
}

/// `N² · [steps applied to z^offset S(z)]`, each step applied to the series
/// term by term.
fn closed_form<T: Real>(class: &ChainClass, z: T, offset: usize, steps: &[Step]) -> Result<T> {
    let cache = normalization_series_for(class, z)?;
    cache.norm()?;
    // net power of z left on each term beyond z^n
    let shift: i64 = offset as i64
        + steps
            .iter()
            .map(|s| match *s {
                Step::Mul(k) => k,
                Step::Diff(l) => -(l as i64),
            })
            .sum::<i64>();
    let coef = |n: usize| -> T {
        let mut e = (n + offset) as i64;
        let mut c = T::one();
        for s in steps {
            match *s {
                Step::Mul(k) => e += k,
                Step::Diff(l) => {
                    for _ in 0..l {
                        c *= T::from_i64(e).unwrap();
                        e -= 1;
                    }
                }
            }
        }
        c
    };
    if z == T::zero() {
        // only n = 0 survives, and only with a z^0 remainder
        if class.j != 0 || shift > 0 {
            return Ok(T::zero());
        }
        return Ok(coef(0));
    }
    let sums = class.weighted_sums(z, &[&|_| T::one(), &coef]);
    Ok(sums.sums[1] / sums.sums[0] * z.powi(shift as i32))
}

/// `⟨n̂_x^{(l)}⟩ = z^{l-o} N² d^l/dz^l (z^o/N²)` with `o` the mode offset.
pub fn factorial_moment_at<T: Real>(class: &ChainClass, z: T, mode: ModeId, l: usize) -> Result<T> {
    let o = mode.offset(class.p, class.q);
    closed_form(class, z, o, &[Step::Diff(l), Step::Mul(l as i64 - o as i64)])
}

pub fn factorial_moment<T: Real>(params: &KtcsParams<T>, mode: ModeId, l: usize) -> Result<T> {
    if l == 0 {
        return Err(KtcsError::InvalidParams("factorial moment order must be at least 1".into()));
    }
    factorial_moment_at(&params.chain(), params.z(), mode, l)
}

/// Unordered mode pair of a joint moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModePair {
    AB,
    AC,
    BC,
}

impl ModePair {
    pub const ALL: [ModePair; 3] = [ModePair::AB, ModePair::AC, ModePair::BC];

    pub fn modes(self) -> (ModeId, ModeId) {
        match self {
            ModePair::AB => (ModeId::A, ModeId::B),
            ModePair::AC => (ModeId::A, ModeId::C),
            ModePair::BC => (ModeId::B, ModeId::C),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ModePair::AB => "ab",
            ModePair::AC => "ac",
            ModePair::BC => "bc",
        }
    }

    pub fn from_modes(x: ModeId, y: ModeId) -> Result<Self> {
        match (x, y) {
            (ModeId::A, ModeId::B) | (ModeId::B, ModeId::A) => Ok(ModePair::AB),
            (ModeId::A, ModeId::C) | (ModeId::C, ModeId::A) => Ok(ModePair::AC),
            (ModeId::B, ModeId::C) | (ModeId::C, ModeId::B) => Ok(ModePair::BC),
            _ => Err(KtcsError::InvalidParams(format!("pair ({}, {}) needs two distinct modes", x.label(), y.label()))),
        }
    }
}

/// `⟨n̂_x^{(l)} n̂_y^{(m)}⟩` for the pair `(x, y)` in the order of
/// [`ModePair::modes`].
pub fn joint_factorial_moment_at<T: Real>(class: &ChainClass, z: T, pair: ModePair, l: usize, m: usize) -> Result<T> {
    let (p, q) = (class.p as i64, class.q as i64);
    let (li, mi) = (l as i64, m as i64);
    match pair {
        // z^{m-p} N² d^m [z^{l+p-q} d^l (z^q/N²)]
        ModePair::AB => closed_form(class, z, class.q, &[
            Step::Diff(l),
            Step::Mul(li + p - q),
            Step::Diff(m),
            Step::Mul(mi - p),
        ]),
        // z^m N² d^m [z^{l-q} d^l (z^q/N²)]
        ModePair::AC => closed_form(class, z, class.q, &[Step::Diff(l), Step::Mul(li - q), Step::Diff(m), Step::Mul(mi)]),
        // z^{l-p} N² d^l [z^{m+p} d^m (1/N²)]
        ModePair::BC => closed_form(class, z, 0, &[Step::Diff(m), Step::Mul(mi + p), Step::Diff(l), Step::Mul(li - p)]),
    }
}

pub fn joint_factorial_moment<T: Real>(params: &KtcsParams<T>, pair: ModePair, l: usize, m: usize) -> Result<T> {
    if l == 0 || m == 0 {
        return Err(KtcsError::InvalidParams("joint moment orders must be at least 1".into()));
    }
    joint_factorial_moment_at(&params.chain(), params.z(), pair, l, m)
}

/// Mandel parameters of the three modes at one `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MandelTriple<T> {
    pub z: T,
    pub ma: T,
    pub mb: T,
    pub mc: T,
}

impl<T: Real> MandelTriple<T> {
    pub fn get(&self, mode: ModeId) -> T {
        match mode {
            ModeId::A => self.ma,
            ModeId::B => self.mb,
            ModeId::C => self.mc,
        }
    }

    /// Largest relative difference to `other`, scaled by `max(1, |value|)`.
    pub fn max_rel_diff(&self, other: &Self) -> T {
        ModeId::ALL
            .iter()
            .map(|&m| {
                let (a, b) = (self.get(m), other.get(m));
                (a - b).abs() / T::one().max(a.abs())
            })
            .fold(T::zero(), T::max)
    }
}

/// `(N'/N, N''/N)` from `S = N⁻²`.
fn norm_derivative_ratios<T: Real>(class: &ChainClass, z: T) -> Result<(T, T)> {
    let cache = normalization_series_for(class, z)?;
    cache.norm()?;
    let (u, v) = (cache.ratio1(), cache.ratio2());
    Ok((-u * lit(0.5), u * u * lit(0.75) - v * lit(0.5)))
}

fn check_mean<T: Real>(mean: T) -> Result<()> {
    if !(mean.abs() >= lit(MIN_MEAN)) {
        return Err(KtcsError::DegenerateMean { mean: mean.as_f64() });
    }
    Ok(())
}

fn check_z<T: Real>(z: T) -> Result<()> {
    if !(z > T::zero()) || !z.is_finite() {
        return Err(KtcsError::DomainError(format!("z must be positive and finite, got {z}")));
    }
    Ok(())
}

/// Mandel parameters from the explicit formulas in `N, N', N''` (with `N`
/// scaled to 1; every formula is homogeneous of degree zero).
pub fn mandel_at<T: Real>(class: &ChainClass, z: T) -> Result<MandelTriple<T>> {
    check_z(z)?;
    let (n1, n2) = norm_derivative_ratios(class, z)?;
    let curv = n2 - n1 * n1; // N N'' - N'^2
    let (p, q) = (T::from_usize_lossy(class.p), T::from_usize_lossy(class.q));
    let two: T = lit(2.0);
    let side = |c: T| -> Result<T> {
        let den = two * z * n1 - c;
        check_mean(-den)?;
        Ok((two * z * z * curv + c) / den)
    };
    check_mean(-z * n1)?;
    Ok(MandelTriple { z, ma: side(q)?, mb: side(p)?, mc: z * curv / n1 })
}

pub fn mandel<T: Real>(params: &KtcsParams<T>, z: T) -> Result<MandelTriple<T>> {
    mandel_at(&params.chain(), z)
}

/// Mandel parameters from the first two factorial moments.
pub fn mandel_from_moments<T: Real>(class: &ChainClass, z: T) -> Result<MandelTriple<T>> {
    check_z(z)?;
    let m = |mode: ModeId| -> Result<T> {
        let mean = factorial_moment_at(class, z, mode, 1)?;
        check_mean(mean)?;
        let f2 = factorial_moment_at(class, z, mode, 2)?;
        Ok((f2 - mean * mean) / mean)
    };
    Ok(MandelTriple { z, ma: m(ModeId::A)?, mb: m(ModeId::B)?, mc: m(ModeId::C)? })
}

/// `z → 0` value: the explicit formulas at `h = 1e-8` and `2h` combined by
/// one Richardson step.
pub fn mandel_limit<T: Real>(class: &ChainClass) -> Result<MandelTriple<T>> {
    let h: T = lit(SMALL_Z);
    let a = mandel_at(class, h)?;
    let b = mandel_at(class, h * lit(2.0))?;
    let r = |x: T, y: T| x * lit(2.0) - y;
    Ok(MandelTriple { z: T::zero(), ma: r(a.ma, b.ma), mb: r(a.mb, b.mb), mc: r(a.mc, b.mc) })
}

/// `M_x` over a grid, evaluated in parallel; output order follows `zs`.
pub fn mandel_grid<T: Real>(class: &ChainClass, zs: &[T]) -> Result<Vec<MandelTriple<T>>> {
    zs.par_iter().map(|&z| mandel_at(class, z)).collect()
}

/// Cauchy–Schwarz measures `J_xy` and `G_xy = J_xy/⟨n̂_x n̂_y⟩²`, in the
/// order ab, ac, bc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsiMeasures<T> {
    pub z: T,
    pub j: [T; 3],
    pub g: [T; 3],
    /// `J` from the explicit `N, N', N''` formulas.
    pub j_explicit: [T; 3],
    /// `|J - J_explicit| / max(|J|, ⟨n̂_x n̂_y⟩²·ε)` per pair.
    pub discrepancy: [T; 3],
}

impl<T: Real> CsiMeasures<T> {
    pub fn g_of(&self, pair: ModePair) -> T {
        self.g[pair as usize]
    }

    pub fn j_of(&self, pair: ModePair) -> T {
        self.j[pair as usize]
    }

    pub fn max_discrepancy(&self) -> T {
        self.discrepancy.iter().copied().fold(T::zero(), T::max)
    }
}

/// The three `J_xy` written out in `N, N', N''` (N scaled to 1).
pub fn csi_explicit<T: Real>(class: &ChainClass, z: T) -> Result<[T; 3]> {
    let (n1, n2) = norm_derivative_ratios(class, z)?;
    let (p, q) = (T::from_usize_lossy(class.p), T::from_usize_lossy(class.q));
    let c = |x: f64| -> T { lit(x) };
    let one = T::one();
    let n1c = n1 * n1 * n1;
    let j_ab = p * q * (one - p - q) + c(24.0) * z * z * z * n1c
        - c(2.0) * z * z * n1 * ((c(2.0) + c(7.0) * (p + q) - (p - q) * (p - q)) * n1 + c(4.0) * z * n2)
        + c(2.0) * z * (c(6.0) * p * q * n1 + z * (p + q - (p - q) * (p - q)) * n2);
    let side = |x: T| {
        c(2.0) * z * z * (c(12.0) * z * n1c + x * (one - x) * n2 - n1 * ((c(2.0) + c(7.0) * x - x * x) * n1 + c(4.0) * z * n2))
    };
    Ok([j_ab, side(q), side(p)])
}

pub fn csi_measures_at<T: Real>(class: &ChainClass, z: T) -> Result<CsiMeasures<T>> {
    check_z(z)?;
    let explicit = csi_explicit(class, z)?;
    let mut out = CsiMeasures { z, j: [T::zero(); 3], g: [T::zero(); 3], j_explicit: explicit, discrepancy: [T::zero(); 3] };
    for pair in ModePair::ALL {
        let (x, y) = pair.modes();
        let fx = factorial_moment_at(class, z, x, 2)?;
        let fy = factorial_moment_at(class, z, y, 2)?;
        let cross = joint_factorial_moment_at(class, z, pair, 1, 1)?;
        check_mean(cross)?;
        let jv = fx * fy - cross * cross;
        let i = pair as usize;
        out.j[i] = jv;
        out.g[i] = jv / (cross * cross);
        let scale = jv.abs().max(cross * cross * T::epsilon());
        out.discrepancy[i] = (jv - explicit[i]).abs() / scale;
    }
    Ok(out)
}

pub fn csi_measures<T: Real>(params: &KtcsParams<T>, z: T) -> Result<CsiMeasures<T>> {
    csi_measures_at(&params.chain(), z)
}

pub fn csi_grid<T: Real>(class: &ChainClass, zs: &[T]) -> Result<Vec<CsiMeasures<T>>> {
    zs.par_iter().map(|&z| csi_measures_at(class, z)).collect()
}

/// Bisection tolerance on `z` for [`find_crossover`].
pub const CROSSOVER_TOL: f64 = 1e-5;

/// First zero of `M_x(z)`: scans `z = 10⁻³·1.2^k` up to `z_hi` for a sign
/// change, then bisects to `|Δz| < 1e-5`.
pub fn find_crossover<T: Real>(class: &ChainClass, mode: ModeId, z_hi: T) -> Result<T> {
    let m = |z: T| -> Result<T> { Ok(mandel_at(class, z)?.get(mode)) };
    let no_change = || KtcsError::NoSignChange { z_hi: z_hi.as_f64() };
    let mut lo: T = lit(1e-3);
    if !(z_hi > lo) {
        return Err(no_change());
    }
    let mut m_lo = m(lo)?;
    let mut hi;
    loop {
        hi = (lo * lit(1.2)).min(z_hi);
        let m_hi = m(hi)?;
        if m_lo == T::zero() {
            return Ok(lo);
        }
        if (m_lo > T::zero()) != (m_hi > T::zero()) || m_hi == T::zero() {
            break;
        }
        if hi >= z_hi {
            return Err(no_change());
        }
        lo = hi;
        m_lo = m_hi;
    }
    let positive_lo = m_lo > T::zero();
    while hi - lo >= lit(CROSSOVER_TOL) {
        let mid = (lo + hi) * lit(0.5);
        let v = m(mid)?;
        if (v > T::zero()) == positive_lo && v != T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) * lit(0.5))
}

/// Geometric or linear grid helper: `steps` points on `[z_min, z_max]`.
pub fn z_grid<T: Real>(z_min: T, z_max: T, steps: usize) -> Result<Vec<T>> {
    if steps < 2 || !(z_min > T::zero()) || !(z_max > z_min) {
        return Err(KtcsError::InvalidParams(format!(
            "grid needs 0 < z_min < z_max and at least two steps (got {z_min}, {z_max}, {steps})"
        )));
    }
    let h = (z_max - z_min) / T::from_usize_lossy(steps - 1);
    Ok((0..steps).map(|i| z_min + h * T::from_usize_lossy(i)).collect())
}

/// Twelve significant digits.
pub fn fmt_num<T: Real>(x: T) -> String {
    format!("{:.11e}", x.as_f64())
}

/// CSV with columns `z, Ma, Mb, Mc`.
pub fn write_mandel_csv<T: Real, W: Write>(out: W, rows: &[MandelTriple<T>]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["z", "Ma", "Mb", "Mc"])?;
    for r in rows {
        w.write_record([fmt_num(r.z), fmt_num(r.ma), fmt_num(r.mb), fmt_num(r.mc)])?;
    }
    w.flush()
}

/// CSV with columns `z, G_ab, G_ac, G_bc`.
pub fn write_csi_csv<T: Real, W: Write>(out: W, rows: &[CsiMeasures<T>]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["z", "G_ab", "G_ac", "G_bc"])?;
    for r in rows {
        w.write_record([fmt_num(r.z), fmt_num(r.g[0]), fmt_num(r.g[1]), fmt_num(r.g[2])])?;
    }
    w.flush()
}
