//! Quadrature rules used by the completeness checks and the coherent-state
//! reconstruction.

use crate::error::{KtcsError, Result};
use crate::scalar::{lit, Real};

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral<T> {
    pub value: T,
    pub evaluations: usize,
}

struct Simpson<'a, T, F: Fn(T) -> T> {
    f: &'a F,
    evaluations: usize,
    max_depth: usize,
    failed: bool,
    _t: std::marker::PhantomData<T>,
}

impl<T: Real, F: Fn(T) -> T> Simpson<'_, T, F> {
    #[allow(clippy::too_many_arguments)]
    fn recurse(&mut self, a: T, b: T, fa: T, fm: T, fb: T, whole: T, tol: T, depth: usize) -> T {
        let half = lit::<T>(0.5);
        let m = (a + b) * half;
        let lm = (a + m) * half;
        let rm = (m + b) * half;
        let flm = (self.f)(lm);
        let frm = (self.f)(rm);
        self.evaluations += 2;
        let six = lit::<T>(6.0);
        let left = (m - a) / six * (fa + lit::<T>(4.0) * flm + fm);
        let right = (b - m) / six * (fm + lit::<T>(4.0) * frm + fb);
        let delta = left + right - whole;
        if depth >= self.max_depth {
            if delta.abs() > lit::<T>(15.0) * tol {
                self.failed = true;
            }
            return left + right + delta / lit(15.0);
        }
        if delta.abs() <= lit::<T>(15.0) * tol {
            return left + right + delta / lit(15.0);
        }
        self.recurse(a, m, fa, flm, fm, left, tol * half, depth + 1)
            + self.recurse(m, b, fm, frm, fb, right, tol * half, depth + 1)
    }
}

/// Adaptive Simpson rule on `[a, b]` with absolute tolerance `abs_tol`.
pub fn adaptive_simpson<T, F>(f: &F, a: T, b: T, abs_tol: T, max_depth: usize) -> Result<Integral<T>>
where
    T: Real,
    F: Fn(T) -> T,
{
    let fa = f(a);
    let fb = f(b);
    let m = (a + b) * lit(0.5);
    let fm = f(m);
    let whole = (b - a) / lit::<T>(6.0) * (fa + lit::<T>(4.0) * fm + fb);
    let mut s = Simpson { f, evaluations: 3, max_depth, failed: false, _t: std::marker::PhantomData };
    let value = s.recurse(a, b, fa, fm, fb, whole, abs_tol, 0);
    if s.failed || !value.is_finite() {
        return Err(KtcsError::QuadratureNotConverged(format!(
            "adaptive Simpson on [{a}, {b}] (tol {abs_tol})"
        )));
    }
    Ok(Integral { value, evaluations: s.evaluations })
}

/// Integrates a nonnegative integrand over `[start, ∞)` on panels whose width
/// doubles, `[start + w(2^k - 1), start + w(2^{k+1} - 1)]`. Each panel runs
/// adaptive Simpson to `rel_tol` of the running total; the tail is dropped
/// once the integrand at a panel edge is below `1e-16` of the running peak and
/// the last panel added less than `rel_tol` of the total.
pub fn integrate_doubling<T, F>(f: &F, start: T, first_width: T, rel_tol: T) -> Result<Integral<T>>
where
    T: Real,
    F: Fn(T) -> T,
{
    let cutoff = lit::<T>(1e-16);
    let mut lo = start;
    let mut width = first_width;
    let mut total = T::zero();
    let mut evaluations = 0;
    let mut peak = f(start).abs();
    for _ in 0..200 {
        let hi = lo + width;
        // coarse estimate fixes the absolute tolerance of the panel
        let coarse = (width / lit::<T>(6.0))
            * (f(lo).abs() + lit::<T>(4.0) * f(lo + width * lit(0.5)).abs() + f(hi).abs());
        let scale = (total.abs() + coarse).max(T::min_positive_value());
        let panel = adaptive_simpson(f, lo, hi, rel_tol * scale, 40)?;
        evaluations += panel.evaluations + 3;
        total += panel.value;
        let f_hi = f(hi).abs();
        peak = peak.max(f_hi).max(coarse / width);
        if f_hi <= cutoff * peak && panel.value.abs() <= rel_tol * total.abs() && total != T::zero() {
            return Ok(Integral { value: total, evaluations });
        }
        lo = hi;
        width = width + width;
    }
    Err(KtcsError::QuadratureNotConverged("doubling panels exhausted".into()))
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    let nf = T::from_usize_lossy(n);
    for i in 0..(n + 1) / 2 {
        let mut x = (T::PI() * (T::from_usize_lossy(i) + lit(0.75)) / (nf + lit(0.5))).cos();
        let mut dp = T::one();
        for _ in 0..100 {
            let (mut p0, mut p1) = (T::one(), x);
            for k in 2..=n {
                let kf = T::from_usize_lossy(k);
                let p2 = ((lit::<T>(2.0) * kf - T::one()) * x * p1 - (kf - T::one()) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { T::one() } else { p1 };
            let pn1 = if n == 1 { T::one() } else { p0 };
            dp = nf * (x * pn - pn1) / (x * x - T::one());
            let dx = pn / dp;
            x -= dx;
            if dx.abs() <= T::epsilon() {
                break;
            }
        }
        let w = lit::<T>(2.0) / ((T::one() - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on<T: Real>(n: usize, a: T, b: T) -> Vec<(T, T)> {
    let (x, w) = gauss_legendre::<T>(n);
    let half = (b - a) * lit(0.5);
    let mid = (a + b) * lit(0.5);
    x.into_iter().zip(w).map(|(x, w)| (mid + half * x, half * w)).collect()
}

/// `n` equally spaced angles on `[0, 2π)`; the trapezoid rule on a periodic
/// integrand assigns each the weight `1/n` of the mean.
pub fn periodic_nodes<T: Real>(n: usize) -> Vec<T> {
    let step = T::TAU() / T::from_usize_lossy(n);
    (0..n).map(|i| step * T::from_usize_lossy(i)).collect()
}
