//! Modified Bessel functions of the second kind, integer order.
//!
//! `K_0`, `K_1` come from the power series for `x ≤ 2` and from Steed's
//! continued fraction (Temme's CF2) above; higher orders use the upward
//! recurrence `K_{n+1} = K_{n-1} + (2n/x) K_n`, which is stable for `K`.

use crate::error::{KtcsError, Result};
use crate::scalar::{lit, Real};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SERIES_SWITCH: f64 = 2.0;
const MAX_ITER: usize = 10_000;

/// `(K_0(x), K_1(x))` for `0 < x ≤ 2`.
fn k01_series<T: Real>(x: T) -> (T, T) {
    let eps = T::epsilon() * lit(0.25);
    let y = x * x * lit(0.25);
    let ln_half_x = (x * lit(0.5)).ln();
    let gamma: T = lit(EULER_GAMMA);

    // I0, I1 and the harmonic/digamma-weighted sums in one pass
    let mut i0 = T::zero();
    let mut i1 = T::zero();
    let mut s0 = T::zero();
    let mut s1 = T::zero();
    let mut t0 = T::one(); // y^k / (k!)^2
    let mut t1 = T::one(); // y^k / (k! (k+1)!)
    let mut harmonic = T::zero(); // H_k
    for k in 0..MAX_ITER {
        let kf = T::from_usize_lossy(k);
        if k > 0 {
            t0 = t0 * y / (kf * kf);
            t1 = t1 * y / (kf * (kf + T::one()));
            harmonic += T::one() / kf;
        }
        i0 += t0;
        i1 += t1;
        s0 += harmonic * t0;
        // ψ(k+1) + ψ(k+2) = 2H_k + 1/(k+1) - 2γ
        let psi_sum = harmonic + harmonic + T::one() / (kf + T::one()) - gamma - gamma;
        s1 += psi_sum * t1;
        if t0 < eps * i0 && k > 2 {
            break;
        }
    }
    let i1 = i1 * x * lit(0.5);
    let k0 = -(ln_half_x + gamma) * i0 + s0;
    let k1 = T::one() / x + ln_half_x * i1 - x * lit(0.25) * s1;
    (k0, k1)
}

/// `(e^x K_0(x), e^x K_1(x))` for `x > 2` via Steed's method.
fn k01_cf2_scaled<T: Real>(x: T) -> Result<(T, T)> {
    let eps = T::epsilon();
    let two = lit::<T>(2.0);
    let mut b = two * (T::one() + x);
    let mut d = T::one() / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = T::zero();
    let mut q2 = T::one();
    let a1 = lit::<T>(0.25);
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = T::one() + q * delh;
    let mut converged = false;
    for i in 2..MAX_ITER {
        let fi = T::from_usize_lossy(i);
        a -= two * (fi - T::one());
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += two;
        d = T::one() / (b + a * d);
        delh = (b * d - T::one()) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < eps {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(KtcsError::QuadratureNotConverged(format!(
            "Bessel K continued fraction at x={}",
            x
        )));
    }
    let h = a1 * h;
    let k0 = (T::PI() / (two * x)).sqrt() / s;
    let k1 = k0 * (x + lit(0.5) - h) / x;
    Ok((k0, k1))
}

fn recur_up<T: Real>(order: usize, x: T, k0: T, k1: T) -> T {
    match order {
        0 => k0,
        1 => k1,
        _ => {
            let (mut km, mut k) = (k0, k1);
            for n in 1..order {
                let next = km + lit::<T>(2.0) * T::from_usize_lossy(n) / x * k;
                km = k;
                k = next;
            }
            k
        }
    }
}

/// `K_n(x)` for integer order (sign of the order is irrelevant).
pub fn bessel_k<T: Real>(order: i64, x: T) -> Result<T> {
    if !(x > T::zero()) || !x.is_finite() {
        return Err(KtcsError::DomainError(format!("bessel_k needs x > 0, got {x}")));
    }
    let n = order.unsigned_abs() as usize;
    if x <= lit(SERIES_SWITCH) {
        let (k0, k1) = k01_series(x);
        Ok(recur_up(n, x, k0, k1))
    } else {
        let (k0, k1) = k01_cf2_scaled(x)?;
        Ok(recur_up(n, x, k0, k1) * (-x).exp())
    }
}

/// `e^x K_n(x)`, which stays representable where `K_n` underflows.
pub fn bessel_k_scaled<T: Real>(order: i64, x: T) -> Result<T> {
    if !(x > T::zero()) || !x.is_finite() {
        return Err(KtcsError::DomainError(format!("bessel_k needs x > 0, got {x}")));
    }
    let n = order.unsigned_abs() as usize;
    if x <= lit(SERIES_SWITCH) {
        let (k0, k1) = k01_series(x);
        Ok(recur_up(n, x, k0, k1) * x.exp())
    } else {
        let (k0, k1) = k01_cf2_scaled(x)?;
        Ok(recur_up(n, x, k0, k1))
    }
}
