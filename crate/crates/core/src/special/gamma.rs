use crate::scalar::{lit, Real};

const LANCZOS_R: f64 = 10.900511;

const LANCZOS_DK: [f64; 11] = [
    2.48574089138753565546e-5,
    1.05142378581721974210,
    -3.45687097222016235469,
    4.51227709466894823700,
    -2.98285225323576655721,
    1.05639711577126713077,
    -1.95428773191645869583e-1,
    1.70970543404441224307e-2,
    -5.71926117404305781283e-4,
    4.63399473359905636708e-6,
    -2.71994908488607703910e-9,
];

/// ln(2·sqrt(e/π))
const LN_2_SQRT_E_OVER_PI: f64 = 0.620_782_237_635_245_2;

/// `ln Γ(x)` for `x > 0` via the Lanczos approximation (Pugh's r = 10.900511,
/// eleven coefficients), accurate to about 1e-15 relative.
pub fn ln_gamma<T: Real>(x: T) -> T {
    debug_assert!(x > T::zero(), "ln_gamma is only used on the positive axis");
    if x < lit(0.5) {
        // reflection
        let pi = T::PI();
        return pi.ln() - (pi * x).sin().ln() - ln_gamma(T::one() - x);
    }
    let mut s: T = lit(LANCZOS_DK[0]);
    for (k, &d) in LANCZOS_DK.iter().enumerate().skip(1) {
        s += lit::<T>(d) / (x + T::from_usize_lossy(k) - T::one());
    }
    let half = lit::<T>(0.5);
    s.ln() + lit(LN_2_SQRT_E_OVER_PI) + (x - half) * ((x - half + lit(LANCZOS_R)) / T::E()).ln()
}

/// `ln n!`; exact products for `n ≤ 20`, Lanczos above.
pub fn ln_factorial<T: Real>(n: usize) -> T {
    if n <= 20 {
        let f: u64 = (1..=n as u64).product();
        // 20! < 2^63 so the u64 product is exact; the conversion rounds once.
        T::from_u64(f).expect("factorial representable").ln()
    } else {
        ln_gamma(T::from_usize_lossy(n + 1))
    }
}
