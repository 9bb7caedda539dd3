use ktcs_core::completeness::*;
use ktcs_core::error::KtcsError;
use ktcs_core::fock::{log_rho, ChainClass, KtcsParams};
use num_complex::Complex64;
use proptest::prelude::*;

// W̃ from mpmath (30 digits), equal to the Meijer G^{3,0}_{0,3}(x | p, q, 0)
const FROZEN: [(f64, usize, usize, f64); 6] = [
    (1.0, 0, 0, 0.164041606748376073151397233926),
    (0.05, 0, 0, 2.61995878293325755189602036896),
    (2.0, 1, 2, 0.245404060748572670713536734761),
    (10.0, 0, 3, 0.0779031630980024492702527277131),
    (40.0, 2, 2, 0.00729436706441413608263399093974),
    (1000.0, 0, 0, 3.3576693167069238e-14),
];

/// `K_ν(y) = ∫₀^∞ e^{-y cosh t} cosh(νt) dt`, trapezoid (spectrally accurate here).
fn k_oracle(nu: f64, y: f64) -> f64 {
    let h = 0.02;
    let mut s = 0.5 * (-y).exp();
    let mut t: f64 = h;
    loop {
        let term = (-y * t.cosh() + nu * t).exp() * (1.0 + (-2.0 * nu * t).exp()) * 0.5;
        s += term;
        if term < 1e-300 || t > 50.0 {
            break;
        }
        t += h;
    }
    s * h
}

/// The printed-form integral in `t = e^σ`, doubled.
fn weight_oracle(x: f64, p: usize, q: usize) -> f64 {
    let nu = (q as f64 - p as f64).abs();
    let h = 0.01;
    let mut s = 0.0;
    let mut sigma: f64 = -40.0;
    while sigma < 12.0 {
        let t: f64 = sigma.exp();
        s += t.powf(0.5 * (p + q) as f64) * (-x / t).exp() * k_oracle(nu, 2.0 * t.sqrt());
        sigma += h;
    }
    2.0 * s * h
}

#[test]
fn weight_matches_frozen_values() {
    for (x, p, q, v) in FROZEN {
        let w = weight_tilde(x, p, q).unwrap();
        assert!((w - v).abs() <= 1e-9 * v, "W̃({x};{p},{q}) = {w}, want {v}");
    }
}

#[test]
fn weight_matches_independent_quadrature() {
    for (x, p, q) in [(0.3, 0, 1), (3.0, 2, 0), (7.5, 1, 1)] {
        let w = weight_tilde(x, p, q).unwrap();
        let o = weight_oracle(x, p, q);
        assert!((w - o).abs() <= 1e-8 * o, "{x},{p},{q}: {w} vs {o}");
    }
}

#[test]
fn weight_is_positive_and_decreasing() {
    let xs = [1e-4, 1e-2, 0.5, 2.0, 10.0, 100.0, 1000.0];
    for (p, q) in [(0, 0), (1, 2), (3, 0)] {
        let ws: Vec<f64> = xs.iter().map(|&x| weight_tilde(x, p, q).unwrap()).collect();
        assert!(ws.iter().all(|&w| w > 0.0 && w.is_finite()));
        assert!(ws.windows(2).all(|w| w[1] < w[0]));
        // large-x decay is stretched exponential
        assert!(ws[6] < 1e-9 * ws[3]);
    }
}

#[test]
fn full_weight_includes_normalization() {
    let class = ChainClass { k: 2, j: 1, p: 1, q: 0 };
    let x = 1.7;
    let s = ktcs_core::fock::normalization_series_for(&class, x).unwrap().s();
    let w = weight(&class, x).unwrap();
    assert!((w - weight_tilde(x, 1, 0).unwrap() * s / std::f64::consts::PI).abs() < 1e-14 * w);
}

#[test]
fn moments_reproduce_rho() {
    for (p, q) in [(0, 0), (1, 0), (0, 2), (1, 2), (3, 3)] {
        let pr = MomentProblem { p, q, n_max_check: 8, tolerance: 1e-5 };
        let rep = verify_moments(&pr).unwrap();
        assert_eq!(rep.entries.len(), 9);
        assert!(rep.max_rel_err < 1e-8, "({p},{q}): {}", rep.max_rel_err);
        for e in &rep.entries {
            assert!((e.expected - log_rho::<f64>(e.n, p, q).exp()).abs() < 1e-12 * e.expected);
        }
    }
}

#[test]
fn impossible_tolerance_reports_mismatch() {
    let pr = MomentProblem { p: 1, q: 1, n_max_check: 6, tolerance: 1e-18 };
    assert!(matches!(verify_moments(&pr), Err(KtcsError::MomentMismatch { .. })));
    let rep = moment_report(&pr).unwrap();
    assert!(!rep.passed);
}

#[test]
fn kernel_rebuilds_state() {
    for (k, j, xi, p, q) in [(1, 0, 1.0, 0, 0), (2, 1, 1.3, 1, 0), (3, 2, 0.8, 0, 2)] {
        let params = KtcsParams::new(Complex64::from_polar(xi, 0.4), p, q, k, j).unwrap();
        let rep = reproducing_kernel_check(&params, 12, 200, 64).unwrap();
        assert!(rep.residual < 1e-4, "{k},{j}: {rep:?}");
        assert!(rep.off_residue < 1e-12);
    }
}

#[test]
fn unity_block_is_identity() {
    for (k, p, q) in [(1, 0, 0), (2, 1, 2), (3, 0, 1)] {
        let rep = resolution_of_unity(k, p, q, 6, 200, 64).unwrap();
        assert_eq!(rep.matrix.len(), 7);
        assert!(rep.max_deviation < 1e-6, "{k}: {}", rep.max_deviation);
    }
}

#[test]
fn carleman_limit_is_three_halves_k() {
    for k in 1..=3 {
        let rep = carleman_test(k, 0, 0, 0, 1_000_000).unwrap();
        let lim = -1.5 * k as f64;
        assert!((rep.extrapolated - lim).abs() < 0.05 * lim.abs(), "{rep:?}");
        assert_eq!(rep.verdict, Verdict::NonUnique);
        // raw estimates approach the limit over three decades
        let errs: Vec<f64> = rep.trajectory.iter().map(|&(_, t)| (t - lim).abs()).collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn weight_depends_on_charge_difference_order(x in 0.01f64..50.0, p in 0usize..4, q in 0usize..4) {
        let a = weight_tilde(x, p, q).unwrap();
        let b = weight_tilde(x, q, p).unwrap();
        prop_assert!(a > 0.0);
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn carleman_below_minus_one(k in 1usize..5, j_seed in 0usize..5, p in 0usize..4, q in 0usize..4) {
        let rep = carleman_test(k, j_seed % k, p, q, 100_000).unwrap();
        prop_assert!(rep.extrapolated < -1.0);
        prop_assert!(rep.estimate < 0.0);
    }
}

/// `K_n(x) = ∫₀^∞ e^{−x cosh t} cosh(nt) dt` by the trapezoid rule, which
/// converges geometrically for this analytic, doubly decaying integrand.
fn bessel_k_integral(n: i32, x: f64) -> f64 {
    let h = 1e-3;
    let mut sum = 0.5 * (-x).exp();
    let mut k = 1;
    loop {
        let t = k as f64 * h;
        let f = (-x * t.cosh()).exp() * (n as f64 * t).cosh();
        sum += f;
        if f < 1e-300 || (k > 100 && f < 1e-20 * sum) {
            break;
        }
        k += 1;
    }
    sum * h
}

#[test]
fn bessel_k_against_integral() {
    use ktcs_core::special::bessel_k;
    let k0: f64 = bessel_k(0, 1.0).unwrap();
    assert!((k0 - 0.42102443824070833).abs() < 1e-14);
    for &(n, x) in &[(3, 2.0), (0, 0.3), (5, 7.0), (8, 20.0)] {
        let want = bessel_k_integral(n, x);
        let got: f64 = bessel_k(n as i64, x).unwrap();
        assert!(((got - want) / want).abs() < 1e-10, "K_{n}({x}) {got} vs {want}");
    }
}

proptest! {
    #[test]
    fn bessel_k_recurrence(n in 1i64..=8, x in 0.1f64..50.0) {
        use ktcs_core::special::bessel_k;
        let (lo, mid, hi): (f64, f64, f64) =
            (bessel_k(n - 1, x).unwrap(), bessel_k(n, x).unwrap(), bessel_k(n + 1, x).unwrap());
        let lhs = hi - lo;
        let rhs = 2.0 * n as f64 / x * mid;
        prop_assert!((lhs - rhs).abs() <= 1e-11 * hi.abs());
    }
}
