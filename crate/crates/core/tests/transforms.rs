use ktcs_core::fock::{build_ktcs, build_tcs, KtcsParams, TrioState};
use ktcs_core::transforms::*;
use num_complex::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn direct(params: &KtcsParams<f64>, n_max: usize) -> TrioState<f64> {
    build_ktcs(params, Some(n_max)).unwrap()
}

#[test]
fn rotate_k2_odd_to_even() {
    let m = KtcsParams::new(c(2.0, 0.0), 0, 0, 2, 1).unwrap();
    let s = build_ktcs(&m, Some(60)).unwrap();
    let (l, out) = rotate_index(&m, &s, 0).unwrap();
    assert_eq!(l.j, 0);
    let want = direct(&l, out.n_max());
    assert!(out.max_abs_diff(&want) < 1e-10, "{}", out.max_abs_diff(&want));
}

#[test]
fn rotate_k3_wraps_around() {
    let m = KtcsParams::new(c(1.0, 1.0), 1, 0, 3, 0).unwrap();
    let s = build_ktcs(&m, Some(60)).unwrap();
    let (l, out) = rotate_index(&m, &s, 2).unwrap();
    let want = direct(&l, out.n_max());
    assert!(out.max_abs_diff(&want) < 1e-10);
}

#[test]
fn ktcs_to_tcs_k2_real_xi_cancels_odd() {
    let p = KtcsParams::new(c(1.3, 0.0), 0, 0, 2, 0).unwrap();
    let d = ktcs_to_tcs(&p).unwrap();
    assert!((d.coefficients[0] - d.coefficients[1]).norm() < 1e-15);
    let r = d.reconstruct(40).unwrap();
    for n in (1..=40).step_by(2) {
        assert!(r.amplitudes[n].norm() < 1e-13);
    }
    assert!(r.max_abs_diff(&direct(&p, 40)) < 1e-12);
}

#[test]
fn ktcs_to_tcs_k3_reconstructs() {
    let p = KtcsParams::new(c(2.0, 0.0), 1, 2, 3, 1).unwrap();
    let d = ktcs_to_tcs(&p).unwrap();
    let r = d.reconstruct(50).unwrap();
    assert!(r.max_abs_diff(&direct(&p, 50)) < 1e-12);
}

#[test]
fn tcs_to_ktcs_reconstructs_tcs() {
    let xi = c(1.5, 0.0);
    let parts = tcs_to_ktcs(xi, 0, 1, 2).unwrap();
    let terms: Vec<_> = parts.iter().map(|(w, p)| (c(*w, 0.0), *p)).collect();
    let r = superpose(&terms, 40).unwrap();
    let tcs = build_tcs(xi, 0, 1, Some(40)).unwrap();
    assert!(r.max_abs_diff(&tcs) < 1e-12);
}

#[test]
fn round_trip_through_tcs() {
    // KTCS -> TCS roots -> each root back to KTCS pieces
    let p = KtcsParams::new(c(1.5, 0.0), 0, 1, 2, 1).unwrap();
    let d = ktcs_to_tcs(&p).unwrap();
    let mut terms = Vec::new();
    for (jp, coef) in d.coefficients.iter().enumerate() {
        for (w, part) in tcs_root_to_ktcs(c(1.5, 0.0), 0, 1, 2, jp).unwrap() {
            terms.push((coef * w, part));
        }
    }
    let r = superpose(&terms, 40).unwrap();
    assert!(r.max_abs_diff(&direct(&p, 40)) < 1e-12);
}

#[test]
fn phase_identity_holds() {
    let res = phase_identity_residual(c(1.0, 0.5), 0, 0, 4, 3, 2).unwrap();
    assert!(res < 1e-13, "{res}");
    let res = phase_identity_residual(c(0.8, -0.3), 2, 1, 3, 1, 2).unwrap();
    assert!(res < 1e-13, "{res}");
}

#[test]
fn fourier_rows_invert_to_tcs_weights() {
    // inverse K-point DFT of the Kto1 rows gives N_{Kj}/N scaled weights
    let xi = c(1.1, 0.4);
    let k = 3;
    let ws = tcs_to_ktcs(xi, 1, 0, k).unwrap();
    for (w, part) in ws {
        let d = ktcs_to_tcs(&part).unwrap();
        // Σ_{j'} c_{j'} = N_{Kj}/N when j'-phases are summed with j'=0 root
        let s: Complex64 = d.coefficients.iter().enumerate().map(|(jp, cf)| {
            cf * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * (part.j * jp) as f64 / k as f64)
        }).sum();
        assert!((s.re * w - 1.0).abs() < 1e-12 && s.im.abs() < 1e-12);
    }
}

#[test]
fn cross_dimension_same_k_is_identity() {
    let p = KtcsParams::new(c(1.2, 0.7), 1, 1, 3, 2).unwrap();
    let cd = cross_dimension(&p, 3).unwrap();
    let r = cd.reconstruct(45).unwrap();
    assert!(r.max_abs_diff(&direct(&p, 45)) < 1e-12);
}

#[test]
fn cross_dimension_to_one_matches_tcs_decomposition() {
    let p = KtcsParams::new(c(1.2, 0.0), 0, 2, 2, 1).unwrap();
    let cd = cross_dimension(&p, 1).unwrap();
    let d = ktcs_to_tcs(&p).unwrap();
    for (a, b) in cd.matrix[0].iter().zip(&d.coefficients) {
        assert!((a - b).norm() < 1e-14);
    }
}

#[test]
fn cross_dimension_two_to_three() {
    let p = KtcsParams::new(c(1.4, 0.2), 0, 1, 2, 1).unwrap();
    let cd = cross_dimension(&p, 3).unwrap();
    assert_eq!(cd.matrix.len(), 3);
    let r = cd.reconstruct(45).unwrap();
    assert!(r.max_abs_diff(&direct(&p, 45)) < 1e-11);
}

#[test]
fn coherent_integral_tcs_case() {
    let xi = c(1.0, 0.6);
    let p = KtcsParams::new(xi, 1, 0, 1, 0).unwrap();
    let a = xi.powf(1.0 / 3.0);
    let rec = coherent_integral_reconstruct(&p, a, a, xi / (a * a), 64, 12).unwrap();
    assert!(rec.state.max_abs_diff(&direct(&p, 12)) < 1e-10);
    assert!(rec.off_chain_norm < 1e-10);
}

#[test]
fn coherent_integral_k2() {
    let p = KtcsParams::new(c(1.0, 0.0), 0, 0, 2, 0).unwrap();
    let one = c(1.0, 0.0);
    let rec = coherent_integral_reconstruct(&p, one, one, one, 256, 15).unwrap();
    assert!(rec.state.max_abs_diff(&direct(&p, 15)) < 1e-8);
}

#[test]
fn coherent_integral_error_drops_with_nodes() {
    let p = KtcsParams::new(c(1.0, 0.0), 1, 0, 2, 1).unwrap();
    let one = c(1.0, 0.0);
    let want = direct(&p, 10);
    let coarse = coherent_integral_reconstruct(&p, one, one, one, 4, 10).unwrap();
    let fine = coherent_integral_reconstruct(&p, one, one, one, 64, 10).unwrap();
    let ec = coarse.state.max_abs_diff(&want) + coarse.off_chain_norm;
    let ef = fine.state.max_abs_diff(&want) + fine.off_chain_norm;
    assert!(ef < ec, "{ef} vs {ec}");
    assert!(ef < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rotation_is_invertible(r in 0.3f64..2.5, th in -3.0f64..3.0, p in 0usize..3, q in 0usize..3,
                              k in 1usize..5, m_seed in 0usize..16, l_seed in 0usize..16) {
        let m = m_seed % k;
        let l = l_seed % k;
        let pm = KtcsParams::from_polar(r, th, p, q, k, m).unwrap();
        let s = build_ktcs(&pm, Some(70)).unwrap();
        let (pl, sl) = rotate_index(&pm, &s, l).unwrap();
        let (back_p, back) = rotate_index(&pl, &sl, m).unwrap();
        prop_assert_eq!(back_p.j, m);
        let want = direct(&pm, back.n_max());
        prop_assert!(back.max_abs_diff(&want) < 1e-10);
        let want_l = direct(&pl, sl.n_max());
        prop_assert!(sl.max_abs_diff(&want_l) < 1e-10);
    }

    #[test]
    fn tcs_decomposition_reconstructs(r in 0.2f64..2.0, th in -3.0f64..3.0, p in 0usize..3, q in 0usize..3,
                                      k in 1usize..5, j_seed in 0usize..16) {
        let params = KtcsParams::from_polar(r, th, p, q, k, j_seed % k).unwrap();
        let rec = ktcs_to_tcs(&params).unwrap().reconstruct(40).unwrap();
        prop_assert!(rec.max_abs_diff(&direct(&params, 40)) < 1e-12);
    }
}
