use ktcs_core::fock::{normalization_series, KtcsParams};
use ktcs_core::phase_space::*;
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;

fn params(xi: Complex64, p: usize, q: usize, k: usize, j: usize) -> KtcsParams<f64> {
    KtcsParams::new(xi, p, q, k, j).unwrap()
}

fn real(xi: f64, k: usize, j: usize) -> KtcsParams<f64> {
    params(Complex64::new(xi, 0.0), 0, 0, k, j)
}

fn default_grid(p: &KtcsParams<f64>) -> QGrid<f64> {
    q_slice(p, &GridSpec::default_for(p)).unwrap()
}

#[test]
fn pointwise_and_slice_paths_agree_on_grid() {
    for p in [real(5.0, 2, 0), params(Complex64::new(1.0, 2.0), 1, 2, 3, 1)] {
        let spec = GridSpec::default_for(&p);
        let spec = GridSpec { nx: 41, ny: 37, ..spec };
        let grid = q_slice(&p, &spec).unwrap();
        let qmax = grid.max();
        for (iy, &y) in spec.ys().iter().enumerate() {
            for (ix, &x) in spec.xs().iter().enumerate() {
                let a = Complex64::new(x, y);
                let direct = q_point(&p, a, a, a).unwrap() * PI.powi(3);
                let slice = grid.values[iy][ix];
                // relative where the value is resolvable, absolute near zeros
                assert!((direct - slice).abs() <= 1e-10 * slice.abs().max(1e-6 * qmax), "{x},{y}: {direct} vs {slice}");
            }
        }
    }
}

#[test]
fn general_point_is_bounded_and_positive() {
    let p = params(Complex64::new(2.0, -1.0), 2, 1, 2, 1);
    let q = q_point(&p, Complex64::new(1.1, 0.3), Complex64::new(-0.4, 0.9), Complex64::new(0.7, 0.7)).unwrap();
    assert!(q > 0.0 && q <= 1.0 / PI.powi(3));
}

#[test]
fn six_bells_for_k2() {
    for j in 0..2 {
        let g = default_grid(&real(5.0, 2, j));
        assert!(!resolution_too_coarse(&g));
        assert_eq!(count_peaks(&g, DEFAULT_PEAK_FLOOR), 6, "j={j}");
    }
}

#[test]
fn nine_bells_for_k3() {
    for j in 0..3 {
        assert_eq!(count_peaks(&default_grid(&real(12.0, 3, j)), DEFAULT_PEAK_FLOOR), 9, "j={j}");
    }
}

#[test]
fn three_bells_for_tcs() {
    assert_eq!(count_peaks(&default_grid(&real(5.0, 1, 0)), DEFAULT_PEAK_FLOOR), 3);
}

#[test]
fn even_state_has_central_fringe_below_half_height() {
    // the j=0 origin maximum is the constructive fringe, not a bell
    let g = default_grid(&real(5.0, 2, 0));
    let all = find_peaks(&g, 1e-3);
    assert_eq!(all.len(), 7);
    let centre = all.iter().map(|p| p.2).fold(f64::INFINITY, f64::min) / g.max();
    assert!(centre > 0.4 && centre < 0.5, "{centre}");
}

#[test]
fn nonnegative_and_decays_at_window_edge() {
    for p in [real(5.0, 2, 0), real(5.0, 2, 1), real(12.0, 3, 2), params(Complex64::new(0.5, 0.0), 3, 2, 2, 1)] {
        let g = default_grid(&p);
        assert!(g.min() >= 0.0);
        assert!(g.values.iter().flatten().all(|v| v.is_finite()));
        assert!(g.boundary_max() < 1e-12 * g.max(), "{:?}: {}", p, g.boundary_max() / g.max());
    }
}

#[test]
fn odd_state_has_destructive_fringe() {
    let p1 = real(5.0, 2, 1);
    let r1 = fringe_between_bells(&p1, &default_grid(&p1)).unwrap();
    let (v, _) = r1.zero.expect("zero next to the fringe minimum");
    assert!(v < 1e-10, "{r1:?}");
    assert!(r1.grid_min_rel < 1e-2, "{r1:?}");

    let p0 = real(5.0, 2, 0);
    let r0 = fringe_between_bells(&p0, &default_grid(&p0)).unwrap();
    assert!(r0.zero.is_none(), "{r0:?}");
    assert!(r0.grid_min_rel > 0.1, "{r0:?}");
}

#[test]
fn csv_dump_shape() {
    let p = real(1.0, 2, 0);
    let g = q_slice(&p, &GridSpec { x_range: (-1.0, 1.0), y_range: (-2.0, 2.0), nx: 5, ny: 3 }).unwrap();
    let mut buf = Vec::new();
    g.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let rows: Vec<_> = text.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.split(',').count() == 5));
    assert_eq!(g.metadata()["nx"], 5);
}

#[test]
fn vacuum_point_matches_normalization() {
    let p = real(0.8, 4, 0);
    let z = Complex64::new(0.0, 0.0);
    let n2 = normalization_series(&p, p.z()).unwrap().norm().unwrap().powi(2);
    assert!((q_point(&p, z, z, z).unwrap() * PI.powi(3) - n2).abs() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn rotation_by_bell_spacing(xi in 0.2f64..15.0, k in 1usize..5, j_seed in 0usize..8,
                                p in 0usize..3, q in 0usize..3, r in 0.0f64..4.0, th in 0.0f64..6.3) {
        let s = params(Complex64::new(xi, 0.0), p, q, k, j_seed % k);
        let ln_n2 = -normalization_series(&s, s.z()).unwrap().ln_s();
        let a = q_slice_point(&s, ln_n2, r * th.cos(), r * th.sin());
        let t2 = th + 2.0 * PI / (3.0 * k as f64);
        let b = q_slice_point(&s, ln_n2, r * t2.cos(), r * t2.sin());
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-300));
    }

    #[test]
    fn q_is_a_probability_density_value(re in -3.0f64..3.0, im in -3.0f64..3.0, k in 1usize..4, j_seed in 0usize..4) {
        let s = params(Complex64::new(2.0, 0.5), 1, 0, k, j_seed % k);
        let a = Complex64::new(re, im);
        let v = q_point(&s, a, a.conj(), a * 0.5).unwrap();
        prop_assert!(v >= 0.0 && v <= 1.0 / PI.powi(3) + 1e-15);
    }
}
