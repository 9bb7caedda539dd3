//! Husimi Q-function of a KTCS: pointwise in all three modes, and on the
//! `α = β = γ` slice where it reduces to the complex-argument series
//! `S(w) = Σ w^n/ρ(n)` with `w = ξ ᾱ³`.

use std::io::Write;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{KtcsError, Result};
use crate::fock::{log_rho, normalization_series, KtcsParams, SERIES_REL_TOL};
use crate::scalar::{lit, polar, Real};

/// Peaks lower than this fraction of the global maximum are not counted.
pub const DEFAULT_PEAK_FLOOR: f64 = 0.5;

/// Below this many nodes per axis the peak count is unreliable.
pub const MIN_PEAK_RESOLUTION: usize = 200;

/// Odd, so both axes fall on grid nodes and symmetric bells are not split
/// between two equal neighbours.
pub const DEFAULT_GRID_N: usize = 401;

/// `n·ln r`, with `0·ln 0 = 0`.
fn pow_ln<T: Real>(ln_r: T, n: usize) -> T {
    if n == 0 { T::zero() } else { T::from_usize_lossy(n) * ln_r }
}

/// `Q(α, β, γ) = |⟨α, β, γ|ξ, p, q⟩_{Kj}|² / π³`, summing
/// `c_n ᾱ^{n+q} β̄^{n+p} γ̄^n / √ρ(n)` with `c_n = N ξ^n/√ρ(n)`.
pub fn q_point<T: Real>(params: &KtcsParams<T>, alpha: Complex<T>, beta: Complex<T>, gamma: Complex<T>) -> Result<T> {
    let cache = normalization_series(params, params.z())?;
    let ln_n = cache.norm()?.ln();
    let (la, lb, lg) = (alpha.norm().ln(), beta.norm().ln(), gamma.norm().ln());
    let (aa, ab, ag) = (alpha.arg(), beta.arg(), gamma.arg());
    let ln_xi = params.xi_mod.ln();
    let gauss = (alpha.norm_sqr() + beta.norm_sqr() + gamma.norm_sqr()) * lit(0.5);
    let (p, q) = (params.p, params.q);
    let tol: T = lit(SERIES_REL_TOL);

    let mut shift = T::neg_infinity();
    let mut acc = Complex::new(T::zero(), T::zero());
    let mut mag = T::zero();
    let mut prev = T::neg_infinity();
    for n in params.chain().indices() {
        let lt = pow_ln(ln_xi, n) + pow_ln(la, n + q) + pow_ln(lb, n + p) + pow_ln(lg, n) - log_rho::<T>(n, p, q);
        if lt == T::neg_infinity() {
            // a vanishing amplitude with positive power kills every later term too
            break;
        }
        if lt > shift {
            let rescale = (shift - lt).exp();
            acc = acc * rescale;
            mag *= rescale;
            shift = lt;
        }
        let nf = T::from_usize_lossy(n);
        let phase = nf * params.xi_arg - T::from_usize_lossy(n + q) * aa - T::from_usize_lossy(n + p) * ab - nf * ag;
        let t = (lt - shift).exp();
        acc += polar(t, phase);
        mag += t;
        if lt < prev && t <= tol * mag {
            break;
        }
        prev = lt;
    }
    if shift == T::neg_infinity() {
        return Ok(T::zero());
    }
    let ln_amp = ln_n + shift - gauss;
    Ok((ln_amp * lit(2.0)).exp() * acc.norm_sqr() / T::PI().powi(3))
}

/// `π³ Q` on the slice `α = β = γ = x + iy`:
/// `N² e^{-3(x²+y²)} (x²+y²)^{p+q} |S(ξ(x-iy)³)|²`.
pub fn q_slice_point<T: Real>(params: &KtcsParams<T>, ln_norm_sq: T, x: T, y: T) -> T {
    let r2 = x * x + y * y;
    let w = params.xi() * Complex::new(x, -y).powu(3);
    let s = params.chain().complex_sum(w);
    if s.value.norm() == T::zero() {
        return T::zero();
    }
    let ln_q = ln_norm_sq - lit::<T>(3.0) * r2 + pow_ln(r2.ln(), params.p + params.q) + s.ln_norm() * lit(2.0);
    ln_q.exp()
}

/// Square or rectangular window of the slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec<T> {
    pub x_range: (T, T),
    pub y_range: (T, T),
    pub nx: usize,
    pub ny: usize,
}

impl<T: Real> GridSpec<T> {
    pub fn square(radius: T, n: usize) -> Self {
        Self { x_range: (-radius, radius), y_range: (-radius, radius), nx: n, ny: n }
    }

    /// Window of half-width `max(2.4 ξ^{1/3}, r_peak + 3.3)` where `r_peak`
    /// is the larger of `ξ^{1/3}` and the charge-driven radius
    /// `√((p+q)/3)`. The second bound keeps the boundary below `1e-12` of
    /// the maximum (radial falloff `e^{-3(r - r_peak)²}`).
    pub fn default_for(params: &KtcsParams<T>) -> Self {
        let r0 = params.xi_mod.cbrt();
        let r_charge = (T::from_usize_lossy(params.p + params.q) / lit(3.0)).sqrt();
        let radius = (r0 * lit(2.4)).max(r0.max(r_charge) + lit(3.3));
        Self::square(radius, DEFAULT_GRID_N)
    }

    pub fn xs(&self) -> Vec<T> {
        linspace(self.x_range, self.nx)
    }

    pub fn ys(&self) -> Vec<T> {
        linspace(self.y_range, self.ny)
    }

    fn validate(&self) -> Result<()> {
        let ok = |r: (T, T)| r.0.is_finite() && r.1.is_finite() && r.1 > r.0;
        if self.nx < 2 || self.ny < 2 || !ok(self.x_range) || !ok(self.y_range) {
            return Err(KtcsError::InvalidParams(format!("invalid grid {self:?}")));
        }
        Ok(())
    }
}

fn linspace<T: Real>((a, b): (T, T), n: usize) -> Vec<T> {
    let h = (b - a) / T::from_usize_lossy(n - 1);
    (0..n).map(|i| a + h * T::from_usize_lossy(i)).collect()
}

/// `π³ Q` sampled on a grid; `values[iy][ix]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QGrid<T> {
    pub spec: GridSpec<T>,
    pub values: Vec<Vec<T>>,
}

impl<T: Real> QGrid<T> {
    pub fn max(&self) -> T {
        self.values.iter().flatten().copied().fold(T::zero(), T::max)
    }

    pub fn min(&self) -> T {
        self.values.iter().flatten().copied().fold(T::infinity(), T::min)
    }

    /// Largest value on the outer ring of nodes.
    pub fn boundary_max(&self) -> T {
        let (ny, nx) = (self.spec.ny, self.spec.nx);
        let mut m = T::zero();
        for (iy, row) in self.values.iter().enumerate() {
            for (ix, &v) in row.iter().enumerate() {
                if iy == 0 || ix == 0 || iy + 1 == ny || ix + 1 == nx {
                    m = m.max(v);
                }
            }
        }
        m
    }

    /// Matrix dump: one CSV row per `y`, one column per `x`.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.values {
            w.write_record(row.iter().map(|v| format!("{:.11e}", v.as_f64())))?;
        }
        w.flush()
    }

    /// Grid metadata for the sidecar JSON.
    pub fn metadata(&self) -> serde_json::Value {
        serde_json::json!({
            "quantity": "pi^3 Q",
            "layout": "rows are y ascending, columns are x ascending",
            "x_range": [self.spec.x_range.0.as_f64(), self.spec.x_range.1.as_f64()],
            "y_range": [self.spec.y_range.0.as_f64(), self.spec.y_range.1.as_f64()],
            "nx": self.spec.nx,
            "ny": self.spec.ny,
            "max": self.max().as_f64(),
        })
    }
}

/// Evaluates the slice row by row in parallel.
pub fn q_slice<T: Real>(params: &KtcsParams<T>, spec: &GridSpec<T>) -> Result<QGrid<T>> {
    spec.validate()?;
    let cache = normalization_series(params, params.z())?;
    cache.norm()?;
    let ln_norm_sq = -cache.ln_s();
    let xs = spec.xs();
    let values = spec
        .ys()
        .par_iter()
        .map(|&y| xs.iter().map(|&x| q_slice_point(params, ln_norm_sq, x, y)).collect())
        .collect();
    Ok(QGrid { spec: *spec, values })
}

/// Whether the grid is too coarse for [`count_peaks`] to be trusted.
pub fn resolution_too_coarse<T>(grid: &QGrid<T>) -> bool {
    grid.spec.nx < MIN_PEAK_RESOLUTION || grid.spec.ny < MIN_PEAK_RESOLUTION
}

/// Interior nodes strictly greater than their eight neighbours and above
/// `floor · max`, as `(ix, iy, value)`.
pub fn find_peaks<T: Real>(grid: &QGrid<T>, floor: T) -> Vec<(usize, usize, T)> {
    let v = &grid.values;
    let cut = floor * grid.max();
    let mut out = Vec::new();
    for iy in 1..grid.spec.ny.saturating_sub(1) {
        for ix in 1..grid.spec.nx.saturating_sub(1) {
            let c = v[iy][ix];
            if !(c > cut) {
                continue;
            }
            let strict = (iy - 1..=iy + 1)
                .flat_map(|a| (ix - 1..=ix + 1).map(move |b| (a, b)))
                .filter(|&(a, b)| (a, b) != (iy, ix))
                .all(|(a, b)| c > v[a][b]);
            if strict {
                out.push((ix, iy, c));
            }
        }
    }
    out
}

pub fn count_peaks<T: Real>(grid: &QGrid<T>, floor: T) -> usize {
    find_peaks(grid, floor).len()
}

/// A zero of `S(w)` near the fringe between two neighbouring bells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeReport<T> {
    /// Smallest grid value between the bells, relative to the grid maximum.
    pub grid_min_rel: T,
    /// Grid node `(x, y)` of that minimum.
    pub grid_min_at: (T, T),
    /// `Q/Q_max` at the refined point and its position, when Newton's method
    /// converges to a zero within two grid cells of the grid minimum.
    pub zero: Option<(T, (T, T))>,
}

/// `S(w)` and `S'(w)` on the residue class (plain summation; only used near
/// fringe points where `|w|` is moderate).
fn series_and_derivative<T: Real>(params: &KtcsParams<T>, w: Complex<T>) -> (Complex<T>, Complex<T>) {
    let mut s = Complex::new(T::zero(), T::zero());
    let mut ds = s;
    let mut mag = T::zero();
    let lw = w.norm().ln();
    for n in params.chain().indices() {
        let lt = pow_ln(lw, n) - log_rho::<T>(n, params.p, params.q);
        let t = polar(lt.exp(), T::from_usize_lossy(n) * w.arg());
        s += t;
        if n > 0 {
            ds += t / w * T::from_usize_lossy(n);
        }
        mag += t.norm();
        if n > 4 && t.norm() <= lit::<T>(SERIES_REL_TOL) * mag && T::from_usize_lossy(n).powi(3) > w.norm() {
            break;
        }
    }
    (s, ds)
}

/// Looks for the destructive fringe between the bell on the positive real
/// axis of `w`-space and its neighbour. The search region is the sector
/// around the midline angle `arg ξ/3 + π/(3K)` (half-width `π/(12K)`) between
/// the chord joining the two bells and the circle through them:
/// `r_bell cos(π/(3K)) ≤ r ≤ r_bell`, padded by one grid cell.
pub fn fringe_between_bells<T: Real>(params: &KtcsParams<T>, grid: &QGrid<T>) -> Result<FringeReport<T>> {
    let peaks = find_peaks(grid, lit(DEFAULT_PEAK_FLOOR));
    let (xs, ys) = (grid.spec.xs(), grid.spec.ys());
    let &(bx, by, _) = peaks
        .iter()
        .max_by(|a, b| a.2.partial_cmp(&b.2).unwrap())
        .ok_or_else(|| KtcsError::DomainError("grid has no peaks".into()))?;
    let r_bell = (xs[bx] * xs[bx] + ys[by] * ys[by]).sqrt();
    let k = T::from_usize_lossy(params.k);
    let pi = T::PI();
    // bells sit where arg(ξ ᾱ³) is a multiple of 2π/K; start from the one at
    // angle arg ξ/3 and step half a bell spacing
    let mid = params.xi_arg / lit(3.0) + pi / (lit::<T>(3.0) * k);
    let half_width = pi / (lit::<T>(12.0) * k);
    let cell = ((xs[1] - xs[0]).powi(2) + (ys[1] - ys[0]).powi(2)).sqrt();
    let r_lo = r_bell * (pi / (lit::<T>(3.0) * k)).cos() - cell;
    let r_hi = r_bell + cell;
    let qmax = grid.max();

    let mut best: Option<(T, usize, usize)> = None;
    for (iy, row) in grid.values.iter().enumerate() {
        for (ix, &v) in row.iter().enumerate() {
            let (x, y) = (xs[ix], ys[iy]);
            let r = (x * x + y * y).sqrt();
            let mut d = (y.atan2(x) - mid).abs() % (lit::<T>(2.0) * pi);
            if d > pi {
                d = lit::<T>(2.0) * pi - d;
            }
            if d <= half_width && r >= r_lo && r <= r_hi && best.map_or(true, |b| v < b.0) {
                best = Some((v, ix, iy));
            }
        }
    }
    let (vmin, ix, iy) = best.ok_or_else(|| KtcsError::DomainError("fringe region contains no grid nodes".into()))?;
    let start = (xs[ix], ys[iy]);

    // Newton on S(w) = 0, w = ξ (x - iy)³
    let xi = params.xi();
    let mut w = xi * Complex::new(start.0, -start.1).powu(3);
    let mut converged = false;
    for _ in 0..60 {
        let (s, ds) = series_and_derivative(params, w);
        if ds.norm() == T::zero() {
            break;
        }
        let step = s / ds;
        w -= step;
        if step.norm() <= lit::<T>(1e-15) * w.norm().max(T::one()) {
            converged = true;
            break;
        }
    }
    let zero = if converged && w.norm() > T::zero() {
        // ᾱ³ = w/ξ; pick the cube root nearest to the start point
        let target = w / xi;
        let base = target.cbrt();
        let nearest = (0..3)
            .map(|m| {
                let r = base * polar(T::one(), lit::<T>(2.0) * pi * T::from_usize_lossy(m) / lit(3.0));
                (r.re, -r.im)
            })
            .min_by(|a, b| {
                let da = (a.0 - start.0).powi(2) + (a.1 - start.1).powi(2);
                let db = (b.0 - start.0).powi(2) + (b.1 - start.1).powi(2);
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        let dist = ((nearest.0 - start.0).powi(2) + (nearest.1 - start.1).powi(2)).sqrt();
        if dist <= cell * lit(2.0) {
            let ln_norm_sq = -normalization_series(params, params.z())?.ln_s();
            let v = q_slice_point(params, ln_norm_sq, nearest.0, nearest.1);
            Some((v / qmax, nearest))
        } else {
            None
        }
    } else {
        None
    };
    Ok(FringeReport { grid_min_rel: vmin / qmax, grid_min_at: start, zero })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn origin_of_charged_chain_is_dark() {
        let p = KtcsParams::new(Complex64::new(2.0, 0.0), 1, 0, 2, 0).unwrap();
        let z = Complex64::new(0.0, 0.0);
        assert_eq!(q_point(&p, z, z, z).unwrap(), 0.0);
    }

    #[test]
    fn origin_of_uncharged_even_chain() {
        let p = KtcsParams::new(Complex64::new(1.3, 0.4), 0, 0, 3, 0).unwrap();
        let z = Complex64::new(0.0, 0.0);
        let want = normalization_series(&p, p.z()).unwrap().norm().unwrap().powi(2) / std::f64::consts::PI.powi(3);
        assert!((q_point(&p, z, z, z).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn default_window_scales_with_xi() {
        let p = KtcsParams::new(Complex64::new(100.0, 0.0), 0, 0, 3, 0).unwrap();
        let g = GridSpec::default_for(&p);
        assert!((g.x_range.1 - 2.4 * 100f64.cbrt()).abs() < 1e-12);
        let p = KtcsParams::new(Complex64::new(5.0, 0.0), 0, 0, 2, 0).unwrap();
        assert!((GridSpec::default_for(&p).x_range.1 - (5f64.cbrt() + 3.3)).abs() < 1e-12);
        assert_eq!(g.nx, DEFAULT_GRID_N);
    }

    #[test]
    fn invalid_grid_rejected() {
        let p = KtcsParams::new(Complex64::new(1.0, 0.0), 0, 0, 1, 0).unwrap();
        let g = GridSpec { x_range: (1.0, -1.0), y_range: (-1.0, 1.0), nx: 10, ny: 10 };
        assert!(q_slice(&p, &g).is_err());
    }
}
