//! Resolution of unity: the weight function from the modified-Bessel
//! integral, its Stieltjes moments, the reproducing kernel, and the
//! Carleman test for (non-)uniqueness of the weight.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{KtcsError, Result};
use crate::fock::{log_rho, normalization_series, normalization_series_for, ChainClass, KtcsParams, TrioState};
use crate::quadrature::{gauss_legendre_on, integrate_doubling, periodic_nodes};
use crate::scalar::{lit, polar, Real};
use crate::special::bessel_k_scaled;

/// Relative tolerance of the inner `u`-integral.
pub const WEIGHT_REL_TOL: f64 = 1e-11;

/// Largest moment order the double-precision check is meant for.
pub const MAX_MOMENT_ORDER: usize = 10;

/// `W̃(x; p, q, 0) = 2 ∫₀^∞ t^{-1+(p+q)/2} e^{-x/t} K_{q-p}(2√t) dt`.
///
/// The factor 2 comes out of the τ-integration
/// `∫ τ^{ν-1} e^{-τ-t/τ} dτ = 2 t^{ν/2} K_ν(2√t)`; without it every moment
/// is half of `ρ(n)`. With `t = u²` the integrand is
/// `4 u^{p+q-1} e^{-x/u²} K_ν(2u)`, integrated from `u₀ = √(x/700)` (where
/// the exponential is below `e^{-700}`) on doubling panels.
pub fn weight_tilde<T: Real>(x: T, p: usize, q: usize) -> Result<T> {
    if !(x > T::zero()) || !x.is_finite() {
        return Err(KtcsError::DomainError(format!("weight needs x > 0, got {x}")));
    }
    let order = q as i64 - p as i64;
    let power = T::from_usize_lossy(p + q) - T::one();
    let two: T = lit(2.0);
    // the peak of e^{-x/u²-2u} sits near u = x^{1/3}
    let peak = x.cbrt();
    let scale = -lit::<T>(3.0) * peak;
    let f = |u: T| -> T {
        if !(u > T::zero()) {
            return T::zero();
        }
        let ks = match bessel_k_scaled(order, two * u) {
            Ok(v) => v,
            Err(_) => return T::zero(),
        };
        // everything relative to e^{-3 x^{1/3}} to keep large x in range
        (power * u.ln() - x / (u * u) - two * u - scale).exp() * ks
    };
    let u0 = (x / lit(700.0)).sqrt();
    let width = u0.max(peak * lit(0.05)).min(peak);
    let integral = integrate_doubling(&f, u0, width, lit(WEIGHT_REL_TOL))?;
    // the [0, u0] piece below e^{-700} relative is dropped
    Ok(lit::<T>(4.0) * integral.value * scale.exp())
}

/// `W_{Kj}(x) = W̃(x)/(π N²_{Kj}(x))`.
pub fn weight<T: Real>(class: &ChainClass, x: T) -> Result<T> {
    let cache = normalization_series_for(class, x)?;
    let wt = weight_tilde(x, class.p, class.q)?;
    Ok(wt * cache.s() / T::PI())
}

/// Composite Gauss–Legendre rule in `s = x^{1/3}` on `[0, s_max]`. The first
/// unit interval is split geometrically at `10⁻³, 10⁻², 10⁻¹, 0.5` so the
/// logarithmic behaviour of `W̃` at the origin is resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialRule<T> {
    pub p: usize,
    pub q: usize,
    /// `(s, weight, W̃(s³))`
    pub nodes: Vec<(T, T, T)>,
}

impl<T: Real> RadialRule<T> {
    pub fn new(p: usize, q: usize, s_max: T, panel_width: T, per_panel: usize) -> Result<Self> {
        if !(s_max > T::one()) || !(panel_width > T::zero()) || per_panel == 0 {
            return Err(KtcsError::InvalidParams("radial rule needs s_max > 1, positive panels".into()));
        }
        let mut edges: Vec<T> = [0.0, 1e-3, 1e-2, 0.1, 0.5, 1.0].iter().map(|&e| lit(e)).collect();
        let mut e = T::one();
        while e < s_max {
            e = (e + panel_width).min(s_max);
            edges.push(e);
        }
        let pts: Vec<(T, T)> = edges.windows(2).flat_map(|w| gauss_legendre_on(per_panel, w[0], w[1])).collect();
        let nodes = pts
            .par_iter()
            .map(|&(s, w)| Ok((s, w, weight_tilde(s * s * s, p, q)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { p, q, nodes })
    }

    /// `∫₀^∞ W̃(x) f(x) dx = ∫ W̃(s³) f(s³) 3s² ds`.
    pub fn integrate(&self, f: impl Fn(T) -> T) -> T {
        self.nodes.iter().map(|&(s, w, wt)| w * wt * f(s * s * s) * lit::<T>(3.0) * s * s).sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Moment-problem check `∫ W̃ xⁿ dx = ρ(n)` for `n = 0..=n_max_check`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentProblem {
    pub p: usize,
    pub q: usize,
    pub n_max_check: usize,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEntry {
    pub n: usize,
    pub computed: f64,
    pub expected: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub problem: MomentProblem,
    pub entries: Vec<MomentEntry>,
    pub outer_nodes: usize,
    pub s_max: f64,
    pub max_rel_err: f64,
    pub passed: bool,
}

/// End of the radial range for moments up to `n_max`: where
/// `s^{3n_max+p+q+2} e^{-3s}` (the large-`s` shape of the integrand) has
/// fallen `e^{-40}` below its peak.
fn moment_s_max(n_max: usize, p: usize, q: usize) -> f64 {
    let a = (3 * n_max + p + q + 2) as f64;
    let peak = a / 3.0;
    let log_f = |s: f64| a * s.ln() - 3.0 * s;
    let mut s = peak.max(1.0);
    while log_f(s) > log_f(peak.max(1e-3)) - 40.0 {
        s += 0.5;
    }
    s.max(12.0)
}

/// Computes every moment and its relative error without failing.
pub fn moment_report(problem: &MomentProblem) -> Result<MomentReport> {
    if problem.n_max_check > MAX_MOMENT_ORDER {
        return Err(KtcsError::InvalidParams(format!(
            "moment order {} exceeds the supported maximum {MAX_MOMENT_ORDER}",
            problem.n_max_check
        )));
    }
    let s_max = moment_s_max(problem.n_max_check, problem.p, problem.q);
    let rule = RadialRule::<f64>::new(problem.p, problem.q, s_max, 0.5, 16)?;
    let entries: Vec<MomentEntry> = (0..=problem.n_max_check)
        .map(|n| {
            let computed = rule.integrate(|x| x.powi(n as i32));
            let expected = log_rho::<f64>(n, problem.p, problem.q).exp();
            MomentEntry { n, computed, expected, rel_err: (computed - expected).abs() / expected }
        })
        .collect();
    let max_rel_err = entries.iter().map(|e| e.rel_err).fold(0.0, f64::max);
    Ok(MomentReport {
        problem: *problem,
        passed: max_rel_err <= problem.tolerance,
        entries,
        outer_nodes: rule.len(),
        s_max,
        max_rel_err,
    })
}

/// [`moment_report`], failing with `MomentMismatch` at the first moment
/// outside tolerance.
pub fn verify_moments(problem: &MomentProblem) -> Result<MomentReport> {
    let report = moment_report(problem)?;
    if let Some(bad) = report.entries.iter().find(|e| !(e.rel_err <= problem.tolerance)) {
        return Err(KtcsError::MomentMismatch { n: bad.n, rel_err: bad.rel_err, tolerance: problem.tolerance });
    }
    Ok(report)
}

/// Quadrature grid over the `ξ'` plane: [`RadialRule`] in `s = |ξ'|^{2/3}`
/// times the trapezoid rule in the phase.
#[derive(Debug, Clone)]
pub struct PlaneRule<T> {
    pub radial: RadialRule<T>,
    pub angles: Vec<T>,
}

impl<T: Real> PlaneRule<T> {
    /// `radial_n` nodes (rounded to whole panels of 20) up to `s_max`.
    pub fn new(p: usize, q: usize, radial_n: usize, angular_n: usize, s_max: T) -> Result<Self> {
        if angular_n == 0 || radial_n < 20 {
            return Err(KtcsError::InvalidParams("plane rule needs at least 20 radial and 1 angular node".into()));
        }
        let per_panel = 20;
        // five graded panels cover [0, 1]; the rest is split evenly
        let rest = (radial_n / per_panel).saturating_sub(5).max(1);
        let width = (s_max - T::one()) / T::from_usize_lossy(rest);
        let radial = RadialRule::new(p, q, s_max, width, per_panel)?;
        Ok(Self { radial, angles: periodic_nodes(angular_n) })
    }

    /// `∫ d²ξ' g(ξ') W̃(|ξ'|²)` with `d²ξ' = (3/2) s² ds dφ`.
    fn integrate<V, F>(&self, zero: V, g: F) -> V
    where
        V: Send + std::ops::Add<Output = V> + Clone + Sync,
        F: Fn(Complex<T>, T) -> V + Sync,
    {
        let dphi = T::TAU() / T::from_usize_lossy(self.angles.len());
        self.radial
            .nodes
            .iter()
            .flat_map(|&(s, w, wt)| {
                let r = (s * s * s).sqrt();
                let radial_w = w * wt * lit::<T>(1.5) * s * s * dphi;
                self.angles.iter().map(move |&phi| (polar(r, phi), radial_w))
            })
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&(xi, rw)| g(xi, rw))
            .reduce(|| zero.clone(), |a, b| a + b)
    }
}

/// Outcome of the reproducing-kernel reconstruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelReport {
    pub n_max: usize,
    pub radial_nodes: usize,
    pub angular_nodes: usize,
    /// Largest amplitude error on the residue class.
    pub residual: f64,
    /// Largest amplitude off the residue class.
    pub off_residue: f64,
}

/// Rebuilds `|ξ⟩_{Kj}` from `∫ d²ξ' W(|ξ'|²) |ξ'⟩⟨ξ'|ξ⟩`, which is the
/// self-representation with `N(ξ) N(ξ') W / N²(√(ξ'^*ξ))` written through
/// the overlap, and compares amplitudes `n ≤ n_max`.
pub fn reproducing_kernel_check(
    params: &KtcsParams<f64>,
    n_max: usize,
    radial_n: usize,
    angular_n: usize,
) -> Result<KernelReport> {
    let rule = PlaneRule::<f64>::new(params.p, params.q, radial_n, angular_n, 30.0)?;
    let class = params.chain();
    let xi = params.xi();
    let target = crate::fock::build_ktcs(params, Some(n_max.max(crate::fock::auto_n_max(params)?)))?.truncated(n_max);
    let ln_n_xi = -normalization_series(params, params.z())?.ln_s() * 0.5;
    let zero = vec![Complex::new(0.0, 0.0); n_max + 1];
    let acc = rule.integrate(VecSum(zero.clone()), |xp, w| {
        // W N(ξ')² = W̃/π, so the N(ξ') of the amplitude and of the overlap cancel
        // against 1/N², leaving c̃_n(ξ') S(ξ̄'ξ) N(ξ)
        let s = class.complex_sum(xp.conj() * xi);
        let lnz = xp.norm().ln();
        let mut out = zero.clone();
        for n in class.indices().take_while(|&n| n <= n_max) {
            let ln_mag = if n == 0 { 0.0 } else { n as f64 * lnz } - 0.5 * log_rho::<f64>(n, params.p, params.q)
                + s.ln_scale
                + ln_n_xi;
            out[n] = polar(ln_mag.exp(), n as f64 * xp.arg()) * s.value * (w / std::f64::consts::PI);
        }
        VecSum(out)
    });
    let rebuilt = TrioState { p: params.p, q: params.q, amplitudes: acc.0 };
    let mut residual: f64 = 0.0;
    let mut off: f64 = 0.0;
    for n in 0..=n_max {
        let d = (rebuilt.amplitudes[n] - target.amplitudes[n]).norm();
        if params.supports(n) {
            residual = residual.max(d);
        } else {
            off = off.max(rebuilt.amplitudes[n].norm());
        }
    }
    Ok(KernelReport { n_max, radial_nodes: rule.radial.len(), angular_nodes: angular_n, residual, off_residue: off })
}

#[derive(Clone)]
struct VecSum(Vec<Complex<f64>>);

impl std::ops::Add for VecSum {
    type Output = VecSum;
    fn add(mut self, other: VecSum) -> VecSum {
        for (a, b) in self.0.iter_mut().zip(other.0) {
            *a += b;
        }
        self
    }
}

/// `Σ_j ∫ d²ξ ⟨n|ξ⟩_{Kj} W_{Kj} ⟨ξ|n'⟩_{Kj}` for chain indices `n, n' ≤ n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnityReport {
    pub k: usize,
    pub p: usize,
    pub q: usize,
    /// The check covers this finite principal block of the identity.
    pub n_max: usize,
    pub matrix: Vec<Vec<[f64; 2]>>,
    pub max_deviation: f64,
}

pub fn resolution_of_unity(k: usize, p: usize, q: usize, n_max: usize, radial_n: usize, angular_n: usize) -> Result<UnityReport> {
    if k == 0 {
        return Err(KtcsError::InvalidParams("K must be at least 1".into()));
    }
    let rule = PlaneRule::<f64>::new(p, q, radial_n, angular_n, 30.0)?;
    let dim = n_max + 1;
    let zero = VecSum(vec![Complex::new(0.0, 0.0); dim * dim]);
    // ⟨n|ξ⟩_{Kj} W_{Kj} ⟨ξ|n'⟩_{Kj} = (W̃/π) ξ^n ξ̄^{n'}/√(ρ(n)ρ(n')) when n, n'
    // share the residue class j, and no j contributes otherwise
    let acc = rule.integrate(zero, |xi, w| {
        let mut out = vec![Complex::new(0.0, 0.0); dim * dim];
        let pow: Vec<Complex<f64>> = (0..dim)
            .map(|n| {
                let ln = if n == 0 { 0.0 } else { n as f64 * xi.norm().ln() } - 0.5 * log_rho::<f64>(n, p, q);
                polar(ln.exp(), n as f64 * xi.arg())
            })
            .collect();
        for n in 0..dim {
            for m in 0..dim {
                if n % k == m % k {
                    out[n * dim + m] = pow[n] * pow[m].conj() * (w / std::f64::consts::PI);
                }
            }
        }
        VecSum(out)
    });
    let mut max_dev: f64 = 0.0;
    let matrix: Vec<Vec<[f64; 2]>> = (0..dim)
        .map(|n| {
            (0..dim)
                .map(|m| {
                    let v = acc.0[n * dim + m];
                    let id = if n == m { 1.0 } else { 0.0 };
                    max_dev = max_dev.max((v - Complex::new(id, 0.0)).norm());
                    [v.re, v.im]
                })
                .collect()
        })
        .collect();
    Ok(UnityReport { k, p, q, n_max, matrix, max_deviation: max_dev })
}

/// Outcome of the logarithmic test on `S_n = ρ(Kn+j)^{-1/(2n)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarlemanReport {
    pub k: usize,
    pub j: usize,
    pub p: usize,
    pub q: usize,
    pub n_probe: u64,
    /// `ln S_n / ln n` at `n_probe`.
    pub estimate: f64,
    /// Limit with the `1/ln n` correction removed, from `n_probe/10` and
    /// `n_probe`.
    pub extrapolated: f64,
    /// `-3K/2`
    pub predicted: f64,
    /// `(n, ln S_n / ln n)` at `n_probe/100`, `n_probe/10`, `n_probe`.
    pub trajectory: Vec<(u64, f64)>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// `T < -1`: the series converges and Carleman's condition fails.
    NonUnique,
    /// `T > -1`: Carleman's condition holds.
    Unique,
    /// `T = -1` within rounding.
    Inconclusive,
}

pub const MIN_CARLEMAN_PROBE: u64 = 10_000;

fn log_s(k: usize, j: usize, p: usize, q: usize, n: u64) -> f64 {
    let m = k as u64 * n + j as u64;
    let lr = crate::special::ln_gamma((m + p as u64 + 1) as f64)
        + crate::special::ln_gamma((m + q as u64 + 1) as f64)
        + crate::special::ln_gamma((m + 1) as f64);
    -lr / (2.0 * n as f64)
}

pub fn carleman_test(k: usize, j: usize, p: usize, q: usize, n_probe: u64) -> Result<CarlemanReport> {
    if k == 0 || j >= k {
        return Err(KtcsError::InvalidParams(format!("need 0 <= j < K, got K={k}, j={j}")));
    }
    if n_probe < MIN_CARLEMAN_PROBE {
        return Err(KtcsError::InvalidParams(format!("n_probe must be at least {MIN_CARLEMAN_PROBE}")));
    }
    let t = |n: u64| log_s(k, j, p, q, n) / (n as f64).ln();
    let trajectory: Vec<(u64, f64)> = [n_probe / 100, n_probe / 10, n_probe].iter().map(|&n| (n, t(n))).collect();
    let (n1, t1) = trajectory[1];
    let (n2, t2) = trajectory[2];
    // T(n) ≈ T∞ + c/ln n
    let (l1, l2) = ((n1 as f64).ln(), (n2 as f64).ln());
    let extrapolated = (t2 * l2 - t1 * l1) / (l2 - l1);
    let verdict = if extrapolated < -1.0 - 1e-9 {
        Verdict::NonUnique
    } else if extrapolated > -1.0 + 1e-9 {
        Verdict::Unique
    } else {
        Verdict::Inconclusive
    };
    Ok(CarlemanReport {
        k,
        j,
        p,
        q,
        n_probe,
        estimate: t2,
        extrapolated,
        predicted: -1.5 * k as f64,
        trajectory,
        verdict,
    })
}
