//! Truncated Fock-space representation of K-dimensional trio coherent states.
//!
//! A state with charges `(p, q)` lives on the correlated chain
//! `|n+q⟩_a |n+p⟩_b |n⟩_c`, so it is stored as one complex amplitude per chain
//! index `n`. All factorial weights are handled in the log domain: the
//! moment sequence `ρ(n) = (n+p)! (n+q)! n!` overflows `f64` near `n ≈ 57`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{KtcsError, Result};
use crate::scalar::{lit, polar, Real};
use crate::special::ln_factorial;

/// Relative size below which a series term is dropped.
pub const SERIES_REL_TOL: f64 = 1e-18;

/// Dropped tail probability targeted by automatic truncation.
pub const AUTO_TAIL: f64 = 1e-14;

/// Largest tail probability accepted for an explicit truncation.
pub const MAX_TAIL: f64 = 1e-8;

const MAX_TERMS: usize = 50_000_000;

/// `ln ρ_{pq0}(n) = ln[(n+p)! (n+q)! n!]`.
pub fn log_rho<T: Real>(n: usize, p: usize, q: usize) -> T {
    ln_factorial::<T>(n + p) + ln_factorial::<T>(n + q) + ln_factorial::<T>(n)
}

/// Labels of one state `|ξ, p, q⟩_{Kj}`; ξ is kept in polar form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KtcsParams<T> {
    pub xi_mod: T,
    pub xi_arg: T,
    pub p: usize,
    pub q: usize,
    pub k: usize,
    pub j: usize,
}

impl<T: Real> KtcsParams<T> {
    pub fn new(xi: Complex<T>, p: usize, q: usize, k: usize, j: usize) -> Result<Self> {
        Self::from_polar(xi.norm(), if xi.norm() > T::zero() { xi.arg() } else { T::zero() }, p, q, k, j)
    }

    pub fn from_polar(xi_mod: T, xi_arg: T, p: usize, q: usize, k: usize, j: usize) -> Result<Self> {
        if k == 0 {
            return Err(KtcsError::InvalidParams("K must be at least 1".into()));
        }
        if j >= k {
            return Err(KtcsError::InvalidParams(format!("j={j} must satisfy 0 <= j < K={k}")));
        }
        if !(xi_mod >= T::zero()) || !xi_mod.is_finite() || !xi_arg.is_finite() {
            return Err(KtcsError::InvalidParams(format!("|xi|={xi_mod}, arg={xi_arg} is not a valid modulus/phase")));
        }
        Ok(Self { xi_mod, xi_arg, p, q, k, j })
    }

    /// Validates signed inputs as they arrive from the command line.
    pub fn from_signed(xi: Complex<T>, p: i64, q: i64, k: i64, j: i64) -> Result<Self> {
        if p < 0 || q < 0 {
            return Err(KtcsError::InvalidParams(format!("charges must be nonnegative (p={p}, q={q})")));
        }
        if k < 1 {
            return Err(KtcsError::InvalidParams(format!("K={k} must be positive")));
        }
        if j < 0 || j >= k {
            return Err(KtcsError::InvalidParams(format!("j={j} must satisfy 0 <= j < K={k}")));
        }
        Self::new(xi, p as usize, q as usize, k as usize, j as usize)
    }

    pub fn xi(&self) -> Complex<T> {
        polar(self.xi_mod, self.xi_arg)
    }

    /// `z = |ξ|²`
    pub fn z(&self) -> T {
        self.xi_mod * self.xi_mod
    }

    pub fn with_j(&self, j: usize) -> Result<Self> {
        Self::from_polar(self.xi_mod, self.xi_arg, self.p, self.q, self.k, j)
    }

    pub fn with_xi(&self, xi: Complex<T>) -> Result<Self> {
        Self::new(xi, self.p, self.q, self.k, self.j)
    }

    pub fn chain(&self) -> ChainClass {
        ChainClass { k: self.k, j: self.j, p: self.p, q: self.q }
    }

    /// Whether chain index `n` belongs to the residue class of this state.
    pub fn supports(&self, n: usize) -> bool {
        n % self.k == self.j
    }
}

/// A residue class `n ≡ j (mod K)` of the chain with charges `(p, q)`;
/// everything the normalization series depends on besides `z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChainClass {
    pub k: usize,
    pub j: usize,
    pub p: usize,
    pub q: usize,
}

/// Sums sharing a common log scale: the true value of `sums[i]` is
/// `exp(ln_scale) · sums[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledSums<T> {
    pub ln_scale: T,
    pub sums: Vec<T>,
    pub terms_used: usize,
}

impl<T: Real> ScaledSums<T> {
    pub fn value(&self, i: usize) -> T {
        self.sums[i] * self.ln_scale.exp()
    }
}

impl ChainClass {
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        (self.j..).step_by(self.k)
    }

    /// `Σ_{n ≡ j} w_i(n) z^n / ρ(n)` for each weight `w_i`, summed in the log
    /// domain with a running rescale. Terms are log-concave in `n`, so once
    /// past the peak the loop stops at the first term below
    /// [`SERIES_REL_TOL`] of every partial sum.
    pub fn weighted_sums<T: Real>(&self, z: T, weights: &[&dyn Fn(usize) -> T]) -> ScaledSums<T> {
        let m = weights.len();
        if z == T::zero() {
            // only the n = 0 term survives
            let sums = if self.j == 0 {
                let r0 = (-log_rho::<T>(0, self.p, self.q)).exp();
                weights.iter().map(|w| w(0) * r0).collect()
            } else {
                vec![T::zero(); m]
            };
            return ScaledSums { ln_scale: T::zero(), sums, terms_used: 1 };
        }
        let ln_z = z.ln();
        let tol: T = lit(SERIES_REL_TOL);
        let mut shift = T::neg_infinity();
        let mut sums = vec![T::zero(); m];
        let mut prev_lt = T::neg_infinity();
        let mut terms = 0;
        for n in self.indices() {
            let lt = T::from_usize_lossy(n) * ln_z - log_rho::<T>(n, self.p, self.q);
            if lt > shift {
                let rescale = (shift - lt).exp();
                for s in sums.iter_mut() {
                    *s *= rescale;
                }
                shift = lt;
            }
            let t = (lt - shift).exp();
            let mut negligible = lt < prev_lt;
            for (s, w) in sums.iter_mut().zip(weights) {
                let term = w(n) * t;
                *s += term;
                if !(term.abs() <= tol * s.abs()) {
                    negligible = false;
                }
            }
            terms += 1;
            prev_lt = lt;
            if negligible || terms >= MAX_TERMS {
                break;
            }
        }
        ScaledSums { ln_scale: shift, sums, terms_used: terms }
    }

    /// `Σ_{n ≡ j} w^n / ρ(n)` for complex `w`, phase tracked separately from
    /// the log magnitude.
    pub fn complex_sum<T: Real>(&self, w: Complex<T>) -> ComplexSeries<T> {
        let r = w.norm();
        if r == T::zero() {
            let v = if self.j == 0 { (-log_rho::<T>(0, self.p, self.q)).exp() } else { T::zero() };
            return ComplexSeries { ln_scale: T::zero(), value: Complex::new(v, T::zero()) };
        }
        let ln_r = r.ln();
        let theta = w.arg();
        let tol: T = lit(SERIES_REL_TOL);
        let mut shift = T::neg_infinity();
        let mut acc = Complex::new(T::zero(), T::zero());
        // the magnitude sum bounds cancellation so stopping is phase independent
        let mut mag = T::zero();
        let mut prev_lt = T::neg_infinity();
        for (count, n) in self.indices().enumerate() {
            let nf = T::from_usize_lossy(n);
            let lt = nf * ln_r - log_rho::<T>(n, self.p, self.q);
            if lt > shift {
                let rescale = (shift - lt).exp();
                acc = acc * rescale;
                mag *= rescale;
                shift = lt;
            }
            let t = (lt - shift).exp();
            acc += polar(t, nf * theta);
            mag += t;
            if (lt < prev_lt && t <= tol * mag) || count >= MAX_TERMS {
                break;
            }
            prev_lt = lt;
        }
        ComplexSeries { ln_scale: shift, value: acc }
    }
}

/// `exp(ln_scale) · value`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexSeries<T> {
    pub ln_scale: T,
    pub value: Complex<T>,
}

impl<T: Real> ComplexSeries<T> {
    pub fn unscaled(&self) -> Complex<T> {
        self.value * self.ln_scale.exp()
    }

    /// `ln |value|`
    pub fn ln_norm(&self) -> T {
        self.ln_scale + self.value.norm().ln()
    }
}

/// `S(z) = N⁻²` and its first two z-derivatives, stored on a common log scale.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesCache<T> {
    pub z: T,
    pub ln_scale: T,
    s: T,
    ds: T,
    d2s: T,
    pub terms_used: usize,
}

impl<T: Real> SeriesCache<T> {
    pub fn s(&self) -> T {
        self.s * self.ln_scale.exp()
    }

    pub fn ds(&self) -> T {
        self.ds * self.ln_scale.exp()
    }

    pub fn d2s(&self) -> T {
        self.d2s * self.ln_scale.exp()
    }

    pub fn ln_s(&self) -> T {
        self.ln_scale + self.s.ln()
    }

    /// `S'/S`
    pub fn ratio1(&self) -> T {
        self.ds / self.s
    }

    /// `S''/S`
    pub fn ratio2(&self) -> T {
        self.d2s / self.s
    }

    /// `N = S^{-1/2}`
    pub fn norm(&self) -> Result<T> {
        if self.s > T::zero() {
            Ok((-self.ln_s() * lit(0.5)).exp())
        } else {
            Err(KtcsError::NonNormalizable(format!(
                "normalization series vanishes at z={} (j > 0 at the origin)",
                self.z
            )))
        }
    }
}

/// Evaluates `S`, `S'`, `S''` term by term.
pub fn normalization_series<T: Real>(params: &KtcsParams<T>, z: T) -> Result<SeriesCache<T>> {
    normalization_series_for(&params.chain(), z)
}

pub fn normalization_series_for<T: Real>(class: &ChainClass, z: T) -> Result<SeriesCache<T>> {
    if !(z >= T::zero()) || !z.is_finite() {
        return Err(KtcsError::DomainError(format!("normalization series needs z >= 0, got {z}")));
    }
    if z == T::zero() {
        let coef = |n: usize| -> T {
            if n % class.k == class.j {
                (-log_rho::<T>(n, class.p, class.q)).exp()
            } else {
                T::zero()
            }
        };
        return Ok(SeriesCache {
            z,
            ln_scale: T::zero(),
            s: coef(0),
            ds: coef(1),
            d2s: lit::<T>(2.0) * coef(2),
            terms_used: 1,
        });
    }
    let w0 = |_: usize| T::one();
    let w1 = |n: usize| T::from_usize_lossy(n);
    let w2 = |n: usize| {
        let nf = T::from_usize_lossy(n);
        nf * (nf - T::one())
    };
    let sums = class.weighted_sums(z, &[&w0, &w1, &w2]);
    Ok(SeriesCache {
        z,
        ln_scale: sums.ln_scale,
        s: sums.sums[0],
        ds: sums.sums[1] / z,
        d2s: sums.sums[2] / (z * z),
        terms_used: sums.terms_used,
    })
}

/// Which of the three modes an operator acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModeId {
    A,
    B,
    C,
}

impl ModeId {
    pub const ALL: [ModeId; 3] = [ModeId::A, ModeId::B, ModeId::C];

    /// Occupation offset of this mode on the chain: `q` for a, `p` for b.
    pub fn offset(self, p: usize, q: usize) -> usize {
        match self {
            ModeId::A => q,
            ModeId::B => p,
            ModeId::C => 0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ModeId::A => "a",
            ModeId::B => "b",
            ModeId::C => "c",
        }
    }
}

impl std::str::FromStr for ModeId {
    type Err = KtcsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" | "A" => Ok(ModeId::A),
            "b" | "B" => Ok(ModeId::B),
            "c" | "C" => Ok(ModeId::C),
            other => Err(KtcsError::InvalidParams(format!("unknown mode '{other}'"))),
        }
    }
}

/// Amplitudes over the chain `|n+q⟩_a |n+p⟩_b |n⟩_c`, `n = 0..=n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrioState<T> {
    pub p: usize,
    pub q: usize,
    pub amplitudes: Vec<Complex<T>>,
}

impl<T: Real> TrioState<T> {
    pub fn zeros(p: usize, q: usize, n_max: usize) -> Self {
        Self { p, q, amplitudes: vec![Complex::new(T::zero(), T::zero()); n_max + 1] }
    }

    pub fn n_max(&self) -> usize {
        self.amplitudes.len().saturating_sub(1)
    }

    pub fn norm_sqr(&self) -> T {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    /// `(n_a, n_b, n_c)` occupations of chain index `n`.
    pub fn occupations(&self, n: usize) -> (usize, usize, usize) {
        (n + self.q, n + self.p, n)
    }

    /// `⟨self|other⟩` over the common truncation; chains with different
    /// charges are orthogonal.
    pub fn inner(&self, other: &Self) -> Complex<T> {
        if self.p != other.p || self.q != other.q {
            return Complex::new(T::zero(), T::zero());
        }
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum()
    }

    /// `â b̂ ĉ` on the chain: `n → n-1` with weight `√(ρ(n)/ρ(n-1))`. The
    /// result is one index shorter, since the top amplitude would need the
    /// dropped component `n_max + 1`.
    pub fn apply_abc(&self) -> Self {
        let mut out = Vec::with_capacity(self.amplitudes.len().saturating_sub(1));
        for n in 1..self.amplitudes.len() {
            let (na, nb, nc) = self.occupations(n);
            let g = (T::from_usize_lossy(na) * T::from_usize_lossy(nb) * T::from_usize_lossy(nc)).sqrt();
            out.push(self.amplitudes[n] * g);
        }
        Self { p: self.p, q: self.q, amplitudes: out }
    }

    pub fn apply_abc_power(&self, power: usize) -> Self {
        (0..power).fold(self.clone(), |s, _| s.apply_abc())
    }

    /// Multiplies each amplitude by the occupation of `mode`.
    pub fn apply_number(&self, mode: ModeId) -> Self {
        let amplitudes = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(n, &c)| c * T::from_usize_lossy(n + mode.offset(self.p, self.q)))
            .collect();
        Self { p: self.p, q: self.q, amplitudes }
    }

    /// `P̂ = n̂_b − n̂_c`
    pub fn apply_charge_p(&self) -> Self {
        self.apply_number(ModeId::B).sub(&self.apply_number(ModeId::C))
    }

    /// `Q̂ = n̂_a − n̂_c`
    pub fn apply_charge_q(&self) -> Self {
        self.apply_number(ModeId::A).sub(&self.apply_number(ModeId::C))
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        Self { p: self.p, q: self.q, amplitudes: self.amplitudes.iter().map(|&c| c * s).collect() }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(Complex<T>, Complex<T>) -> Complex<T>) -> Self {
        assert_eq!((self.p, self.q), (other.p, other.q), "states on different chains");
        let n = self.amplitudes.len().max(other.amplitudes.len());
        let zero = Complex::new(T::zero(), T::zero());
        let amplitudes = (0..n)
            .map(|i| {
                f(
                    self.amplitudes.get(i).copied().unwrap_or(zero),
                    other.amplitudes.get(i).copied().unwrap_or(zero),
                )
            })
            .collect();
        Self { p: self.p, q: self.q, amplitudes }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn truncated(&self, n_max: usize) -> Self {
        let mut s = self.clone();
        s.amplitudes.resize(n_max + 1, Complex::new(T::zero(), T::zero()));
        s
    }

    /// Largest componentwise difference over the shorter of the two vectors.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| (a - b).norm()).fold(T::zero(), T::max)
    }
}

/// `ln P_n` for the members of the class (other indices have probability 0).
fn log_probabilities<T: Real>(params: &KtcsParams<T>, cache: &SeriesCache<T>, n_hi: usize) -> Vec<(usize, T)> {
    let ln_z = params.z().ln();
    let ln_s = cache.ln_s();
    params
        .chain()
        .indices()
        .take_while(|&n| n <= n_hi)
        .map(|n| {
            let lp = if params.z() == T::zero() {
                if n == 0 { -log_rho::<T>(0, params.p, params.q) - ln_s } else { T::neg_infinity() }
            } else {
                T::from_usize_lossy(n) * ln_z - log_rho::<T>(n, params.p, params.q) - ln_s
            };
            (n, lp)
        })
        .collect()
}

/// Dropped probability `Σ_{n > n_max} P_n` and the auto-truncation bound.
pub fn truncation_tail<T: Real>(params: &KtcsParams<T>, n_max: usize) -> Result<T> {
    let cache = normalization_series(params, params.z())?;
    cache.norm()?;
    let horizon = auto_horizon(params, &cache);
    let tail = log_probabilities(params, &cache, horizon.max(n_max))
        .into_iter()
        .filter(|&(n, _)| n > n_max)
        .map(|(_, lp)| lp.exp())
        .sum();
    Ok(tail)
}

/// Index past which every remaining `P_n` is far below double precision.
fn auto_horizon<T: Real>(params: &KtcsParams<T>, cache: &SeriesCache<T>) -> usize {
    let ln_z = params.z().ln();
    let ln_s = cache.ln_s();
    let floor = lit::<T>(-120.0); // e^-120 ≈ 8e-53
    let mut prev = T::neg_infinity();
    for n in params.chain().indices() {
        if params.z() == T::zero() {
            return n;
        }
        let lp = T::from_usize_lossy(n) * ln_z - log_rho::<T>(n, params.p, params.q) - ln_s;
        if lp < prev && lp < floor {
            return n;
        }
        prev = lp;
    }
    unreachable!("chain index iterator is unbounded")
}

/// Smallest `n_max` whose dropped tail probability is below [`AUTO_TAIL`].
pub fn auto_n_max<T: Real>(params: &KtcsParams<T>) -> Result<usize> {
    let cache = normalization_series(params, params.z())?;
    cache.norm()?;
    let horizon = auto_horizon(params, &cache);
    let probs = log_probabilities(params, &cache, horizon);
    let limit: T = lit(AUTO_TAIL);
    let mut tail = T::zero();
    // walk down from the top; the answer is the last member whose suffix is small
    let mut n_max = params.j;
    for &(n, lp) in probs.iter().rev() {
        let with = tail + lp.exp();
        if with >= limit {
            n_max = n;
            break;
        }
        tail = with;
    }
    Ok(n_max)
}

/// Builds `|ξ, p, q⟩_{Kj}` on `n = 0..=n_max` (automatic when `None`).
pub fn build_ktcs<T: Real>(params: &KtcsParams<T>, n_max: Option<usize>) -> Result<TrioState<T>> {
    let cache = normalization_series(params, params.z())?;
    let ln_norm = -cache.ln_s() * lit(0.5);
    if !(cache.ln_s().is_finite()) {
        return Err(KtcsError::NonNormalizable(format!(
            "normalization series vanishes at z={} (j={} > 0 at the origin)",
            params.z(),
            params.j
        )));
    }
    let n_max = match n_max {
        Some(n) => {
            let tail = truncation_tail(params, n)?;
            if tail > lit(MAX_TAIL) {
                return Err(KtcsError::TruncationTooSmall { n_max: n, tail: tail.as_f64(), limit: MAX_TAIL });
            }
            n
        }
        None => auto_n_max(params)?,
    };
    let mut state = TrioState::zeros(params.p, params.q, n_max);
    let ln_r = params.xi_mod.ln();
    for n in params.chain().indices().take_while(|&n| n <= n_max) {
        let nf = T::from_usize_lossy(n);
        let ln_mag = if n == 0 {
            ln_norm - log_rho::<T>(0, params.p, params.q) * lit(0.5)
        } else {
            ln_norm + nf * ln_r - log_rho::<T>(n, params.p, params.q) * lit(0.5)
        };
        state.amplitudes[n] = polar(ln_mag.exp(), nf * params.xi_arg);
    }
    Ok(state)
}

/// The `K = 1` trio coherent state `|ξ, p, q⟩`.
pub fn build_tcs<T: Real>(xi: Complex<T>, p: usize, q: usize, n_max: Option<usize>) -> Result<TrioState<T>> {
    build_ktcs(&KtcsParams::new(xi, p, q, 1, 0)?, n_max)
}

/// `⟨a|b⟩` from the truncated amplitude vectors.
pub fn overlap<T: Real>(a: (&KtcsParams<T>, &TrioState<T>), b: (&KtcsParams<T>, &TrioState<T>)) -> Complex<T> {
    let (pa, sa) = a;
    let (pb, sb) = b;
    if pa.p != pb.p || pa.q != pb.q {
        return Complex::new(T::zero(), T::zero());
    }
    sa.inner(sb)
}

/// Closed form `⟨ξ', p, q|ξ, p, q⟩_{Kj} = N(|ξ'|²) N(|ξ|²) S(ξ'* ξ)` with
/// Kronecker deltas in `j, p, q`. Both states must share `K`.
pub fn overlap_closed_form<T: Real>(bra: &KtcsParams<T>, ket: &KtcsParams<T>) -> Result<Complex<T>> {
    if bra.k != ket.k {
        return Err(KtcsError::InvalidParams("closed-form overlap needs equal K".into()));
    }
    if bra.j != ket.j || bra.p != ket.p || bra.q != ket.q {
        return Ok(Complex::new(T::zero(), T::zero()));
    }
    let nb = normalization_series(bra, bra.z())?;
    let nk = normalization_series(ket, ket.z())?;
    nb.norm()?;
    nk.norm()?;
    let w = bra.xi().conj() * ket.xi();
    let s = ket.chain().complex_sum(w);
    let ln_mag = s.ln_scale - (nb.ln_s() + nk.ln_s()) * lit(0.5);
    Ok(s.value * ln_mag.exp())
}

/// JSON dump of a state: `{K, j, p, q, xi: [re, im], n_max, amplitudes: [[re, im], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDump {
    #[serde(rename = "K")]
    pub k: usize,
    pub j: usize,
    pub p: usize,
    pub q: usize,
    pub xi: [f64; 2],
    pub n_max: usize,
    pub amplitudes: Vec<[f64; 2]>,
}

impl StateDump {
    pub fn new<T: Real>(params: &KtcsParams<T>, state: &TrioState<T>) -> Self {
        let xi = params.xi();
        Self {
            k: params.k,
            j: params.j,
            p: params.p,
            q: params.q,
            xi: [xi.re.as_f64(), xi.im.as_f64()],
            n_max: state.n_max(),
            amplitudes: state.amplitudes.iter().map(|c| [c.re.as_f64(), c.im.as_f64()]).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("state dump serializes")
    }
}
