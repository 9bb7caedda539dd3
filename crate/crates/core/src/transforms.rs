//! Index rotation, KTCS ⇄ TCS decompositions, the cross-dimension transform
//! and the coherent-state angular integral.

use num_complex::Complex;

use crate::error::{KtcsError, Result};
use crate::fock::{auto_n_max, build_ktcs, normalization_series, KtcsParams, TrioState};
use crate::quadrature::periodic_nodes;
use crate::scalar::{lit, polar, Real};
use crate::special::ln_factorial;

/// `[x]_K`: `x` itself when nonnegative, otherwise `x + K`.
pub fn bracket_k(x: i64, k: usize) -> usize {
    if x >= 0 {
        x as usize
    } else {
        (x + k as i64) as usize
    }
}

/// `e^{2πi·num/den}`
fn root_of_unity<T: Real>(num: i64, den: usize) -> Complex<T> {
    let m = num.rem_euclid(den as i64);
    polar(T::one(), T::TAU() * T::from_i64(m).unwrap() / T::from_usize_lossy(den))
}

/// `N_{Kj}(z)/N_{K'j'}(z) = sqrt(S_{K'j'}(z)/S_{Kj}(z))`, safe when the
/// denominator state is not normalizable at `z = 0` (ratio 0).
fn norm_ratio<T: Real>(num: &KtcsParams<T>, den: &KtcsParams<T>) -> Result<T> {
    let s_num = normalization_series(num, num.z())?;
    let s_den = normalization_series(den, den.z())?;
    s_num.norm()?;
    if s_den.s() == T::zero() {
        return Ok(T::zero());
    }
    Ok(((s_den.ln_s() - s_num.ln_s()) * lit(0.5)).exp())
}

/// Applies `R̂_{Klm} = (N_{Kl}/N_{Km}) ξ^{-[m-l]_K} (âb̂ĉ)^{[m-l]_K}` to the
/// state `|ξ⟩_{Km}` described by `params`. The output is shorter by
/// `[m-l]_K` chain indices.
pub fn rotate_index<T: Real>(
    params: &KtcsParams<T>,
    state: &TrioState<T>,
    target: usize,
) -> Result<(KtcsParams<T>, TrioState<T>)> {
    if target >= params.k {
        return Err(KtcsError::IndexOutOfRange { index: target, k: params.k });
    }
    let steps = bracket_k(params.j as i64 - target as i64, params.k);
    let out_params = params.with_j(target)?;
    if steps == 0 {
        return Ok((out_params, state.clone()));
    }
    if params.xi_mod == T::zero() {
        return Err(KtcsError::NonNormalizable("rotation needs ξ ≠ 0".into()));
    }
    let ratio = norm_ratio(&out_params, params)?;
    let xi_pow = polar(
        params.xi_mod.powi(steps as i32).recip(),
        -params.xi_arg * T::from_usize_lossy(steps),
    );
    let shifted = state.apply_abc_power(steps);
    Ok((out_params, shifted.scale(xi_pow * ratio)))
}

/// Exact amplitudes on `0..=n_max`, however far that reaches past the
/// automatic truncation.
fn build_full<T: Real>(params: &KtcsParams<T>, n_max: usize) -> Result<TrioState<T>> {
    let auto = auto_n_max(params)?;
    Ok(build_ktcs(params, Some(auto.max(n_max)))?.truncated(n_max))
}

/// A KTCS written as `Σ_{j'} c_{j'} |ξ_{Kj'}, p, q⟩` over the K roots
/// `ξ_{Kj'} = ξ e^{2πij'/K}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TcsSuperposition<T> {
    pub p: usize,
    pub q: usize,
    pub coefficients: Vec<Complex<T>>,
    pub phases: Vec<Complex<T>>,
}

impl<T: Real> TcsSuperposition<T> {
    /// Sums the TCS vectors on `n = 0..=n_max`.
    pub fn reconstruct(&self, n_max: usize) -> Result<TrioState<T>> {
        let mut acc = TrioState::zeros(self.p, self.q, n_max);
        for (c, &root) in self.coefficients.iter().zip(&self.phases) {
            let tcs = build_full(&KtcsParams::new(root, self.p, self.q, 1, 0)?, n_max)?;
            acc = acc.add(&tcs.scale(*c));
        }
        Ok(acc)
    }
}

/// `|ξ⟩_{Kj} = N_{Kj}/(K N) Σ_{j'} e^{-2πijj'/K} |ξ_{Kj'}⟩`.
pub fn ktcs_to_tcs<T: Real>(params: &KtcsParams<T>) -> Result<TcsSuperposition<T>> {
    let tcs = KtcsParams::from_polar(params.xi_mod, params.xi_arg, params.p, params.q, 1, 0)?;
    let ratio = norm_ratio(params, &tcs)? / T::from_usize_lossy(params.k);
    let xi = params.xi();
    let (coefficients, phases) = (0..params.k)
        .map(|jp| {
            let c = root_of_unity::<T>(-((params.j * jp) as i64), params.k) * ratio;
            (c, xi * root_of_unity::<T>(jp as i64, params.k))
        })
        .unzip();
    Ok(TcsSuperposition { p: params.p, q: params.q, coefficients, phases })
}

/// `|ξ, p, q⟩ = N Σ_j |ξ⟩_{Kj}/N_{Kj}`: coefficient and labels of each term.
pub fn tcs_to_ktcs<T: Real>(xi: Complex<T>, p: usize, q: usize, k: usize) -> Result<Vec<(T, KtcsParams<T>)>> {
    let tcs = KtcsParams::new(xi, p, q, 1, 0)?;
    (0..k)
        .map(|j| {
            let part = KtcsParams::new(xi, p, q, k, j)?;
            Ok((norm_ratio(&tcs, &part)?, part))
        })
        .collect()
}

/// `|ξ_{Kj}⟩ = N Σ_{j'} e^{2πijj'/K}/N_{Kj'} |ξ⟩_{Kj'}`, the inverse of
/// [`ktcs_to_tcs`] for the root labelled `j`.
pub fn tcs_root_to_ktcs<T: Real>(
    xi: Complex<T>,
    p: usize,
    q: usize,
    k: usize,
    j: usize,
) -> Result<Vec<(Complex<T>, KtcsParams<T>)>> {
    if j >= k {
        return Err(KtcsError::IndexOutOfRange { index: j, k });
    }
    Ok(tcs_to_ktcs(xi, p, q, k)?
        .into_iter()
        .map(|(c, part)| (root_of_unity::<T>((j * part.j) as i64, k) * c, part))
        .collect())
}

/// Sums `Σ c_i |params_i⟩` on `n = 0..=n_max`.
pub fn superpose<T: Real>(terms: &[(Complex<T>, KtcsParams<T>)], n_max: usize) -> Result<TrioState<T>> {
    let first = terms.first().ok_or_else(|| KtcsError::InvalidParams("empty superposition".into()))?;
    let mut acc = TrioState::zeros(first.1.p, first.1.q, n_max);
    for (c, params) in terms {
        if *c == Complex::new(T::zero(), T::zero()) {
            continue;
        }
        let s = build_full(params, n_max)?;
        acc = acc.add(&s.scale(*c));
    }
    Ok(acc)
}

/// Largest amplitude difference between `|χ e^{-2πij/K}⟩_{Kj'}` and
/// `e^{-2πijj'/K} |χ⟩_{Kj'}`.
pub fn phase_identity_residual<T: Real>(
    chi: Complex<T>,
    p: usize,
    q: usize,
    k: usize,
    j: usize,
    j_prime: usize,
) -> Result<T> {
    let lhs_params = KtcsParams::new(chi * root_of_unity::<T>(-(j as i64), k), p, q, k, j_prime)?;
    let rhs_params = KtcsParams::new(chi, p, q, k, j_prime)?;
    let lhs = build_ktcs(&lhs_params, None)?;
    let rhs = build_ktcs(&rhs_params, Some(lhs.n_max()))?
        .scale(root_of_unity::<T>(-((j * j_prime) as i64), k));
    Ok(lhs.max_abs_diff(&rhs))
}

/// Coefficients of `|ξ⟩_{Kj}` in the basis `|ξ_{Kj''}⟩_{K'j'}`:
/// entry `[j'][j'']` is `N_{Kj}/(K N_{K'j'}) · e^{-2πijj''/K}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossDimension<T> {
    pub source: KtcsParams<T>,
    pub target_k: usize,
    pub matrix: Vec<Vec<Complex<T>>>,
}

impl<T: Real> CrossDimension<T> {
    /// The `K'·K` terms as (coefficient, labels) pairs.
    pub fn terms(&self) -> Result<Vec<(Complex<T>, KtcsParams<T>)>> {
        let xi = self.source.xi();
        let mut out = Vec::with_capacity(self.target_k * self.source.k);
        for (jp, row) in self.matrix.iter().enumerate() {
            for (jpp, &c) in row.iter().enumerate() {
                let root = xi * root_of_unity::<T>(jpp as i64, self.source.k);
                out.push((c, KtcsParams::new(root, self.source.p, self.source.q, self.target_k, jp)?));
            }
        }
        Ok(out)
    }

    pub fn reconstruct(&self, n_max: usize) -> Result<TrioState<T>> {
        superpose(&self.terms()?, n_max)
    }
}

pub fn cross_dimension<T: Real>(params: &KtcsParams<T>, target_k: usize) -> Result<CrossDimension<T>> {
    if target_k == 0 {
        return Err(KtcsError::InvalidParams("K' must be at least 1".into()));
    }
    let k = params.k;
    let mut matrix = Vec::with_capacity(target_k);
    for jp in 0..target_k {
        let part = KtcsParams::from_polar(params.xi_mod, params.xi_arg, params.p, params.q, target_k, jp)?;
        // N_{Kj}/N_{K'j'}; the N_{K'j'} evaluated at the common modulus r²
        let ratio = norm_ratio(params, &part)? / T::from_usize_lossy(k);
        let row = (0..k).map(|jpp| root_of_unity::<T>(-((params.j * jpp) as i64), k) * ratio).collect();
        matrix.push(row);
    }
    Ok(CrossDimension { source: *params, target_k, matrix })
}

/// Reconstruction of `|ξ⟩_{Kj}` from the double angular integral over three
/// phase-correlated coherent states with `αβγ = ξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherentReconstruction<T> {
    /// Chain amplitudes `|n+q, n+p, n⟩`.
    pub state: TrioState<T>,
    /// Norm of the reconstructed components off the chain (aliasing of the
    /// angular quadrature).
    pub off_chain_norm: T,
    pub quadrature_n: usize,
}

/// Evaluates the angular integral with the uniform trapezoid rule in both
/// angles. The `j'`-th root uses `α_{Kj'} = α e^{2πij'/K}`, `β`, `γ`
/// unchanged, so that `α_{Kj'}β_{Kj'}γ_{Kj'} = ξ_{Kj'}`. The coherent states
/// are expanded on the box `n_a, n_b, n_c ≤ n_max + max(p, q)`.
pub fn coherent_integral_reconstruct<T: Real>(
    params: &KtcsParams<T>,
    alpha: Complex<T>,
    beta: Complex<T>,
    gamma: Complex<T>,
    quadrature_n: usize,
    n_max: usize,
) -> Result<CoherentReconstruction<T>> {
    if (alpha * beta * gamma - params.xi()).norm() >= lit(1e-12) {
        return Err(KtcsError::ConstraintViolated(format!(
            "αβγ = {} differs from ξ = {}",
            alpha * beta * gamma,
            params.xi()
        )));
    }
    if params.xi_mod == T::zero() {
        return Err(KtcsError::ConstraintViolated("ξ = 0 leaves the coherent amplitudes degenerate".into()));
    }
    if quadrature_n == 0 {
        return Err(KtcsError::InvalidParams("quadrature_n must be positive".into()));
    }
    let k = params.k;
    let (p, q) = (params.p, params.q);
    let cache = normalization_series(params, params.z())?;
    let norm = cache.norm()?;
    let dim = n_max + p.max(q) + 1;
    let zero = Complex::new(T::zero(), T::zero());

    // trapezoid sums A(m) = (1/n) Σ_s e^{i m θ_s} for every integer m in range
    let thetas = periodic_nodes::<T>(quadrature_n);
    let span = 2 * dim + p + q + 1;
    let offset = dim + p + q;
    let mut fourier = vec![zero; span + offset];
    for (idx, f) in fourier.iter_mut().enumerate() {
        let m = T::from_i64(idx as i64 - offset as i64).unwrap();
        let sum: Complex<T> = thetas.iter().map(|&t| polar(T::one(), m * t)).sum();
        *f = sum / T::from_usize_lossy(quadrature_n);
    }
    let a_of = |m: i64| fourier[(m + offset as i64) as usize];

    let ln_fact: Vec<T> = (0..dim).map(ln_factorial::<T>).collect();
    let mut chain = TrioState::zeros(p, q, n_max);
    let mut off_chain = T::zero();

    let mut amps = vec![zero; dim * dim * dim];
    for jp in 0..k {
        let phase = root_of_unity::<T>(jp as i64, k);
        let a = alpha * phase;
        let weight = root_of_unity::<T>(-((params.j * jp) as i64), k) * norm / T::from_usize_lossy(k)
            / (a.powu(q as u32) * beta.powu(p as u32));
        // Fock coefficients without the Gaussian factor, which the prefactor
        // exp[(|α|²+|β|²+|γ|²)/2] cancels
        let pw = |c: Complex<T>, n: usize| -> Complex<T> {
            if n == 0 {
                Complex::new(T::one(), T::zero())
            } else {
                c.powu(n as u32) * (-ln_fact[n] * lit(0.5)).exp()
            }
        };
        for na in 0..dim {
            let ca = pw(a, na);
            for nb in 0..dim {
                let cb = pw(beta, nb);
                for nc in 0..dim {
                    let angular = a_of(na as i64 - nc as i64 - q as i64) * a_of(nb as i64 - nc as i64 - p as i64);
                    if angular == zero {
                        continue;
                    }
                    let coef = ca * cb * pw(gamma, nc) * angular * weight;
                    amps[(na * dim + nb) * dim + nc] += coef;
                }
            }
        }
    }
    for na in 0..dim {
        for nb in 0..dim {
            for nc in 0..dim {
                let v = amps[(na * dim + nb) * dim + nc];
                let on_chain = na == nc + q && nb == nc + p && nc <= n_max;
                if on_chain {
                    chain.amplitudes[nc] = v;
                } else {
                    off_chain += v.norm_sqr();
                }
            }
        }
    }
    Ok(CoherentReconstruction { state: chain, off_chain_norm: off_chain.sqrt(), quadrature_n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn bracket_both_branches() {
        assert_eq!(bracket_k(2, 5), 2);
        assert_eq!(bracket_k(0, 5), 0);
        assert_eq!(bracket_k(-2, 5), 3);
        assert_eq!(bracket_k(-1, 2), 1);
    }

    #[test]
    fn rotate_same_index_is_identity() {
        let p = KtcsParams::new(Complex64::new(1.2, 0.3), 1, 0, 3, 1).unwrap();
        let s = build_ktcs(&p, None).unwrap();
        let (p2, s2) = rotate_index(&p, &s, 1).unwrap();
        assert_eq!(p2, p);
        assert_eq!(s2, s);
    }

    #[test]
    fn rotate_rejects_out_of_range() {
        let p = KtcsParams::new(Complex64::new(1.2, 0.3), 1, 0, 3, 1).unwrap();
        let s = build_ktcs(&p, None).unwrap();
        assert!(matches!(rotate_index(&p, &s, 3), Err(KtcsError::IndexOutOfRange { index: 3, k: 3 })));
    }

    #[test]
    fn single_dimension_decomposition_is_trivial() {
        let p = KtcsParams::new(Complex64::new(0.7, -0.2), 2, 1, 1, 0).unwrap();
        let d = ktcs_to_tcs(&p).unwrap();
        assert_eq!(d.coefficients.len(), 1);
        assert!((d.coefficients[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let t = tcs_to_ktcs(Complex64::new(0.7, -0.2), 2, 1, 1).unwrap();
        assert_eq!(t.len(), 1);
        assert!((t[0].0 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn coherent_integral_rejects_bad_constraint() {
        let p = KtcsParams::new(Complex64::new(1.0, 0.0), 0, 0, 2, 0).unwrap();
        let one = Complex64::new(1.0, 0.0);
        let r = coherent_integral_reconstruct(&p, one, one, one * 1.1, 16, 6);
        assert!(matches!(r, Err(KtcsError::ConstraintViolated(_))));
        let zp = KtcsParams::new(Complex64::new(0.0, 0.0), 1, 1, 1, 0).unwrap();
        let z = Complex64::new(0.0, 0.0);
        assert!(matches!(
            coherent_integral_reconstruct(&zp, z, z, z, 16, 6),
            Err(KtcsError::ConstraintViolated(_))
        ));
    }
}
