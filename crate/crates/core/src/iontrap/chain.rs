use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::fock::log_rho;
use crate::scalar::{lit, Real};

use super::{DenseLinalg, SimConfig};

/// Position of `|s, j, m⟩` (`s = 0` ground, `1` excited) in the chain basis.
pub fn basis_index(m_max: usize, s: usize, j: usize, m: usize) -> usize {
    (2 * s + j) * (m_max + 1) + m
}

/// `g_{mj} = √(ρ(2m+j)/ρ(2m−2+j))`, the matrix element of `(âb̂ĉ)²` from
/// chain level `m` to `m − 1`.
pub fn chain_coupling<T: Real>(p: usize, q: usize, j: usize, m: usize) -> T {
    if m == 0 {
        return T::zero();
    }
    let n = 2 * m + j;
    ((log_rho::<T>(n, p, q) - log_rho::<T>(n - 2, p, q)) * lit(0.5)).exp()
}

/// The coupling block `B_j = ζ[(âb̂ĉ)² − ξ²]` of one parity sector,
/// upper bidiagonal in `m`; `H = |e⟩⟨g| ⊗ B + h.c.`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainHamiltonian<T> {
    pub m_max: usize,
    /// `−ζξ²`
    pub diag: Complex<T>,
    /// `sup[j][m] = ζ g_{mj}`, the `(m−1, m)` entry; `sup[j][0] = 0`.
    pub sup: [Vec<Complex<T>>; 2],
}

impl<T: Real> ChainHamiltonian<T> {
    pub fn new(cfg: &SimConfig<T>) -> Self {
        let sup = |j| (0..=cfg.m_max).map(|m| cfg.zeta * chain_coupling::<T>(cfg.p, cfg.q, j, m)).collect();
        Self { m_max: cfg.m_max, diag: -cfg.zeta * cfg.xi_squared(), sup: [sup(0), sup(1)] }
    }

    pub fn dim(&self) -> usize {
        self.m_max + 1
    }

    /// `B_j x`
    pub fn b(&self, j: usize, x: &[Complex<T>], out: &mut [Complex<T>]) {
        let n = self.dim();
        for m in 0..n {
            out[m] = self.diag * x[m] + if m + 1 < n { self.sup[j][m + 1] * x[m + 1] } else { Complex::new(T::zero(), T::zero()) };
        }
    }

    /// `B_j† x`
    pub fn b_adj(&self, j: usize, x: &[Complex<T>], out: &mut [Complex<T>]) {
        let d = self.diag.conj();
        for m in 0..self.dim() {
            out[m] = d * x[m] + if m > 0 { self.sup[j][m].conj() * x[m - 1] } else { Complex::new(T::zero(), T::zero()) };
        }
    }

    /// Row-major `2(m_max+1)` square `H_eff = H − (iΓ/2)|e⟩⟨e|` of sector `j`
    /// on `(s, m)`.
    pub fn sector_effective(&self, j: usize, gamma: T) -> Vec<Complex<T>> {
        let n = self.dim();
        let d = 2 * n;
        let mut h = vec![Complex::new(T::zero(), T::zero()); d * d];
        for m in 0..n {
            // e-row, g-column: B
            h[(n + m) * d + m] = self.diag;
            if m + 1 < n {
                h[(n + m) * d + m + 1] = self.sup[j][m + 1];
            }
            h[(n + m) * d + n + m] = Complex::new(T::zero(), -gamma * lit(0.5));
        }
        for r in 0..n {
            for c in 0..n {
                h[r * d + n + c] = h[(n + c) * d + r].conj();
            }
        }
        h
    }
}

/// Hermitian operator on the full chain basis as `(row, col, value)` triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator<T> {
    pub dim: usize,
    pub entries: Vec<(usize, usize, Complex<T>)>,
}

impl<T: Real> SparseOperator<T> {
    pub fn apply(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut y = vec![Complex::new(T::zero(), T::zero()); self.dim];
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
        y
    }

    pub fn to_dense(&self) -> Vec<Complex<T>> {
        let mut d = vec![Complex::new(T::zero(), T::zero()); self.dim * self.dim];
        for &(r, c, v) in &self.entries {
            d[r * self.dim + c] += v;
        }
        d
    }

    /// `max |H − H†|`
    pub fn max_asymmetry(&self) -> T {
        let d = self.to_dense();
        let n = self.dim;
        (0..n * n).map(|k| (d[k] - d[(k % n) * n + k / n].conj()).norm()).fold(T::zero(), T::max)
    }
}

/// `H = ζ[(âb̂ĉ)² − ξ²]σ₊ + h.c.` on `|s, j, m⟩`.
pub fn build_hamiltonian<T: Real>(cfg: &SimConfig<T>) -> SparseOperator<T> {
    let h = ChainHamiltonian::new(cfg);
    let mm = cfg.m_max;
    let mut entries = Vec::new();
    for j in 0..2 {
        for m in 0..=mm {
            let g = basis_index(mm, 0, j, m);
            let e = basis_index(mm, 1, j, m);
            entries.push((e, g, h.diag));
            entries.push((g, e, h.diag.conj()));
            if m > 0 {
                let e_lower = basis_index(mm, 1, j, m - 1);
                entries.push((e_lower, g, h.sup[j][m]));
                entries.push((g, e_lower, h.sup[j][m].conj()));
            }
        }
    }
    SparseOperator { dim: 4 * (mm + 1), entries }
}

/// Density matrix on `|s, j, m⟩`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDensity<T> {
    pub m_max: usize,
    pub data: Vec<Complex<T>>,
}

impl<T: Real> ChainDensity<T> {
    pub fn dim(&self) -> usize {
        4 * (self.m_max + 1)
    }

    pub fn pure(m_max: usize, psi: &[Complex<T>]) -> Self {
        let d = 4 * (m_max + 1);
        let data = (0..d * d).map(|k| psi[k / d] * psi[k % d].conj()).collect();
        Self { m_max, data }
    }

    pub fn get(&self, r: usize, c: usize) -> Complex<T> {
        self.data[r * self.dim() + c]
    }

    pub fn trace(&self) -> T {
        (0..self.dim()).map(|i| self.get(i, i).re).sum()
    }

    pub fn max_asymmetry(&self) -> T {
        let d = self.dim();
        (0..d * d).map(|k| (self.data[k] - self.data[(k % d) * d + k / d].conj()).norm()).fold(T::zero(), T::max)
    }

    /// `Π_n` for `n = 0..=2m_max+1`, traced over the electronic state.
    pub fn phonon_distribution(&self) -> Vec<T> {
        let mut pi = vec![T::zero(); 2 * (self.m_max + 1)];
        for s in 0..2 {
            for j in 0..2 {
                for m in 0..=self.m_max {
                    let i = basis_index(self.m_max, s, j, m);
                    pi[2 * m + j] += self.get(i, i).re;
                }
            }
        }
        pi
    }

    pub fn excited_population(&self) -> T {
        (0..2).flat_map(|j| (0..=self.m_max).map(move |m| (j, m))).map(|(j, m)| {
            let i = basis_index(self.m_max, 1, j, m);
            self.get(i, i).re
        }).sum()
    }

    /// Population of parity sector `j`.
    pub fn sector_population(&self, j: usize) -> T {
        (0..2).flat_map(|s| (0..=self.m_max).map(move |m| (s, m))).map(|(s, m)| {
            let i = basis_index(self.m_max, s, j, m);
            self.get(i, i).re
        }).sum()
    }

    /// `⟨g, c|ρ|g, c⟩` for chain amplitudes `c` of sector `j`.
    pub fn fidelity(&self, j: usize, target: &[Complex<T>]) -> T {
        let mut acc = Complex::new(T::zero(), T::zero());
        for (a, ca) in target.iter().enumerate() {
            for (b, cb) in target.iter().enumerate() {
                acc += ca.conj() * self.get(basis_index(self.m_max, 0, j, a), basis_index(self.m_max, 0, j, b)) * cb;
            }
        }
        acc.re
    }

    /// `Σ_n (n+q) Π_n − Σ_n n Π_n`, the charge `⟨n̂ₓ⟩ − ⟨n̂_z⟩` for offset `q`
    /// (and likewise `p` for the y mode).
    pub fn mode_difference(&self, offset: usize) -> T {
        self.phonon_distribution()
            .iter()
            .enumerate()
            .map(|(n, &pn)| pn * (T::from_usize_lossy(n + offset) - T::from_usize_lossy(n)))
            .sum()
    }
}

impl<T: DenseLinalg> ChainDensity<T> {
    /// Smallest eigenvalue; PSD within rounding when `>= -1e-9`.
    pub fn min_eigenvalue(&self) -> T {
        let (values, _) = T::hermitian_eigen(&self.data, self.dim());
        values[0]
    }

    /// Dominant eigenvector of the ground-state block of sector `j`, the
    /// phonon state once the ion is dark.
    pub fn phonon_state(&self, j: usize) -> Vec<Complex<T>> {
        let n = self.m_max + 1;
        let block: Vec<Complex<T>> = (0..n * n)
            .map(|k| self.get(basis_index(self.m_max, 0, j, k / n), basis_index(self.m_max, 0, j, k % n)))
            .collect();
        let (_, vectors) = T::hermitian_eigen(&block, n);
        vectors[n - 1].clone()
    }
}

/// `‖(âb̂ĉ)²ψ − ξ²ψ‖` for normalized chain amplitudes `ψ_m` of sector `j`.
pub fn dark_state_residual<T: Real>(cfg: &SimConfig<T>, j: usize, psi: &[Complex<T>]) -> T {
    let norm = psi.iter().map(|c| c.norm_sqr()).sum::<T>().sqrt();
    let x2 = cfg.xi_squared();
    (0..psi.len())
        .map(|m| {
            let lowered = if m + 1 < psi.len() {
                psi[m + 1] * chain_coupling::<T>(cfg.p, cfg.q, j, m + 1)
            } else {
                Complex::new(T::zero(), T::zero())
            };
            ((lowered - x2 * psi[m]) / norm).norm_sqr()
        })
        .sum::<T>()
        .sqrt()
}
