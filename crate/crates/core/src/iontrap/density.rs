use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{KtcsError, Result};
use crate::scalar::{lit, Real};

use super::chain::{basis_index, ChainDensity, ChainHamiltonian};
use super::{SimConfig, TRACE_DRIFT_LIMIT};

/// Observables of the density oracle at one recording time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySnapshot<T> {
    pub t: T,
    pub fidelity: [T; 2],
    pub pi: Vec<T>,
    pub excited: T,
    pub sector: [T; 2],
    pub trace: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRun<T> {
    pub dt: T,
    pub steps: usize,
    pub snapshots: Vec<DensitySnapshot<T>>,
    pub final_state: ChainDensity<T>,
    pub max_trace_drift: T,
}

// A block `ρ_{ab}` between parity sectors a and b holds four `n × n`
// sub-blocks in the order gg, ge, eg, ee.
const GG: usize = 0;
const GE: usize = 1;
const EG: usize = 2;
const EE: usize = 3;

struct Rhs<'a, T> {
    h: &'a ChainHamiltonian<T>,
    gamma: T,
    n: usize,
}

impl<T: Real> Rhs<'_, T> {
    fn at(&self, y: &[Complex<T>], s: usize, i: usize, k: usize) -> Complex<T> {
        y[s * self.n * self.n + i * self.n + k]
    }

    /// `(B_a X)[i][k]`
    fn bl(&self, a: usize, y: &[Complex<T>], s: usize, i: usize, k: usize) -> Complex<T> {
        let mut v = self.h.diag * self.at(y, s, i, k);
        if i + 1 < self.n {
            v += self.h.sup[a][i + 1] * self.at(y, s, i + 1, k);
        }
        v
    }

    /// `(B_a† X)[i][k]`
    fn bl_adj(&self, a: usize, y: &[Complex<T>], s: usize, i: usize, k: usize) -> Complex<T> {
        let mut v = self.h.diag.conj() * self.at(y, s, i, k);
        if i > 0 {
            v += self.h.sup[a][i].conj() * self.at(y, s, i - 1, k);
        }
        v
    }

    /// `(X B_b)[i][k]`
    fn br(&self, b: usize, y: &[Complex<T>], s: usize, i: usize, k: usize) -> Complex<T> {
        let mut v = self.at(y, s, i, k) * self.h.diag;
        if k > 0 {
            v += self.at(y, s, i, k - 1) * self.h.sup[b][k];
        }
        v
    }

    /// `(X B_b†)[i][k]`
    fn br_adj(&self, b: usize, y: &[Complex<T>], s: usize, i: usize, k: usize) -> Complex<T> {
        let mut v = self.at(y, s, i, k) * self.h.diag.conj();
        if k + 1 < self.n {
            v += self.at(y, s, i, k + 1) * self.h.sup[b][k + 1].conj();
        }
        v
    }

    /// `dρ_{ab}/dt` with `H = |e⟩⟨g| ⊗ B + h.c.`, jump `σ₋`.
    fn eval(&self, a: usize, b: usize, y: &[Complex<T>], out: &mut [Complex<T>]) {
        let n = self.n;
        let mi = Complex::new(T::zero(), -T::one());
        let g = self.gamma;
        let half = g * lit(0.5);
        for i in 0..n {
            for k in 0..n {
                let o = i * n + k;
                let ee = self.at(y, EE, i, k);
                out[GG * n * n + o] =
                    mi * (self.bl_adj(a, y, EG, i, k) - self.br(b, y, GE, i, k)) + ee * g;
                out[GE * n * n + o] =
                    mi * (self.bl_adj(a, y, EE, i, k) - self.br_adj(b, y, GG, i, k)) - self.at(y, GE, i, k) * half;
                out[EG * n * n + o] =
                    mi * (self.bl(a, y, GG, i, k) - self.br(b, y, EE, i, k)) - self.at(y, EG, i, k) * half;
                out[EE * n * n + o] = mi * (self.bl(a, y, GE, i, k) - self.br_adj(b, y, EG, i, k)) - ee * g;
            }
        }
    }
}

fn block_of<T: Real>(rho: &ChainDensity<T>, a: usize, b: usize) -> Vec<Complex<T>> {
    let mm = rho.m_max;
    let n = mm + 1;
    let mut y = vec![Complex::new(T::zero(), T::zero()); 4 * n * n];
    for s in 0..2 {
        for s2 in 0..2 {
            for i in 0..n {
                for k in 0..n {
                    y[(2 * s + s2) * n * n + i * n + k] = rho.get(basis_index(mm, s, a, i), basis_index(mm, s2, b, k));
                }
            }
        }
    }
    y
}

fn write_block<T: Real>(rho: &mut ChainDensity<T>, a: usize, b: usize, y: &[Complex<T>]) {
    let mm = rho.m_max;
    let n = mm + 1;
    let d = rho.dim();
    for s in 0..2 {
        for s2 in 0..2 {
            for i in 0..n {
                for k in 0..n {
                    let v = y[(2 * s + s2) * n * n + i * n + k];
                    let (r, c) = (basis_index(mm, s, a, i), basis_index(mm, s2, b, k));
                    rho.data[r * d + c] = v;
                    if a != b {
                        rho.data[c * d + r] = v.conj();
                    }
                }
            }
        }
    }
}

/// Frobenius norm of `dρ/dt` for the configured Liouvillian.
pub fn lindblad_rhs_norm<T: Real>(cfg: &SimConfig<T>, rho: &ChainDensity<T>) -> T {
    let h = ChainHamiltonian::new(cfg);
    let n = cfg.m_max + 1;
    let rhs = Rhs { h: &h, gamma: cfg.gamma, n };
    let mut out = vec![Complex::new(T::zero(), T::zero()); 4 * n * n];
    let mut total = T::zero();
    for a in 0..2 {
        for b in 0..2 {
            rhs.eval(a, b, &block_of(rho, a, b), &mut out);
            total += out.iter().map(|v| v.norm_sqr()).sum::<T>();
        }
    }
    total.sqrt()
}

fn snapshot<T: Real>(t: T, rho: &ChainDensity<T>, targets: &[Vec<Complex<T>>; 2]) -> DensitySnapshot<T> {
    DensitySnapshot {
        t,
        fidelity: [rho.fidelity(0, &targets[0]), rho.fidelity(1, &targets[1])],
        pi: rho.phonon_distribution(),
        excited: rho.excited_population(),
        sector: [rho.sector_population(0), rho.sector_population(1)],
        trace: rho.trace(),
    }
}

/// Classic fourth-order Runge–Kutta on the master equation. Steps are the
/// largest that divide the recording interval without exceeding `cfg.dt`.
/// Blocks between parity sectors that start empty stay empty and are never
/// integrated.
pub fn evolve_density<T: Real>(cfg: &SimConfig<T>) -> Result<DensityRun<T>> {
    cfg.validate()?;
    let h = ChainHamiltonian::new(cfg);
    let n = cfg.m_max + 1;
    let rhs = Rhs { h: &h, gamma: cfg.gamma, n };
    let targets = [cfg.target_vector(0)?, cfg.target_vector(1)?];
    let mut rho = ChainDensity::pure(cfg.m_max, &cfg.initial_state());

    let interval = cfg.record_interval();
    let per_record = (interval / cfg.dt).ceil().to_usize().unwrap_or(usize::MAX).max(1);
    let dt = interval / T::from_usize_lossy(per_record);

    let mut pairs: Vec<((usize, usize), Vec<Complex<T>>)> = [(0, 0), (1, 1), (0, 1)]
        .iter()
        .map(|&(a, b)| ((a, b), block_of(&rho, a, b)))
        .filter(|(_, y)| y.iter().any(|v| v.norm_sqr() > T::zero()))
        .collect();

    let len = 4 * n * n;
    let zero = Complex::new(T::zero(), T::zero());
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![zero; len], vec![zero; len], vec![zero; len], vec![zero; len], vec![zero; len]);
    let half: T = lit(0.5);
    let sixth = dt / lit(6.0);

    let mut snapshots = vec![snapshot(T::zero(), &rho, &targets)];
    let mut max_drift = T::zero();
    for record in 1..=cfg.records {
        for ((a, b), y) in pairs.iter_mut() {
            let (a, b) = (*a, *b);
            for _ in 0..per_record {
                rhs.eval(a, b, y, &mut k1);
                for i in 0..len {
                    tmp[i] = y[i] + k1[i] * (dt * half);
                }
                rhs.eval(a, b, &tmp, &mut k2);
                for i in 0..len {
                    tmp[i] = y[i] + k2[i] * (dt * half);
                }
                rhs.eval(a, b, &tmp, &mut k3);
                for i in 0..len {
                    tmp[i] = y[i] + k3[i] * dt;
                }
                rhs.eval(a, b, &tmp, &mut k4);
                for i in 0..len {
                    y[i] += (k1[i] + (k2[i] + k3[i]) * lit::<T>(2.0) + k4[i]) * sixth;
                }
            }
        }
        for ((a, b), y) in &pairs {
            write_block(&mut rho, *a, *b, y);
        }
        let snap = snapshot(interval * T::from_usize_lossy(record), &rho, &targets);
        let drift = (snap.trace - T::one()).abs();
        max_drift = max_drift.max(drift);
        if !(drift <= lit(TRACE_DRIFT_LIMIT)) {
            return Err(KtcsError::StepTooLarge(format!("trace drifted by {drift} at t={}", snap.t)));
        }
        snapshots.push(snap);
    }
    Ok(DensityRun { dt, steps: per_record * cfg.records, snapshots, final_state: rho, max_trace_drift: max_drift })
}
