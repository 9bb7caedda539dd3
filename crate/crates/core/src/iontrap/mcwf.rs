use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{KtcsError, Result};
use crate::scalar::{lit, Real};

use super::chain::ChainHamiltonian;
use super::{DenseLinalg, SimConfig};

/// Step size is chosen so `Γ h` stays below this.
pub const TARGET_JUMP_PROBABILITY: f64 = 0.01;
/// A step whose jump probability exceeds this is an error.
pub const MAX_JUMP_PROBABILITY: f64 = 0.1;

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trajectory `index`: `SplitMix64(SplitMix64(seed) ⊕ index)`, which
/// then seeds a ChaCha8 stream. Mixing the run seed first keeps runs with
/// neighbouring seeds from drawing permutations of the same streams.
pub fn trajectory_seed(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ index)
}

/// Trajectory averages at one recording time, with standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McwfSnapshot<T> {
    pub t: T,
    pub fidelity: [T; 2],
    pub fidelity_err: [T; 2],
    pub pi: Vec<T>,
    pub pi_err: Vec<T>,
    pub excited: T,
    pub excited_err: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McwfRun<T> {
    /// Trajectory step.
    pub h: T,
    pub n_traj: usize,
    pub mean_jumps: T,
    pub snapshots: Vec<McwfSnapshot<T>>,
}

struct Sector<T> {
    j: usize,
    /// Row-major `exp(−i H_eff h_k)` on `(s, m)` for `h_k = h·2^k`.
    u: Vec<Vec<Complex<T>>>,
    target: Vec<Complex<T>>,
}

/// Per-trajectory record layout: `F0, F1, P_e, Π_0, …`, from an unnormalized
/// state of squared norm `norm2`.
fn observe<T: Real>(sectors: &[Sector<T>], psi: &[Vec<Complex<T>>], norm2: T, n: usize, out: &mut Vec<T>) {
    let mut f = [T::zero(); 2];
    let mut pe = T::zero();
    let mut pi = vec![T::zero(); 2 * n];
    for (sec, v) in sectors.iter().zip(psi) {
        let overlap: Complex<T> = sec.target.iter().zip(&v[..n]).map(|(c, a)| c.conj() * a).sum();
        f[sec.j] = overlap.norm_sqr() / norm2;
        for m in 0..n {
            let (g, e) = (v[m].norm_sqr() / norm2, v[n + m].norm_sqr() / norm2);
            pi[2 * m + sec.j] += g + e;
            pe += e;
        }
    }
    out.extend_from_slice(&f);
    out.push(pe);
    out.extend(pi);
}

/// Quantum-jump unravelling of the master equation in waiting-time form.
/// The unnormalized state follows the exact no-jump propagator
/// `exp(−i H_eff h)` until its squared norm falls below a uniform draw; the
/// step in which that happens is bisected down to the finest step `h`, and
/// `σ₋` is applied at its end. Steps are drawn from `h·2^k` and shrunk until
/// the conditional jump probability of each step is at most
/// [`TARGET_JUMP_PROBABILITY`], with `Γh` itself below that bound.
pub fn mcwf_run<T: DenseLinalg>(cfg: &SimConfig<T>) -> Result<McwfRun<T>> {
    cfg.validate()?;
    let ham = ChainHamiltonian::new(cfg);
    let n = cfg.m_max + 1;
    let d = 2 * n;
    let interval = cfg.record_interval();
    let target: T = lit(TARGET_JUMP_PROBABILITY);
    let mut levels = 0usize;
    while interval * cfg.gamma / T::from_usize_lossy(1 << levels) > target && levels < 40 {
        levels += 1;
    }
    let h = interval / T::from_usize_lossy(1 << levels);

    let weights = [T::one() - cfg.w, cfg.w];
    let mut sectors = Vec::new();
    for j in 0..2 {
        if weights[j] > T::zero() {
            let heff = ham.sector_effective(j, cfg.gamma);
            let u = (0..=levels)
                .map(|k| {
                    let step = h * T::from_usize_lossy(1 << k);
                    let gen: Vec<Complex<T>> = heff.iter().map(|&x| x * Complex::new(T::zero(), -step)).collect();
                    T::expm(&gen, d)
                })
                .collect();
            sectors.push(Sector { j, u, target: cfg.target_vector(j)? });
        }
    }
    let initial: Vec<Vec<Complex<T>>> = sectors
        .iter()
        .map(|s| {
            let mut v = vec![Complex::new(T::zero(), T::zero()); d];
            v[n + cfg.l] = Complex::new(weights[s.j].sqrt(), T::zero());
            v
        })
        .collect();

    let width = 3 + 2 * n;
    let limit = lit::<T>(MAX_JUMP_PROBABILITY);
    let total = 1usize << levels;
    let run = |index: usize| -> Result<(Vec<T>, usize)> {
        let mut rng = ChaCha8Rng::seed_from_u64(trajectory_seed(cfg.seed, index as u64));
        let mut draw = || -> T { T::lit(rng.gen::<f64>()) };
        let mut psi = initial.clone();
        let mut norm2 = T::one();
        let mut next = psi.clone();
        let mut threshold = draw();
        let mut record = Vec::with_capacity(width * (cfg.records + 1));
        let mut jumps = 0;
        observe(&sectors, &psi, norm2, n, &mut record);
        for _ in 0..cfg.records {
            let mut pos = 0usize;
            let mut k_next = levels;
            while pos < total {
                let aligned = if pos == 0 { levels } else { pos.trailing_zeros() as usize };
                let mut k = aligned.min(k_next).min(levels);
                loop {
                    let mut kept = T::zero();
                    for ((sec, v), out) in sectors.iter().zip(&psi).zip(next.iter_mut()) {
                        let u = &sec.u[k];
                        for (r, o) in out.iter_mut().enumerate() {
                            *o = u[r * d..(r + 1) * d].iter().zip(v).map(|(a, b)| *a * *b).sum();
                        }
                        kept += out.iter().map(|c| c.norm_sqr()).sum::<T>();
                    }
                    let dp = T::one() - kept / norm2;
                    if k > 0 && (dp > target || kept < threshold) {
                        k -= 1;
                        continue;
                    }
                    if dp > limit {
                        return Err(KtcsError::StepTooLarge(format!("jump probability {dp} in one step")));
                    }
                    if kept < threshold {
                        let excited: T = next.iter().flat_map(|v| v[n..].iter()).map(|c| c.norm_sqr()).sum();
                        let scale = excited.sqrt().recip();
                        for v in next.iter_mut() {
                            for m in 0..n {
                                v[m] = v[n + m] * scale;
                                v[n + m] = Complex::new(T::zero(), T::zero());
                            }
                        }
                        norm2 = T::one();
                        threshold = draw();
                        jumps += 1;
                    } else {
                        norm2 = kept;
                    }
                    std::mem::swap(&mut psi, &mut next);
                    pos += 1 << k;
                    k_next = k + 1;
                    break;
                }
            }
            observe(&sectors, &psi, norm2, n, &mut record);
        }
        Ok((record, jumps))
    };
    let results = (0..cfg.n_traj).into_par_iter().map(run).collect::<Result<Vec<_>>>()?;

    // reduce in trajectory order so the sums are bit-stable
    let count = T::from_usize_lossy(cfg.n_traj);
    let mut snapshots = Vec::with_capacity(cfg.records + 1);
    for rec in 0..=cfg.records {
        let mut mean = vec![T::zero(); width];
        for (data, _) in &results {
            for k in 0..width {
                mean[k] += data[rec * width + k];
            }
        }
        for m in mean.iter_mut() {
            *m /= count;
        }
        // two passes: long-time spreads are far below the means
        let mut sq = vec![T::zero(); width];
        for (data, _) in &results {
            for k in 0..width {
                let dx = data[rec * width + k] - mean[k];
                sq[k] += dx * dx;
            }
        }
        let err: Vec<T> = sq
            .iter()
            .map(|&s| if cfg.n_traj < 2 { T::zero() } else { (s / (count - T::one()) / count).sqrt() })
            .collect();
        snapshots.push(McwfSnapshot {
            t: interval * T::from_usize_lossy(rec),
            fidelity: [mean[0], mean[1]],
            fidelity_err: [err[0], err[1]],
            excited: mean[2],
            excited_err: err[2],
            pi: mean[3..].to_vec(),
            pi_err: err[3..].to_vec(),
        });
    }
    let mean_jumps = T::from_usize_lossy(results.iter().map(|r| r.1).sum()) / count;
    Ok(McwfRun { h, n_traj: cfg.n_traj, mean_jumps, snapshots })
}
