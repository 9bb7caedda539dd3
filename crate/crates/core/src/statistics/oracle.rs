//! Brute-force moments: explicit probability table, plain summation.
//!
//! Nothing here goes through the normalization series or its derivatives;
//! `ln ρ(n)` is accumulated one factor at a time.

use crate::error::{KtcsError, Result};
use crate::fock::{ChainClass, ModeId};
use crate::scalar::{lit, Real};

use super::{CsiMeasures, MandelTriple, ModePair};

/// Probability table `(n, P_n)` over the residue class, cut once terms past
/// the peak drop 300 e-folds below it.
#[derive(Debug, Clone)]
pub struct Table<T> {
    pub p: usize,
    pub q: usize,
    pub rows: Vec<(usize, T)>,
}

impl<T: Real> Table<T> {
    pub fn new(class: &ChainClass, z: T) -> Result<Self> {
        if !(z > T::zero()) {
            return Err(KtcsError::DomainError(format!("oracle needs z > 0, got {z}")));
        }
        let ln_z = z.ln();
        let mut ln_rho = T::zero();
        let mut logs = Vec::new();
        let mut peak = T::neg_infinity();
        let mut n = 0usize;
        loop {
            if n > 0 {
                let f = |m: usize| T::from_usize_lossy(m).ln();
                ln_rho += f(n + class.p) + f(n + class.q) + f(n);
            }
            if n % class.k == class.j {
                let lt = T::from_usize_lossy(n) * ln_z - ln_rho;
                peak = peak.max(lt);
                logs.push((n, lt));
                if lt < peak - lit(300.0) {
                    break;
                }
            }
            n += 1;
        }
        let total: T = logs.iter().map(|&(_, lt)| (lt - peak).exp()).sum();
        let rows = logs.into_iter().map(|(n, lt)| (n, (lt - peak).exp() / total)).collect();
        Ok(Self { p: class.p, q: class.q, rows })
    }

    pub fn expect(&self, f: impl Fn(usize) -> T) -> T {
        self.rows.iter().map(|&(n, pn)| f(n) * pn).sum()
    }

    fn occupation(&self, mode: ModeId, n: usize) -> usize {
        n + mode.offset(self.p, self.q)
    }

    /// `⟨Π_{m<l} (n̂_x − m)⟩`
    pub fn factorial_moment(&self, mode: ModeId, l: usize) -> T {
        self.expect(|n| falling::<T>(self.occupation(mode, n), l))
    }

    pub fn joint(&self, pair: ModePair, l: usize, m: usize) -> T {
        let (x, y) = pair.modes();
        self.expect(|n| falling::<T>(self.occupation(x, n), l) * falling::<T>(self.occupation(y, n), m))
    }

    pub fn mandel(&self, z: T) -> MandelTriple<T> {
        let m = |mode| {
            let mean = self.factorial_moment(mode, 1);
            (self.factorial_moment(mode, 2) - mean * mean) / mean
        };
        MandelTriple { z, ma: m(ModeId::A), mb: m(ModeId::B), mc: m(ModeId::C) }
    }

    pub fn csi(&self, z: T) -> CsiMeasures<T> {
        let mut j = [T::zero(); 3];
        let mut g = [T::zero(); 3];
        for pair in ModePair::ALL {
            let (x, y) = pair.modes();
            let cross = self.joint(pair, 1, 1);
            let v = self.factorial_moment(x, 2) * self.factorial_moment(y, 2) - cross * cross;
            j[pair as usize] = v;
            g[pair as usize] = v / (cross * cross);
        }
        CsiMeasures { z, j, g, j_explicit: j, discrepancy: [T::zero(); 3] }
    }
}

fn falling<T: Real>(x: usize, l: usize) -> T {
    (0..l).map(|m| T::from_i64(x as i64 - m as i64).unwrap()).fold(T::one(), |a, b| a * b)
}

/// Relative deviation of a value from its oracle, scaled by `max(|oracle|, floor)`.
pub fn rel_err<T: Real>(value: T, oracle: T, floor: T) -> T {
    (value - oracle).abs() / oracle.abs().max(floor)
}
