//! Hard-core boson Fock space with a fixed particle number.
//!
//! Basis states are occupation bitmasks (bit `s` set when site `s` holds a
//! boson). A sector lists every mask with `k` set bits in increasing numeric
//! order; the dense index of a mask is its rank in the combinatorial number
//! system, so lookups need no hash table.

use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type BasisState = u64;

#[derive(Clone, Debug)]
pub struct Sector {
    n_sites: usize,
    k: usize,
    states: Vec<BasisState>,
    // binom[p][t] = C(p, t) for p <= n_sites, t <= k
    binom: Vec<Vec<u64>>,
}

impl Sector {
    pub fn new(n_sites: usize, k: usize) -> Result<Self> {
        if n_sites > 64 || k > n_sites {
            return Err(Error::Domain(format!(
                "sector needs 0 <= k <= n_sites <= 64, got k = {k}, n_sites = {n_sites}"
            )));
        }
        let mut binom = vec![vec![0u64; k + 1]; n_sites + 1];
        for (p, row) in binom.iter_mut().enumerate() {
            row[0] = 1;
            for t in 1..=k.min(p) {
                // C(p, t) = C(p, t-1) * (p - t + 1) / t, exact in u128
                row[t] = ((row[t - 1] as u128 * (p - t + 1) as u128) / t as u128) as u64;
            }
        }
        let dim = binom[n_sites][k] as usize;
        let mut states = Vec::with_capacity(dim);
        if k == 0 {
            states.push(0);
        } else {
            // Gosper's hack walks masks with k bits in increasing order.
            let limit: u128 = 1u128 << n_sites;
            let mut v: u128 = (1u128 << k) - 1;
            while v < limit {
                states.push(v as u64);
                let c = v & v.wrapping_neg();
                let r = v + c;
                v = (((r ^ v) >> 2) / c) | r;
            }
        }
        debug_assert_eq!(states.len(), dim);
        Ok(Self {
            n_sites,
            k,
            states,
            binom,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn particles(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[BasisState] {
        &self.states
    }

    pub fn state(&self, m: usize) -> BasisState {
        self.states[m]
    }

    /// Dense index of `bits`, or `None` if the mask is not in this sector.
    pub fn index_of(&self, bits: BasisState) -> Option<usize> {
        if bits.count_ones() as usize != self.k
            || (self.n_sites < 64 && bits >> self.n_sites != 0)
        {
            return None;
        }
        Some(self.rank(bits))
    }

    #[inline]
    pub(crate) fn rank(&self, mut bits: BasisState) -> usize {
        let mut rank = 0u64;
        let mut t = 1;
        while bits != 0 {
            let p = bits.trailing_zeros() as usize;
            rank += self.binom[p][t];
            bits &= bits - 1;
            t += 1;
        }
        rank as usize
    }
}

/// Moves a boson from `from` to `to`. The matrix element is always +1 when
/// the move is allowed; hard-core bosons on distinct sites commute.
#[inline]
pub fn hop_element(bits: BasisState, from: usize, to: usize) -> Option<BasisState> {
    debug_assert_ne!(from, to);
    let (f, t) = (1u64 << from, 1u64 << to);
    if bits & f != 0 && bits & t == 0 {
        Some(bits ^ f ^ t)
    } else {
        None
    }
}

/// Site occupation probabilities `P1[s] = sum |amp|^2` over masks with bit `s` set.
pub fn occupations(sector: &Sector, amplitudes: &[C64]) -> Vec<f64> {
    let mut p = vec![0.0; sector.n_sites()];
    for (&bits, a) in sector.states().iter().zip(amplitudes) {
        let w = a.norm_sqr();
        let mut b = bits;
        while b != 0 {
            let s = b.trailing_zeros() as usize;
            p[s] += w;
            b &= b - 1;
        }
    }
    p
}

/// Amplitudes over a shared sector.
#[derive(Clone, Debug)]
pub struct StateVector {
    sector: Arc<Sector>,
    amplitudes: Vec<C64>,
}

impl StateVector {
    pub fn new(sector: Arc<Sector>, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != sector.len() {
            return Err(Error::Usage(format!(
                "state has {} amplitudes but the sector has {} states",
                amplitudes.len(),
                sector.len()
            )));
        }
        Ok(Self { sector, amplitudes })
    }

    /// Normalised copy of `amplitudes`.
    pub fn normalized(sector: Arc<Sector>, amplitudes: Vec<C64>) -> Result<Self> {
        let mut psi = Self::new(sector, amplitudes)?;
        let n = psi.norm();
        if n == 0.0 {
            return Err(Error::Domain("cannot normalise the zero vector".into()));
        }
        psi.scale(1.0 / n);
        Ok(psi)
    }

    pub fn basis(sector: Arc<Sector>, bits: BasisState) -> Result<Self> {
        let m = sector.index_of(bits).ok_or_else(|| {
            Error::Domain(format!("mask {bits:#b} is not in the sector"))
        })?;
        let mut amplitudes = vec![C64::new(0.0, 0.0); sector.len()];
        amplitudes[m] = C64::new(1.0, 0.0);
        Ok(Self { sector, amplitudes })
    }

    pub fn sector(&self) -> &Arc<Sector> {
        &self.sector
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }

    pub fn scale(&mut self, f: f64) {
        for a in &mut self.amplitudes {
            *a *= f;
        }
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &StateVector) -> C64 {
        dot(&self.amplitudes, &other.amplitudes)
    }

    pub fn occupations(&self) -> Vec<f64> {
        occupations(&self.sector, &self.amplitudes)
    }
}

/// `<x|y>` (conjugate-linear in `x`).
#[inline]
pub fn dot(x: &[C64], y: &[C64]) -> C64 {
    let mut re = 0.0;
    let mut im = 0.0;
    for (a, b) in x.iter().zip(y) {
        re += a.re * b.re + a.im * b.im;
        im += a.re * b.im - a.im * b.re;
    }
    C64::new(re, im)
}

#[inline]
pub fn norm(x: &[C64]) -> f64 {
    x.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}
