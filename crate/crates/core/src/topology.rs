//! Corner Zak phases, Chern numbers and corner currents under corner-periodic
//! boundaries.
//!
//! The twist at corner `c` multiplies every creation operator at `c` on the
//! corner links by `exp(-i theta)`. Zak phases come from discrete Wilson loops
//! `gamma = -arg prod <psi(theta_m)|psi(theta_m+1)>`.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{dot, Sector};
use crate::hamiltonian::{HamiltonianTerms, Hopping, ParametricOperator, SparseOperator};
use crate::lattice::{Corner, Lattice};
use crate::output::Table;
use crate::pump::{pump_groups, Boundary, Disorder, PumpSchedule};
use crate::solver::{ground_state, EigsConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZakGrid {
    pub n_theta: usize,
    pub n_lambda: usize,
    pub eigs: EigsConfig,
}

impl Default for ZakGrid {
    fn default() -> Self {
        Self {
            n_theta: 32,
            n_lambda: 48,
            eigs: EigsConfig::default(),
        }
    }
}

impl ZakGrid {
    pub fn validate(&self) -> Result<()> {
        if self.n_theta < 8 {
            return Err(Error::Config(format!("zak.n_theta must be >= 8, got {}", self.n_theta)));
        }
        if self.n_lambda < 12 || self.n_lambda % 2 != 0 {
            return Err(Error::Config(format!(
                "zak.n_lambda must be even and >= 12, got {}",
                self.n_lambda
            )));
        }
        self.eigs.validate()
    }
}

/// Corner-periodic Hamiltonian with a twist at one corner, split into groups
/// with real coefficients `[J_max - J, J, h, 1, J, J cos theta, J sin theta]`.
pub struct TwistedFamily {
    op: ParametricOperator,
    schedule: PumpSchedule,
}

impl TwistedFamily {
    pub fn new(
        lattice: &Lattice,
        schedule: &PumpSchedule,
        corner: Corner,
        corner_sign: f64,
        disorder: Option<&Disorder>,
        sector: &Sector,
    ) -> Result<Self> {
        let mut groups = pump_groups(lattice, schedule.variant, Boundary::Open, corner_sign, disorder, None)?;
        groups.pop();
        let n = lattice.n_sites();
        let c = lattice.corner_site(corner);
        let mut other = HamiltonianTerms::empty(n);
        let mut cos = HamiltonianTerms::empty(n);
        let mut sin = HamiltonianTerms::empty(n);
        for link in lattice.corner_links() {
            let t = C64::new(corner_sign, 0.0);
            let hop = |amplitude| Hopping {
                a: link.a,
                b: link.b,
                amplitude,
            };
            if link.a == c {
                // t e^{-i theta} = t cos - i t sin
                cos.hoppings.push(hop(t));
                sin.hoppings.push(hop(-C64::i() * t));
            } else if link.b == c {
                cos.hoppings.push(hop(t));
                sin.hoppings.push(hop(C64::i() * t));
            } else {
                other.hoppings.push(hop(t));
            }
        }
        groups.extend([other, cos, sin]);
        Ok(Self {
            op: ParametricOperator::new(&groups, sector),
            schedule: *schedule,
        })
    }

    pub fn coefficients(&self, lambda: f64, theta: f64) -> [f64; 7] {
        let p = self.schedule.point(lambda);
        [p.j_max - p.j, p.j, p.h, 1.0, p.j, p.j * theta.cos(), p.j * theta.sin()]
    }

    pub fn operator(&self) -> &ParametricOperator {
        &self.op
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZakPoint {
    pub gamma: f64,
    pub min_overlap: f64,
    /// Smallest Ritz estimate of the gap above the ground state over the theta loop.
    pub min_gap_estimate: f64,
}

/// Phase `-arg prod <v_m|v_m+1>` of a closed loop of states, and the smallest
/// overlap magnitude.
pub fn wilson_phase(states: &[Vec<C64>]) -> (f64, f64) {
    let n = states.len();
    let mut product = C64::new(1.0, 0.0);
    let mut min_overlap = f64::INFINITY;
    for m in 0..n {
        let o = dot(&states[m], &states[(m + 1) % n]);
        min_overlap = min_overlap.min(o.norm());
        product *= o / o.norm().max(f64::MIN_POSITIVE);
    }
    (wrap_pi(-product.arg()), min_overlap)
}

/// Wraps into `(-pi, pi]`.
pub fn wrap_pi(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(TAU) - PI;
    if y <= -PI {
        y + TAU
    } else {
        y
    }
}

/// Zak phase of corner `corner` at pump parameter `lambda`.
pub fn zak_phase(family: &TwistedFamily, lambda: f64, corner: Corner, grid: &ZakGrid) -> Result<ZakPoint> {
    let mut states: Vec<Vec<C64>> = Vec::with_capacity(grid.n_theta);
    let mut min_gap = f64::INFINITY;
    for m in 0..grid.n_theta {
        let theta = TAU * m as f64 / grid.n_theta as f64;
        let frame = family.op.frame(&family.coefficients(lambda, theta));
        let gs = ground_state(&frame, &grid.eigs, states.last().map(|v| v.as_slice()))?;
        if gs.near_degenerate {
            return Err(Error::GapClosure(format!(
                "ground state degenerate at lambda = {lambda:.6}, theta = {theta:.6}, corner c{}",
                corner.label()
            )));
        }
        if let Some(g) = gs.gap_estimate {
            min_gap = min_gap.min(g);
        }
        states.push(gs.vector);
    }
    let (gamma, min_overlap) = wilson_phase(&states);
    if min_overlap < 0.5 {
        return Err(Error::GridRefinement {
            corner: corner.label(),
            min_overlap,
        });
    }
    Ok(ZakPoint {
        gamma,
        min_overlap,
        min_gap_estimate: min_gap,
    })
}

/// Zak phases on the grid `lambda_m = pi - 2 pi m / n_lambda`, `m = 0..=n_lambda`,
/// i.e. in the direction the pump runs. Each corner is unwrapped along the grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ZakProfile {
    pub lambda: Vec<f64>,
    /// `gamma[corner][m]`, unwrapped.
    pub gamma: [Vec<f64>; 4],
    pub min_overlap: f64,
    pub min_gap_estimate: f64,
}

impl ZakProfile {
    pub fn to_csv(&self) -> String {
        let mut table = Table::new(&["lambda", "gamma_c1", "gamma_c2", "gamma_c3", "gamma_c4"]);
        for (m, &l) in self.lambda.iter().enumerate() {
            table.push(&[l, self.gamma[0][m], self.gamma[1][m], self.gamma[2][m], self.gamma[3][m]]);
        }
        table.render()
    }

    /// `dq_i = -(gamma_i(end) - gamma_i(start)) / 2 pi` between grid indices.
    pub fn delta_q(&self, start: usize, end: usize) -> [f64; 4] {
        let mut dq = [0.0; 4];
        for (c, g) in self.gamma.iter().enumerate() {
            dq[c] = -(g[end] - g[start]) / TAU;
        }
        dq
    }

    /// Half cycle from `lambda = pi` to `lambda = 0`.
    pub fn half_cycle_delta_q(&self) -> [f64; 4] {
        self.delta_q(0, (self.lambda.len() - 1) / 2)
    }
}

pub fn zak_profile(
    lattice: &Lattice,
    schedule: &PumpSchedule,
    grid: &ZakGrid,
    corner_sign: f64,
    disorder: Option<&Disorder>,
) -> Result<ZakProfile> {
    grid.validate()?;
    schedule.validate()?;
    let n = lattice.n_sites();
    let sector = Arc::new(Sector::new(n, n / 2)?);
    let families = Corner::ALL
        .iter()
        .map(|&c| TwistedFamily::new(lattice, schedule, c, corner_sign, disorder, &sector))
        .collect::<Result<Vec<_>>>()?;
    let lambdas: Vec<f64> = (0..=grid.n_lambda)
        .map(|m| PI - TAU * m as f64 / grid.n_lambda as f64)
        .collect();
    let jobs: Vec<(usize, usize)> = (0..4)
        .flat_map(|c| (0..grid.n_lambda).map(move |m| (c, m)))
        .collect();
    let points: Vec<Result<ZakPoint>> = jobs
        .par_iter()
        .map(|&(c, m)| zak_phase(&families[c], lambdas[m], Corner::ALL[c], grid))
        .collect();
    let mut raw = vec![vec![0.0; grid.n_lambda]; 4];
    let mut min_overlap = f64::INFINITY;
    let mut min_gap = f64::INFINITY;
    for (&(c, m), p) in jobs.iter().zip(points) {
        let p = p?;
        raw[c][m] = p.gamma;
        min_overlap = min_overlap.min(p.min_overlap);
        min_gap = min_gap.min(p.min_gap_estimate);
    }
    let gamma = [0, 1, 2, 3].map(|c| {
        let mut out = Vec::with_capacity(grid.n_lambda + 1);
        out.push(raw[c][0]);
        // the last grid point is the first one again
        for m in 1..=grid.n_lambda {
            let next = raw[c][m % grid.n_lambda];
            let prev = *out.last().unwrap();
            out.push(prev + wrap_pi(next - prev));
        }
        out
    });
    Ok(ZakProfile {
        lambda: lambdas,
        gamma,
        min_overlap,
        min_gap_estimate: min_gap,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ChernResult {
    pub chern: [i64; 4],
    pub windings: [f64; 4],
    pub max_residual: f64,
    pub min_overlap: f64,
    pub min_gap_estimate: f64,
}

/// Windings `(gamma_i(end) - gamma_i(start)) / 2 pi` over one cycle.
pub fn chern_from_profile(profile: &ZakProfile) -> Result<ChernResult> {
    let mut chern = [0i64; 4];
    let mut windings = [0.0; 4];
    let mut max_residual: f64 = 0.0;
    for c in 0..4 {
        let g = &profile.gamma[c];
        let w = (g[g.len() - 1] - g[0]) / TAU;
        let r = w.round();
        let residual = (w - r).abs();
        if residual >= 0.05 {
            return Err(Error::WindingResidual {
                corner: c + 1,
                winding: w,
                residual,
            });
        }
        windings[c] = w;
        chern[c] = r as i64;
        max_residual = max_residual.max(residual);
    }
    Ok(ChernResult {
        chern,
        windings,
        max_residual,
        min_overlap: profile.min_overlap,
        min_gap_estimate: profile.min_gap_estimate,
    })
}

pub fn chern_numbers(
    lattice: &Lattice,
    schedule: &PumpSchedule,
    grid: &ZakGrid,
    corner_sign: f64,
) -> Result<(ChernResult, ZakProfile)> {
    if schedule.h0_mhz == 0.0 {
        return Err(Error::GapClosure(
            "h0 = 0: the path stays on the time-reversal line and the winding is undefined".into(),
        ));
    }
    let profile = zak_profile(lattice, schedule, grid, corner_sign, None)?;
    Ok((chern_from_profile(&profile)?, profile))
}

/// `d H_i / d theta` at `theta = 0` for unit link strength `j`:
/// `-i (t a_c^dag a_n - conj(t) a_n^dag a_c)` summed over the two links at `c`.
pub fn transport_current_terms(lattice: &Lattice, corner: Corner, j: f64, corner_sign: f64) -> Result<HamiltonianTerms> {
    let c = lattice.corner_site(corner);
    let mut terms = HamiltonianTerms::empty(lattice.n_sites());
    let t = C64::new(corner_sign * j, 0.0);
    for link in lattice.corner_links() {
        if link.a == c {
            terms.hoppings.push(Hopping {
                a: c,
                b: link.b,
                amplitude: -C64::i() * t,
            });
        } else if link.b == c {
            terms.hoppings.push(Hopping {
                a: c,
                b: link.a,
                amplitude: -C64::i() * t.conj(),
            });
        }
    }
    Ok(terms)
}

pub fn transport_current(
    lattice: &Lattice,
    corner: Corner,
    j: f64,
    corner_sign: f64,
    sector: &Sector,
) -> Result<SparseOperator> {
    Ok(transport_current_terms(lattice, corner, j, corner_sign)?.assemble(sector))
}
