//! Seeded ensembles and parameter scans built on the pump and gap kernels.

use std::f64::consts::TAU;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{single_particle_matrix, SurrogateOptions};
use crate::lattice::{Corner, Lattice, Variant};
use crate::output::Table;
use crate::pump::{run_pump, Disorder, Extent, PumpOptions, PumpSchedule};
use crate::solver::dense_hermitian_eigs;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of realization `r` at grid value `value`: `base ^ hash(value, r)`.
pub fn realization_seed(base: u64, value: f64, r: usize) -> u64 {
    base ^ splitmix64(splitmix64(value.to_bits()) ^ r as u64)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EnsemblePoint {
    pub value: f64,
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    pub n: usize,
    pub failures: usize,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub valid: bool,
}

impl EnsemblePoint {
    fn from_samples(value: f64, samples: Vec<(u64, Option<f64>)>) -> Self {
        let total = samples.len();
        let mut seeds = Vec::with_capacity(total);
        let mut values = Vec::with_capacity(total);
        let mut failures = 0;
        for (seed, v) in samples {
            match v {
                Some(v) => {
                    seeds.push(seed);
                    values.push(v);
                }
                None => failures += 1,
            }
        }
        let n = values.len();
        let mean = if n > 0 { values.iter().sum::<f64>() / n as f64 } else { f64::NAN };
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            value,
            mean,
            std,
            median: median(&values),
            n,
            failures,
            values,
            seeds,
            valid: (failures as f64) <= 0.1 * total as f64,
        }
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    if v.len() % 2 == 1 {
        v[k]
    } else {
        0.5 * (v[k - 1] + v[k])
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EnsembleResult {
    pub quantity: String,
    pub parameter: String,
    pub base_seed: u64,
    pub realizations: usize,
    pub schedule: PumpSchedule,
    pub version: String,
    pub points: Vec<EnsemblePoint>,
}

impl EnsembleResult {
    pub fn valid(&self) -> bool {
        self.points.iter().all(|p| p.valid)
    }

    /// `grid_value, mean, std, n, seed_base` plus the median.
    pub fn to_csv(&self) -> String {
        let mut t = Table::new(&["grid_value", "mean", "std", "n", "seed_base", "median"]);
        for p in &self.points {
            t.push_cells(&[
                crate::output::format_sig(p.value),
                crate::output::format_sig(p.mean),
                crate::output::format_sig(p.std),
                p.n.to_string(),
                self.base_seed.to_string(),
                crate::output::format_sig(p.median),
            ]);
        }
        t.render()
    }
}

fn check_grid(grid: &[f64], what: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config(format!("{what} grid is empty")));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config(format!("{what} grid must be strictly increasing")));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config(format!("{what} grid has non-finite entries")));
    }
    Ok(())
}

fn run_ensemble<F>(grid: &[f64], realizations: usize, base_seed: u64, job: F) -> Vec<EnsemblePoint>
where
    F: Fn(f64, u64) -> Option<f64> + Sync,
{
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..realizations).map(move |r| (g, r)))
        .collect();
    let results: Vec<(u64, Option<f64>)> = jobs
        .par_iter()
        .map(|&(g, r)| {
            let seed = realization_seed(base_seed, grid[g], r);
            (seed, job(grid[g], seed))
        })
        .collect();
    let mut per_point: Vec<Vec<(u64, Option<f64>)>> = vec![Vec::with_capacity(realizations); grid.len()];
    for (&(g, _), res) in jobs.iter().zip(results) {
        per_point[g].push(res);
    }
    grid.iter()
        .zip(per_point)
        .map(|(&v, samples)| EnsemblePoint::from_samples(v, samples))
        .collect()
}

/// Half-period transported charge averaged over disorder realizations.
pub fn disorder_sweep(
    lattice: &Lattice,
    schedule: &PumpSchedule,
    w_grid: &[f64],
    realizations: usize,
    base_seed: u64,
    opts: &PumpOptions,
) -> Result<EnsembleResult> {
    check_grid(w_grid, "disorder")?;
    if realizations == 0 {
        return Err(Error::Config("sweep.realizations must be >= 1".into()));
    }
    schedule.validate()?;
    let budget_hit = std::sync::atomic::AtomicBool::new(false);
    let points = run_ensemble(w_grid, realizations, base_seed, |w, seed| {
        if opts.deadline.is_some_and(|d| Instant::now() > d) {
            budget_hit.store(true, std::sync::atomic::Ordering::Relaxed);
            return None;
        }
        let run = PumpOptions {
            extent: Extent::Half,
            disorder: Some(Disorder::sample(lattice.n_sites(), w, seed)),
            ..opts.clone()
        };
        match run_pump(lattice, schedule, &run) {
            Ok(rec) if rec.valid => rec.delta_q,
            Err(Error::Budget(_)) => {
                budget_hit.store(true, std::sync::atomic::Ordering::Relaxed);
                None
            }
            _ => None,
        }
    });
    if budget_hit.into_inner() {
        return Err(Error::Budget(0.0));
    }
    Ok(EnsembleResult {
        quantity: "delta_q".into(),
        parameter: "w_mhz".into(),
        base_seed,
        realizations,
        schedule: *schedule,
        version: env!("CARGO_PKG_VERSION").into(),
        points,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapOptions {
    pub n_lambda: usize,
    /// Golden-section refinement around each local minimum of the grid.
    pub refine: bool,
    pub corner_sign: f64,
    pub plaquette_flux: bool,
}

impl Default for GapOptions {
    fn default() -> Self {
        Self {
            n_lambda: 48,
            refine: true,
            corner_sign: -1.0,
            plaquette_flux: true,
        }
    }
}

impl GapOptions {
    pub fn validate(&self) -> Result<()> {
        if self.n_lambda < 3 {
            return Err(Error::Config(format!("gap.n_lambda must be >= 3, got {}", self.n_lambda)));
        }
        Ok(())
    }
}

/// Free-fermion addition energy `E_{N/2+1} - E_{N/2}` (the `(N/2+1)`-th orbital)
/// of the corner-periodic surrogate at `lambda`.
pub fn addition_energy(
    lattice: &Lattice,
    schedule: &PumpSchedule,
    lambda: f64,
    disorder: Option<&Disorder>,
    opts: &GapOptions,
) -> Result<f64> {
    let surrogate = SurrogateOptions {
        corner_links: true,
        corner_sign: opts.corner_sign,
        flux: None,
        plaquette_flux: opts.plaquette_flux,
    };
    let m = single_particle_matrix(
        lattice,
        &schedule.point(lambda),
        disorder.map(|d| (d.xi.as_slice(), d.w_mhz)),
        &surrogate,
    )?;
    let e = dense_hermitian_eigs(&m, false)?.values;
    Ok(e[lattice.n_sites() / 2])
}

/// Minimum of the addition energy over one pump cycle.
pub fn path_gap(
    lattice: &Lattice,
    schedule: &PumpSchedule,
    disorder: Option<&Disorder>,
    opts: &GapOptions,
) -> Result<f64> {
    opts.validate()?;
    let n = opts.n_lambda;
    let lambdas: Vec<f64> = (0..n).map(|m| TAU * m as f64 / n as f64).collect();
    let f = |l: f64| addition_energy(lattice, schedule, l, disorder, opts);
    let values = lambdas.iter().map(|&l| f(l)).collect::<Result<Vec<_>>>()?;
    let mut best = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if opts.refine {
        let step = TAU / n as f64;
        for m in 0..n {
            let prev = values[(m + n - 1) % n];
            let next = values[(m + 1) % n];
            if values[m] <= prev && values[m] <= next {
                let (_, v) = golden_min(&f, lambdas[m] - step, lambdas[m] + step, 1e-9)?;
                best = best.min(v);
            }
        }
    }
    Ok(best)
}

fn golden_min<F: Fn(f64) -> Result<f64>>(f: &F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x)?;
    let (x, v) = [(c, fc), (d, fd), (x, fx)]
        .into_iter()
        .min_by(|p, q| p.1.total_cmp(&q.1))
        .unwrap();
    Ok((x, v))
}

/// Gap of the surrogate under on-site disorder, `realizations` samples per `W`.
pub fn gap_vs_disorder(
    lattice: &Lattice,
    schedule: &PumpSchedule,
    w_grid: &[f64],
    realizations: usize,
    base_seed: u64,
    opts: &GapOptions,
) -> Result<EnsembleResult> {
    check_grid(w_grid, "disorder")?;
    opts.validate()?;
    if realizations == 0 {
        return Err(Error::Config("sweep.realizations must be >= 1".into()));
    }
    let points = run_ensemble(w_grid, realizations, base_seed, |w, seed| {
        let d = Disorder::sample(lattice.n_sites(), w, seed);
        path_gap(lattice, schedule, Some(&d), opts).ok()
    });
    Ok(EnsembleResult {
        quantity: "gap_mhz".into(),
        parameter: "w_mhz".into(),
        base_seed,
        realizations,
        schedule: *schedule,
        version: env!("CARGO_PKG_VERSION").into(),
        points,
    })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct GapPoint {
    pub h0_mhz: f64,
    pub gap_mhz: f64,
}

/// Clean-system gap as a function of the potential amplitude.
pub fn gap_vs_h0(
    lattice: &Lattice,
    variant: Variant,
    j0_mhz: f64,
    h0_grid: &[f64],
    opts: &GapOptions,
) -> Result<Vec<GapPoint>> {
    check_grid(h0_grid, "h0")?;
    h0_grid
        .par_iter()
        .map(|&h0| {
            let schedule = PumpSchedule {
                variant,
                j0_mhz,
                h0_mhz: h0,
                ..PumpSchedule::diag_reference()
            };
            Ok(GapPoint {
                h0_mhz: h0,
                gap_mhz: path_gap(lattice, &schedule, None, opts)?,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ContrastNorm {
    /// `(P_c - P_adj) / (1 - 1/2)`: 1 for a filled corner next to a half-filled neighbour.
    #[default]
    IdealContrast,
    /// `(P_c - P_adj) / (P_c + P_adj)`.
    PairwiseSum,
}

impl std::str::FromStr for ContrastNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ideal-contrast" => Ok(Self::IdealContrast),
            "pairwise-sum" => Ok(Self::PairwiseSum),
            other => Err(Error::Config(format!("unknown contrast normalisation `{other}`"))),
        }
    }
}

pub fn contrast(p_corner: f64, p_adjacent: f64, norm: ContrastNorm) -> f64 {
    match norm {
        ContrastNorm::IdealContrast => 2.0 * (p_corner - p_adjacent),
        ContrastNorm::PairwiseSum => (p_corner - p_adjacent) / (p_corner + p_adjacent),
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct ScanPoint {
    pub h0_mhz: f64,
    pub t0_ns: f64,
    pub delta_p: f64,
    pub delta_q: f64,
    pub p_corner: f64,
    pub p_adjacent: f64,
}

/// Half-period pumps of the non-diagonal variant over `(h0, T0)`; contrast
/// between corner c1 and its y neighbour at `T0/2`. `dt_for` picks the time
/// step for each period.
pub fn period_scan(
    lattice: &Lattice,
    base: &PumpSchedule,
    h0_values: &[f64],
    t0_grid: &[f64],
    norm: ContrastNorm,
    opts: &PumpOptions,
    dt_for: &(dyn Fn(f64) -> f64 + Sync),
) -> Result<Vec<ScanPoint>> {
    check_grid(t0_grid, "T0")?;
    if h0_values.is_empty() {
        return Err(Error::Config("scan h0 list is empty".into()));
    }
    let jobs: Vec<(f64, f64)> = h0_values
        .iter()
        .flat_map(|&h| t0_grid.iter().map(move |&t| (h, t)))
        .collect();
    let corner = lattice.corner_site(Corner::C1);
    let adjacent = lattice.y_neighbour_of_corner(Corner::C1);
    jobs.par_iter()
        .map(|&(h0, t0)| {
            let schedule = PumpSchedule {
                variant: Variant::Nondiag,
                h0_mhz: h0,
                t0_ns: t0,
                ..*base
            };
            let run = PumpOptions {
                extent: Extent::Half,
                sample_every_ns: t0 / 2.0,
                propagator: crate::solver::PropagatorConfig {
                    dt_ns: dt_for(t0),
                    ..opts.propagator
                },
                ..opts.clone()
            };
            let rec = run_pump(lattice, &schedule, &run)?;
            if !rec.valid {
                return Err(Error::Numerical(rec.failure.unwrap_or_default()));
            }
            let end = rec.p1.last().unwrap();
            Ok(ScanPoint {
                h0_mhz: h0,
                t0_ns: t0,
                delta_p: contrast(end[corner], end[adjacent], norm),
                delta_q: rec.delta_q.unwrap_or(f64::NAN),
                p_corner: end[corner],
                p_adjacent: end[adjacent],
            })
        })
        .collect()
}

/// Coupler-mediated exchange `J = g12 + (g1c g2c / 2) (1/(w1 - wc) + 1/(w2 - wc))`.
pub fn effective_coupling(g12: f64, g1c: f64, g2c: f64, w1: f64, w2: f64, wc: f64) -> Result<f64> {
    if w1 == wc || w2 == wc {
        return Err(Error::Domain(format!(
            "qubit frequency equals the coupler frequency {wc} MHz; the dispersive formula diverges"
        )));
    }
    Ok(g12 + 0.5 * g1c * g2c * (1.0 / (w1 - wc) + 1.0 / (w2 - wc)))
}
