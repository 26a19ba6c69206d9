//! Pump schedules, initial states and time evolution along the pump cycle.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{dot, Sector, StateVector};
use crate::hamiltonian::{FluxSpec, HamiltonianTerms, Hopping, ParametricOperator, PathPoint, SparseOperator};
use crate::lattice::{BondClass, Corner, Lattice, Variant};
use crate::output::Table;
use crate::solver::{ground_state, propagate, EigsConfig, PropagatorConfig};

/// How the inter-cell hopping follows `lambda`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum HoppingProfile {
    /// `J = J0 (1 + cos lambda)`, ceiling `2 J0`: the hopping sweep used to
    /// calibrate the couplers, with the plaquettes prepared at 6 MHz for `J0 = 3`.
    #[default]
    Calibrated,
    /// `J = J0 (1 + cos lambda) / 2`, ceiling `J0`.
    HalfCosine,
}

impl std::str::FromStr for HoppingProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "calibrated" => Ok(Self::Calibrated),
            "half-cosine" => Ok(Self::HalfCosine),
            other => Err(Error::Config(format!(
                "unknown hopping profile `{other}` (expected `calibrated` or `half-cosine`)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PumpSchedule {
    pub variant: Variant,
    pub j0_mhz: f64,
    pub h0_mhz: f64,
    pub t0_ns: f64,
    #[serde(default)]
    pub hopping_profile: HoppingProfile,
}

impl PumpSchedule {
    pub fn diag_reference() -> Self {
        Self {
            variant: Variant::Diag,
            j0_mhz: 3.0,
            h0_mhz: 10.0,
            t0_ns: 500.0,
            hopping_profile: HoppingProfile::Calibrated,
        }
    }

    pub fn nondiag_reference() -> Self {
        Self {
            variant: Variant::Nondiag,
            h0_mhz: 3.5,
            ..Self::diag_reference()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.j0_mhz > 0.0 && self.j0_mhz.is_finite()) {
            return Err(Error::Config(format!("pump.j0_mhz must be > 0, got {}", self.j0_mhz)));
        }
        if !(self.h0_mhz >= 0.0 && self.h0_mhz.is_finite()) {
            return Err(Error::Config(format!("pump.h0_mhz must be >= 0, got {}", self.h0_mhz)));
        }
        if !(self.t0_ns > 0.0 && self.t0_ns.is_finite()) {
            return Err(Error::Config(format!("pump.t0_ns must be > 0, got {}", self.t0_ns)));
        }
        Ok(())
    }

    /// Largest inter-cell hopping, reached at `lambda = 0`.
    pub fn hopping_max(&self) -> f64 {
        match self.hopping_profile {
            HoppingProfile::Calibrated => 2.0 * self.j0_mhz,
            HoppingProfile::HalfCosine => self.j0_mhz,
        }
    }

    pub fn j_of_lambda(&self, lambda: f64) -> f64 {
        let jm = self.hopping_max();
        (0.5 * jm * (1.0 + lambda.cos())).clamp(0.0, jm)
    }

    pub fn h_of_lambda(&self, lambda: f64) -> f64 {
        self.h0_mhz * lambda.sin()
    }

    pub fn point(&self, lambda: f64) -> PathPoint {
        PathPoint {
            j: self.j_of_lambda(lambda),
            j_max: self.hopping_max(),
            h: self.h_of_lambda(lambda),
            variant: self.variant,
        }
    }

    pub fn lambda_at(&self, t_ns: f64) -> f64 {
        lambda_of_t(t_ns, self.t0_ns)
    }
}

/// `lambda(t) = pi - 2 pi t / T0`, not wrapped.
pub fn lambda_of_t(t_ns: f64, t0_ns: f64) -> f64 {
    PI - 2.0 * PI * t_ns / t0_ns
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    #[default]
    Open,
    /// Open lattice plus the four corner links (strength `J(lambda)`).
    CornerPeriodic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Extent {
    #[default]
    Half,
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disorder {
    pub w_mhz: f64,
    pub xi: Vec<f64>,
    pub seed: Option<u64>,
}

impl Disorder {
    /// Uniform samples in `[-1, 1]` per site from a ChaCha8 stream.
    pub fn sample(n_sites: usize, w_mhz: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xi = (0..n_sites).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        Self {
            w_mhz,
            xi,
            seed: Some(seed),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PumpOptions {
    pub propagator: PropagatorConfig,
    pub eigs: EigsConfig,
    pub sample_every_ns: f64,
    pub extent: Extent,
    pub boundary: Boundary,
    pub corner_sign: f64,
    pub disorder: Option<Disorder>,
    /// Whether the disorder also enters the Hamiltonian whose ground state starts the run.
    pub disordered_start: bool,
    /// Integrate the corner transport currents (corner-periodic runs only).
    pub track_currents: bool,
    /// Flux twist on the corner links (corner-periodic runs only).
    pub twist: Option<FluxSpec>,
    pub deadline: Option<Instant>,
}

impl Default for PumpOptions {
    fn default() -> Self {
        Self {
            propagator: PropagatorConfig::default(),
            eigs: EigsConfig::default(),
            sample_every_ns: 10.0,
            extent: Extent::Half,
            boundary: Boundary::Open,
            corner_sign: -1.0,
            disorder: None,
            disordered_start: true,
            track_currents: false,
            twist: None,
            deadline: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PumpRecord {
    pub schedule: PumpSchedule,
    pub n_side: usize,
    pub boundary: Boundary,
    pub extent: Extent,
    pub times_ns: Vec<f64>,
    /// `p1[sample][site]`
    pub p1: Vec<Vec<f64>>,
    pub corner_sites: [usize; 4],
    pub delta_q_corners: Option<[f64; 4]>,
    pub delta_q: Option<f64>,
    pub norm_drift_max: f64,
    pub norm_drift_total: f64,
    pub effective_dt_ns: f64,
    pub min_substep_ns: f64,
    pub disorder: Option<Disorder>,
    /// `|<psi(0)|psi(t_end)>|`
    pub return_fidelity: f64,
    /// Time integral of the corner currents, in MHz * us, when tracked.
    pub current_integrals: Option<[f64; 4]>,
    pub valid: bool,
    pub failure: Option<String>,
}

impl PumpRecord {
    pub fn to_csv(&self) -> String {
        let n = self.n_side * self.n_side;
        let mut header = vec!["t_ns".to_string()];
        header.extend((0..n).map(|s| format!("p1_s{s}")));
        let mut table = Table::new(&header);
        for (t, row) in self.times_ns.iter().zip(&self.p1) {
            let mut cells = Vec::with_capacity(n + 1);
            cells.push(*t);
            cells.extend_from_slice(row);
            table.push(&cells);
        }
        table.render()
    }

    pub fn summary(&self, seed: Option<u64>) -> PumpSummary {
        PumpSummary {
            kind: "pump".into(),
            delta_q: self.delta_q,
            delta_q_corners: self.delta_q_corners,
            schedule: self.schedule,
            n_side: self.n_side,
            boundary: self.boundary,
            extent: self.extent,
            seed,
            norm_drift_max: self.norm_drift_max,
            norm_drift_total: self.norm_drift_total,
            effective_dt_ns: self.effective_dt_ns,
            samples: self.times_ns.len(),
            return_fidelity: self.return_fidelity,
            disorder: self.disorder.clone(),
            valid: self.valid,
            failure: self.failure.clone(),
        }
    }

    /// Occupations at the sample closest to `t_ns` (within 1e-6 ns).
    pub fn p1_at(&self, t_ns: f64) -> Option<&[f64]> {
        self.times_ns
            .iter()
            .position(|&t| (t - t_ns).abs() < 1e-6)
            .map(|k| self.p1[k].as_slice())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PumpSummary {
    pub kind: String,
    pub delta_q: Option<f64>,
    pub delta_q_corners: Option<[f64; 4]>,
    pub schedule: PumpSchedule,
    pub n_side: usize,
    pub boundary: Boundary,
    pub extent: Extent,
    pub seed: Option<u64>,
    pub norm_drift_max: f64,
    pub norm_drift_total: f64,
    pub effective_dt_ns: f64,
    pub samples: usize,
    pub return_fidelity: f64,
    pub disorder: Option<Disorder>,
    pub valid: bool,
    pub failure: Option<String>,
}

/// Per-corner changes `P1(T0/2) - P1(0)` and `dq = (1/2) sum |dq_i|`.
pub fn corner_delta_q(record: &PumpRecord) -> Result<([f64; 4], f64)> {
    let start = record
        .p1_at(0.0)
        .ok_or_else(|| Error::Usage("pump record has no t = 0 sample".into()))?;
    let half = record
        .p1_at(record.schedule.t0_ns / 2.0)
        .ok_or_else(|| Error::Usage("pump record has no t = T0/2 sample".into()))?;
    Ok(delta_q_between(start, half, &record.corner_sites))
}

pub fn delta_q_between(start: &[f64], end: &[f64], corners: &[usize; 4]) -> ([f64; 4], f64) {
    let mut dq = [0.0; 4];
    for (k, &c) in corners.iter().enumerate() {
        dq[k] = end[c] - start[c];
    }
    let total = 0.5 * dq.iter().map(|d| d.abs()).sum::<f64>();
    (dq, total)
}

/// Term groups whose coefficients along the path are
/// `[J_max - J, J, h, 1, J]` (intra, inter, stagger, static, corner links).
pub fn pump_groups(
    lattice: &Lattice,
    variant: Variant,
    boundary: Boundary,
    corner_sign: f64,
    disorder: Option<&Disorder>,
    twist: Option<FluxSpec>,
) -> Result<Vec<HamiltonianTerms>> {
    let n = lattice.n_sites();
    let mut intra = HamiltonianTerms::empty(n);
    let mut inter = HamiltonianTerms::empty(n);
    for bond in lattice.bonds() {
        let hop = Hopping {
            a: bond.a,
            b: bond.b,
            amplitude: C64::new(-1.0, 0.0),
        };
        match bond.class {
            BondClass::Intra => intra.hoppings.push(hop),
            _ => inter.hoppings.push(hop),
        }
    }
    let mut stagger = HamiltonianTerms::empty(n);
    stagger.add_onsite(lattice, 1.0, variant);
    let mut fixed = HamiltonianTerms::empty(n);
    if let Some(d) = disorder {
        fixed.add_disorder(&d.xi, d.w_mhz)?;
    }
    let mut links = HamiltonianTerms::empty(n);
    if boundary == Boundary::CornerPeriodic {
        links.add_corner_links(lattice, 1.0, corner_sign, twist)?;
    } else if twist.is_some() {
        return Err(Error::Usage("a flux twist needs corner-periodic boundaries".into()));
    }
    Ok(vec![intra, inter, stagger, fixed, links])
}

pub fn group_coefficients(schedule: &PumpSchedule, lambda: f64) -> [f64; 5] {
    let p = schedule.point(lambda);
    [p.j_max - p.j, p.j, p.h, 1.0, p.j]
}

/// Ground state of the lattice at `t = 0` (`lambda = pi`), including any disorder.
pub fn initial_ground_state(
    lattice: &Lattice,
    schedule: &PumpSchedule,
    sector: &Arc<Sector>,
    boundary: Boundary,
    corner_sign: f64,
    disorder: Option<&Disorder>,
    twist: Option<FluxSpec>,
    eigs: &EigsConfig,
) -> Result<StateVector> {
    let groups = pump_groups(lattice, schedule.variant, boundary, corner_sign, disorder, twist)?;
    let coeffs = group_coefficients(schedule, PI);
    let op = ParametricOperator::new(&groups, sector);
    let frame = op.frame(&coeffs);
    let gs = ground_state(&frame, eigs, Some(plaquette_product_state(lattice, sector)?.amplitudes()))?;
    StateVector::new(sector.clone(), gs.vector)
}

/// Amplitude of the four-site plaquette ground state for a local pattern
/// (bits in plaquette site order).
pub fn plaquette_amplitude(local: u64) -> f64 {
    match local {
        0b0011 | 0b0101 | 0b1010 | 0b1100 => 1.0 / 8f64.sqrt(),
        0b0110 | 0b1001 => 0.5,
        _ => 0.0,
    }
}

/// Tensor product of plaquette ground states over all cells.
pub fn plaquette_product_state(lattice: &Lattice, sector: &Arc<Sector>) -> Result<StateVector> {
    let cells = lattice.n_side() / 2;
    let mut plaquettes = Vec::with_capacity(cells * cells);
    for cj in 0..cells {
        for ci in 0..cells {
            plaquettes.push(lattice.plaquette_sites(ci, cj));
        }
    }
    let amps = sector
        .states()
        .iter()
        .map(|&bits| {
            let mut a = 1.0;
            for p in &plaquettes {
                let mut local = 0;
                for (k, &s) in p.iter().enumerate() {
                    local |= ((bits >> s) & 1) << k;
                }
                a *= plaquette_amplitude(local);
                if a == 0.0 {
                    break;
                }
            }
            C64::new(a, 0.0)
        })
        .collect();
    StateVector::normalized(sector.clone(), amps)
}

/// Evolves the `t = 0` ground state along the pump and records occupations.
pub fn run_pump(
    lattice: &Lattice,
    schedule: &PumpSchedule,
    opts: &PumpOptions,
) -> Result<PumpRecord> {
    schedule.validate()?;
    opts.propagator.validate()?;
    let duration = match opts.extent {
        Extent::Half => schedule.t0_ns / 2.0,
        Extent::Full => schedule.t0_ns,
    };
    let sample = opts.sample_every_ns;
    if !(sample > 0.0) {
        return Err(Error::Config(format!("sample interval must be > 0, got {sample}")));
    }
    let n_samples = (duration / sample).round();
    if n_samples < 1.0 || (n_samples * sample - duration).abs() > 1e-9 * duration.max(1.0) {
        return Err(Error::Config(format!(
            "sample interval {sample} ns does not divide the run length {duration} ns"
        )));
    }
    let n_samples = n_samples as usize;
    let steps_per_sample = (sample / opts.propagator.dt_ns - 1e-9).ceil().max(1.0) as usize;
    let dt = sample / steps_per_sample as f64;

    let n_sites = lattice.n_sites();
    let sector = Arc::new(Sector::new(n_sites, n_sites / 2)?);
    let groups = pump_groups(
        lattice,
        schedule.variant,
        opts.boundary,
        opts.corner_sign,
        opts.disorder.as_ref(),
        opts.twist,
    )?;
    let op = ParametricOperator::new(&groups, &sector);
    let psi0 = initial_ground_state(
        lattice,
        schedule,
        &sector,
        opts.boundary,
        opts.corner_sign,
        opts.disorder.as_ref().filter(|_| opts.disordered_start),
        opts.twist,
        &opts.eigs,
    )?;
    let currents = if opts.track_currents {
        if opts.boundary != Boundary::CornerPeriodic {
            return Err(Error::Usage("corner currents need corner-periodic boundaries".into()));
        }
        let mut ops = Vec::with_capacity(4);
        for c in Corner::ALL {
            let mut terms = crate::topology::transport_current_terms(lattice, c, 1.0, opts.corner_sign)?;
            if let Some(tw) = opts.twist.filter(|tw| tw.corner == c) {
                // d/dtheta of the twisted links, evaluated at the twist
                let phase = C64::from_polar(1.0, -tw.theta);
                for hop in &mut terms.hoppings {
                    hop.amplitude *= phase;
                }
            }
            ops.push(terms.assemble(&sector));
        }
        Some(ops)
    } else {
        None
    };

    let mut record = PumpRecord {
        schedule: *schedule,
        n_side: lattice.n_side(),
        boundary: opts.boundary,
        extent: opts.extent,
        times_ns: vec![0.0],
        p1: vec![psi0.occupations()],
        corner_sites: lattice.corner_sites(),
        delta_q_corners: None,
        delta_q: None,
        norm_drift_max: 0.0,
        norm_drift_total: 0.0,
        effective_dt_ns: dt,
        min_substep_ns: dt,
        disorder: opts.disorder.clone(),
        return_fidelity: 1.0,
        current_integrals: None,
        valid: true,
        failure: None,
    };
    let mut psi = psi0.amplitudes().to_vec();
    let mut integrals = [0.0; 4];
    let mut last_currents = currents
        .as_ref()
        .map(|ops| current_values(ops, &psi, schedule.j_of_lambda(PI)));

    'outer: for s in 0..n_samples {
        for k in 0..steps_per_sample {
            if let Some(deadline) = opts.deadline {
                if Instant::now() > deadline {
                    return Err(Error::Budget(0.0));
                }
            }
            let t0 = (s * steps_per_sample + k) as f64 * dt;
            let lambda = schedule.lambda_at(t0 + 0.5 * dt);
            let frame = op.frame(&group_coefficients(schedule, lambda));
            match propagate(&mut psi, &frame, dt, &opts.propagator) {
                Ok(rep) => {
                    record.norm_drift_max = record.norm_drift_max.max(rep.norm_drift);
                    record.norm_drift_total += rep.norm_drift;
                    record.min_substep_ns = record.min_substep_ns.min(rep.min_dt_ns);
                }
                Err(e) => {
                    record.valid = false;
                    record.failure = Some(e.to_string());
                    break 'outer;
                }
            }
            if let (Some(ops), Some(prev)) = (&currents, last_currents.as_mut()) {
                let now = current_values(ops, &psi, schedule.j_of_lambda(schedule.lambda_at(t0 + dt)));
                for c in 0..4 {
                    // trapezoid rule, ns -> us
                    integrals[c] += 0.5 * (prev[c] + now[c]) * dt * 1e-3;
                }
                *prev = now;
            }
        }
        record.times_ns.push((s + 1) as f64 * sample);
        record.p1.push(crate::fock::occupations(&sector, &psi));
    }
    record.return_fidelity = dot(psi0.amplitudes(), &psi).norm();
    if currents.is_some() {
        record.current_integrals = Some(integrals);
    }
    if let Ok((dq, total)) = corner_delta_q(&record) {
        record.delta_q_corners = Some(dq);
        record.delta_q = Some(total);
    }
    Ok(record)
}

fn current_values(ops: &[SparseOperator], psi: &[C64], j: f64) -> [f64; 4] {
    let mut out = [0.0; 4];
    let mut y = vec![C64::new(0.0, 0.0); psi.len()];
    for (c, op) in ops.iter().enumerate() {
        crate::solver::LinearOperator::apply(op, psi, &mut y);
        out[c] = j * dot(psi, &y).re;
    }
    out
}

/// Replaces exact probabilities by frequencies of `shots` projective readouts.
pub fn sample_shots(p1: &[Vec<f64>], shots: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    p1.iter()
        .map(|row| {
            row.iter()
                .map(|&p| {
                    let hits = (0..shots).filter(|_| rng.gen::<f64>() < p).count();
                    hits as f64 / shots as f64
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RampShape {
    #[default]
    Linear,
    /// `sin^2` easing with zero slope at both ends.
    Smooth,
}

impl std::str::FromStr for RampShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "smooth" => Ok(Self::Smooth),
            other => Err(Error::Config(format!("unknown ramp shape `{other}`"))),
        }
    }
}

/// Single-plaquette preparation: two qubits on one diagonal start excited and
/// are tuned into resonance while the couplings are switched on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrepProtocol {
    pub detuning_start_mhz: f64,
    pub detuning_end_mhz: f64,
    pub coupling_start_mhz: f64,
    pub coupling_end_mhz: f64,
    pub duration_ns: f64,
    pub shape: RampShape,
}

impl Default for PrepProtocol {
    fn default() -> Self {
        Self {
            detuning_start_mhz: -21.0,
            detuning_end_mhz: 0.0,
            coupling_start_mhz: 0.0,
            coupling_end_mhz: 6.0,
            duration_ns: 200.0,
            shape: RampShape::Linear,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PrepTrace {
    pub times_ns: Vec<f64>,
    pub fidelity: Vec<f64>,
    pub max_fidelity: f64,
    pub final_fidelity: f64,
}

impl PrepProtocol {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_ns >= 0.0 && self.duration_ns.is_finite()) {
            return Err(Error::Config(format!("prep.duration_ns must be >= 0, got {}", self.duration_ns)));
        }
        Ok(())
    }

    /// Ramp progress in `[0, 1]` at time `t`.
    pub fn progress(&self, t_ns: f64) -> f64 {
        if self.duration_ns == 0.0 {
            return 1.0;
        }
        let x = (t_ns / self.duration_ns).clamp(0.0, 1.0);
        match self.shape {
            RampShape::Linear => x,
            RampShape::Smooth => (0.5 * PI * x).sin().powi(2),
        }
    }

    pub fn detuning(&self, t_ns: f64) -> f64 {
        let x = self.progress(t_ns);
        self.detuning_start_mhz + x * (self.detuning_end_mhz - self.detuning_start_mhz)
    }

    pub fn coupling(&self, t_ns: f64) -> f64 {
        let x = self.progress(t_ns);
        self.coupling_start_mhz + x * (self.coupling_end_mhz - self.coupling_start_mhz)
    }
}

/// Sites of the plaquette (in plaquette order) that start excited.
pub const PREP_EXCITED: u64 = 0b0110;

fn plaquette_matrix(sector: &Sector, detuning: f64, coupling: f64) -> Result<DMatrix<C64>> {
    let lat = Lattice::new(2)?;
    let mut terms = HamiltonianTerms::obc(&lat, 0.0, 1.0)?;
    for hop in &mut terms.hoppings {
        hop.amplitude *= coupling;
    }
    for s in 0..4 {
        if PREP_EXCITED >> s & 1 == 1 {
            terms.potentials[s] += detuning;
        }
    }
    Ok(terms.assemble(sector).to_dense())
}

/// Fidelity `|<psi_tgt|psi(t)>|` along the preparation ramp, sampled every `sample_every_ns`.
pub fn simulate_preparation(
    prep: &PrepProtocol,
    sample_every_ns: f64,
    cfg: &PropagatorConfig,
) -> Result<PrepTrace> {
    prep.validate()?;
    cfg.validate()?;
    let sector = Arc::new(Sector::new(4, 2)?);
    let target = plaquette_product_state(&Lattice::new(2)?, &sector)?;
    let mut psi = StateVector::basis(sector.clone(), PREP_EXCITED)?.into_amplitudes();
    let fid = |psi: &[C64]| dot(target.amplitudes(), psi).norm();

    let mut times = vec![0.0];
    let mut fidelity = vec![fid(&psi)];
    if prep.duration_ns > 0.0 {
        let n_steps = (prep.duration_ns / cfg.dt_ns).ceil().max(1.0) as usize;
        let dt = prep.duration_ns / n_steps as f64;
        let every = ((sample_every_ns / dt).round() as usize).max(1);
        for k in 0..n_steps {
            let tm = (k as f64 + 0.5) * dt;
            let h = plaquette_matrix(&sector, prep.detuning(tm), prep.coupling(tm))?;
            propagate(&mut psi, &h, dt, cfg)?;
            if (k + 1) % every == 0 || k + 1 == n_steps {
                times.push((k + 1) as f64 * dt);
                fidelity.push(fid(&psi));
            }
        }
    }
    let max_fidelity = fidelity.iter().cloned().fold(0.0, f64::max);
    let final_fidelity = *fidelity.last().unwrap();
    Ok(PrepTrace {
        times_ns: times,
        fidelity,
        max_fidelity,
        final_fidelity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_examples() {
        assert_eq!(lambda_of_t(0.0, 500.0), PI);
        assert!(lambda_of_t(250.0, 500.0).abs() < 1e-15);
        assert!((lambda_of_t(125.0, 500.0) - PI / 2.0).abs() < 1e-15);
        assert!((lambda_of_t(500.0, 500.0) + PI).abs() < 1e-15);
    }

    #[test]
    fn schedule_endpoints_and_periodicity() {
        for profile in [HoppingProfile::Calibrated, HoppingProfile::HalfCosine] {
            let s = PumpSchedule {
                hopping_profile: profile,
                ..PumpSchedule::diag_reference()
            };
            assert_eq!(s.j_of_lambda(PI), 0.0);
            assert_eq!(s.j_of_lambda(0.0), s.hopping_max());
            assert!(s.h_of_lambda(PI).abs() < 1e-12);
            assert_eq!(s.h_of_lambda(PI / 2.0), 10.0);
            for k in 0..50 {
                let t = 13.7 * k as f64;
                let a = s.point(s.lambda_at(t));
                let b = s.point(s.lambda_at(t + s.t0_ns));
                assert!((a.j - b.j).abs() < 1e-12 && (a.h - b.h).abs() < 1e-12);
                assert!((0.0..=s.hopping_max()).contains(&a.j));
            }
        }
        let s = PumpSchedule::diag_reference();
        assert_eq!(s.hopping_max(), 6.0);
        let half = PumpSchedule {
            hopping_profile: HoppingProfile::HalfCosine,
            ..s
        };
        assert_eq!(half.j_of_lambda(0.0), 3.0);
        assert_eq!(half.j_of_lambda(PI / 2.0), 1.5);
    }

    #[test]
    fn delta_q_examples() {
        let corners = [0, 12, 15, 3];
        let start = vec![0.5; 16];
        let mut end = start.clone();
        end[0] = 1.0;
        end[12] = 0.0;
        end[15] = 1.0;
        end[3] = 0.0;
        let (dq, total) = delta_q_between(&start, &end, &corners);
        assert_eq!(dq, [0.5, -0.5, 0.5, -0.5]);
        assert_eq!(total, 1.0);
        assert_eq!(delta_q_between(&start, &start, &corners).1, 0.0);
    }

    #[test]
    fn two_by_two_initial_state_is_the_plaquette_state() {
        let lat = Lattice::new(2).unwrap();
        let sector = Arc::new(Sector::new(4, 2).unwrap());
        let psi = initial_ground_state(
            &lat,
            &PumpSchedule::diag_reference(),
            &sector,
            Boundary::Open,
            -1.0,
            None,
            None,
            &EigsConfig::default(),
        )
        .unwrap();
        let target = plaquette_product_state(&lat, &sector).unwrap();
        assert!((psi.overlap(&target).norm() - 1.0).abs() < 1e-12);
        assert!(psi.occupations().iter().all(|p| (p - 0.5).abs() < 1e-12));
    }

    #[test]
    fn frozen_pump_transports_nothing() {
        let lat = Lattice::new(2).unwrap();
        let schedule = PumpSchedule {
            h0_mhz: 0.0,
            ..PumpSchedule::diag_reference()
        };
        let rec = run_pump(&lat, &schedule, &PumpOptions::default()).unwrap();
        // h = 0 keeps every occupation at 1/2 by particle-hole symmetry
        assert!(rec.delta_q.unwrap() < 1e-9);
        assert_eq!(rec.times_ns.len(), 26);
    }

    #[test]
    fn sample_interval_must_divide_run() {
        let lat = Lattice::new(2).unwrap();
        let opts = PumpOptions {
            sample_every_ns: 7.0,
            ..Default::default()
        };
        assert!(matches!(
            run_pump(&lat, &PumpSchedule::diag_reference(), &opts),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn full_cycle_csv_has_one_row_per_sample() {
        let lat = Lattice::new(2).unwrap();
        let opts = PumpOptions {
            extent: Extent::Full,
            ..Default::default()
        };
        let rec = run_pump(&lat, &PumpSchedule::diag_reference(), &opts).unwrap();
        let csv = rec.to_csv();
        assert_eq!(csv.lines().count(), 1 + 51);
        assert!(csv.starts_with("t_ns,p1_s0,p1_s1,p1_s2,p1_s3\n0,"));
        for row in &rec.p1 {
            assert!((row.iter().sum::<f64>() - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn preparation_examples() {
        let cfg = PropagatorConfig::default();
        let zero = simulate_preparation(
            &PrepProtocol {
                duration_ns: 0.0,
                ..Default::default()
            },
            10.0,
            &cfg,
        )
        .unwrap();
        assert!((zero.final_fidelity - 0.5).abs() < 1e-12);

        let frozen = simulate_preparation(
            &PrepProtocol {
                coupling_end_mhz: 0.0,
                ..Default::default()
            },
            10.0,
            &cfg,
        )
        .unwrap();
        assert!(frozen.fidelity.iter().all(|f| (f - 0.5).abs() < 1e-10));

        let slow = simulate_preparation(
            &PrepProtocol {
                duration_ns: 2000.0,
                ..Default::default()
            },
            10.0,
            &cfg,
        )
        .unwrap();
        assert!(slow.max_fidelity >= 0.99, "{}", slow.max_fidelity);
    }

    #[test]
    fn shot_sampling_is_seeded() {
        let p = vec![vec![0.0, 1.0, 0.5]];
        let a = sample_shots(&p, 6000, 1);
        assert_eq!(a, sample_shots(&p, 6000, 1));
        assert_eq!(a[0][0], 0.0);
        assert_eq!(a[0][1], 1.0);
        assert!((a[0][2] - 0.5).abs() < 0.05);
    }
}
