//! Whole-pump physics checks that need full time evolution.

use std::f64::consts::{PI, TAU};

use hospt::fock::Sector;
use hospt::lattice::{Corner, Lattice, Variant};
use hospt::pump::{run_pump, Boundary, Extent, PumpOptions, PumpRecord, PumpSchedule};
use hospt::solver::{EigsConfig, PropagatorConfig};
use hospt::topology::{zak_phase, TwistedFamily, ZakGrid};

fn lattice() -> Lattice {
    Lattice::new(4).unwrap()
}

fn full_cycle(schedule: &PumpSchedule) -> PumpRecord {
    let opts = PumpOptions {
        extent: Extent::Full,
        ..Default::default()
    };
    run_pump(&lattice(), schedule, &opts).unwrap()
}

fn max_symmetry_error(record: &PumpRecord, map: impl Fn(usize) -> usize) -> f64 {
    let mut worst: f64 = 0.0;
    for row in &record.p1 {
        for (s, &p) in row.iter().enumerate() {
            worst = worst.max((row[map(s)] - (1.0 - p)).abs());
        }
    }
    worst
}

#[test]
fn diag_pump_invariants() {
    let lat = lattice();
    let rec = full_cycle(&PumpSchedule::diag_reference());
    assert_eq!(rec.times_ns.len(), 51);
    for row in &rec.p1 {
        assert!((row.iter().sum::<f64>() - 8.0).abs() < 1e-9);
    }
    assert!(rec.norm_drift_total < 1e-8, "drift {}", rec.norm_drift_total);
    // a quarter turn exchanges the two sublattices of the stagger, which
    // particle-hole conjugation undoes
    let err = max_symmetry_error(&rec, |s| lat.rotate_c4(s));
    assert!(err < 1e-6, "C4 x particle-hole error {err}");
}

#[test]
fn nondiag_pump_symmetries() {
    let lat = lattice();
    let rec = full_cycle(&PumpSchedule::nondiag_reference());
    for row in &rec.p1 {
        assert!((row.iter().sum::<f64>() - 8.0).abs() < 1e-9);
    }
    assert!(rec.norm_drift_total < 1e-8);
    // the stagger is even under the y mirror and odd under a half turn
    let mut mirror: f64 = 0.0;
    for row in &rec.p1 {
        for s in 0..row.len() {
            mirror = mirror.max((row[lat.reflect_y(s)] - row[s]).abs());
        }
    }
    assert!(mirror < 1e-6, "mirror error {mirror}");
    let err = max_symmetry_error(&rec, |s| lat.rotate_c4(lat.rotate_c4(s)));
    assert!(err < 1e-6, "C2 x particle-hole error {err}");
}

#[test]
fn diag_delta_q_grows_with_period() {
    let lat = lattice();
    let mut last = 0.0;
    for t0 in [100.0, 250.0, 500.0, 1000.0, 5000.0] {
        let schedule = PumpSchedule {
            t0_ns: t0,
            ..PumpSchedule::diag_reference()
        };
        let opts = PumpOptions {
            sample_every_ns: t0 / 2.0,
            propagator: PropagatorConfig {
                dt_ns: if t0 > 1000.0 { 1.0 } else { 0.5 },
                ..Default::default()
            },
            ..Default::default()
        };
        let dq = run_pump(&lat, &schedule, &opts).unwrap().delta_q.unwrap();
        assert!(dq >= last - 0.01, "T0 = {t0}: {dq} after {last}");
        last = dq;
    }
    assert!(last > 0.99);
}

#[test]
fn slow_corner_periodic_cycle_returns_to_start() {
    for base in [PumpSchedule::diag_reference(), PumpSchedule::nondiag_reference()] {
        let schedule = PumpSchedule { t0_ns: 20_000.0, ..base };
        let opts = PumpOptions {
            extent: Extent::Full,
            boundary: Boundary::CornerPeriodic,
            sample_every_ns: 10_000.0,
            propagator: PropagatorConfig {
                dt_ns: 2.0,
                ..Default::default()
            },
            ..Default::default()
        };
        let rec = run_pump(&lattice(), &schedule, &opts).unwrap();
        assert!(rec.return_fidelity >= 0.999, "{:?}: {}", base.variant, rec.return_fidelity);
    }
}

/// The integrated corner current of a slow corner-periodic half cycle
/// against the Zak-phase change over the same half cycle.
#[test]
fn corner_current_matches_zak_phase() {
    let lat = lattice();
    let schedule = PumpSchedule {
        t0_ns: 20_000.0,
        ..PumpSchedule::diag_reference()
    };
    let opts = PumpOptions {
        boundary: Boundary::CornerPeriodic,
        track_currents: true,
        sample_every_ns: 10_000.0,
        propagator: PropagatorConfig {
            dt_ns: 2.0,
            ..Default::default()
        },
        ..Default::default()
    };
    let rec = run_pump(&lat, &schedule, &opts).unwrap();
    let from_current = -TAU * rec.current_integrals.unwrap()[Corner::C1.index()];

    let sector = Sector::new(16, 8).unwrap();
    let family = TwistedFamily::new(&lat, &schedule, Corner::C1, -1.0, None, &sector).unwrap();
    let grid = ZakGrid {
        n_theta: 16,
        n_lambda: 24,
        eigs: EigsConfig::default(),
    };
    // half cycle: lambda from pi down to 0, unwrapped step by step
    let n = grid.n_lambda / 2;
    let mut gamma = Vec::with_capacity(n + 1);
    for m in 0..=n {
        let lambda = PI - TAU * m as f64 / grid.n_lambda as f64;
        gamma.push(zak_phase(&family, lambda, Corner::C1, &grid).unwrap().gamma);
    }
    let mut total = 0.0;
    for w in gamma.windows(2) {
        total += hospt::topology::wrap_pi(w[1] - w[0]);
    }
    let from_zak = -total / TAU;
    assert!((from_zak - 0.5).abs() < 0.02, "Zak {from_zak}");
    assert!((from_current - from_zak).abs() < 0.05, "current {from_current} vs Zak {from_zak}");
    assert_eq!(schedule.variant, Variant::Diag);
}
