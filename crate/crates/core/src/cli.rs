//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::experiments::{
    disorder_sweep, effective_coupling, gap_vs_disorder, gap_vs_h0, period_scan, ContrastNorm, EnsembleResult,
    GapOptions, GapPoint, ScanPoint,
};
use crate::lattice::{Lattice, Variant};
use crate::output::{format_sig, gnuplot_script, OutputDir, Table};
use crate::pump::{
    run_pump, simulate_preparation, Boundary, Disorder, Extent, HoppingProfile, PrepProtocol, PumpOptions,
    PumpSchedule, PumpSummary, RampShape,
};
use crate::solver::{EigsConfig, PropagatorConfig};
use crate::topology::{chern_from_profile, zak_profile, ChernResult, ZakGrid};

#[derive(Parser, Debug)]
#[command(name = "hospt", version, about = "Higher-order topological pumping of hard-core bosons")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// TOML configuration file with dotted keys (pump.variant, pump.t0_ns, ...)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Base seed (overrides `seed` in the config)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for parallel sweeps
    #[arg(long)]
    pub threads: Option<usize>,
    /// Sampling interval in ns (overrides pump.sample_every_ns)
    #[arg(long)]
    pub sample_every: Option<f64>,
    /// Abort with exit code 4 after this many seconds
    #[arg(long)]
    pub budget_seconds: Option<f64>,
    /// Also write a gnuplot script next to the data
    #[arg(long)]
    pub gnuplot: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Time evolution along the pump cycle
    Pump(Common),
    /// Single-plaquette preparation ramp
    Prepare(Common),
    /// Corner Zak phases along the pump cycle
    Zak(Common),
    /// Chern numbers from Zak-phase windings
    Chern(Common),
    /// Gap of the free-fermion surrogate versus h0 or disorder
    Gap(Common),
    /// Disorder-averaged transported charge
    Disorder(Common),
    /// Non-diagonal contrast versus pump period
    PeriodScan(Common),
    /// Coupler-mediated exchange coupling
    Coupling(CouplingArgs),
    /// Re-parse and check a JSON summary written by this program
    Validate { file: PathBuf },
}

#[derive(Args, Debug)]
pub struct CouplingArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub g12: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub g1c: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub g2c: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub w1: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub w2: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub wc: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub pump: PumpSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub scan: ScanSection,
    #[serde(default)]
    pub gap: GapSection,
    #[serde(default)]
    pub zak: ZakSection,
    #[serde(default)]
    pub prep: PrepSection,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpSection {
    pub variant: Option<Variant>,
    pub j0_mhz: Option<f64>,
    pub h0_mhz: Option<f64>,
    pub t0_ns: Option<f64>,
    pub hopping_profile: Option<HoppingProfile>,
    pub n_side: Option<usize>,
    pub extent: Option<Extent>,
    pub boundary: Option<Boundary>,
    pub corner_sign: Option<f64>,
    pub sample_every_ns: Option<f64>,
    pub w_mhz: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub dt_ns: Option<f64>,
    pub krylov_dim: Option<usize>,
    pub step_tol: Option<f64>,
    pub eig_tol: Option<f64>,
    pub restart_dim: Option<usize>,
    pub max_iterations: Option<usize>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub w_mhz: Option<Vec<f64>>,
    pub realizations: Option<usize>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub h0_mhz: Option<Vec<f64>>,
    pub t0_ns: Option<Vec<f64>>,
    pub normalization: Option<ContrastNorm>,
    /// Largest time step for long periods; the step is `clamp(T0 / 10000, dt, max)`.
    pub max_dt_ns: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapSection {
    pub h0_mhz: Option<Vec<f64>>,
    pub n_lambda: Option<usize>,
    pub refine: Option<bool>,
    pub corner_sign: Option<f64>,
    pub plaquette_flux: Option<bool>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZakSection {
    pub n_theta: Option<usize>,
    pub n_lambda: Option<usize>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrepSection {
    pub detuning_start_mhz: Option<f64>,
    pub detuning_end_mhz: Option<f64>,
    pub coupling_start_mhz: Option<f64>,
    pub coupling_end_mhz: Option<f64>,
    pub duration_ns: Option<f64>,
    pub shape: Option<RampShape>,
    pub sample_every_ns: Option<f64>,
}

const DEFAULT_SEED: u64 = 1;

pub fn load_config(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
            parse_config(&text)
        }
    }
}

pub fn parse_config(text: &str) -> Result<FileConfig> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

fn require<T: Copy>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
}

impl FileConfig {
    pub fn schedule(&self) -> Result<PumpSchedule> {
        let p = &self.pump;
        let s = PumpSchedule {
            variant: require(p.variant, "pump.variant")?,
            j0_mhz: require(p.j0_mhz, "pump.j0_mhz")?,
            h0_mhz: require(p.h0_mhz, "pump.h0_mhz")?,
            t0_ns: require(p.t0_ns, "pump.t0_ns")?,
            hopping_profile: p.hopping_profile.unwrap_or_default(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn lattice(&self) -> Result<Lattice> {
        Lattice::new(self.pump.n_side.unwrap_or(4))
    }

    pub fn corner_sign(&self) -> Result<f64> {
        let s = self.pump.corner_sign.unwrap_or(-1.0);
        if s.abs() != 1.0 {
            return Err(Error::Config(format!("pump.corner_sign must be 1 or -1, got {s}")));
        }
        Ok(s)
    }

    pub fn propagator(&self) -> Result<PropagatorConfig> {
        let d = PropagatorConfig::default();
        let cfg = PropagatorConfig {
            dt_ns: self.solver.dt_ns.unwrap_or(d.dt_ns),
            krylov_dim: self.solver.krylov_dim.unwrap_or(d.krylov_dim),
            tol: self.solver.step_tol.unwrap_or(d.tol),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn eigs(&self, seed: u64) -> Result<EigsConfig> {
        let d = EigsConfig::default();
        let cfg = EigsConfig {
            tol: self.solver.eig_tol.unwrap_or(d.tol),
            max_iterations: self.solver.max_iterations.unwrap_or(d.max_iterations),
            restart_dim: self.solver.restart_dim.unwrap_or(d.restart_dim),
            seed: d.seed ^ seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn gap_options(&self) -> Result<GapOptions> {
        let d = GapOptions::default();
        let opts = GapOptions {
            n_lambda: self.gap.n_lambda.unwrap_or(d.n_lambda),
            refine: self.gap.refine.unwrap_or(d.refine),
            corner_sign: self.gap.corner_sign.unwrap_or(d.corner_sign),
            plaquette_flux: self.gap.plaquette_flux.unwrap_or(d.plaquette_flux),
        };
        opts.validate()?;
        Ok(opts)
    }

    pub fn zak_grid(&self, seed: u64) -> Result<ZakGrid> {
        let d = ZakGrid::default();
        let grid = ZakGrid {
            n_theta: self.zak.n_theta.unwrap_or(d.n_theta),
            n_lambda: self.zak.n_lambda.unwrap_or(d.n_lambda),
            eigs: self.eigs(seed)?,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn prep(&self) -> Result<PrepProtocol> {
        let d = PrepProtocol::default();
        let p = &self.prep;
        let prep = PrepProtocol {
            detuning_start_mhz: p.detuning_start_mhz.unwrap_or(d.detuning_start_mhz),
            detuning_end_mhz: p.detuning_end_mhz.unwrap_or(d.detuning_end_mhz),
            coupling_start_mhz: p.coupling_start_mhz.unwrap_or(d.coupling_start_mhz),
            coupling_end_mhz: p.coupling_end_mhz.unwrap_or(d.coupling_end_mhz),
            duration_ns: p.duration_ns.unwrap_or(d.duration_ns),
            shape: p.shape.unwrap_or(d.shape),
        };
        prep.validate()?;
        Ok(prep)
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

struct Context {
    cfg: FileConfig,
    common: Common,
    seed: u64,
    deadline: Option<Instant>,
    budget: f64,
}

impl Context {
    fn new(common: Common) -> Result<Self> {
        let cfg = load_config(common.config.as_deref())?;
        let seed = common.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
        if let Some(n) = common.threads {
            if n == 0 {
                return Err(Error::Config("--threads must be >= 1".into()));
            }
            // a second initialisation in the same process keeps the first pool
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        let budget = common.budget_seconds.unwrap_or(f64::INFINITY);
        if !(budget > 0.0) {
            return Err(Error::Config("--budget-seconds must be > 0".into()));
        }
        let deadline = budget
            .is_finite()
            .then(|| Instant::now() + Duration::from_secs_f64(budget));
        Ok(Self {
            cfg,
            common,
            seed,
            deadline,
            budget,
        })
    }

    fn out(&self) -> Result<OutputDir> {
        OutputDir::create(&self.common.out)
    }

    fn budget_error(&self, e: Error) -> Error {
        match e {
            Error::Budget(_) => Error::Budget(self.budget),
            other => other,
        }
    }

    fn echo(&self) -> serde_json::Value {
        json!({ "config": self.cfg, "seed": self.seed })
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Pump(c) => cmd_pump(Context::new(c)?),
        Command::Prepare(c) => cmd_prepare(Context::new(c)?),
        Command::Zak(c) => cmd_zak(Context::new(c)?, false),
        Command::Chern(c) => cmd_zak(Context::new(c)?, true),
        Command::Gap(c) => cmd_gap(Context::new(c)?),
        Command::Disorder(c) => cmd_disorder(Context::new(c)?),
        Command::PeriodScan(c) => cmd_period_scan(Context::new(c)?),
        Command::Coupling(a) => {
            let j = effective_coupling(a.g12, a.g1c, a.g2c, a.w1, a.w2, a.wc)?;
            println!("J = {} MHz", format_sig(j));
            Ok(())
        }
        Command::Validate { file } => {
            let kind = validate_summary(&std::fs::read_to_string(&file)?)?;
            println!("{}: valid {kind} summary", file.display());
            Ok(())
        }
    }
}

fn pump_options(ctx: &Context) -> Result<PumpOptions> {
    let cfg = &ctx.cfg;
    let lattice = cfg.lattice()?;
    let disorder = cfg
        .pump
        .w_mhz
        .map(|w| Disorder::sample(lattice.n_sites(), w, ctx.seed));
    Ok(PumpOptions {
        propagator: cfg.propagator()?,
        eigs: cfg.eigs(ctx.seed)?,
        sample_every_ns: ctx.common.sample_every.or(cfg.pump.sample_every_ns).unwrap_or(10.0),
        extent: cfg.pump.extent.unwrap_or(Extent::Full),
        boundary: cfg.pump.boundary.unwrap_or_default(),
        corner_sign: cfg.corner_sign()?,
        disorder,
        disordered_start: true,
        track_currents: false,
        twist: None,
        deadline: ctx.deadline,
    })
}

fn cmd_pump(ctx: Context) -> Result<()> {
    let schedule = ctx.cfg.schedule()?;
    let lattice = ctx.cfg.lattice()?;
    let opts = pump_options(&ctx)?;
    let record = run_pump(&lattice, &schedule, &opts).map_err(|e| ctx.budget_error(e))?;
    let mut out = ctx.out()?;
    out.write("pump.csv", &record.to_csv())?;
    let mut summary = serde_json::to_value(record.summary(Some(ctx.seed)))?;
    summary["resolved"] = ctx.echo();
    out.write_json("summary.json", &summary)?;
    if ctx.common.gnuplot {
        let c = lattice.corner_sites();
        let cols: Vec<(usize, String)> = c
            .iter()
            .enumerate()
            .map(|(k, &s)| (s + 2, format!("c{}", k + 1)))
            .collect();
        let cols: Vec<(usize, &str)> = cols.iter().map(|(k, s)| (*k, s.as_str())).collect();
        out.write("pump.gp", &gnuplot_script("pump.csv", "t (ns)", "P1", &cols))?;
    }
    out.finish("pump")?;
    if !record.valid {
        return Err(Error::Numerical(record.failure.unwrap_or_default()));
    }
    if let Some(dq) = record.delta_q {
        println!("delta_q = {}", format_sig(dq));
    }
    Ok(())
}

fn cmd_prepare(ctx: Context) -> Result<()> {
    let prep = ctx.cfg.prep()?;
    let every = ctx
        .common
        .sample_every
        .or(ctx.cfg.prep.sample_every_ns)
        .unwrap_or(1.0);
    let trace = simulate_preparation(&prep, every, &ctx.cfg.propagator()?)?;
    let mut table = Table::new(&["t_ns", "fidelity"]);
    for (t, f) in trace.times_ns.iter().zip(&trace.fidelity) {
        table.push(&[*t, *f]);
    }
    let mut out = ctx.out()?;
    out.write("prepare.csv", &table.render())?;
    out.write_json(
        "summary.json",
        &json!({
            "kind": "prepare",
            "protocol": prep,
            "max_fidelity": trace.max_fidelity,
            "final_fidelity": trace.final_fidelity,
            "resolved": ctx.echo(),
        }),
    )?;
    if ctx.common.gnuplot {
        out.write("prepare.gp", &gnuplot_script("prepare.csv", "t (ns)", "F", &[(2, "fidelity")]))?;
    }
    out.finish("prepare")?;
    println!("max fidelity = {}", format_sig(trace.max_fidelity));
    Ok(())
}

fn cmd_zak(ctx: Context, chern: bool) -> Result<()> {
    let schedule = ctx.cfg.schedule()?;
    let lattice = ctx.cfg.lattice()?;
    let grid = ctx.cfg.zak_grid(ctx.seed)?;
    let profile = zak_profile(&lattice, &schedule, &grid, ctx.cfg.corner_sign()?, None)?;
    let mut out = ctx.out()?;
    out.write("zak.csv", &profile.to_csv())?;
    if ctx.common.gnuplot {
        out.write(
            "zak.gp",
            &gnuplot_script("zak.csv", "lambda", "gamma", &[(2, "c1"), (3, "c2"), (4, "c3"), (5, "c4")]),
        )?;
    }
    let result = if chern { Some(chern_from_profile(&profile)) } else { None };
    let mut summary = json!({
        "kind": if chern { "chern" } else { "zak" },
        "schedule": schedule,
        "grid": grid,
        "half_cycle_delta_q": profile.half_cycle_delta_q(),
        "min_overlap": profile.min_overlap,
        "resolved": ctx.echo(),
    });
    if let Some(Ok(r)) = &result {
        summary["chern"] = serde_json::to_value(r)?;
    }
    out.write_json("summary.json", &summary)?;
    out.finish(if chern { "chern" } else { "zak" })?;
    if let Some(r) = result {
        let r = r?;
        println!("C = [{}]", r.chern.map(|c| c.to_string()).join(", "));
    }
    Ok(())
}

fn cmd_gap(ctx: Context) -> Result<()> {
    let cfg = &ctx.cfg;
    let lattice = cfg.lattice()?;
    let opts = cfg.gap_options()?;
    let variant = cfg.pump.variant.unwrap_or(Variant::Diag);
    let j0 = cfg.pump.j0_mhz.unwrap_or(3.0);
    let mut out = ctx.out()?;
    if let Some(w_grid) = &cfg.sweep.w_mhz {
        let schedule = PumpSchedule {
            variant,
            j0_mhz: j0,
            h0_mhz: cfg.pump.h0_mhz.unwrap_or(10.0),
            t0_ns: cfg.pump.t0_ns.unwrap_or(500.0),
            hopping_profile: cfg.pump.hopping_profile.unwrap_or_default(),
        };
        schedule.validate()?;
        let r = cfg.sweep.realizations.unwrap_or(100);
        let ens = gap_vs_disorder(&lattice, &schedule, w_grid, r, ctx.seed, &opts)?;
        write_ensemble(&mut out, "gap_disorder", &ens, &ctx, &json!({ "gap": opts }))?;
    } else {
        let h0_grid = cfg
            .gap
            .h0_mhz
            .clone()
            .unwrap_or_else(|| (0..=20).map(|k| 0.5 * k as f64).collect());
        let curve: Vec<GapPoint> = gap_vs_h0(&lattice, variant, j0, &h0_grid, &opts)?;
        let mut table = Table::new(&["h0_mhz", "gap_mhz"]);
        for p in &curve {
            table.push(&[p.h0_mhz, p.gap_mhz]);
        }
        out.write("gap_h0.csv", &table.render())?;
        if ctx.common.gnuplot {
            out.write("gap_h0.gp", &gnuplot_script("gap_h0.csv", "h0 (MHz)", "gap (MHz)", &[(2, "gap")]))?;
        }
        out.write_json(
            "summary.json",
            &json!({
                "kind": "gap",
                "variant": variant,
                "j0_mhz": j0,
                "options": opts,
                "curve": curve,
                "resolved": ctx.echo(),
            }),
        )?;
    }
    out.finish("gap")?;
    Ok(())
}

fn write_ensemble(
    out: &mut OutputDir,
    name: &str,
    ens: &EnsembleResult,
    ctx: &Context,
    extra: &serde_json::Value,
) -> Result<()> {
    out.write(&format!("{name}.csv"), &ens.to_csv())?;
    for p in &ens.points {
        out.write_json(
            &format!("realizations/{name}_{}.json", format_sig(p.value)),
            &json!({ "value": p.value, "values": p.values, "seeds": p.seeds, "failures": p.failures }),
        )?;
    }
    if ctx.common.gnuplot {
        out.write(
            &format!("{name}.gp"),
            &gnuplot_script(&format!("{name}.csv"), &ens.parameter, &ens.quantity, &[(2, "mean"), (6, "median")]),
        )?;
    }
    let mut summary = serde_json::to_value(ens)?;
    summary["kind"] = json!("ensemble");
    summary["options"] = extra.clone();
    summary["resolved"] = ctx.echo();
    out.write_json("summary.json", &summary)?;
    if !ens.valid() {
        return Err(Error::Numerical("more than 10% of the realizations failed".into()));
    }
    Ok(())
}

fn cmd_disorder(ctx: Context) -> Result<()> {
    let schedule = ctx.cfg.schedule()?;
    let lattice = ctx.cfg.lattice()?;
    let w_grid = ctx
        .cfg
        .sweep
        .w_mhz
        .clone()
        .unwrap_or_else(|| (0..=20).map(|k| 2.0 * k as f64).collect());
    let r = ctx.cfg.sweep.realizations.unwrap_or(40);
    let opts = PumpOptions {
        sample_every_ns: schedule.t0_ns / 2.0,
        ..pump_options(&ctx)?
    };
    let ens = disorder_sweep(&lattice, &schedule, &w_grid, r, ctx.seed, &opts).map_err(|e| ctx.budget_error(e))?;
    let mut out = ctx.out()?;
    let res = write_ensemble(&mut out, "disorder", &ens, &ctx, &json!({ "propagator": opts.propagator }));
    out.finish("disorder")?;
    res
}

fn cmd_period_scan(ctx: Context) -> Result<()> {
    let cfg = &ctx.cfg;
    let lattice = cfg.lattice()?;
    let base = PumpSchedule {
        variant: Variant::Nondiag,
        j0_mhz: cfg.pump.j0_mhz.unwrap_or(3.0),
        h0_mhz: 0.0,
        t0_ns: 500.0,
        hopping_profile: cfg.pump.hopping_profile.unwrap_or_default(),
    };
    let h0 = cfg.scan.h0_mhz.clone().unwrap_or_else(|| vec![3.5, 10.0]);
    let t0 = cfg
        .scan
        .t0_ns
        .clone()
        .unwrap_or_else(|| vec![100.0, 250.0, 500.0, 1000.0, 2000.0, 5000.0]);
    let norm = cfg.scan.normalization.unwrap_or_default();
    let prop = cfg.propagator()?;
    let max_dt = cfg.scan.max_dt_ns.unwrap_or(4.0).max(prop.dt_ns);
    let opts = pump_options(&ctx)?;
    let dt_for = move |t0: f64| (t0 / 10_000.0).clamp(prop.dt_ns, max_dt);
    let points: Vec<ScanPoint> =
        period_scan(&lattice, &base, &h0, &t0, norm, &opts, &dt_for).map_err(|e| ctx.budget_error(e))?;
    let mut table = Table::new(&["h0_mhz", "t0_ns", "delta_p", "delta_q", "p_corner", "p_adjacent"]);
    for p in &points {
        table.push(&[p.h0_mhz, p.t0_ns, p.delta_p, p.delta_q, p.p_corner, p.p_adjacent]);
    }
    let mut out = ctx.out()?;
    out.write("period_scan.csv", &table.render())?;
    if ctx.common.gnuplot {
        out.write(
            "period_scan.gp",
            &gnuplot_script("period_scan.csv", "T0 (ns)", "dP", &[(3, "delta_p")]),
        )?;
    }
    out.write_json(
        "summary.json",
        &json!({ "kind": "period-scan", "normalization": norm, "points": points, "resolved": ctx.echo() }),
    )?;
    out.finish("period-scan")?;
    Ok(())
}

/// Checks a summary written by this program and returns its kind.
pub fn validate_summary(text: &str) -> Result<String> {
    let v: serde_json::Value = serde_json::from_str(text)?;
    let kind = v
        .get("kind")
        .and_then(|k| k.as_str())
        .ok_or_else(|| Error::Config("summary has no `kind` field".into()))?
        .to_string();
    let bad = |msg: &str| Error::Config(format!("invalid {kind} summary: {msg}"));
    match kind.as_str() {
        "pump" => {
            let s: PumpSummary = serde_json::from_value(v.clone())?;
            s.schedule.validate()?;
            if let Some(dq) = s.delta_q {
                if !(0.0..=2.0).contains(&dq) {
                    return Err(bad("delta_q outside [0, 2]"));
                }
            }
        }
        "chern" => {
            let r: ChernResult = serde_json::from_value(v["chern"].clone())?;
            if r.chern.iter().sum::<i64>() != 0 {
                return Err(bad("Chern numbers do not sum to zero"));
            }
        }
        "zak" => {
            let _: PumpSchedule = serde_json::from_value(v["schedule"].clone())?;
        }
        "ensemble" => {
            let e: EnsembleResult = serde_json::from_value(v.clone())?;
            if e.points.iter().any(|p| p.values.len() != p.seeds.len()) {
                return Err(bad("values and seeds differ in length"));
            }
        }
        "gap" => {
            let _: Vec<GapPoint> = serde_json::from_value(v["curve"].clone())?;
        }
        "period-scan" => {
            let _: Vec<ScanPoint> = serde_json::from_value(v["points"].clone())?;
        }
        "prepare" => {
            let p: PrepProtocol = serde_json::from_value(v["protocol"].clone())?;
            p.validate()?;
        }
        other => return Err(Error::Config(format!("unknown summary kind `{other}`"))),
    }
    if v.get("resolved").is_none() {
        return Err(bad("missing resolved configuration"));
    }
    Ok(kind)
}
