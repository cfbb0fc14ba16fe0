//! Subcommand implementations. Each returns a process exit status.

use crate::config::{ForcingKind, InitKind, RunConfig};
use crate::snapshot::{read_field, write_field, write_vtk};
use chfd::scheme::{BdfSolver, EnergyReport};
use chfd::stencil::{norm, Norm, LAP4_WEIGHTS};
use chfd::verify::convergence::{run_convergence, ConvergenceOptions, ConvergenceTable};
use chfd::verify::lemmas::{run_lemma_suite, LemmaReport, LemmaSuiteOptions};
use chfd::verify::stability::{run_stability, StabilityOptions, StabilityReport};
use chfd::verify::{random_field, ManufacturedSolution, RandomFieldSpec};
use chfd::{Error, Field, Result};
use serde_json::json;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;
pub const EXIT_IO: u8 = 4;

pub const ENERGY_HEADER: &str = "step,time,mass,E_h,modified_E,newton_iters,residual";
pub const ERRORS_HEADER: &str = "N,h,dt,l2_error,linf_error";

/// Exit status for a library error.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::InvalidGrid(_)
        | Error::InvalidParams(_)
        | Error::SobolevIndex(_)
        | Error::GridMismatch { .. } => EXIT_CONFIG,
        Error::Io(_) | Error::Format(_) => EXIT_IO,
        Error::NewtonNotConverged { .. }
        | Error::NewtonDiverged { .. }
        | Error::StepFailed { .. }
        | Error::NonFinite { .. }
        | Error::NotMeanZero { .. } => EXIT_SOLVER,
    }
}

/// Fixed 17-significant-digit scientific notation.
fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn energy_row(r: &EnergyReport) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        r.step,
        sci(r.time),
        sci(r.mass),
        sci(r.energy),
        sci(r.modified_energy),
        r.newton_iters,
        sci(r.residual)
    )
}

fn report_error(e: &Error, err: &mut dyn Write) -> u8 {
    let _ = writeln!(err, "error: {e}");
    exit_code(e)
}

fn initial_field(cfg: &RunConfig) -> Result<Field> {
    let grid = cfg.grid()?;
    match &cfg.init {
        InitKind::Manufactured => {
            let m = ManufacturedSolution::new(cfg.eps);
            Field::sample(grid, |x, y, z| m.phi(x, y, z, 0.0))
        }
        InitKind::Random { seed, amplitude, mean } => random_field(
            grid,
            &RandomFieldSpec {
                seed: *seed,
                decay: 0.5,
                amplitude: *amplitude,
                mean: *mean,
            },
        ),
        InitKind::File { path } => {
            let f = read_field(path)?;
            if f.grid() != &grid {
                return Err(Error::Config(format!(
                    "{}: field has N = {}, L = {} but the config asks for N = {}, L = {}",
                    path.display(),
                    f.grid().n(),
                    f.grid().length(),
                    grid.n(),
                    grid.length()
                )));
            }
            Ok(f)
        }
    }
}

fn save_snapshot(dir: &Path, step: usize, phi: &Field, vtk: bool) -> Result<()> {
    write_field(&dir.join(format!("phi_{step:06}.chf4")), phi)?;
    if vtk {
        write_vtk(&dir.join(format!("phi_{step:06}.vtk")), phi, "phi")?;
    }
    Ok(())
}

/// Loads the config at `path` and runs it.
pub fn cmd_simulate(path: &Path, overrides: &[String], out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let cfg = match RunConfig::load(path, overrides) {
        Ok(c) => c,
        Err(e) => return report_error(&e, err),
    };
    match simulate(&cfg, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => report_error(&e, err),
    }
}

pub fn simulate(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    for w in cfg.validate()? {
        writeln!(err, "warning: {w}")?;
    }
    let grid = cfg.grid()?;
    let exact = ManufacturedSolution::new(cfg.eps);
    let mut params = cfg.scheme_params();
    if cfg.forcing == ForcingKind::Manufactured {
        params = params.with_forcing(exact.source());
    }
    let solver = BdfSolver::new(grid, params)?;
    let phi0 = initial_field(cfg)?;

    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    let mut csv = BufWriter::new(File::create(dir.join("energy.csv"))?);
    writeln!(csv, "{ENERGY_HEADER}")?;
    if cfg.snapshot_every > 0 {
        save_snapshot(dir, 0, &phi0, cfg.vtk)?;
    }

    let mut io_error: Option<Error> = None;
    let mut total_newton = 0;
    let summary = solver.run(phi0, |state, rep| {
        total_newton += rep.newton_iters;
        if io_error.is_some() {
            return;
        }
        let mut write = || -> Result<()> {
            if rep.step % cfg.energy_every == 0 {
                writeln!(csv, "{}", energy_row(rep))?;
            }
            if cfg.snapshot_every > 0 && rep.step % cfg.snapshot_every == 0 {
                save_snapshot(dir, rep.step, &state.phi_n, cfg.vtk)?;
            }
            Ok(())
        };
        if let Err(e) = write() {
            io_error = Some(e);
        }
    });
    csv.flush()?;
    let summary = summary?;
    if let Some(e) = io_error {
        return Err(e);
    }

    let last = summary.history.last().copied().unwrap_or(summary.initial);
    let state = &summary.final_state;
    let exact_error = (cfg.init == InitKind::Manufactured && cfg.forcing == ForcingKind::Manufactured)
        .then(|| -> Result<(f64, f64)> {
            let truth = Field::sample(grid, |x, y, z| exact.phi(x, y, z, state.time))?;
            let e = &state.phi_n - &truth;
            Ok((norm(&e, Norm::L2), norm(&e, Norm::Inf)))
        })
        .transpose()?;

    writeln!(out, "steps: {}", state.step)?;
    writeln!(out, "time: {}", sci(state.time))?;
    writeln!(out, "mass: {}", sci(last.mass))?;
    writeln!(out, "E_h: {}", sci(last.energy))?;
    writeln!(out, "modified_E: {}", sci(last.modified_energy))?;
    writeln!(out, "newton_iters_total: {total_newton}")?;
    writeln!(out, "last_residual: {}", sci(last.residual))?;
    if let Some((l2, linf)) = exact_error {
        writeln!(out, "l2_error: {}", sci(l2))?;
        writeln!(out, "linf_error: {}", sci(linf))?;
    }

    let d = summary.diagnostics;
    let mut doc = json!({
        "N": grid.n(),
        "L": grid.length(),
        "eps": cfg.eps,
        "dt": cfg.dt,
        "A": cfg.a,
        "steps": state.step,
        "initial": summary.initial,
        "final": last,
        "newton_iters_total": total_newton,
        "initial_diagnostics": d,
    });
    if let Some((l2, linf)) = exact_error {
        doc["l2_error"] = json!(l2);
        doc["linf_error"] = json!(linf);
    }
    write_json(&dir.join("summary.json"), &doc)?;
    if cfg.snapshot_every > 0 && state.step % cfg.snapshot_every != 0 {
        save_snapshot(dir, state.step, &state.phi_n, cfg.vtk)?;
    }
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(std::io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn write_errors_csv(path: &Path, table: &ConvergenceTable) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{ERRORS_HEADER}")?;
    for r in &table.rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.n,
            sci(r.h),
            sci(r.dt),
            sci(r.l2_error),
            sci(r.linf_error)
        )?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ConvergeArgs {
    pub resolutions: Vec<usize>,
    pub eps: f64,
    pub t_final: f64,
    pub newton_tol: f64,
    pub out_dir: PathBuf,
}

pub fn cmd_converge(args: &ConvergeArgs, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    match converge(args, out) {
        Ok(()) => EXIT_OK,
        Err(e) => report_error(&e, err),
    }
}

fn converge(args: &ConvergeArgs, out: &mut dyn Write) -> Result<()> {
    if args.resolutions.is_empty() {
        return Err(Error::Config("no resolutions given".into()));
    }
    let mut opts = ConvergenceOptions::new(args.eps, args.t_final);
    opts.newton_tol = args.newton_tol;
    let table = run_convergence(&args.resolutions, &opts)?;
    fs::create_dir_all(&args.out_dir)?;
    write_errors_csv(&args.out_dir.join("errors.csv"), &table)?;
    writeln!(out, "{ERRORS_HEADER}")?;
    for r in &table.rows {
        writeln!(out, "{},{:.6e},{:.6e},{:.6e},{:.6e}", r.n, r.h, r.dt, r.l2_error, r.linf_error)?;
    }
    match (table.l2_fit, table.linf_fit) {
        (Some(a), Some(b)) => {
            writeln!(out, "l2 slope: {:.4}", a.slope)?;
            writeln!(out, "linf slope: {:.4}", b.slope)?;
        }
        _ => writeln!(out, "slope: n/a")?,
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Lemmas,
    Stability,
    All,
}

#[derive(Debug, Clone)]
pub struct CheckArgs {
    pub suite: Suite,
    pub seed: u64,
    pub trials: usize,
    pub resolutions: Vec<usize>,
    pub stability_n: usize,
    pub steps: usize,
    pub eps: f64,
    pub dt: f64,
    pub a: f64,
    pub lap4_weights: [f64; 5],
    pub out_dir: PathBuf,
}

impl CheckArgs {
    pub fn new(suite: Suite, seed: u64, out_dir: PathBuf) -> Self {
        Self {
            suite,
            seed,
            trials: 100,
            resolutions: vec![15, 16, 31, 32],
            stability_n: 32,
            steps: 200,
            eps: 0.1,
            dt: 1e-3,
            a: chfd::scheme::A_MIN_STABLE,
            lap4_weights: LAP4_WEIGHTS,
            out_dir,
        }
    }
}

pub fn cmd_check(args: &CheckArgs, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    match check(args, out) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_CHECK_FAILED,
        Err(e) => report_error(&e, err),
    }
}

fn check(args: &CheckArgs, out: &mut dyn Write) -> Result<bool> {
    let mut lemmas: Option<LemmaReport> = None;
    let mut stability: Vec<StabilityReport> = Vec::new();
    if matches!(args.suite, Suite::Lemmas | Suite::All) {
        let mut opts = LemmaSuiteOptions::new(&args.resolutions, args.trials, args.seed);
        opts.lap4_weights = args.lap4_weights;
        let report = run_lemma_suite(&opts)?;
        for c in &report.checks {
            writeln!(
                out,
                "{:<5} {:<34} N={:<4} worst margin {:+.3e}",
                if c.passed { "ok" } else { "FAIL" },
                c.name,
                c.n,
                c.worst_margin
            )?;
        }
        lemmas = Some(report);
    }
    if matches!(args.suite, Suite::Stability | Suite::All) {
        for mean in [0.0, 0.1] {
            let mut opts = StabilityOptions::new(
                args.stability_n,
                args.eps,
                args.dt,
                args.steps,
                args.a,
                args.seed,
            );
            opts.mean = mean;
            let r = run_stability(&opts)?;
            let energy = match r.energy_monotone {
                Some(true) => "non-increasing".to_string(),
                Some(false) => "INCREASED".to_string(),
                None => "not asserted (A below 1/16)".to_string(),
            };
            writeln!(
                out,
                "{:<5} stability m0={mean}: mass drift {:.3e} (tol {:.3e}), modified energy {energy}",
                if r.passed { "ok" } else { "FAIL" },
                r.max_mass_drift,
                r.mass_tolerance
            )?;
            stability.push(r);
        }
    }
    let passed = lemmas.as_ref().is_none_or(|r| r.passed) && stability.iter().all(|r| r.passed);
    let mut doc = json!({ "seed": args.seed, "passed": passed });
    if let Some(r) = &lemmas {
        doc["lemmas"] = json!(r);
    }
    if !stability.is_empty() {
        doc["stability"] = json!(stability);
    }
    fs::create_dir_all(&args.out_dir)?;
    write_json(&args.out_dir.join("report.json"), &doc)?;
    writeln!(out, "{}", if passed { "all checks passed" } else { "some checks FAILED" })?;
    Ok(passed)
}
