//! Manufactured-solution convergence study with time step `h^2`.

use crate::error::{Error, Result};
use crate::grid::{Field, Grid3};
use crate::scheme::{BdfSolver, SchemeParams, A_MIN_STABLE};
use crate::stencil::{norm, Norm};
use crate::verify::manufactured::{ManufacturedSolution, DOMAIN_LENGTH};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceOptions {
    pub eps: f64,
    pub t_final: f64,
    pub a: f64,
    pub newton_tol: f64,
}

impl ConvergenceOptions {
    pub fn new(eps: f64, t_final: f64) -> Self {
        Self {
            eps,
            t_final,
            a: A_MIN_STABLE,
            newton_tol: 1e-11,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub h: f64,
    pub dt: f64,
    pub steps: usize,
    pub l2_error: f64,
    pub linf_error: f64,
    /// Largest `|mean(phi^k) - mean(phi^0)|` over the run.
    pub max_mass_drift: f64,
    pub mass0: f64,
}

/// Least-squares line `ln e = slope ln N + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub eps: f64,
    pub t_final: f64,
    pub rows: Vec<ConvergenceRow>,
    pub l2_fit: Option<SlopeFit>,
    pub linf_fit: Option<SlopeFit>,
}

impl ConvergenceTable {
    /// `e(N_i) / e(N_{i+1})` for consecutive rows.
    pub fn l2_ratios(&self) -> Vec<f64> {
        self.rows
            .windows(2)
            .map(|w| w[0].l2_error / w[1].l2_error)
            .collect()
    }
}

/// Ordinary least squares on `(ln x, ln y)`; `None` for fewer than two distinct points.
pub fn fit_log_log(x: &[f64], y: &[f64]) -> Option<SlopeFit> {
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some(SlopeFit {
        slope,
        intercept: my - slope * mx,
    })
}

/// Step count for `N` under `dt = h^2`, or an error naming `N` when `T / dt`
/// is not an integer.
pub fn steps_for(n: usize, t_final: f64) -> Result<(f64, f64, usize)> {
    let h = DOMAIN_LENGTH / n as f64;
    let dt = h * h;
    let ratio = t_final / dt;
    let steps = ratio.round();
    if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::InvalidParams(format!(
            "N = {n}: T / dt = {ratio} is not an integer (dt = h^2 = {dt})"
        )));
    }
    Ok((h, dt, steps as usize))
}

/// Runs the forced scheme from the sampled exact profile and measures the error at `T`.
pub fn convergence_row(n: usize, opts: &ConvergenceOptions) -> Result<ConvergenceRow> {
    let (h, dt, steps) = steps_for(n, opts.t_final)?;
    let grid = Grid3::new(n, DOMAIN_LENGTH)?;
    let exact = ManufacturedSolution::new(opts.eps);
    let mut params = SchemeParams::new(opts.eps, dt, steps as f64 * dt).with_forcing(exact.source());
    params.a = opts.a;
    params.newton_tol = opts.newton_tol;
    let solver = BdfSolver::new(grid, params)?;
    let phi0 = Field::sample(grid, |x, y, z| exact.phi(x, y, z, 0.0))?;
    let mass0 = phi0.mean();
    let mut drift: f64 = 0.0;
    let summary = solver.run(phi0, |_, rep| drift = drift.max((rep.mass - mass0).abs()))?;
    let t_end = steps as f64 * dt;
    let truth = Field::sample(grid, |x, y, z| exact.phi(x, y, z, t_end))?;
    let err = &summary.final_state.phi_n - &truth;
    Ok(ConvergenceRow {
        n,
        h,
        dt,
        steps,
        l2_error: norm(&err, Norm::L2),
        linf_error: norm(&err, Norm::Inf),
        max_mass_drift: drift,
        mass0,
    })
}

pub fn convergence_study(resolutions: &[usize], eps: f64, t_final: f64) -> Result<ConvergenceTable> {
    run_convergence(resolutions, &ConvergenceOptions::new(eps, t_final))
}

pub fn run_convergence(resolutions: &[usize], opts: &ConvergenceOptions) -> Result<ConvergenceTable> {
    // Reject bad resolutions before spending time on the good ones.
    for &n in resolutions {
        steps_for(n, opts.t_final)?;
    }
    let rows = resolutions
        .iter()
        .map(|&n| convergence_row(n, opts))
        .collect::<Result<Vec<_>>>()?;
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let l2: Vec<f64> = rows.iter().map(|r| r.l2_error).collect();
    let linf: Vec<f64> = rows.iter().map(|r| r.linf_error).collect();
    Ok(ConvergenceTable {
        eps: opts.eps,
        t_final: opts.t_final,
        l2_fit: fit_log_log(&ns, &l2),
        linf_fit: fit_log_log(&ns, &linf),
        rows,
    })
}

/// `||phi^-1 - Phi(., -dt)||_2` for the manufactured profile.
pub fn ghost_init_error(n: usize, dt: f64, eps: f64) -> Result<f64> {
    let grid = Grid3::new(n, DOMAIN_LENGTH)?;
    let exact = ManufacturedSolution::new(eps);
    let params = SchemeParams::new(eps, dt, dt).with_forcing(exact.source());
    let solver = BdfSolver::new(grid, params)?;
    let phi0 = Field::sample(grid, |x, y, z| exact.phi(x, y, z, 0.0))?;
    let ghost = solver.ghost_init(&phi0)?;
    let truth = Field::sample(grid, |x, y, z| exact.phi(x, y, z, -dt))?;
    Ok(norm(&(&ghost - &truth), Norm::L2))
}
