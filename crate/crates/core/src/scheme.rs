//! The modified BDF2 time discretization with long-stencil fourth-order
//! Laplacians and Douglas-Dupont regularization:
//!
//! ```text
//! (3/2 phi^{n+1} - 2 phi^n + 1/2 phi^{n-1}) / dt = Lap4 mu^{n+1} + f^{n+1}
//! mu^{n+1} = (phi^{n+1}^3 - 2 phi^n + phi^{n-1}) / eps - eps Lap4 phi^{n+1}
//!            - A dt / eps^2 Lap4 (phi^{n+1} - phi^n)
//! ```
//!
//! Each step is solved by inexact Newton. Inner linear solves use GMRES,
//! right-preconditioned by the constant-coefficient linearization. That
//! preconditioner is diagonal in Fourier space.

use crate::error::{Error, Result};
use crate::grid::{Field, Grid3};
use crate::krylov::{gmres, GmresOptions};
use crate::spectral::SpectralOps;
use crate::stencil::{apply_lap4, grad4_norm_sq, norm, norm2, Norm};
use serde::Serialize;
use std::fmt;
use std::sync::Arc;

/// Smallest regularization coefficient for which the modified energy is
/// guaranteed not to increase.
pub const A_MIN_STABLE: f64 = 1.0 / 16.0;

/// A space-time source term `f(x, y, z, t)` added to the right-hand side of the `phi_t` equation.
#[derive(Clone)]
pub struct Forcing(Arc<dyn Fn(f64, f64, f64, f64) -> f64 + Send + Sync>);

impl Forcing {
    pub fn new(f: impl Fn(f64, f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn eval(&self, x: f64, y: f64, z: f64, t: f64) -> f64 {
        (self.0)(x, y, z, t)
    }

    pub fn sample(&self, grid: Grid3, t: f64) -> Result<Field> {
        Field::sample(grid, |x, y, z| self.eval(x, y, z, t))
    }
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Forcing(..)")
    }
}

#[derive(Debug, Clone)]
pub struct SchemeParams {
    /// Interface width.
    pub eps: f64,
    pub dt: f64,
    /// Douglas-Dupont regularization coefficient.
    pub a: f64,
    /// Final time.
    pub t_final: f64,
    /// Absolute tolerance on the discrete l2 norm of the step residual.
    pub newton_tol: f64,
    pub newton_max: usize,
    /// Relative tolerance of each inner linear solve.
    pub krylov_tol: f64,
    pub forcing: Option<Forcing>,
    /// Whether callers intend to monitor modified-energy decay.
    pub monitor_energy: bool,
}

impl SchemeParams {
    pub fn new(eps: f64, dt: f64, t_final: f64) -> Self {
        Self {
            eps,
            dt,
            a: A_MIN_STABLE,
            t_final,
            newton_tol: 1e-11,
            newton_max: 50,
            krylov_tol: 1e-3,
            forcing: None,
            monitor_energy: false,
        }
    }

    pub fn with_forcing(mut self, forcing: Forcing) -> Self {
        self.forcing = Some(forcing);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParams(format!("{name} must be positive, got {v}")))
            }
        };
        positive("eps", self.eps)?;
        positive("dt", self.dt)?;
        positive("newton_tol", self.newton_tol)?;
        positive("krylov_tol", self.krylov_tol)?;
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "final time must be nonnegative, got {}",
                self.t_final
            )));
        }
        if !(self.a >= 0.0 && self.a.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "A must be nonnegative, got {}",
                self.a
            )));
        }
        if self.newton_max == 0 {
            return Err(Error::InvalidParams("newton_max must be at least 1".into()));
        }
        Ok(())
    }

    /// Conditions that do not prevent a run but void the stability guarantees.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.monitor_energy && self.a < A_MIN_STABLE {
            out.push(format!(
                "A = {} is below 1/16: modified-energy decay is not guaranteed",
                self.a
            ));
        }
        if self.a > 0.0 {
            let limit = self.eps / (2.0 * 2f64.sqrt() * self.a.sqrt());
            if self.dt > limit {
                out.push(format!(
                    "dt = {} exceeds eps / (2 sqrt(2 A)) = {limit:.6e}; higher-order stability bounds do not apply",
                    self.dt
                ));
            }
        }
        out
    }

    /// Number of steps `round(T / dt)`.
    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    #[inline]
    fn beta(&self) -> f64 {
        self.a * self.dt / (self.eps * self.eps)
    }
}

/// Two-level history of the scheme.
#[derive(Debug, Clone)]
pub struct StepState {
    pub phi_n: Field,
    pub phi_nm1: Field,
    pub step: usize,
    pub time: f64,
    /// Mean of the initial data.
    pub mass0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport {
    pub step: usize,
    pub time: f64,
    /// Discrete energy `E_h(phi^{n+1})`.
    pub energy: f64,
    /// `E_h(phi^{n+1}) + ||phi^{n+1}-phi^n||_{-1,h}^2 / (4 dt) + ||phi^{n+1}-phi^n||^2 / (2 eps)`
    pub modified_energy: f64,
    pub mass: f64,
    pub newton_iters: usize,
    pub residual: f64,
}

/// Regularity indicators of the initial data; logged, not enforced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InitialDiagnostics {
    pub energy: f64,
    /// `||grad_{h,(4)} mu_h^0||_2`
    pub grad_mu0: f64,
    /// `||Lap4 mu_h^0||_2`
    pub lap_mu0: f64,
    /// `E_h(phi^0) + dt/4 ||grad_{h,(4)} mu_h^0||^2 + dt^2/2 ||Lap4 mu_h^0||^2`
    pub regularity_bound: f64,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub final_state: StepState,
    /// Energies of `(phi^0, phi^-1)`, reported as step 0.
    pub initial: EnergyReport,
    pub history: Vec<EnergyReport>,
    pub diagnostics: InitialDiagnostics,
}

/// One Newton solve attempt.
#[derive(Debug)]
struct NewtonResult {
    phi: Field,
    iterations: usize,
    residual: f64,
}

/// How Newton starts and whether it backtracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Attempt {
    Extrapolated,
    Previous,
    Damped,
}

const MAX_HALVINGS: usize = 8;

/// Fixed data of one implicit step.
#[derive(Clone, Copy)]
struct StepInputs<'a> {
    phi_n: &'a Field,
    phi_nm1: &'a Field,
    forcing: Option<&'a Field>,
    /// Mean the new state must have.
    target_mean: f64,
}

/// Solver bound to one grid and parameter set.
#[derive(Debug, Clone)]
pub struct BdfSolver {
    grid: Grid3,
    spectral: SpectralOps,
    params: SchemeParams,
}

impl BdfSolver {
    pub fn new(grid: Grid3, params: SchemeParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            grid,
            spectral: SpectralOps::new(grid),
            params,
        })
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn params(&self) -> &SchemeParams {
        &self.params
    }

    pub fn spectral(&self) -> &SpectralOps {
        &self.spectral
    }

    fn check(&self, f: &Field) -> Result<()> {
        self.grid.check_same(f.grid())
    }

    /// Chemical potential at a candidate new state `phi`.
    pub fn chem_potential(&self, phi: &Field, phi_n: &Field, phi_nm1: &Field) -> Result<Field> {
        self.check(phi)?;
        self.check(phi_n)?;
        self.check(phi_nm1)?;
        Ok(self.mu(phi, phi_n, phi_nm1))
    }

    fn mu(&self, phi: &Field, phi_n: &Field, phi_nm1: &Field) -> Field {
        let p = &self.params;
        let beta = p.beta();
        let inv_eps = 1.0 / p.eps;
        // Lap4 [(eps + beta) phi - beta phi^n] covers both linear terms in one sweep.
        let lin = phi.zip_map(phi_n, |a, b| (p.eps + beta) * a - beta * b);
        let mut mu = phi
            .zip_map(phi_n, |a, b| a * a * a - 2.0 * b)
            .zip_map(phi_nm1, |a, c| inv_eps * (a + c));
        mu.axpy(-1.0, &apply_lap4(&lin));
        mu
    }

    /// `E_h(phi) = (||phi||_4^4 / 4 - ||phi||_2^2 / 2) / eps + eps/2 ||grad_{h,(4)} phi||^2`
    pub fn energy(&self, phi: &Field) -> f64 {
        discrete_energy(phi, self.params.eps)
    }

    /// Modified energy of the pair `(phi_new, phi_old)`; their means must agree.
    pub fn modified_energy(&self, phi_new: &Field, phi_old: &Field) -> Result<f64> {
        self.check(phi_new)?;
        self.check(phi_old)?;
        let diff = phi_new - phi_old;
        let mean = diff.mean();
        let tolerance = 1e-10 * (1.0 + phi_old.mean().abs());
        if mean.abs() > tolerance {
            return Err(Error::NotMeanZero { mean, tolerance });
        }
        Ok(self.modified_energy_unchecked(phi_new, &diff))
    }

    fn modified_energy_unchecked(&self, phi_new: &Field, diff: &Field) -> f64 {
        let p = &self.params;
        let hm1 = self.spectral.hm1_norm_projected(diff);
        let l2 = norm2(diff);
        self.energy(phi_new) + hm1 * hm1 / (4.0 * p.dt) + l2 * l2 / (2.0 * p.eps)
    }

    fn mu0(&self, phi0: &Field) -> Field {
        let eps = self.params.eps;
        let mut mu = phi0.map(|v| (v * v * v - v) / eps);
        mu.axpy(-eps, &apply_lap4(phi0));
        mu
    }

    fn forcing_at(&self, t: f64) -> Result<Option<Field>> {
        self.params
            .forcing
            .as_ref()
            .map(|f| f.sample(self.grid, t))
            .transpose()
    }

    /// `phi^-1 = phi^0 - dt (Lap4 mu_h^0 + f(0))`, one explicit step backwards.
    pub fn ghost_init(&self, phi0: &Field) -> Result<Field> {
        self.check(phi0)?;
        let dt = self.params.dt;
        let mut ghost = phi0.clone();
        ghost.axpy(-dt, &apply_lap4(&self.mu0(phi0)));
        let mut target = phi0.mean();
        if let Some(f) = self.forcing_at(0.0)? {
            ghost.axpy(-dt, &f);
            target -= dt * f.mean();
        }
        // Lap4 of anything has zero mean; drop the rounding it leaves in the mass.
        ghost.add_scalar(target - ghost.mean());
        Ok(ghost)
    }

    pub fn initial_diagnostics(&self, phi0: &Field) -> Result<InitialDiagnostics> {
        self.check(phi0)?;
        let mu0 = self.mu0(phi0);
        let grad_mu0 = grad4_norm_sq(&mu0).sqrt();
        let lap_mu0 = norm2(&apply_lap4(&mu0));
        let energy = self.energy(phi0);
        let dt = self.params.dt;
        Ok(InitialDiagnostics {
            energy,
            grad_mu0,
            lap_mu0,
            regularity_bound: energy
                + dt / 4.0 * grad_mu0 * grad_mu0
                + dt * dt / 2.0 * lap_mu0 * lap_mu0,
        })
    }

    /// `F(phi) = 3/2 phi - 2 phi^n + 1/2 phi^{n-1} - dt Lap4 mu(phi) - dt f`.
    pub fn residual(
        &self,
        phi: &Field,
        phi_n: &Field,
        phi_nm1: &Field,
        forcing: Option<&Field>,
    ) -> Field {
        let dt = self.params.dt;
        let mu = self.mu(phi, phi_n, phi_nm1);
        let mut r = phi
            .zip_map(phi_n, |a, b| 1.5 * a - 2.0 * b)
            .zip_map(phi_nm1, |a, c| a + 0.5 * c);
        r.axpy(-dt, &apply_lap4(&mu));
        if let Some(f) = forcing {
            r.axpy(-dt, f);
        }
        r
    }

    /// Jacobian action `3/2 psi - dt Lap4 [3 phi^2 psi / eps - (eps + beta) Lap4 psi]`.
    fn jacobian(&self, phi_sq3: &Field, psi: &Field) -> Field {
        let p = &self.params;
        let mut inner = phi_sq3.zip_map(psi, |a, b| a * b / p.eps);
        inner.axpy(-(p.eps + p.beta()), &apply_lap4(psi));
        let mut out = psi * 1.5;
        out.axpy(-p.dt, &apply_lap4(&inner));
        out
    }

    fn preconditioner_symbol(&self, mean_phi_sq: f64) -> Vec<f64> {
        let p = &self.params;
        let c = 3.0 * mean_phi_sq / p.eps;
        let d = p.eps + p.beta();
        self.spectral
            .lam4_3d()
            .iter()
            .map(|&l| 1.5 + p.dt * l * (c + d * l))
            .collect()
    }

    fn newton(
        &self,
        guess: Field,
        ctx: &StepInputs<'_>,
        attempt: Attempt,
        residuals: &mut Vec<f64>,
    ) -> Result<NewtonResult> {
        let p = &self.params;
        let StepInputs {
            phi_n,
            phi_nm1,
            forcing,
            target_mean,
        } = *ctx;
        let mut phi = guess;
        phi.add_scalar(target_mean - phi.mean());
        let mut r = self.residual(&phi, phi_n, phi_nm1, forcing);
        let mut res = norm2(&r);
        residuals.push(res);
        let mut growth = 0;

        for it in 0..p.newton_max {
            if res <= p.newton_tol {
                return Ok(NewtonResult {
                    phi,
                    iterations: it,
                    residual: res,
                });
            }
            let phi_sq3 = phi.map(|v| 3.0 * v * v);
            let symbol = self.preconditioner_symbol(phi.raw_sum_by(|v| v * v) / self.grid.len() as f64);
            let rhs = &r * -1.0;
            let lin = gmres(
                |psi| self.jacobian(&phi_sq3, psi),
                |v| self.spectral.apply_inverse_symbol(v, &symbol),
                &rhs,
                GmresOptions {
                    rtol: p.krylov_tol,
                    ..GmresOptions::default()
                },
            );
            let delta = lin.solution;

            let (next, next_r, next_res) = if attempt == Attempt::Damped {
                let mut alpha = 1.0;
                let mut best = None;
                for _ in 0..=MAX_HALVINGS {
                    let mut trial = phi.clone();
                    trial.axpy(alpha, &delta);
                    trial.add_scalar(target_mean - trial.mean());
                    let tr = self.residual(&trial, phi_n, phi_nm1, forcing);
                    let tres = norm2(&tr);
                    let accept = tres < res;
                    best = Some((trial, tr, tres));
                    if accept {
                        break;
                    }
                    alpha *= 0.5;
                }
                best.expect("at least one trial")
            } else {
                let mut trial = phi.clone();
                trial.axpy(1.0, &delta);
                trial.add_scalar(target_mean - trial.mean());
                let tr = self.residual(&trial, phi_n, phi_nm1, forcing);
                let tres = norm2(&tr);
                (trial, tr, tres)
            };

            residuals.push(next_res);
            if !next_res.is_finite() {
                return Err(Error::NewtonDiverged {
                    residuals: residuals.clone(),
                });
            }
            if next_res > res {
                growth += 1;
                if growth >= 3 {
                    return Err(Error::NewtonDiverged {
                        residuals: residuals.clone(),
                    });
                }
            } else {
                growth = 0;
            }
            phi = next;
            r = next_r;
            res = next_res;
        }
        if res <= p.newton_tol {
            return Ok(NewtonResult {
                phi,
                iterations: p.newton_max,
                residual: res,
            });
        }
        Err(Error::NewtonNotConverged {
            iterations: p.newton_max,
            residuals: residuals.clone(),
        })
    }

    /// Advances `(phi^n, phi^{n-1})` by one step.
    pub fn step(&self, state: &StepState) -> Result<(StepState, EnergyReport)> {
        self.check(&state.phi_n)?;
        self.check(&state.phi_nm1)?;
        let p = &self.params;
        let t_next = (state.step + 1) as f64 * p.dt;
        let forcing = self.forcing_at(t_next)?;
        let target_mean = match &forcing {
            // BDF2 applied to the mean: 3/2 m^{n+1} - 2 m^n + 1/2 m^{n-1} = dt mean(f)
            Some(f) => {
                (2.0 * state.phi_n.mean() - 0.5 * state.phi_nm1.mean() + p.dt * f.mean()) / 1.5
            }
            None => state.mass0,
        };

        let ctx = StepInputs {
            phi_n: &state.phi_n,
            phi_nm1: &state.phi_nm1,
            forcing: forcing.as_ref(),
            target_mean,
        };
        let extrapolated = state.phi_n.zip_map(&state.phi_nm1, |a, b| 2.0 * a - b);
        let mut residuals = Vec::new();
        let mut outcome = Err(Error::NewtonNotConverged {
            iterations: 0,
            residuals: Vec::new(),
        });
        for attempt in [Attempt::Extrapolated, Attempt::Previous, Attempt::Damped] {
            let guess = match attempt {
                Attempt::Extrapolated => extrapolated.clone(),
                Attempt::Previous | Attempt::Damped => state.phi_n.clone(),
            };
            outcome = self.newton(guess, &ctx, attempt, &mut residuals);
            if outcome.is_ok() {
                break;
            }
        }
        let solved = outcome?;

        let diff = &solved.phi - &state.phi_n;
        let report = EnergyReport {
            step: state.step + 1,
            time: t_next,
            energy: self.energy(&solved.phi),
            modified_energy: self.modified_energy_unchecked(&solved.phi, &diff),
            mass: solved.phi.mean(),
            newton_iters: solved.iterations,
            residual: solved.residual,
        };
        let next = StepState {
            phi_nm1: state.phi_n.clone(),
            phi_n: solved.phi,
            step: state.step + 1,
            time: t_next,
            mass0: state.mass0,
        };
        Ok((next, report))
    }

    /// Builds the starting history `(phi^0, phi^-1)` and its energy report.
    pub fn initial_state(&self, phi0: Field) -> Result<(StepState, EnergyReport)> {
        let ghost = self.ghost_init(&phi0)?;
        let diff = &phi0 - &ghost;
        let mass0 = phi0.mean();
        let report = EnergyReport {
            step: 0,
            time: 0.0,
            energy: self.energy(&phi0),
            modified_energy: self.modified_energy_unchecked(&phi0, &diff),
            mass: mass0,
            newton_iters: 0,
            residual: 0.0,
        };
        Ok((
            StepState {
                phi_n: phi0,
                phi_nm1: ghost,
                step: 0,
                time: 0.0,
                mass0,
            },
            report,
        ))
    }

    /// Runs `round(T / dt)` steps from `phi0`, calling `observer` after each step.
    pub fn run(
        &self,
        phi0: Field,
        mut observer: impl FnMut(&StepState, &EnergyReport),
    ) -> Result<RunSummary> {
        self.check(&phi0)?;
        let diagnostics = self.initial_diagnostics(&phi0)?;
        let (mut state, initial) = self.initial_state(phi0)?;
        let steps = self.params.steps();
        let mut history = Vec::with_capacity(steps);
        for n in 0..steps {
            let (next, report) = self.step(&state).map_err(|e| Error::StepFailed {
                step: n + 1,
                source: Box::new(e),
            })?;
            observer(&next, &report);
            history.push(report);
            state = next;
        }
        Ok(RunSummary {
            final_state: state,
            initial,
            history,
            diagnostics,
        })
    }
}

/// Discrete energy `E_h(phi)`.
pub fn discrete_energy(phi: &Field, eps: f64) -> f64 {
    let l4 = norm(phi, Norm::L4).powi(4);
    let l2 = phi.raw_ip(phi);
    (0.25 * l4 - 0.5 * l2) / eps + 0.5 * eps * grad4_norm_sq(phi)
}

pub fn chem_potential(phi: &Field, phi_n: &Field, phi_nm1: &Field, p: &SchemeParams) -> Result<Field> {
    BdfSolver::new(*phi.grid(), p.clone())?.chem_potential(phi, phi_n, phi_nm1)
}

pub fn energy(phi: &Field, eps: f64) -> f64 {
    discrete_energy(phi, eps)
}

pub fn modified_energy(phi_new: &Field, phi_old: &Field, p: &SchemeParams) -> Result<f64> {
    BdfSolver::new(*phi_new.grid(), p.clone())?.modified_energy(phi_new, phi_old)
}

pub fn ghost_init(phi0: &Field, p: &SchemeParams) -> Result<Field> {
    BdfSolver::new(*phi0.grid(), p.clone())?.ghost_init(phi0)
}

pub fn bdf2_step(state: &StepState, p: &SchemeParams) -> Result<(StepState, EnergyReport)> {
    BdfSolver::new(*state.phi_n.grid(), p.clone())?.step(state)
}

pub fn run(
    phi0: Field,
    p: &SchemeParams,
    observer: impl FnMut(&StepState, &EnergyReport),
) -> Result<RunSummary> {
    BdfSolver::new(*phi0.grid(), p.clone())?.run(phi0, observer)
}
