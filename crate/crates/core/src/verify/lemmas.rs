//! Randomized certification of the discrete operator inequalities and identities.

use crate::error::Result;
use crate::grid::{Field, Grid3};
use crate::spectral::{Seminorm, SpectralOps};
use crate::stencil::{
    apply_lap2, apply_lap4, d2_ip_sum, grad4_norm_sq, grad_ip, grad_norm_sq, ip, norm2,
    sobolev_norms, Axis, Stencil, LAP4_WEIGHTS,
};
use crate::verify::random::{nyquist_adjacent_mode, random_field_with, RandomFieldSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;

/// Relative rounding slack granted to inequalities.
pub const ROUNDING_SLACK: f64 = 1e-12;

/// Decay rates cycled through the random trials, from rough to smooth.
const DECAYS: [f64; 3] = [0.0, 0.3, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// Margin is `(rhs - lhs) / scale`; passes above `-ROUNDING_SLACK`.
    Inequality,
    /// Margin is `tolerance - |lhs - rhs| / scale`; passes at or above zero.
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub n: usize,
    pub kind: CheckKind,
    pub samples: usize,
    pub worst_margin: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    pub seed: u64,
    pub trials: usize,
    pub resolutions: Vec<usize>,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

impl LemmaReport {
    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

#[derive(Debug, Clone)]
pub struct LemmaSuiteOptions {
    pub resolutions: Vec<usize>,
    pub length: f64,
    pub trials: usize,
    pub seed: u64,
    /// Long-stencil weights used by the summation-by-parts and symmetry checks.
    pub lap4_weights: [f64; 5],
}

impl LemmaSuiteOptions {
    pub fn new(resolutions: &[usize], trials: usize, seed: u64) -> Self {
        Self {
            resolutions: resolutions.to_vec(),
            length: 1.0,
            trials,
            seed,
            lap4_weights: LAP4_WEIGHTS,
        }
    }
}

struct Tally {
    name: &'static str,
    kind: CheckKind,
    samples: usize,
    worst: f64,
}

impl Tally {
    fn record(&mut self, margin: f64) {
        self.samples += 1;
        if margin.is_nan() || margin < self.worst {
            self.worst = margin;
        }
    }

    fn finish(self, n: usize) -> CheckResult {
        let passed = match self.kind {
            CheckKind::Inequality => self.worst >= -ROUNDING_SLACK,
            CheckKind::Identity => self.worst >= 0.0,
        };
        CheckResult {
            name: self.name.to_string(),
            n,
            kind: self.kind,
            samples: self.samples,
            worst_margin: self.worst,
            passed,
        }
    }
}

/// Named tallies kept in first-use order so reports are stable.
#[derive(Default)]
struct Tallies(Vec<Tally>);

impl Tallies {
    fn get(&mut self, name: &'static str, kind: CheckKind) -> &mut Tally {
        let pos = match self.0.iter().position(|t| t.name == name) {
            Some(p) => p,
            None => {
                self.0.push(Tally {
                    name,
                    kind,
                    samples: 0,
                    worst: f64::INFINITY,
                });
                self.0.len() - 1
            }
        };
        &mut self.0[pos]
    }

    /// Records `lo <= hi`.
    fn le(&mut self, name: &'static str, lo: f64, hi: f64) {
        let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
        self.get(name, CheckKind::Inequality).record((hi - lo) / scale);
    }

    /// Records `lo <= hi` with an explicit scale for the slack.
    fn le_scaled(&mut self, name: &'static str, lo: f64, hi: f64, scale: f64) {
        let scale = scale.max(f64::MIN_POSITIVE);
        self.get(name, CheckKind::Inequality).record((hi - lo) / scale);
    }

    /// Records `|a - b| <= tol * scale`.
    fn eq(&mut self, name: &'static str, a: f64, b: f64, scale: f64, tol: f64) {
        let scale = scale.max(f64::MIN_POSITIVE);
        self.get(name, CheckKind::Identity)
            .record(tol - (a - b).abs() / scale);
    }
}

/// Runs every check at each resolution on `trials` seeded random fields plus
/// highest-mode adversarial fields.
pub fn lemma_suite(resolutions: &[usize], trials: usize, seed: u64) -> Result<LemmaReport> {
    run_lemma_suite(&LemmaSuiteOptions::new(resolutions, trials, seed))
}

pub fn run_lemma_suite(opts: &LemmaSuiteOptions) -> Result<LemmaReport> {
    let mut checks = Vec::new();
    if opts.trials > 0 {
        for &n in &opts.resolutions {
            checks.extend(checks_at(n, opts)?);
        }
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(LemmaReport {
        seed: opts.seed,
        trials: opts.trials,
        resolutions: opts.resolutions.clone(),
        checks,
        passed,
    })
}

fn checks_at(n: usize, opts: &LemmaSuiteOptions) -> Result<Vec<CheckResult>> {
    let grid = Grid3::new(n, opts.length)?;
    let ops = SpectralOps::new(grid);
    let lap4 = Stencil::lap4_with_weights(opts.lap4_weights, grid.h());
    let mut t = Tallies::default();

    symbol_checks(&ops, &mut t);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut fields = Vec::with_capacity(opts.trials + 3);
    for trial in 0..opts.trials {
        let spec = RandomFieldSpec {
            seed: rng.random(),
            decay: DECAYS[trial % DECAYS.len()],
            amplitude: 1.0,
            mean: rng.random_range(-0.5..0.5),
        };
        fields.push(random_field_with(&ops, &spec)?);
    }
    for (i, axes) in [&[Axis::X][..], &[Axis::X, Axis::Y], &Axis::ALL].iter().enumerate() {
        fields.push(nyquist_adjacent_mode(grid, axes, opts.seed.wrapping_add(i as u64))?);
    }

    for (i, f) in fields.iter().enumerate() {
        let g = &fields[(i + 1) % fields.len()];
        field_checks(&ops, &lap4, f, g, &mut t)?;
    }
    Ok(t.0.into_iter().map(|tally| tally.finish(n)).collect())
}

fn symbol_checks(ops: &SpectralOps, t: &mut Tallies) {
    let tab = ops.tables();
    let n = tab.n;
    for p in 0..n {
        if tab.wavenumbers[p] == 0 {
            continue;
        }
        t.le("symbol_mu_lower", 2.0 / PI * tab.nu[p], tab.mu[p]);
        t.le("symbol_mu_upper", tab.mu[p], tab.nu[p]);
        t.le("symbol_lam4_lower", tab.lam[p], tab.lam4[p]);
        t.le("symbol_lam4_upper", tab.lam4[p], 4.0 / 3.0 * tab.lam[p]);
    }
    let lam4 = ops.lam4_3d();
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                if i == 0 && j == 0 && k == 0 {
                    continue;
                }
                let big = ops.big_lam_at(i, j, k);
                let l4 = lam4[i + n * (j + n * k)];
                t.le("symbol_lam4_vs_continuum_lower", 4.0 / (PI * PI) * big, l4);
                t.le("symbol_lam4_vs_continuum_upper", l4, big);
            }
        }
    }
}

fn field_checks(
    ops: &SpectralOps,
    lap4: &Stencil,
    f: &Field,
    g: &Field,
    t: &mut Tallies,
) -> Result<()> {
    let h = ops.grid().h();
    let spec = ops.fft(f)?;

    // Laplacian and gradient sandwiches between the two stencils.
    let lap_h = apply_lap2(f);
    let lap_h_norm = norm2(&lap_h);
    let lap4_f = apply_lap4(f);
    let lap4_norm = norm2(&lap4_f);
    t.le("lap_sandwich_lower", lap_h_norm, lap4_norm);
    t.le("lap_sandwich_upper", lap4_norm, 4.0 / 3.0 * lap_h_norm);
    let grad_h = grad_norm_sq(f).sqrt();
    let grad4 = grad4_norm_sq(f).sqrt();
    t.le("grad_sandwich_lower", grad_h, grad4);
    t.le("grad_sandwich_upper", grad4, 2.0 / 3f64.sqrt() * grad_h);

    // Discrete norms against norms of the continuous extension.
    let d = 2.0 / PI;
    let ext_grad = ops.seminorm_sq(&spec, Seminorm::Gradient).sqrt();
    t.le("extension_grad_lower", d * ext_grad, grad_h);
    t.le("extension_grad_upper", grad_h, ext_grad);
    let ext_lap = ops.seminorm_sq(&spec, Seminorm::LapPow(1)).sqrt();
    t.le("extension_lap_lower", d * d * ext_lap, lap_h_norm);
    t.le("extension_lap_upper", lap_h_norm, ext_lap);
    let grad_lap_h = grad_norm_sq(&lap_h).sqrt();
    let ext_grad_lap = ops.seminorm_sq(&spec, Seminorm::GradLapPow(1)).sqrt();
    t.le("extension_grad_lap_lower", d.powi(3) * ext_grad_lap, grad_lap_h);
    t.le("extension_grad_lap_upper", grad_lap_h, ext_grad_lap);

    let hm1 = ops.hm1_norm_projected(f);
    let ext_hm1 = ops.seminorm_sq(&spec, Seminorm::HMinus1).sqrt();
    t.le("extension_hm1_lower", ext_hm1, hm1);
    t.le("extension_hm1_upper", hm1, PI / 2.0 * ext_hm1);
    let inv = ops.inv_neg_lap4_projected(f);
    t.eq("hm1_representation", hm1, grad4_norm_sq(&inv).sqrt(), hm1, 1e-11);

    // Continuum minus long-stencil gradient norm.
    let gap = ops.gradient_gap(f)?;
    t.le_scaled("gradient_gap_lower", 0.0, gap.gap, gap.h3_sq);
    t.le_scaled("gradient_gap_upper", gap.gap, gap.bound, gap.h3_sq);

    // Summation by parts and symmetry of the long stencil under test.
    let lap4_g = lap4.apply(g);
    let lhs = -ip(f, &lap4_g)?;
    let rhs = grad_ip(f, g)? + h * h / 12.0 * d2_ip_sum(f, g)?;
    let sbp_scale = norm2(f) * sobolev_norms(g).h2 + 1.0;
    t.eq("summation_by_parts", lhs, rhs, sbp_scale, 1e-12);
    let sym_a = ip(&lap4.apply(f), g)?;
    let sym_b = ip(f, &lap4_g)?;
    t.eq(
        "lap4_symmetry",
        sym_a,
        sym_b,
        norm2(&lap4.apply(f)) * norm2(g) + norm2(f) * norm2(&lap4_g),
        1e-12,
    );

    // Transform identities.
    let pair = ops.bandlimited_ip(f, g)?;
    t.eq(
        "bandlimited_inner_product",
        pair.discrete,
        pair.continuous,
        norm2(f) * norm2(g),
        1e-12,
    );
    let l2 = norm2(f);
    t.eq("parseval", l2 * l2, spec.weighted_sum(|_, _, _| 1.0), l2 * l2, 1e-12);

    let spectral = ops.apply_lap4_spectral(f)?;
    t.eq(
        "lap4_stencil_spectral",
        0.0,
        norm2(&(&spectral - &lap4_f)),
        lap4_norm,
        1e-11,
    );
    let mut f0 = f.clone();
    f0.add_scalar(-f.mean());
    let back = apply_lap4(&ops.inv_neg_lap4(&f0)?);
    let resid = norm2(&(&back + &f0));
    t.eq("inverse_round_trip", 0.0, resid, norm2(&f0), 1e-11);
    Ok(())
}
