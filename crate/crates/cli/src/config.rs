//! Run configuration.
//!
//! The file format is one `key = value` pair per line. Blank lines and text
//! after `#` are ignored. Keys are dotted names such as `grid.N` or
//! `scheme.dt`; values are numbers, booleans (`true`/`false`) or bare words.
//! Every key may also be set on the command line with `--set key=value`,
//! which takes precedence over the file.

use chfd::scheme::{SchemeParams, A_MIN_STABLE};
use chfd::verify::manufactured::DOMAIN_LENGTH;
use chfd::{Error, Grid3, Result};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub enum InitKind {
    Manufactured,
    Random { seed: u64, amplitude: f64, mean: f64 },
    File { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForcingKind {
    None,
    Manufactured,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n: usize,
    pub length: f64,
    pub eps: f64,
    pub dt: f64,
    pub a: f64,
    pub t_final: f64,
    pub newton_tol: f64,
    pub newton_max: usize,
    pub init: InitKind,
    pub forcing: ForcingKind,
    pub output_dir: PathBuf,
    /// Write every k-th step to `energy.csv`.
    pub energy_every: usize,
    /// Write a snapshot every k-th step; `0` disables snapshots.
    pub snapshot_every: usize,
    pub vtk: bool,
    pub monitor_energy: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 32,
            length: DOMAIN_LENGTH,
            eps: 1.0,
            dt: 0.01,
            a: A_MIN_STABLE,
            t_final: 0.16,
            newton_tol: 1e-11,
            newton_max: 50,
            init: InitKind::Manufactured,
            forcing: ForcingKind::Manufactured,
            output_dir: PathBuf::from("out"),
            energy_every: 1,
            snapshot_every: 0,
            vtk: false,
            monitor_energy: false,
        }
    }
}

/// Raw init settings, resolved into [`InitKind`] once all keys are read.
#[derive(Default)]
struct InitKeys {
    kind: Option<String>,
    seed: Option<u64>,
    amplitude: Option<f64>,
    mean: Option<f64>,
    path: Option<PathBuf>,
}

fn bad(key: &str, value: &str, what: &str) -> Error {
    Error::Config(format!("{key} = {value:?}: expected {what}"))
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>().map_err(|_| bad(key, v, "a number"))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse::<usize>()
        .map_err(|_| bad(key, v, "a nonnegative integer"))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad(key, v, "true or false")),
    }
}

/// Splits one line into `(key, value)`; `None` for blank or comment lines.
fn split_line(line: &str) -> Option<std::result::Result<(&str, &str), ()>> {
    let line = line.split('#').next().unwrap_or("").trim();
    if line.is_empty() {
        return None;
    }
    Some(match line.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim(), v.trim())),
        _ => Err(()),
    })
}

impl RunConfig {
    /// Reads a config file, then applies `key=value` overrides.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, overrides, base)
    }

    /// Parses config text; relative `init.path` values resolve against `base`.
    pub fn parse(text: &str, overrides: &[String], base: &Path) -> Result<Self> {
        let mut pairs = Vec::new();
        for (no, line) in text.lines().enumerate() {
            match split_line(line) {
                None => {}
                Some(Ok((k, v))) => pairs.push((k.to_string(), v.to_string())),
                Some(Err(())) => {
                    return Err(Error::Config(format!(
                        "line {}: expected `key = value`, got {line:?}",
                        no + 1
                    )))
                }
            }
        }
        for o in overrides {
            match split_line(o) {
                Some(Ok((k, v))) => pairs.push((k.to_string(), v.to_string())),
                _ => {
                    return Err(Error::Config(format!(
                        "override {o:?}: expected key=value"
                    )))
                }
            }
        }

        let mut cfg = RunConfig::default();
        let mut init = InitKeys::default();
        for (key, v) in &pairs {
            let (k, v) = (key.as_str(), v.as_str());
            match k {
                "grid.N" => cfg.n = parse_usize(k, v)?,
                "grid.L" => cfg.length = parse_f64(k, v)?,
                "scheme.eps" => cfg.eps = parse_f64(k, v)?,
                "scheme.dt" => cfg.dt = parse_f64(k, v)?,
                "scheme.A" => cfg.a = parse_f64(k, v)?,
                "scheme.T" => cfg.t_final = parse_f64(k, v)?,
                "scheme.newton_tol" => cfg.newton_tol = parse_f64(k, v)?,
                "scheme.newton_max" => cfg.newton_max = parse_usize(k, v)?,
                "init.kind" => init.kind = Some(v.to_string()),
                "init.seed" => {
                    init.seed = Some(v.parse().map_err(|_| bad(k, v, "an unsigned integer"))?)
                }
                "init.amplitude" => init.amplitude = Some(parse_f64(k, v)?),
                "init.mean" => init.mean = Some(parse_f64(k, v)?),
                "init.path" => init.path = Some(base.join(v)),
                "forcing" => {
                    cfg.forcing = match v {
                        "none" => ForcingKind::None,
                        "manufactured" => ForcingKind::Manufactured,
                        _ => return Err(bad(k, v, "none or manufactured")),
                    }
                }
                "output.dir" => cfg.output_dir = base.join(v),
                "output.energy_every" => cfg.energy_every = parse_usize(k, v)?,
                "output.snapshot_every" => cfg.snapshot_every = parse_usize(k, v)?,
                "output.vtk" => cfg.vtk = parse_bool(k, v)?,
                "monitor.energy_decay" => cfg.monitor_energy = parse_bool(k, v)?,
                _ => return Err(Error::Config(format!("unknown key {k:?}"))),
            }
        }
        cfg.init = match init.kind.as_deref().unwrap_or("manufactured") {
            "manufactured" => InitKind::Manufactured,
            "random" => InitKind::Random {
                seed: init.seed.unwrap_or(0),
                amplitude: init.amplitude.unwrap_or(0.1),
                mean: init.mean.unwrap_or(0.0),
            },
            "file" => InitKind::File {
                path: init
                    .path
                    .ok_or_else(|| Error::Config("init.kind = file needs init.path".into()))?,
            },
            other => return Err(bad("init.kind", other, "manufactured, random or file")),
        };
        Ok(cfg)
    }

    /// Checks every numeric field and returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let grid = self.grid()?;
        let params = self.scheme_params();
        params.validate()?;
        if self.energy_every == 0 {
            return Err(Error::Config("output.energy_every must be at least 1".into()));
        }
        if let InitKind::Random { amplitude, mean, .. } = self.init {
            if !(amplitude >= 0.0 && amplitude.is_finite() && mean.is_finite()) {
                return Err(Error::Config(format!(
                    "init.amplitude must be nonnegative and finite, got {amplitude}"
                )));
            }
        }
        let mut warnings = params.warnings();
        let ratio = self.t_final / self.dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            warnings.push(format!(
                "T / dt = {ratio} is not an integer; running {} steps",
                ratio.round()
            ));
        }
        if self.forcing == ForcingKind::Manufactured && (grid.length() - DOMAIN_LENGTH).abs() > 1e-12 {
            warnings.push(format!(
                "the manufactured forcing is periodic on L = {DOMAIN_LENGTH}, got L = {}",
                grid.length()
            ));
        }
        Ok(warnings)
    }

    pub fn grid(&self) -> Result<Grid3> {
        Grid3::new(self.n, self.length)
    }

    /// Scheme parameters without forcing; the caller attaches it.
    pub fn scheme_params(&self) -> SchemeParams {
        let mut p = SchemeParams::new(self.eps, self.dt, self.t_final);
        p.a = self.a;
        p.newton_tol = self.newton_tol;
        p.newton_max = self.newton_max;
        p.monitor_energy = self.monitor_energy;
        p
    }
}
