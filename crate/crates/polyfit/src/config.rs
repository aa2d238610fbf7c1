//! Run configuration: a TOML file whose keys mirror the long flag names,
//! overridden by flags, over built-in defaults.

use std::fs;
use std::path::{Path, PathBuf};

use polyfit_core::data::{Mode, Oracle, StretchGrid, TrainModes};
use polyfit_core::potential::{Ansatz, Family, FamilySpec};
use polyfit_core::training::{GradMode, TrainingConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Every key any command understands. Keys a command does not use are ignored,
/// so one file can drive `fit` and `bench` alike.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConfigFile {
    pub data: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub family: Option<String>,
    pub ansatz: Option<String>,
    pub train_modes: Option<String>,
    pub restarts: Option<usize>,
    pub seed: Option<u64>,
    pub lr: Option<f64>,
    pub epochs: Option<usize>,
    pub tolerance: Option<f64>,
    pub window: Option<usize>,
    pub grad_mode: Option<String>,
    pub ode_steps: Option<usize>,
    pub widths: Option<Vec<usize>>,
    pub oracle: Option<String>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub modes: Option<String>,
    pub stretch_max: Option<f64>,
    pub points: Option<usize>,
    pub noise: Option<f64>,
    pub sweep_restarts: Option<usize>,
    pub no_sweep: Option<bool>,
    pub upper: Option<f64>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))
    }
}

/// Flag value, else file value, else nothing.
pub fn pick<T: Clone>(flag: &Option<T>, file: &Option<T>) -> Option<T> {
    flag.clone().or_else(|| file.clone())
}

fn usage<T>(r: polyfit_core::Result<T>) -> Result<T> {
    r.map_err(|e| Error::Usage(e.to_string()))
}

fn required(v: Option<PathBuf>, flag: &str) -> Result<PathBuf> {
    v.ok_or_else(|| Error::Usage(format!("--{flag} is required (flag or config file)")))
}

pub fn parse_modes(s: &str) -> Result<Vec<Mode>> {
    s.split(',').map(|m| usage(Mode::parse(m))).collect()
}

/// Training options shared by `fit` and `bench`, as given on the command line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingFlags {
    pub restarts: Option<usize>,
    pub seed: Option<u64>,
    pub lr: Option<f64>,
    pub epochs: Option<usize>,
    pub tolerance: Option<f64>,
    pub window: Option<usize>,
    pub grad_mode: Option<String>,
    pub ode_steps: Option<usize>,
    pub widths: Option<Vec<usize>>,
    pub ansatz: Option<String>,
}

impl TrainingFlags {
    /// Training config with the given restart count when none is set.
    pub fn training(&self, file: &ConfigFile, default_restarts: usize) -> Result<TrainingConfig> {
        let d = TrainingConfig::default();
        let cfg = TrainingConfig {
            learning_rate: pick(&self.lr, &file.lr).unwrap_or(d.learning_rate),
            max_epochs: pick(&self.epochs, &file.epochs).unwrap_or(d.max_epochs),
            tolerance: pick(&self.tolerance, &file.tolerance).unwrap_or(d.tolerance),
            window: pick(&self.window, &file.window).unwrap_or(d.window),
            restarts: pick(&self.restarts, &file.restarts).unwrap_or(default_restarts),
            seed: pick(&self.seed, &file.seed).unwrap_or(d.seed),
            grad_mode: match pick(&self.grad_mode, &file.grad_mode) {
                Some(s) => usage(GradMode::parse(&s))?,
                None => d.grad_mode,
            },
        };
        usage(cfg.validate())?;
        Ok(cfg)
    }

    pub fn ansatz(&self, file: &ConfigFile) -> Result<Ansatz> {
        match pick(&self.ansatz, &file.ansatz) {
            Some(s) => usage(Ansatz::parse(&s)),
            None => Ok(Ansatz::Full),
        }
    }

    /// Architecture for one family.
    pub fn spec(&self, family: Family, file: &ConfigFile) -> Result<FamilySpec> {
        let mut spec = FamilySpec::new(family, self.ansatz(file)?);
        if let Some(w) = pick(&self.widths, &file.widths) {
            if w.is_empty() || w.contains(&0) {
                return Err(Error::Usage(format!("--widths must be positive, got {w:?}")));
            }
            spec = spec.with_widths(&w);
        }
        if let Some(n) = pick(&self.ode_steps, &file.ode_steps) {
            if n == 0 {
                return Err(Error::Usage("--ode-steps must be positive".into()));
            }
            spec.node_integrator.steps = n;
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenSettings {
    pub oracle: Oracle,
    pub modes: Vec<Mode>,
    pub grid: StretchGrid,
    pub noise: f64,
    pub seed: u64,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GenFlags {
    pub oracle: Option<String>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub modes: Option<String>,
    pub stretch_max: Option<f64>,
    pub points: Option<usize>,
    pub noise: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl GenFlags {
    pub fn resolve(&self, file: &ConfigFile) -> Result<GenSettings> {
        let name = pick(&self.oracle, &file.oracle).unwrap_or_else(|| "mooney-rivlin".into());
        let c1 = pick(&self.c1, &file.c1);
        let oracle = match name.to_ascii_lowercase().as_str() {
            "neo-hookean" | "nh" => Oracle::NeoHookean { c1: c1.unwrap_or(0.5) },
            "mooney-rivlin" | "mr" => {
                Oracle::MooneyRivlin { c1: c1.unwrap_or(0.3), c2: pick(&self.c2, &file.c2).unwrap_or(0.1) }
            }
            "fiber" => Oracle::FiberReinforced {
                c1: c1.unwrap_or(0.5),
                k1: pick(&self.k1, &file.k1).unwrap_or(1.0),
                k2: pick(&self.k2, &file.k2).unwrap_or(2.0),
            },
            other => {
                return Err(Error::Usage(format!("unknown oracle {other:?} (expected neo-hookean, mooney-rivlin or fiber)")))
            }
        };
        usage(oracle.validate())?;
        let fiber = matches!(oracle, Oracle::FiberReinforced { .. });
        let modes = match pick(&self.modes, &file.modes) {
            Some(s) => parse_modes(&s)?,
            None if fiber => Mode::SKIN.to_vec(),
            None => Mode::RUBBER.to_vec(),
        };
        let mut grid = if modes.iter().any(|m| m.is_biaxial()) { StretchGrid::SKIN } else { StretchGrid::RUBBER };
        if let Some(e) = pick(&self.stretch_max, &file.stretch_max) {
            grid.end = e;
        }
        if let Some(n) = pick(&self.points, &file.points) {
            grid.points = n;
        }
        usage(grid.values())?;
        let noise = pick(&self.noise, &file.noise).unwrap_or(0.0);
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err(Error::Usage(format!("--noise must be non-negative, got {noise}")));
        }
        Ok(GenSettings {
            oracle,
            modes,
            grid,
            noise,
            seed: pick(&self.seed, &file.seed).unwrap_or(0),
            out: required(pick(&self.out, &file.out), "out")?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSettings {
    pub data: PathBuf,
    pub spec: FamilySpec,
    pub train_modes: TrainModes,
    pub training: TrainingConfig,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitFlags {
    pub data: Option<PathBuf>,
    pub family: Option<String>,
    pub train_modes: Option<String>,
    pub training: TrainingFlags,
    pub out: Option<PathBuf>,
}

impl FitFlags {
    /// `fit` keeps the lowest-loss restart and defaults to a single one.
    pub fn resolve(&self, file: &ConfigFile) -> Result<FitSettings> {
        let family = usage(Family::parse(&pick(&self.family, &file.family).unwrap_or_else(|| "cann".into())))?;
        let train_modes = match pick(&self.train_modes, &file.train_modes) {
            Some(s) => usage(TrainModes::parse(&s))?,
            None => TrainModes::All,
        };
        Ok(FitSettings {
            data: required(pick(&self.data, &file.data), "data")?,
            spec: self.training.spec(family, file)?,
            train_modes,
            training: self.training.training(file, 1)?,
            out: required(pick(&self.out, &file.out), "out")?,
        })
    }
}

/// `bench` settings. `restarts` is resolved against the data set when unset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchSettings {
    pub data: PathBuf,
    pub families: Vec<Family>,
    pub specs: Vec<FamilySpec>,
    /// Grid rows; `None` means each curve of the data set alone plus `all`.
    pub rows: Option<Vec<TrainModes>>,
    pub training: TrainingConfig,
    pub restarts_given: bool,
    /// Restarts per efficiency ladder step; `None` skips the sweep.
    pub sweep_restarts: Option<usize>,
    pub trace_points: usize,
    pub trace_upper: f64,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchFlags {
    pub data: Option<PathBuf>,
    pub family: Option<String>,
    pub train_modes: Option<String>,
    pub training: TrainingFlags,
    pub sweep_restarts: Option<usize>,
    pub no_sweep: bool,
    pub points: Option<usize>,
    pub upper: Option<f64>,
    pub out: Option<PathBuf>,
}

pub fn parse_families(s: &str) -> Result<Vec<Family>> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(Family::ALL.to_vec());
    }
    let mut out: Vec<Family> = Vec::new();
    for f in s.split(',') {
        let f = usage(Family::parse(f))?;
        if !out.contains(&f) {
            out.push(f);
        }
    }
    Ok(out)
}

/// Comma-separated grid rows; each row is a single mode or `all`.
pub fn parse_rows(s: &str) -> Result<Vec<TrainModes>> {
    s.split(',')
        .map(|r| if r.trim().eq_ignore_ascii_case("all") { Ok(TrainModes::All) } else { Ok(TrainModes::Modes(vec![usage(Mode::parse(r))?])) })
        .collect()
}

impl BenchFlags {
    pub fn resolve(&self, file: &ConfigFile) -> Result<BenchSettings> {
        let families = parse_families(&pick(&self.family, &file.family).unwrap_or_else(|| "all".into()))?;
        let specs = families.iter().map(|&f| self.training.spec(f, file)).collect::<Result<Vec<_>>>()?;
        let restarts_given = pick(&self.training.restarts, &file.restarts).is_some();
        let no_sweep = self.no_sweep || file.no_sweep.unwrap_or(false);
        let sweep_restarts = pick(&self.sweep_restarts, &file.sweep_restarts).unwrap_or(5);
        if sweep_restarts == 0 {
            return Err(Error::Usage("--sweep-restarts must be positive".into()));
        }
        let trace_points = pick(&self.points, &file.points).unwrap_or(200);
        let trace_upper = pick(&self.upper, &file.upper).unwrap_or(crate::bench::DEFAULT_TRACE_UPPER);
        if trace_points == 0 || !(trace_upper > 0.0 && trace_upper.is_finite()) {
            return Err(Error::Usage("trace --points and --upper must be positive".into()));
        }
        Ok(BenchSettings {
            data: required(pick(&self.data, &file.data), "data")?,
            families,
            specs,
            rows: pick(&self.train_modes, &file.train_modes).map(|s| parse_rows(&s)).transpose()?,
            training: self.training.training(file, TrainingConfig::SKIN_RESTARTS)?,
            restarts_given,
            sweep_restarts: (!no_sweep).then_some(sweep_restarts),
            trace_points,
            trace_upper,
            out: required(pick(&self.out, &file.out), "out")?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeSettings {
    pub model: PathBuf,
    pub points: usize,
    pub upper: f64,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DerivativeFlags {
    pub model: Option<PathBuf>,
    pub points: Option<usize>,
    pub upper: Option<f64>,
    pub out: Option<PathBuf>,
}

impl DerivativeFlags {
    pub fn resolve(&self, file: &ConfigFile) -> Result<DerivativeSettings> {
        let points = pick(&self.points, &file.points).unwrap_or(200);
        let upper = pick(&self.upper, &file.upper).unwrap_or(crate::bench::DEFAULT_TRACE_UPPER);
        if points == 0 || !(upper > 0.0 && upper.is_finite()) {
            return Err(Error::Usage("--points and --upper must be positive".into()));
        }
        Ok(DerivativeSettings {
            model: required(pick(&self.model, &file.model), "model")?,
            points,
            upper,
            out: required(pick(&self.out, &file.out), "out")?,
        })
    }
}
