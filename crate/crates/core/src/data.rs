//! Stress–stretch datasets, synthetic oracles and train/validation splits.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::kinematics::MaterialFrame;
use crate::loading::{stress_from_derivatives, LoadingMode};
use crate::potential::EnergyDerivatives;
use crate::rng::seeded;
use crate::{Error, Result};

/// Loading-mode tags: three isotropic protocols and three biaxial ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mode {
    UT,
    PS,
    ET,
    SX,
    SY,
    EB,
}

impl Mode {
    pub const ALL: [Mode; 6] = [Mode::UT, Mode::PS, Mode::ET, Mode::SX, Mode::SY, Mode::EB];
    pub const RUBBER: [Mode; 3] = [Mode::UT, Mode::PS, Mode::ET];
    pub const SKIN: [Mode; 3] = [Mode::SX, Mode::SY, Mode::EB];

    pub fn name(self) -> &'static str {
        match self {
            Mode::UT => "UT",
            Mode::PS => "PS",
            Mode::ET => "ET",
            Mode::SX => "SX",
            Mode::SY => "SY",
            Mode::EB => "EB",
        }
    }

    pub fn parse(s: &str) -> Result<Mode> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidInput(format!("unknown loading mode {s:?}")))
    }

    /// Biaxial modes report `λy` and `Pyy`.
    pub fn is_biaxial(self) -> bool {
        matches!(self, Mode::SX | Mode::SY | Mode::EB)
    }

    /// Loading protocol of a sample with these stretches.
    pub fn loading(self, lambda_x: f64, lambda_y: Option<f64>) -> LoadingMode {
        match self {
            Mode::UT => LoadingMode::Uniaxial(lambda_x),
            Mode::PS => LoadingMode::PureShear(lambda_x),
            Mode::ET => LoadingMode::Equibiaxial(lambda_x),
            Mode::SX | Mode::SY | Mode::EB => {
                let ly = lambda_y.unwrap_or(match self {
                    Mode::SX => 1.0,
                    _ => lambda_x,
                });
                LoadingMode::Biaxial { lx: lambda_x, ly }
            }
        }
    }

    /// Stretches `(λx, λy)` of the protocol at loading parameter `λ`.
    pub fn stretches_at(self, lambda: f64) -> (f64, Option<f64>) {
        match self {
            Mode::UT | Mode::PS | Mode::ET => (lambda, None),
            Mode::SX => (lambda, Some(1.0)),
            Mode::SY => (1.0, Some(lambda)),
            Mode::EB => (lambda, Some(lambda)),
        }
    }
}

/// One measured point. `lambda_y` and `p_yy` are present exactly for
/// biaxial modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StressStretchSample {
    pub mode: Mode,
    pub lambda_x: f64,
    pub lambda_y: Option<f64>,
    pub p_xx: f64,
    pub p_yy: Option<f64>,
}

impl StressStretchSample {
    pub fn loading(&self) -> LoadingMode {
        self.mode.loading(self.lambda_x, self.lambda_y)
    }

    /// The stretch that increases along a curve.
    pub fn primary_stretch(&self) -> f64 {
        match self.mode {
            Mode::SY => self.lambda_y.unwrap_or(self.lambda_x),
            _ => self.lambda_x,
        }
    }

    /// Stress components in `(Pxx, Pyy)` order.
    pub fn stresses(&self) -> ([f64; 2], usize) {
        match self.p_yy {
            Some(p) => ([self.p_xx, p], 2),
            None => ([self.p_xx, 0.0], 1),
        }
    }

    /// Checks stretches and stress components; `line` labels the error.
    pub fn validate(&self, line: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(format!("sample {line}: {msg}")));
        if !(self.lambda_x > 0.0 && self.lambda_x.is_finite()) {
            return bad(format!("lambda_x = {} must be positive", self.lambda_x));
        }
        if !self.p_xx.is_finite() {
            return bad("P_xx must be finite".into());
        }
        if self.mode.is_biaxial() {
            match (self.lambda_y, self.p_yy) {
                (Some(ly), Some(p)) if ly > 0.0 && ly.is_finite() && p.is_finite() => Ok(()),
                _ => bad(format!("{} needs a positive lambda_y and a finite P_yy", self.mode.name())),
            }
        } else if self.lambda_y.is_some() || self.p_yy.is_some() {
            bad(format!("{} takes no lambda_y or P_yy", self.mode.name()))
        } else {
            Ok(())
        }
    }
}

/// All samples of one mode, ordered by strictly increasing primary stretch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadingCurve {
    pub mode: Mode,
    pub samples: Vec<StressStretchSample>,
}

impl LoadingCurve {
    /// Observed stresses, `Pxx` and `Pyy` concatenated for biaxial modes.
    pub fn observed(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.samples.iter().map(|s| s.p_xx).collect();
        out.extend(self.samples.iter().filter_map(|s| s.p_yy));
        out
    }

    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv::new();
        h.write(self.mode.name().as_bytes());
        for s in &self.samples {
            h.write(&s.lambda_x.to_bits().to_le_bytes());
            h.write(&s.lambda_y.map_or(u64::MAX, f64::to_bits).to_le_bytes());
            h.write(&s.p_xx.to_bits().to_le_bytes());
            h.write(&s.p_yy.map_or(u64::MAX, f64::to_bits).to_le_bytes());
        }
        h.finish()
    }
}

/// FNV-1a, 64 bit.
struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }

    fn finish(&self) -> u64 {
        self.0
    }
}

pub const DEFAULT_UNIT: &str = "MPa";

/// Curves grouped by mode plus metadata. The stress unit is a label only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub curves: Vec<LoadingCurve>,
    pub unit: String,
    pub frame: MaterialFrame,
    pub provenance: String,
}

impl Dataset {
    /// Groups samples by mode in order of first appearance and validates.
    pub fn from_samples(
        samples: Vec<StressStretchSample>,
        unit: &str,
        frame: MaterialFrame,
        provenance: &str,
    ) -> Result<Self> {
        let mut curves: Vec<LoadingCurve> = Vec::new();
        for s in samples {
            match curves.iter_mut().find(|c| c.mode == s.mode) {
                Some(c) => c.samples.push(s),
                None => curves.push(LoadingCurve { mode: s.mode, samples: alloc::vec![s] }),
            }
        }
        let ds = Dataset { curves, unit: unit.to_string(), frame, provenance: provenance.to_string() };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.curves.is_empty() {
            return Err(Error::InvalidInput("dataset has no samples".into()));
        }
        for (k, c) in self.curves.iter().enumerate() {
            if c.samples.is_empty() {
                return Err(Error::InvalidInput(format!("{} curve has no samples", c.mode.name())));
            }
            if self.curves[..k].iter().any(|o| o.mode == c.mode) {
                return Err(Error::InvalidInput(format!("duplicate {} curve", c.mode.name())));
            }
            for (n, s) in c.samples.iter().enumerate() {
                if s.mode != c.mode {
                    return Err(Error::InvalidInput(format!(
                        "{} sample inside the {} curve",
                        s.mode.name(),
                        c.mode.name()
                    )));
                }
                s.validate(n + 1)?;
                if n > 0 && !(s.primary_stretch() > c.samples[n - 1].primary_stretch()) {
                    return Err(Error::InvalidInput(format!(
                        "{} stretches must be strictly increasing ({} after {})",
                        c.mode.name(),
                        s.primary_stretch(),
                        c.samples[n - 1].primary_stretch()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn modes(&self) -> Vec<Mode> {
        self.curves.iter().map(|c| c.mode).collect()
    }

    pub fn curve(&self, mode: Mode) -> Option<&LoadingCurve> {
        self.curves.iter().find(|c| c.mode == mode)
    }

    pub fn samples(&self) -> impl Iterator<Item = &StressStretchSample> {
        self.curves.iter().flat_map(|c| c.samples.iter())
    }

    pub fn num_samples(&self) -> usize {
        self.curves.iter().map(|c| c.samples.len()).sum()
    }

    /// Number of stress values (biaxial samples count twice).
    pub fn num_components(&self) -> usize {
        self.samples().map(|s| s.stresses().1).sum()
    }

    /// Biaxial data calls for fiber terms.
    pub fn is_anisotropic(&self) -> bool {
        self.curves.iter().any(|c| c.mode.is_biaxial())
    }

    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv::new();
        for c in &self.curves {
            h.write(&c.fingerprint().to_le_bytes());
        }
        h.finish()
    }

    /// Dataset restricted to the given modes, in this dataset's order.
    pub fn select(&self, modes: &[Mode]) -> Result<Dataset> {
        for m in modes {
            if self.curve(*m).is_none() {
                return Err(Error::InvalidConfig(format!("mode {} is not in the dataset", m.name())));
            }
        }
        Ok(Dataset {
            curves: self.curves.iter().filter(|c| modes.contains(&c.mode)).cloned().collect(),
            unit: self.unit.clone(),
            frame: self.frame,
            provenance: self.provenance.clone(),
        })
    }
}

/// Which curves a model is trained on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainModes {
    /// Every curve; validation equals training.
    All,
    Modes(Vec<Mode>),
}

impl TrainModes {
    /// `all` or a comma-separated list of mode tags.
    pub fn parse(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("all") {
            return Ok(TrainModes::All);
        }
        let modes = s
            .split(',')
            .map(|m| Mode::parse(m).map_err(|_| Error::InvalidConfig(format!("unknown loading mode {m:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if modes.is_empty() {
            return Err(Error::InvalidConfig("no training modes given".into()));
        }
        Ok(TrainModes::Modes(modes))
    }

    pub fn label(&self) -> String {
        match self {
            TrainModes::All => "all".into(),
            TrainModes::Modes(m) => m.iter().map(|m| m.name()).collect::<Vec<_>>().join("+"),
        }
    }
}

/// Splits by mode into `(train, validation)`. For [`TrainModes::All`] the
/// validation set equals the training set; otherwise it holds every other
/// curve and may be empty.
pub fn split_protocol(dataset: &Dataset, train: &TrainModes) -> Result<(Dataset, Dataset)> {
    match train {
        TrainModes::All => Ok((dataset.clone(), dataset.clone())),
        TrainModes::Modes(modes) => {
            let t = dataset.select(modes)?;
            let rest: Vec<Mode> = dataset.modes().into_iter().filter(|m| !modes.contains(m)).collect();
            let v = dataset.select(&rest)?;
            Ok((t, v))
        }
    }
}

/// Closed-form reference materials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Oracle {
    /// `ψ = c1 (I1 − 3)`
    NeoHookean { c1: f64 },
    /// `ψ = c1 (I1 − 3) + c2 (I2 − 3)`
    MooneyRivlin { c1: f64, c2: f64 },
    /// `ψ = c1 (I1 − 3) + k1 / (2 k2) (exp(k2 (I4a − 1)²) − 1)`
    FiberReinforced { c1: f64, k1: f64, k2: f64 },
}

impl Oracle {
    pub fn validate(&self) -> Result<()> {
        let params: &[f64] = match self {
            Oracle::NeoHookean { c1 } => &[*c1],
            Oracle::MooneyRivlin { c1, c2 } => &[*c1, *c2],
            Oracle::FiberReinforced { c1, k1, k2 } => &[*c1, *k1, *k2],
        };
        if params.iter().all(|p| *p > 0.0 && p.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("oracle parameters must be positive: {self:?}")))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Oracle::NeoHookean { .. } => "neo-hookean",
            Oracle::MooneyRivlin { .. } => "mooney-rivlin",
            Oracle::FiberReinforced { .. } => "fiber",
        }
    }

    /// `∂ψ/∂I` at raw invariants `(I1, I2, I4a, I4s)`.
    pub fn derivatives(&self, raw: &[f64; 4]) -> EnergyDerivatives {
        match *self {
            Oracle::NeoHookean { c1 } => EnergyDerivatives::from_first([c1, 0.0, 0.0, 0.0]),
            Oracle::MooneyRivlin { c1, c2 } => EnergyDerivatives::from_first([c1, c2, 0.0, 0.0]),
            Oracle::FiberReinforced { c1, k1, k2 } => {
                let e = raw[2] - 1.0;
                let g = (k2 * e * e).exp();
                let mut d = EnergyDerivatives::from_first([c1, 0.0, k1 * e * g, 0.0]);
                d.hessian[2][2] = k1 * g * (1.0 + 2.0 * k2 * e * e);
                d
            }
        }
    }

    pub fn stress(&self, mode: LoadingMode, frame: &MaterialFrame) -> Result<[f64; 2]> {
        let raw = mode.invariants(frame)?;
        stress_from_derivatives(&self.derivatives(&raw), mode, frame)
    }
}

/// `points` evenly spaced stretches on `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StretchGrid {
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

impl StretchGrid {
    pub const RUBBER: StretchGrid = StretchGrid { start: 1.0, end: 2.0, points: 20 };
    pub const SKIN: StretchGrid = StretchGrid { start: 1.0, end: 1.3, points: 20 };

    pub fn values(&self) -> Result<Vec<f64>> {
        if self.points < 2 || !(self.end > self.start) || !(self.start > 0.0) || !self.end.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "stretch grid needs 0 < start < end and at least two points, got {self:?}"
            )));
        }
        let n = self.points - 1;
        Ok((0..=n)
            .map(|k| if k == n { self.end } else { self.start + (self.end - self.start) * k as f64 / n as f64 })
            .collect())
    }
}

/// Samples the oracle under each mode on the grid, optionally with Gaussian
/// noise of standard deviation `noise` drawn from `seed`.
pub fn synth_generate(
    oracle: &Oracle,
    modes: &[Mode],
    grid: &StretchGrid,
    noise: f64,
    seed: u64,
    frame: MaterialFrame,
) -> Result<Dataset> {
    oracle.validate()?;
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::InvalidConfig(format!("noise level {noise} must be non-negative")));
    }
    if modes.is_empty() {
        return Err(Error::InvalidConfig("no loading modes requested".into()));
    }
    let stretches = grid.values()?;
    let mut rng = seeded(seed);
    let normal = Normal::new(0.0, noise).map_err(|e| Error::InvalidConfig(format!("{e}")))?;
    let mut jitter = |p: f64| if noise > 0.0 { p + normal.sample(&mut rng) } else { p };
    let mut samples = Vec::with_capacity(modes.len() * stretches.len());
    for &mode in modes {
        for &l in &stretches {
            let (lx, ly) = mode.stretches_at(l);
            let p = oracle.stress(mode.loading(lx, ly), &frame)?;
            let biaxial = mode.is_biaxial();
            samples.push(StressStretchSample {
                mode,
                lambda_x: lx,
                lambda_y: ly,
                p_xx: jitter(p[0]),
                p_yy: if biaxial { Some(jitter(p[1])) } else { None },
            });
        }
    }
    let provenance = format!("synthetic {} oracle {:?}, noise {noise}, seed {seed}", oracle.name(), oracle);
    Dataset::from_samples(samples, DEFAULT_UNIT, frame, &provenance)
}
