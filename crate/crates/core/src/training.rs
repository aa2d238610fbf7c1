//! Fitting a term bank to stress–stretch data.
//!
//! The loss is the mean squared nominal-stress error over every sample and
//! stress component. Parameters are updated with Adam on the flat parameter
//! vector, and family constraints are re-applied after each step.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::bench::{curve_metrics, CurveMetrics};
use crate::data::{Dataset, Mode};
use crate::derive_seed;
use crate::kinematics::{MaterialFrame, NormalizationConstants};
use crate::loading::{stress, LoadingMode};
use crate::potential::{logistic, ConvexScalar, ConvexTermBank, FamilySpec, TermBackend, TermTarget};
use crate::rng::seeded;
use crate::{Error, Result};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Tolerance of the doubled-step integrator check for NODE fits.
pub const INTEGRATOR_CHECK_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradMode {
    Analytic,
    FiniteDifference,
}

impl GradMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "analytic" => Ok(GradMode::Analytic),
            "finite-difference" | "fd" => Ok(GradMode::FiniteDifference),
            other => Err(Error::InvalidConfig(format!(
                "unknown gradient mode {other:?} (expected analytic or finite-difference)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GradMode::Analytic => "analytic",
            GradMode::FiniteDifference => "finite-difference",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Training stops once the best loss improved by less than this over
    /// `window` epochs.
    pub tolerance: f64,
    pub window: usize,
    pub restarts: usize,
    pub seed: u64,
    pub grad_mode: GradMode,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rate: 1e-3,
            max_epochs: 20_000,
            tolerance: 1e-9,
            window: 200,
            restarts: 10,
            seed: 0,
            grad_mode: GradMode::Analytic,
        }
    }
}

impl TrainingConfig {
    /// Default restart count for isotropic data sets.
    pub const RUBBER_RESTARTS: usize = 50;
    /// Default restart count for biaxial data sets.
    pub const SKIN_RESTARTS: usize = 10;

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if self.max_epochs == 0 || self.window == 0 || self.restarts == 0 {
            return Err(Error::InvalidConfig("epochs, window and restarts must be positive".into()));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::InvalidConfig(format!("tolerance {} must be non-negative", self.tolerance)));
        }
        Ok(())
    }
}

/// One training sample in the form the optimizer needs.
#[derive(Debug, Clone, Copy)]
struct Point {
    hat: [f64; 4],
    rows: [[f64; 4]; 2],
    components: usize,
    target: [f64; 2],
}

/// Training data normalized with fixed constants.
#[derive(Debug, Clone)]
pub struct PreparedData {
    points: Vec<Point>,
    components: usize,
}

fn raw_invariants(dataset: &Dataset) -> Result<Vec<[f64; 4]>> {
    dataset.samples().map(|s| s.loading().invariants(&dataset.frame)).collect()
}

/// Normalization constants fitted to a dataset's invariant range.
pub fn fit_constants(dataset: &Dataset) -> Result<NormalizationConstants> {
    Ok(NormalizationConstants::fit_to(raw_invariants(dataset)?))
}

impl PreparedData {
    pub fn new(dataset: &Dataset, constants: &NormalizationConstants) -> Result<Self> {
        if dataset.num_samples() == 0 {
            return Err(Error::InvalidInput("dataset is empty".into()));
        }
        let mut points = Vec::with_capacity(dataset.num_samples());
        for s in dataset.samples() {
            let mode = s.loading();
            let (target, components) = s.stresses();
            points.push(Point {
                hat: constants.normalize(&mode.invariants(&dataset.frame)?),
                rows: mode.coefficients(&dataset.frame)?,
                components,
                target,
            });
        }
        let components = points.iter().map(|p| p.components).sum();
        Ok(PreparedData { points, components })
    }

    pub fn num_components(&self) -> usize {
        self.components
    }

    /// Mean squared stress error.
    pub fn loss(&self, bank: &ConvexTermBank) -> Result<f64> {
        let mut total = 0.0;
        for p in &self.points {
            let d = bank.derivatives_at(&p.hat)?;
            for c in 0..p.components {
                let e = dot4(&p.rows[c], &d.first) - p.target[c];
                total += e * e;
            }
        }
        Ok(total / self.components as f64)
    }

    /// Loss and its analytic parameter gradient. Returns the loss and the
    /// number of overflow-guarded evaluations.
    pub fn loss_and_gradient(&self, bank: &ConvexTermBank, grad: &mut [f64]) -> Result<(f64, usize)> {
        grad.fill(0.0);
        let terms = bank.terms();
        let ranges = bank.param_ranges();
        let constants = bank.constants();
        let max_params = ranges.iter().map(|r| r.len()).max().unwrap_or(0);
        let mut tgrads = vec![0.0; terms.len() * max_params];
        let mut evals = Vec::with_capacity(terms.len());
        let mut factors = Vec::with_capacity(terms.len());
        let scale = 2.0 / self.components as f64;
        let mut total = 0.0;
        let mut clamps = 0;
        for p in &self.points {
            evals.clear();
            factors.clear();
            let mut d = [0.0; 4];
            for (k, term) in terms.iter().enumerate() {
                let tg = &mut tgrads[k * max_params..(k + 1) * max_params];
                let (_, eval) = bank.term_with_gradient(k, &p.hat, tg)?;
                if eval.clamped {
                    clamps += 1;
                }
                let c = term.chain_factors(constants);
                for i in 0..4 {
                    d[i] += eval.first * c[i];
                }
                evals.push(eval);
                factors.push(c);
            }
            // w[i] = Σ_c e_c rows[c][i], the sensitivity of the loss to D_i.
            let mut w = [0.0; 4];
            for c in 0..p.components {
                let e = dot4(&p.rows[c], &d) - p.target[c];
                if !e.is_finite() {
                    return Err(Error::Numerical(format!("stress residual is not finite ({e})")));
                }
                total += e * e;
                for i in 0..4 {
                    w[i] += e * p.rows[c][i];
                }
            }
            for (k, term) in terms.iter().enumerate() {
                let r = &ranges[k];
                let nb = term.backend.num_params();
                let g = scale * dot4(&w, &factors[k]);
                let tg = &tgrads[k * max_params..k * max_params + nb];
                for (out, v) in grad[r.start..r.start + nb].iter_mut().zip(tg) {
                    *out += g * v;
                }
                if let TermTarget::Mixed(i, j) = term.target {
                    let (ii, jj) = (i.index(), j.index());
                    let alpha = logistic(term.alpha_raw());
                    let eval = evals[k];
                    let mut dd = [0.0; 4];
                    for l in 0..4 {
                        dd[l] = eval.second * (p.hat[ii] - p.hat[jj]) * factors[k][l];
                    }
                    dd[ii] += eval.first / constants.scale(i);
                    dd[jj] -= eval.first / constants.scale(j);
                    grad[r.end - 1] += scale * dot4(&w, &dd) * alpha * (1.0 - alpha);
                }
            }
        }
        Ok((total / self.components as f64, clamps))
    }

    /// Loss and a central-difference gradient.
    pub fn loss_and_fd_gradient(&self, bank: &ConvexTermBank, grad: &mut [f64]) -> Result<f64> {
        let theta = bank.params();
        let mut probe = bank.clone();
        let mut t = theta.clone();
        for k in 0..theta.len() {
            let h = 1e-6 * theta[k].abs().max(1.0);
            t[k] = theta[k] + h;
            probe.set_params(&t)?;
            let up = self.loss(&probe)?;
            t[k] = theta[k] - h;
            probe.set_params(&t)?;
            let down = self.loss(&probe)?;
            t[k] = theta[k];
            grad[k] = (up - down) / (2.0 * h);
        }
        self.loss(bank)
    }
}

fn dot4(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

/// Mean squared nominal-stress error of `bank` on `dataset`.
pub fn loss(bank: &ConvexTermBank, dataset: &Dataset) -> Result<f64> {
    if dataset.num_samples() == 0 {
        return Err(Error::InvalidInput("dataset is empty".into()));
    }
    let mut total = 0.0;
    for s in dataset.samples() {
        let p = stress(bank, s.loading(), &dataset.frame)?;
        let (target, n) = s.stresses();
        for c in 0..n {
            total += (p[c] - target[c]).powi(2);
        }
    }
    Ok(total / dataset.num_components() as f64)
}

/// Outcome of re-evaluating a NODE fit with twice the integration steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorCheck {
    pub steps: usize,
    /// Largest `|ψ'_n − ψ'_2n| / max(1, |ψ'_2n|)` over the training arguments.
    pub max_deviation: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub bank: ConvexTermBank,
    pub final_loss: f64,
    pub loss_history: Vec<f64>,
    pub epochs: usize,
    pub seed: u64,
    pub param_count: usize,
    pub train_metrics: Vec<CurveMetrics>,
    pub validation_metrics: Vec<CurveMetrics>,
    /// Fingerprints of the curves the optimizer saw.
    pub train_fingerprints: Vec<(Mode, u64)>,
    pub validation_fingerprints: Vec<(Mode, u64)>,
    /// Evaluations where the exponential overflow guard was active.
    pub clamp_events: usize,
    pub integrator_check: Option<IntegratorCheck>,
}

impl FitResult {
    /// Metrics for `mode` on the validation curves, falling back to the
    /// training curves.
    pub fn metrics(&self, mode: Mode) -> Option<&CurveMetrics> {
        self.validation_metrics
            .iter()
            .chain(&self.train_metrics)
            .find(|m| m.mode == mode)
    }

    /// True when no validation curve was also a training curve.
    pub fn protocol_is_clean(&self) -> bool {
        self.validation_fingerprints
            .iter()
            .all(|(_, v)| self.train_fingerprints.iter().all(|(_, t)| t != v))
    }
}

fn check_compatible(spec: &FamilySpec, train: &Dataset) -> Result<()> {
    let _ = spec;
    if train.is_anisotropic() && train.curves.iter().any(|c| !c.mode.is_biaxial()) {
        return Err(Error::InvalidConfig(
            "training data mixes isotropic protocols with biaxial ones; fiber terms cannot be evaluated under UT/PS/ET"
                .into(),
        ));
    }
    Ok(())
}

/// Trains one randomly initialized bank on `train` and scores it on both
/// `train` and `validation`. Deterministic in `config.seed`.
pub fn train(spec: &FamilySpec, train: &Dataset, validation: &Dataset, config: &TrainingConfig) -> Result<FitResult> {
    config.validate()?;
    train.validate()?;
    check_compatible(spec, train)?;
    let constants = fit_constants(train)?;
    let prepared = PreparedData::new(train, &constants)?;
    let mut rng = seeded(config.seed);
    let mut bank = spec.build(constants, train.is_anisotropic(), &mut rng)?;
    let n = bank.num_params();

    let mut theta = bank.params();
    let mut grad = vec![0.0; n];
    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut history = Vec::new();
    let mut best_history = Vec::new();
    let mut best_loss = f64::INFINITY;
    let mut best_theta = theta.clone();
    let mut clamp_events = 0;
    let (mut b1t, mut b2t) = (1.0, 1.0);
    for epoch in 0..config.max_epochs {
        let loss = match config.grad_mode {
            GradMode::Analytic => {
                let (l, c) = prepared.loss_and_gradient(&bank, &mut grad)?;
                clamp_events += c;
                l
            }
            GradMode::FiniteDifference => prepared.loss_and_fd_gradient(&bank, &mut grad)?,
        };
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numerical(format!(
                "loss or gradient became non-finite at epoch {epoch} (loss {loss}); try a smaller learning rate"
            )));
        }
        history.push(loss);
        if loss < best_loss {
            best_loss = loss;
            best_theta.copy_from_slice(&theta);
        }
        best_history.push(best_loss);
        if epoch >= config.window && best_history[epoch - config.window] - best_loss < config.tolerance {
            break;
        }
        b1t *= ADAM_BETA1;
        b2t *= ADAM_BETA2;
        for k in 0..n {
            m[k] = ADAM_BETA1 * m[k] + (1.0 - ADAM_BETA1) * grad[k];
            v[k] = ADAM_BETA2 * v[k] + (1.0 - ADAM_BETA2) * grad[k] * grad[k];
            let mh = m[k] / (1.0 - b1t);
            let vh = v[k] / (1.0 - b2t);
            theta[k] -= config.learning_rate * mh / (vh.sqrt() + ADAM_EPS);
        }
        bank.set_params(&theta)?;
        bank.project();
        theta = bank.params();
    }
    bank.set_params(&best_theta)?;
    let final_loss = prepared.loss(&bank)?;
    let integrator_check = match spec.family {
        crate::potential::Family::Node => Some(check_integrator(&bank, &prepared)),
        _ => None,
    };
    Ok(FitResult {
        final_loss,
        epochs: history.len(),
        loss_history: history,
        seed: config.seed,
        param_count: n,
        train_metrics: score(&bank, train),
        validation_metrics: score(&bank, validation),
        train_fingerprints: train.curves.iter().map(|c| (c.mode, c.fingerprint())).collect(),
        validation_fingerprints: validation.curves.iter().map(|c| (c.mode, c.fingerprint())).collect(),
        clamp_events,
        integrator_check,
        bank,
    })
}

/// Metrics per curve; curves the model cannot evaluate get empty metrics.
pub fn score(bank: &ConvexTermBank, dataset: &Dataset) -> Vec<CurveMetrics> {
    dataset.curves.iter().map(|c| curve_metrics(bank, c, &dataset.frame)).collect()
}

fn check_integrator(bank: &ConvexTermBank, data: &PreparedData) -> IntegratorCheck {
    let mut worst: f64 = 0.0;
    let mut steps = 0;
    for term in bank.terms() {
        if let TermBackend::Node(p) = &term.backend {
            steps = p.integrator.steps;
            for pt in &data.points {
                let x = term.argument(&pt.hat).max(0.0);
                let coarse = p.flow_with_steps(x, steps).0;
                let fine = p.flow_with_steps(x, 2 * steps).0;
                let dev = (coarse - fine).abs() / fine.abs().max(1.0);
                worst = if dev.is_nan() { f64::INFINITY } else { worst.max(dev) };
            }
        }
    }
    IntegratorCheck { steps, max_deviation: worst, passed: worst <= INTEGRATOR_CHECK_TOL }
}

/// Seed of restart `k`.
pub fn restart_seed(config: &TrainingConfig, k: usize) -> u64 {
    derive_seed(config.seed, k as u64)
}

/// Configuration of restart `k`: same settings, derived seed.
pub fn restart_config(config: &TrainingConfig, k: usize) -> TrainingConfig {
    TrainingConfig { seed: restart_seed(config, k), restarts: 1, ..config.clone() }
}

/// Statistics of one curve's metrics across restarts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub mode: Mode,
    /// Number of restarts with a defined R².
    pub count: usize,
    pub r2_mean: Option<f64>,
    /// Sample standard deviation; zero for a single restart.
    pub r2_std: Option<f64>,
    pub r2_median: Option<f64>,
    pub mae_mean: Option<f64>,
    pub mae_median: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiRestart {
    pub results: Vec<FitResult>,
    /// One entry per validation curve.
    pub summary: Vec<CurveSummary>,
}

/// Sequential restarts with seeds derived from `config.seed`.
pub fn multi_restart(
    spec: &FamilySpec,
    train_set: &Dataset,
    validation: &Dataset,
    config: &TrainingConfig,
) -> Result<MultiRestart> {
    config.validate()?;
    let results = (0..config.restarts)
        .map(|k| train(spec, train_set, validation, &restart_config(config, k)))
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(&results);
    Ok(MultiRestart { results, summary })
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Sample standard deviation (`n − 1` denominator); zero for one value.
pub fn sample_std(values: &[f64]) -> Option<f64> {
    let m = mean(values)?;
    if values.len() < 2 {
        return Some(0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    Some((ss / (values.len() - 1) as f64).sqrt())
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Per-validation-curve statistics over a set of restarts.
pub fn summarize(results: &[FitResult]) -> Vec<CurveSummary> {
    let Some(first) = results.first() else {
        return Vec::new();
    };
    first
        .validation_metrics
        .iter()
        .map(|m0| {
            let of = |f: fn(&CurveMetrics) -> Option<f64>| -> Vec<f64> {
                results
                    .iter()
                    .filter_map(|r| r.validation_metrics.iter().find(|m| m.mode == m0.mode).and_then(f))
                    .collect()
            };
            let r2 = of(|m| m.r2);
            let mae = of(|m| m.mae);
            CurveSummary {
                mode: m0.mode,
                count: r2.len(),
                r2_mean: mean(&r2),
                r2_std: sample_std(&r2),
                r2_median: median(&r2),
                mae_mean: mean(&mae),
                mae_median: median(&mae),
            }
        })
        .collect()
}

/// Model stresses of every sample, `(Pxx, Pyy)` per sample.
pub fn predict(bank: &ConvexTermBank, dataset: &Dataset) -> Result<Vec<[f64; 2]>> {
    dataset.samples().map(|s| stress(bank, s.loading(), &dataset.frame)).collect()
}

/// Stress of `bank` at one loading point.
pub fn predict_point(bank: &ConvexTermBank, mode: LoadingMode, frame: &MaterialFrame) -> Result<[f64; 2]> {
    stress(bank, mode, frame)
}
