//! Fit metrics and second-derivative traces.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{LoadingCurve, Mode};
use crate::kinematics::{Invariant, MaterialFrame};
use crate::loading::stress;
use crate::potential::ConvexTermBank;
use crate::{Error, Result};

fn check_series(pred: &[f64], obs: &[f64], min_len: usize) -> Result<()> {
    if pred.len() != obs.len() {
        return Err(Error::InvalidInput(format!(
            "series lengths differ ({} predicted, {} observed)",
            pred.len(),
            obs.len()
        )));
    }
    if obs.len() < min_len {
        return Err(Error::InvalidInput(format!("need at least {min_len} values, got {}", obs.len())));
    }
    Ok(())
}

/// Coefficient of determination `1 − Σ(obs − pred)² / Σ(obs − mean)²`.
pub fn r_squared(pred: &[f64], obs: &[f64]) -> Result<f64> {
    check_series(pred, obs, 2)?;
    let mean = obs.iter().sum::<f64>() / obs.len() as f64;
    let ss_tot: f64 = obs.iter().map(|o| (o - mean) * (o - mean)).sum();
    if !(ss_tot > 0.0) {
        return Err(Error::UndefinedMetric("observations have zero variance".into()));
    }
    let ss_res: f64 = obs.iter().zip(pred).map(|(o, p)| (o - p) * (o - p)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Mean absolute error.
pub fn mae(pred: &[f64], obs: &[f64]) -> Result<f64> {
    check_series(pred, obs, 1)?;
    Ok(obs.iter().zip(pred).map(|(o, p)| (o - p).abs()).sum::<f64>() / obs.len() as f64)
}

/// Fit quality on one curve. Biaxial components are concatenated.
/// Metrics are `None` when the model cannot be evaluated on the curve or the
/// metric is undefined; `note` then says why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveMetrics {
    pub mode: Mode,
    pub r2: Option<f64>,
    pub mae: Option<f64>,
    pub note: Option<String>,
}

/// Model stresses along a curve, concatenated like [`LoadingCurve::observed`].
pub fn curve_prediction(bank: &ConvexTermBank, curve: &LoadingCurve, frame: &MaterialFrame) -> Result<Vec<f64>> {
    let mut xx = Vec::with_capacity(curve.samples.len());
    let mut yy = Vec::new();
    for s in &curve.samples {
        let p = stress(bank, s.loading(), frame)?;
        xx.push(p[0]);
        if s.p_yy.is_some() {
            yy.push(p[1]);
        }
    }
    xx.extend(yy);
    if let Some(bad) = xx.iter().find(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("predicted stress {bad} is not finite")));
    }
    Ok(xx)
}

pub fn curve_metrics(bank: &ConvexTermBank, curve: &LoadingCurve, frame: &MaterialFrame) -> CurveMetrics {
    let obs = curve.observed();
    match curve_prediction(bank, curve, frame) {
        Ok(pred) => {
            let r2 = r_squared(&pred, &obs);
            CurveMetrics {
                mode: curve.mode,
                mae: mae(&pred, &obs).ok(),
                note: r2.as_ref().err().map(ToString::to_string),
                r2: r2.ok(),
            }
        }
        Err(e) => CurveMetrics { mode: curve.mode, r2: None, mae: None, note: Some(e.to_string()) },
    }
}

/// `ψ'` and `ψ''` with respect to one raw invariant, sampled on a grid of
/// its normalized value with every other invariant at the reference state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeTrace {
    pub invariant: Invariant,
    pub hat: Vec<f64>,
    pub raw: Vec<f64>,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

impl DerivativeTrace {
    pub fn min_first(&self) -> f64 {
        self.first.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn min_second(&self) -> f64 {
        self.second.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `n` evenly spaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => alloc::vec![lo],
        _ => (0..n)
            .map(|k| if k == n - 1 { hi } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 })
            .collect(),
    }
}

/// Samples `d²ψ/dI_k²` (and `dψ/dI_k`) over normalized values in `range`.
pub fn second_derivative_trace(
    bank: &ConvexTermBank,
    invariant: Invariant,
    range: (f64, f64),
    n: usize,
) -> Result<DerivativeTrace> {
    if !bank.is_active(invariant) {
        return Err(Error::InvalidConfig(format!("no term of the model depends on {}", invariant.name())));
    }
    if n == 0 || !(range.0 <= range.1) || !(range.0 >= 0.0) || !range.1.is_finite() {
        return Err(Error::InvalidConfig(format!("invalid trace range {range:?} with {n} points")));
    }
    let hat = linspace(range.0, range.1, n);
    let k = invariant.index();
    let mut first = Vec::with_capacity(n);
    let mut second = Vec::with_capacity(n);
    for &h in &hat {
        let mut point = [0.0; 4];
        point[k] = h;
        let d = bank.derivatives_at(&point)?;
        first.push(d.first[k]);
        second.push(d.hessian[k][k]);
    }
    let raw = hat.iter().map(|&h| bank.constants().denormalize(invariant, h)).collect();
    Ok(DerivativeTrace { invariant, hat, raw, first, second })
}

/// Traces over every active invariant on `[0, upper]` in normalized units.
pub fn all_traces(bank: &ConvexTermBank, upper: f64, n: usize) -> Result<Vec<DerivativeTrace>> {
    bank.active_invariants()
        .into_iter()
        .map(|inv| second_derivative_trace(bank, inv, (0.0, upper), n))
        .collect()
}

/// Smallest `ψ'` and `ψ''` of every term over `[0, upper]` in its own
/// argument. Both are non-negative for a polyconvex model.
pub fn term_derivative_minima(bank: &ConvexTermBank, upper: f64, n: usize) -> Vec<(String, f64, f64)> {
    use crate::potential::ConvexScalar;
    bank.terms()
        .iter()
        .map(|t| {
            let mut m1 = f64::INFINITY;
            let mut m2 = f64::INFINITY;
            for x in linspace(0.0, upper, n) {
                m1 = m1.min(t.backend.first_derivative(x));
                m2 = m2.min(t.backend.second_derivative(x));
            }
            (t.target.label(), m1, m2)
        })
        .collect()
}
