//! The shared energy expansion
//!
//! ```text
//! ψ = Σ_i ψ_i(î_i) + Σ_(i,j) ψ_ij(k̂_ij),   k̂_ij = α_ij î_i + (1 − α_ij) î_j
//! ```
//!
//! where every `ψ_i`, `ψ_ij` is a convex non-decreasing scalar function backed
//! by one of the model families. Derivatives with respect to the raw
//! invariants follow by the chain rule through the normalization
//! `î = (I − a) / b` and the mixing weights.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cann::CannTermParams;
use crate::icnn::{self, IcnnParams};
use crate::kinematics::{InvariantBundle, Invariant, NormalizationConstants};
use crate::node::{self, IntegratorConfig, NodeParams};
use crate::{Error, Result};

/// Arguments down to this value are treated as round-off and clamped to zero.
pub const ARGUMENT_TOL: f64 = 1e-8;

/// Bound on the raw mixing parameter (`α` within ~4e-18 of 0 or 1).
pub const ALPHA_RAW_LIMIT: f64 = 40.0;

/// Result of evaluating `ψ'` with its parameter gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermEval {
    pub first: f64,
    pub second: f64,
    /// Set when a training-time overflow guard was active.
    pub clamped: bool,
}

/// A scalar function that is convex and non-decreasing on `x ≥ 0`.
pub trait ConvexScalar {
    fn value(&self, x: f64) -> f64;
    fn first_derivative(&self, x: f64) -> f64;
    fn second_derivative(&self, x: f64) -> f64;

    fn num_params(&self) -> usize;
    fn write_params(&self, out: &mut [f64]);
    fn read_params(&mut self, src: &[f64]);

    /// `ψ'(x)`, `ψ''(x)`, and `∂ψ'(x)/∂θ` written to `grad`.
    fn first_derivative_with_gradient(&self, x: f64, grad: &mut [f64]) -> TermEval;

    /// Restores parameter constraints after an unconstrained update.
    fn project(&mut self) {}
}

/// Rejects arguments below `−ARGUMENT_TOL` and clamps round-off to zero.
pub(crate) fn check_argument(x: f64) -> Result<f64> {
    if x >= 0.0 {
        Ok(x)
    } else if x >= -ARGUMENT_TOL {
        Ok(0.0)
    } else {
        Err(Error::Domain(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Cann,
    Icnn,
    Node,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Cann, Family::Icnn, Family::Node];

    pub fn name(self) -> &'static str {
        match self {
            Family::Cann => "cann",
            Family::Icnn => "icnn",
            Family::Node => "node",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cann" => Ok(Family::Cann),
            "icnn" => Ok(Family::Icnn),
            "node" => Ok(Family::Node),
            _ => Err(Error::InvalidConfig(format!("unknown model family {s:?} (expected cann, icnn or node)"))),
        }
    }
}

/// Which terms the expansion carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ansatz {
    /// Single-invariant terms (plus the fiber pair blend for anisotropic data).
    Reduced,
    /// Adds the mixed terms.
    Full,
}

impl Ansatz {
    pub fn name(self) -> &'static str {
        match self {
            Ansatz::Reduced => "reduced",
            Ansatz::Full => "full",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "reduced" => Ok(Ansatz::Reduced),
            "full" => Ok(Ansatz::Full),
            _ => Err(Error::InvalidConfig(format!("unknown ansatz {s:?} (expected reduced or full)"))),
        }
    }
}

/// The argument a term acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TermTarget {
    Single(Invariant),
    Mixed(Invariant, Invariant),
}

impl TermTarget {
    pub fn involves(&self, inv: Invariant) -> bool {
        match *self {
            TermTarget::Single(i) => i == inv,
            TermTarget::Mixed(i, j) => i == inv || j == inv,
        }
    }

    pub fn is_anisotropic(&self) -> bool {
        match *self {
            TermTarget::Single(i) => i.is_anisotropic(),
            TermTarget::Mixed(i, j) => i.is_anisotropic() || j.is_anisotropic(),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            TermTarget::Single(i) => String::from(i.name()),
            TermTarget::Mixed(i, j) => format!("K({},{})", i.name(), j.name()),
        }
    }
}

/// Term menu per material class and ansatz.
///
/// Isotropic: `{î1, î2}`, with `k̂(1,2)` added for the full ansatz.
/// Anisotropic reduced: `{î1, î2, k̂(4a,4s)}`; full:
/// `{î1, î2, k̂(1,2), k̂(1,4a), k̂(1,4s), k̂(4a,4s)}`.
pub fn term_menu(anisotropic: bool, ansatz: Ansatz) -> Vec<TermTarget> {
    use Invariant::*;
    use TermTarget::*;
    match (anisotropic, ansatz) {
        (false, Ansatz::Reduced) => vec![Single(I1), Single(I2)],
        (false, Ansatz::Full) => vec![Single(I1), Single(I2), Mixed(I1, I2)],
        (true, Ansatz::Reduced) => vec![Single(I1), Single(I2), Mixed(I4a, I4s)],
        (true, Ansatz::Full) => vec![
            Single(I1),
            Single(I2),
            Mixed(I1, I2),
            Mixed(I1, I4a),
            Mixed(I1, I4s),
            Mixed(I4a, I4s),
        ],
    }
}

/// Backend parameters of one term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermBackend {
    Cann(CannTermParams),
    Icnn(IcnnParams),
    Node(NodeParams),
}

impl TermBackend {
    pub fn family(&self) -> Family {
        match self {
            TermBackend::Cann(_) => Family::Cann,
            TermBackend::Icnn(_) => Family::Icnn,
            TermBackend::Node(_) => Family::Node,
        }
    }

    fn inner(&self) -> &dyn ConvexScalar {
        match self {
            TermBackend::Cann(p) => p,
            TermBackend::Icnn(p) => p,
            TermBackend::Node(p) => p,
        }
    }

    fn inner_mut(&mut self) -> &mut dyn ConvexScalar {
        match self {
            TermBackend::Cann(p) => p,
            TermBackend::Icnn(p) => p,
            TermBackend::Node(p) => p,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TermBackend::Cann(p) => {
                if p.all_non_negative() {
                    Ok(())
                } else {
                    Err(Error::InvalidConfig("CANN weights must be non-negative".into()))
                }
            }
            TermBackend::Icnn(p) => p.validate(),
            TermBackend::Node(p) => p.validate(),
        }
    }
}

impl ConvexScalar for TermBackend {
    fn value(&self, x: f64) -> f64 {
        self.inner().value(x)
    }
    fn first_derivative(&self, x: f64) -> f64 {
        self.inner().first_derivative(x)
    }
    fn second_derivative(&self, x: f64) -> f64 {
        self.inner().second_derivative(x)
    }
    fn num_params(&self) -> usize {
        self.inner().num_params()
    }
    fn write_params(&self, out: &mut [f64]) {
        self.inner().write_params(out)
    }
    fn read_params(&mut self, src: &[f64]) {
        self.inner_mut().read_params(src)
    }
    fn first_derivative_with_gradient(&self, x: f64, grad: &mut [f64]) -> TermEval {
        self.inner().first_derivative_with_gradient(x, grad)
    }
    fn project(&mut self) {
        self.inner_mut().project()
    }
}

pub fn logistic(raw: f64) -> f64 {
    if raw >= 0.0 {
        1.0 / (1.0 + (-raw).exp())
    } else {
        let e = raw.exp();
        e / (1.0 + e)
    }
}

fn logit(alpha: f64) -> f64 {
    (alpha / (1.0 - alpha)).ln().clamp(-ALPHA_RAW_LIMIT, ALPHA_RAW_LIMIT)
}

/// One convex term of the expansion. Mixed targets carry an unconstrained
/// parameter whose logistic squash is the mixing weight `α ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexScalarTerm {
    pub target: TermTarget,
    alpha_raw: f64,
    pub backend: TermBackend,
}

impl ConvexScalarTerm {
    pub fn single(inv: Invariant, backend: TermBackend) -> Self {
        ConvexScalarTerm { target: TermTarget::Single(inv), alpha_raw: 0.0, backend }
    }

    pub fn mixed(i: Invariant, j: Invariant, alpha: f64, backend: TermBackend) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParameter(format!("mixing weight {alpha} outside [0, 1]")));
        }
        if i == j {
            return Err(Error::InvalidConfig(format!("mixed term needs two distinct invariants, got {}", i.name())));
        }
        Ok(ConvexScalarTerm { target: TermTarget::Mixed(i, j), alpha_raw: logit(alpha), backend })
    }

    pub fn is_mixed(&self) -> bool {
        matches!(self.target, TermTarget::Mixed(..))
    }

    /// Mixing weight of a mixed term.
    pub fn alpha(&self) -> Option<f64> {
        self.is_mixed().then(|| logistic(self.alpha_raw))
    }

    pub fn alpha_raw(&self) -> f64 {
        self.alpha_raw
    }

    pub fn num_params(&self) -> usize {
        self.backend.num_params() + usize::from(self.is_mixed())
    }

    /// The term's argument `î_i` or `k̂_ij`.
    pub fn argument(&self, hat: &[f64; 4]) -> f64 {
        match self.target {
            TermTarget::Single(i) => hat[i.index()],
            TermTarget::Mixed(i, j) => {
                let a = logistic(self.alpha_raw);
                a * hat[i.index()] + (1.0 - a) * hat[j.index()]
            }
        }
    }

    /// `∂(argument)/∂I_k` for every raw invariant.
    pub fn chain_factors(&self, constants: &NormalizationConstants) -> [f64; 4] {
        let mut c = [0.0; 4];
        match self.target {
            TermTarget::Single(i) => c[i.index()] = 1.0 / constants.scale(i),
            TermTarget::Mixed(i, j) => {
                let a = logistic(self.alpha_raw);
                c[i.index()] += a / constants.scale(i);
                c[j.index()] += (1.0 - a) / constants.scale(j);
            }
        }
        c
    }
}

/// First and second derivatives of `ψ` with respect to the raw invariants
/// `(I1, I2, I4a, I4s)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyDerivatives {
    pub first: [f64; 4],
    pub hessian: [[f64; 4]; 4],
}

impl EnergyDerivatives {
    pub fn d(&self, inv: Invariant) -> f64 {
        self.first[inv.index()]
    }

    pub fn d2(&self, inv: Invariant) -> f64 {
        self.hessian[inv.index()][inv.index()]
    }

    /// Derivatives of a closed-form energy with constant `∂ψ/∂I`.
    pub fn from_first(first: [f64; 4]) -> Self {
        EnergyDerivatives { first, hessian: [[0.0; 4]; 4] }
    }
}

/// A family-homogeneous list of terms with its normalization constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexTermBank {
    family: Family,
    ansatz: Ansatz,
    constants: NormalizationConstants,
    terms: Vec<ConvexScalarTerm>,
}

impl ConvexTermBank {
    pub fn new(
        family: Family,
        ansatz: Ansatz,
        constants: NormalizationConstants,
        terms: Vec<ConvexScalarTerm>,
    ) -> Result<Self> {
        let bank = ConvexTermBank { family, ansatz, constants, terms };
        bank.validate()?;
        Ok(bank)
    }

    /// Checks structural invariants; run after deserialization.
    pub fn validate(&self) -> Result<()> {
        NormalizationConstants::new(self.constants.offsets(), self.constants.scales())?;
        for (k, term) in self.terms.iter().enumerate() {
            if term.backend.family() != self.family {
                return Err(Error::InvalidConfig(format!(
                    "term {} uses a {} backend in a {} bank",
                    term.target.label(),
                    term.backend.family().name(),
                    self.family.name()
                )));
            }
            if let TermTarget::Mixed(i, j) = term.target {
                if i == j {
                    return Err(Error::InvalidConfig(format!("degenerate mixed target {}", term.target.label())));
                }
            }
            if !term.alpha_raw.is_finite() {
                return Err(Error::InvalidConfig(format!("non-finite mixing parameter in {}", term.target.label())));
            }
            if self.terms[..k].iter().any(|t| t.target == term.target) {
                return Err(Error::InvalidConfig(format!("duplicate term target {}", term.target.label())));
            }
            term.backend.validate()?;
        }
        Ok(())
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn ansatz(&self) -> Ansatz {
        self.ansatz
    }

    pub fn constants(&self) -> &NormalizationConstants {
        &self.constants
    }

    pub fn terms(&self) -> &[ConvexScalarTerm] {
        &self.terms
    }

    pub fn is_anisotropic(&self) -> bool {
        self.terms.iter().any(|t| t.target.is_anisotropic())
    }

    /// True when some term depends on `inv`.
    pub fn is_active(&self, inv: Invariant) -> bool {
        self.terms.iter().any(|t| t.target.involves(inv))
    }

    pub fn active_invariants(&self) -> Vec<Invariant> {
        Invariant::ALL.into_iter().filter(|&i| self.is_active(i)).collect()
    }

    /// Normalized invariants for raw `(I1, I2, I4a, I4s)`.
    pub fn normalize(&self, raw: &[f64; 4]) -> [f64; 4] {
        self.constants.normalize(raw)
    }

    /// Derivatives at the given normalized invariants.
    pub fn derivatives_at(&self, hat: &[f64; 4]) -> Result<EnergyDerivatives> {
        let mut out = EnergyDerivatives::default();
        for term in &self.terms {
            let x = check_argument(term.argument(hat))?;
            let d1 = term.backend.first_derivative(x);
            let d2 = term.backend.second_derivative(x);
            if !(d1.is_finite() && d2.is_finite()) {
                return Err(Error::Numerical(format!(
                    "term {} is not finite at {x} (ψ' = {d1}, ψ'' = {d2})",
                    term.target.label()
                )));
            }
            let c = term.chain_factors(&self.constants);
            for k in 0..4 {
                out.first[k] += d1 * c[k];
                for l in 0..4 {
                    out.hessian[k][l] += d2 * c[k] * c[l];
                }
            }
        }
        Ok(out)
    }

    /// `ψ` at the given normalized invariants, with the reference value removed.
    pub fn energy_at(&self, hat: &[f64; 4]) -> Result<f64> {
        let mut total = 0.0;
        for term in &self.terms {
            let x = check_argument(term.argument(hat))?;
            total += term.backend.value(x) - term.backend.value(0.0);
        }
        if total.is_finite() {
            Ok(total)
        } else {
            Err(Error::Numerical(format!("energy is not finite ({total})")))
        }
    }

    pub fn num_params(&self) -> usize {
        self.terms.iter().map(ConvexScalarTerm::num_params).sum()
    }

    /// Ranges of each term's parameters in the flat vector. Within a range the
    /// backend parameters come first, followed by the raw mixing parameter.
    pub fn param_ranges(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.terms
            .iter()
            .map(|t| {
                let r = start..start + t.num_params();
                start = r.end;
                r
            })
            .collect()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.num_params()];
        for (term, r) in self.terms.iter().zip(self.param_ranges()) {
            let n = term.backend.num_params();
            term.backend.write_params(&mut v[r.start..r.start + n]);
            if term.is_mixed() {
                v[r.end - 1] = term.alpha_raw;
            }
        }
        v
    }

    pub fn set_params(&mut self, src: &[f64]) -> Result<()> {
        if src.len() != self.num_params() {
            return Err(Error::InvalidInput(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                src.len()
            )));
        }
        let ranges = self.param_ranges();
        for (term, r) in self.terms.iter_mut().zip(ranges) {
            let n = term.backend.num_params();
            term.backend.read_params(&src[r.start..r.start + n]);
            if term.is_mixed() {
                term.alpha_raw = src[r.end - 1].clamp(-ALPHA_RAW_LIMIT, ALPHA_RAW_LIMIT);
            }
        }
        Ok(())
    }

    /// Re-applies the parameter constraints (CANN weight clipping).
    pub fn project(&mut self) {
        for term in self.terms.iter_mut() {
            term.backend.project();
        }
    }

    /// Checks every family constraint: CANN weights `≥ 0`, ICNN effective
    /// weights `> 0`, NODE biases `= 0`, and `α ∈ [0, 1]`.
    pub fn constraints_hold(&self) -> bool {
        self.terms.iter().all(|t| {
            let alpha_ok = t.alpha().is_none_or(|a| (0.0..=1.0).contains(&a));
            let backend_ok = match &t.backend {
                TermBackend::Cann(p) => p.all_non_negative(),
                TermBackend::Icnn(p) => {
                    let mut v = vec![0.0; p.num_params()];
                    p.write_params(&mut v);
                    let ok_weights = p.layers().iter().all(|l| l.wz.iter().chain(&l.wx).all(|w| w.exp() > 0.0))
                        && p.head().wz.iter().all(|w| w.exp() > 0.0)
                        && p.head().wx.exp() > 0.0;
                    ok_weights && v.iter().all(|x| x.is_finite())
                }
                TermBackend::Node(p) => p.biases_are_zero(),
            };
            alpha_ok && backend_ok
        })
    }

    /// Evaluates one term's `ψ'` with its parameter gradient written into
    /// `grad` (backend part only). Returns the argument and the evaluation.
    pub(crate) fn term_with_gradient(&self, k: usize, hat: &[f64; 4], grad: &mut [f64]) -> Result<(f64, TermEval)> {
        let term = &self.terms[k];
        let x = check_argument(term.argument(hat))?;
        let eval = term.backend.first_derivative_with_gradient(x, grad);
        Ok((x, eval))
    }
}

/// Architecture choices for building a bank of a given family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub family: Family,
    pub ansatz: Ansatz,
    pub icnn_widths: Vec<usize>,
    pub node_widths: Vec<usize>,
    pub node_integrator: IntegratorConfig,
}

impl FamilySpec {
    pub fn new(family: Family, ansatz: Ansatz) -> Self {
        FamilySpec {
            family,
            ansatz,
            icnn_widths: icnn::DEFAULT_WIDTHS.to_vec(),
            node_widths: node::DEFAULT_WIDTHS.to_vec(),
            node_integrator: IntegratorConfig::default(),
        }
    }

    /// Sets the hidden widths of the network families (ignored by CANN).
    pub fn with_widths(mut self, widths: &[usize]) -> Self {
        match self.family {
            Family::Icnn => self.icnn_widths = widths.to_vec(),
            Family::Node => self.node_widths = widths.to_vec(),
            Family::Cann => {}
        }
        self
    }

    fn random_backend<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<TermBackend> {
        Ok(match self.family {
            Family::Cann => TermBackend::Cann(CannTermParams::random(rng)),
            Family::Icnn => TermBackend::Icnn(IcnnParams::random(&self.icnn_widths, rng)?),
            Family::Node => TermBackend::Node(NodeParams::random(&self.node_widths, self.node_integrator, rng)?),
        })
    }

    /// Randomly initialized bank with the menu for the material class.
    /// Mixing weights start at `α = ½`.
    pub fn build<R: Rng + ?Sized>(
        &self,
        constants: NormalizationConstants,
        anisotropic: bool,
        rng: &mut R,
    ) -> Result<ConvexTermBank> {
        let mut terms = Vec::new();
        for target in term_menu(anisotropic, self.ansatz) {
            let backend = self.random_backend(rng)?;
            terms.push(match target {
                TermTarget::Single(i) => ConvexScalarTerm::single(i, backend),
                TermTarget::Mixed(i, j) => ConvexScalarTerm::mixed(i, j, 0.5, backend)?,
            });
        }
        ConvexTermBank::new(self.family, self.ansatz, constants, terms)
    }

    /// Trainable parameter count of the bank [`FamilySpec::build`] would produce.
    pub fn count_params(&self, anisotropic: bool) -> usize {
        let per_term = match self.family {
            Family::Cann => CannTermParams::NUM_PARAMS,
            Family::Icnn => IcnnParams::count_params(&self.icnn_widths),
            Family::Node => NodeParams::count_params(&self.node_widths),
        };
        term_menu(anisotropic, self.ansatz)
            .iter()
            .map(|t| per_term + usize::from(matches!(t, TermTarget::Mixed(..))))
            .sum()
    }
}

/// Derivatives of `ψ` with respect to the raw invariants at a normalized bundle.
pub fn energy_derivatives(bank: &ConvexTermBank, bundle: &InvariantBundle) -> Result<EnergyDerivatives> {
    bank.derivatives_at(&normalized_values(bank, bundle)?)
}

/// `ψ` at a normalized bundle, zero at the reference state.
pub fn energy_value(bank: &ConvexTermBank, bundle: &InvariantBundle) -> Result<f64> {
    bank.energy_at(&normalized_values(bank, bundle)?)
}

fn normalized_values(bank: &ConvexTermBank, bundle: &InvariantBundle) -> Result<[f64; 4]> {
    let n = bundle
        .normalized
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("invariant bundle has not been normalized".into()))?;
    if n.constants != bank.constants {
        return Err(Error::InvalidConfig(
            "bundle was normalized with constants that differ from the model's".into(),
        ));
    }
    Ok(n.values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cann::Activation;
    use crate::kinematics::{invariants_from_deformation, normalize_invariants, DeformationState, MaterialFrame};
    use crate::rng::seeded;
    use Invariant::*;

    fn cann_linear(c: f64) -> TermBackend {
        TermBackend::Cann(CannTermParams::single(1, Activation::Identity, 1.0, c))
    }

    fn unit_constants() -> NormalizationConstants {
        NormalizationConstants::with_scales([1.0; 4]).unwrap()
    }

    fn bundle_at(lx: f64, ly: f64, constants: &NormalizationConstants) -> InvariantBundle {
        let s = DeformationState::incompressible(lx, ly).unwrap();
        normalize_invariants(&invariants_from_deformation(&s, &MaterialFrame::default()), constants).unwrap()
    }

    #[test]
    fn empty_bank_has_zero_derivatives() {
        let bank = ConvexTermBank::new(Family::Cann, Ansatz::Reduced, unit_constants(), vec![]).unwrap();
        let d = energy_derivatives(&bank, &bundle_at(1.3, 0.9, &unit_constants())).unwrap();
        assert_eq!(d, EnergyDerivatives::default());
    }

    #[test]
    fn unit_linear_term_on_i1() {
        let bank =
            ConvexTermBank::new(Family::Cann, Ansatz::Reduced, unit_constants(), vec![ConvexScalarTerm::single(I1, cann_linear(1.0))])
                .unwrap();
        let d = energy_derivatives(&bank, &bundle_at(1.4, 1.0, &unit_constants())).unwrap();
        assert_eq!(d.first, [1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn mixed_term_chain_rule() {
        let c = 2.5;
        let term = ConvexScalarTerm::mixed(I1, I4a, 0.3, cann_linear(c)).unwrap();
        let bank = ConvexTermBank::new(Family::Cann, Ansatz::Full, unit_constants(), vec![term]).unwrap();
        let d = energy_derivatives(&bank, &bundle_at(1.2, 1.1, &unit_constants())).unwrap();
        assert!((d.d(I1) - 0.3 * c).abs() < 1e-14);
        assert!((d.d(I4a) - 0.7 * c).abs() < 1e-14);
        assert_eq!(d.d(I2), 0.0);
        assert_eq!(d.d(I4s), 0.0);
    }

    #[test]
    fn mismatched_constants_are_rejected() {
        let bank = ConvexTermBank::new(Family::Cann, Ansatz::Reduced, unit_constants(), vec![]).unwrap();
        let other = NormalizationConstants::with_scales([2.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(energy_derivatives(&bank, &bundle_at(1.1, 1.0, &other)), Err(Error::InvalidConfig(_))));
        let raw = invariants_from_deformation(&DeformationState::incompressible(1.1, 1.0).unwrap(), &MaterialFrame::default());
        assert!(energy_value(&bank, &raw).is_err());
    }

    #[test]
    fn linear_cann_energy_is_its_argument() {
        let bank =
            ConvexTermBank::new(Family::Cann, Ansatz::Reduced, unit_constants(), vec![ConvexScalarTerm::single(I1, cann_linear(1.0))])
                .unwrap();
        assert_eq!(bank.energy_at(&[2.0, 0.0, 0.0, 0.0]).unwrap(), 2.0);
        assert_eq!(bank.energy_at(&[0.0; 4]).unwrap(), 0.0);
    }

    #[test]
    fn reference_energy_vanishes_for_every_family() {
        let mut rng = seeded(1);
        let constants = unit_constants();
        for family in Family::ALL {
            let bank = FamilySpec::new(family, Ansatz::Full).build(constants, true, &mut rng).unwrap();
            let e = energy_value(&bank, &bundle_at(1.0, 1.0, &constants)).unwrap();
            assert_eq!(e, 0.0, "{family:?}");
        }
    }

    #[test]
    fn duplicate_targets_and_wrong_backends_are_rejected() {
        let t = || ConvexScalarTerm::single(I1, cann_linear(1.0));
        assert!(ConvexTermBank::new(Family::Cann, Ansatz::Reduced, unit_constants(), vec![t(), t()]).is_err());
        assert!(ConvexTermBank::new(Family::Icnn, Ansatz::Reduced, unit_constants(), vec![t()]).is_err());
        assert!(ConvexScalarTerm::mixed(I1, I1, 0.5, cann_linear(1.0)).is_err());
        assert!(ConvexScalarTerm::mixed(I1, I2, 1.5, cann_linear(1.0)).is_err());
    }

    #[test]
    fn menus() {
        assert_eq!(term_menu(false, Ansatz::Reduced).len(), 2);
        assert_eq!(term_menu(true, Ansatz::Reduced), vec![TermTarget::Single(I1), TermTarget::Single(I2), TermTarget::Mixed(I4a, I4s)]);
        assert_eq!(term_menu(true, Ansatz::Full).len(), 6);
        assert!(!term_menu(false, Ansatz::Full).iter().any(TermTarget::is_anisotropic));
    }

    #[test]
    fn parameter_vector_round_trip_and_count() {
        let mut rng = seeded(2);
        for family in Family::ALL {
            let spec = FamilySpec::new(family, Ansatz::Full);
            let bank = spec.build(unit_constants(), true, &mut rng).unwrap();
            assert_eq!(bank.num_params(), spec.count_params(true));
            let p = bank.params();
            let mut other = spec.build(unit_constants(), true, &mut rng).unwrap();
            other.set_params(&p).unwrap();
            assert_eq!(other, bank);
            assert!(other.set_params(&p[1..]).is_err());
        }
        assert_eq!(FamilySpec::new(Family::Cann, Ansatz::Reduced).count_params(false), 24);
        assert_eq!(FamilySpec::new(Family::Cann, Ansatz::Full).count_params(true), 6 * 12 + 4);
    }

    #[test]
    fn negative_arguments_are_domain_errors() {
        let bank =
            ConvexTermBank::new(Family::Cann, Ansatz::Reduced, unit_constants(), vec![ConvexScalarTerm::single(I4a, cann_linear(1.0))])
                .unwrap();
        assert!(matches!(bank.derivatives_at(&[0.0, 0.0, -0.2, 0.0]), Err(Error::Domain(_))));
        assert!(bank.derivatives_at(&[0.0, 0.0, -1e-12, 0.0]).is_ok());
    }

    #[test]
    fn families_parse() {
        assert_eq!(Family::parse("ICNN").unwrap(), Family::Icnn);
        assert!(Family::parse("mlp").is_err());
        assert_eq!(Ansatz::parse("full").unwrap(), Ansatz::Full);
    }
}
