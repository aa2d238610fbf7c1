//! Deformation tensors and the invariants the energy expansion is built on.
//!
//! All invariants derive from the right Cauchy–Green tensor `C = FᵀF`, so any
//! function of them is objective: superimposed rotations `F → QF` leave `C`
//! unchanged.

use alloc::format;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::tensor::{dot, Mat3, Vec3};
use crate::{Error, Result};

/// Tolerance on the unit length of fiber directions.
pub const UNIT_TOL: f64 = 1e-12;

/// Smallest admissible normalization scale.
pub const MIN_SCALE: f64 = 1e-6;

/// The four invariants that enter the energy expansion (`I3` is fixed by
/// incompressibility and never enters an energy term).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Invariant {
    I1,
    I2,
    I4a,
    I4s,
}

impl Invariant {
    pub const ALL: [Invariant; 4] = [Invariant::I1, Invariant::I2, Invariant::I4a, Invariant::I4s];

    pub fn index(self) -> usize {
        match self {
            Invariant::I1 => 0,
            Invariant::I2 => 1,
            Invariant::I4a => 2,
            Invariant::I4s => 3,
        }
    }

    /// Value at the undeformed reference state.
    pub fn reference_value(self) -> f64 {
        match self {
            Invariant::I1 | Invariant::I2 => 3.0,
            Invariant::I4a | Invariant::I4s => 1.0,
        }
    }

    pub fn is_anisotropic(self) -> bool {
        matches!(self, Invariant::I4a | Invariant::I4s)
    }

    pub fn name(self) -> &'static str {
        match self {
            Invariant::I1 => "I1",
            Invariant::I2 => "I2",
            Invariant::I4a => "I4a",
            Invariant::I4s => "I4s",
        }
    }
}

/// Two unit fiber directions in the reference configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialFrame {
    a0: Vec3,
    s0: Vec3,
}

impl Default for MaterialFrame {
    fn default() -> Self {
        MaterialFrame { a0: [1.0, 0.0, 0.0], s0: [0.0, 1.0, 0.0] }
    }
}

impl MaterialFrame {
    pub fn new(a0: Vec3, s0: Vec3) -> Result<Self> {
        for (name, v) in [("a0", &a0), ("s0", &s0)] {
            let norm = dot(v, v).sqrt();
            if !((norm - 1.0).abs() <= UNIT_TOL) {
                return Err(Error::InvalidParameter(format!("{name} must be a unit vector, |{name}| = {norm}")));
            }
        }
        Ok(MaterialFrame { a0, s0 })
    }

    pub fn a0(&self) -> Vec3 {
        self.a0
    }

    pub fn s0(&self) -> Vec3 {
        self.s0
    }

    /// The frame with the two fiber directions exchanged.
    pub fn swapped(&self) -> Self {
        MaterialFrame { a0: self.s0, s0: self.a0 }
    }
}

/// A deformation gradient with positive determinant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeformationState {
    f: Mat3,
}

impl DeformationState {
    pub fn from_gradient(f: Mat3) -> Result<Self> {
        let det = f.det();
        if !(det > 0.0) || !det.is_finite() {
            return Err(Error::InvalidDeformation(format!("det F = {det} must be positive")));
        }
        Ok(DeformationState { f })
    }

    /// Diagonal gradient from three principal stretches.
    pub fn from_stretches(lx: f64, ly: f64, lz: f64) -> Result<Self> {
        if !(lx > 0.0 && ly > 0.0 && lz > 0.0) {
            return Err(Error::InvalidDeformation(format!(
                "stretches ({lx}, {ly}, {lz}) must be positive"
            )));
        }
        Self::from_gradient(Mat3::diag([lx, ly, lz]))
    }

    /// Incompressible in-plane stretches; the through-thickness stretch is
    /// `1 / (lx ly)`.
    pub fn incompressible(lx: f64, ly: f64) -> Result<Self> {
        if !(lx > 0.0 && ly > 0.0) {
            return Err(Error::InvalidDeformation(format!("stretches ({lx}, {ly}) must be positive")));
        }
        Self::from_stretches(lx, ly, 1.0 / (lx * ly))
    }

    pub fn gradient(&self) -> Mat3 {
        self.f
    }

    pub fn right_cauchy_green(&self) -> Mat3 {
        self.f.transpose() * self.f
    }

    pub fn jacobian(&self) -> f64 {
        self.f.det()
    }
}

/// Per-invariant offsets `a_i` and scales `b_i` of `î = (I − a) / b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationConstants {
    offsets: [f64; 4],
    scales: [f64; 4],
}

impl Default for NormalizationConstants {
    /// Reference offsets with unit scales.
    fn default() -> Self {
        NormalizationConstants { offsets: reference_offsets(), scales: [1.0; 4] }
    }
}

fn reference_offsets() -> [f64; 4] {
    Invariant::ALL.map(Invariant::reference_value)
}

impl NormalizationConstants {
    pub fn new(offsets: [f64; 4], scales: [f64; 4]) -> Result<Self> {
        for (k, b) in scales.iter().enumerate() {
            if !(*b > 0.0) || !b.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "normalization scale for {} must be positive, got {b}",
                    Invariant::ALL[k].name()
                )));
            }
        }
        if offsets.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidConfig(format!("non-finite normalization offsets {offsets:?}")));
        }
        Ok(NormalizationConstants { offsets, scales })
    }

    /// Reference offsets (3, 3, 1, 1) with the given scales.
    pub fn with_scales(scales: [f64; 4]) -> Result<Self> {
        Self::new(reference_offsets(), scales)
    }

    /// Scales chosen so that the normalized invariants of the given raw
    /// invariant tuples span roughly `[0, 3]`: `b = max (I − a) / 3`, floored
    /// at [`MIN_SCALE`].
    pub fn fit_to<I: IntoIterator<Item = [f64; 4]>>(raw: I) -> Self {
        let offsets = reference_offsets();
        let mut scales = [MIN_SCALE; 4];
        for r in raw {
            for k in 0..4 {
                let b = (r[k] - offsets[k]) / 3.0;
                if b > scales[k] {
                    scales[k] = b;
                }
            }
        }
        NormalizationConstants { offsets, scales }
    }

    pub fn offsets(&self) -> [f64; 4] {
        self.offsets
    }

    pub fn scales(&self) -> [f64; 4] {
        self.scales
    }

    pub fn offset(&self, inv: Invariant) -> f64 {
        self.offsets[inv.index()]
    }

    pub fn scale(&self, inv: Invariant) -> f64 {
        self.scales[inv.index()]
    }

    pub fn normalize(&self, raw: &[f64; 4]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for k in 0..4 {
            out[k] = (raw[k] - self.offsets[k]) / self.scales[k];
        }
        out
    }

    /// Raw invariant value for a normalized one.
    pub fn denormalize(&self, inv: Invariant, hat: f64) -> f64 {
        self.offsets[inv.index()] + self.scales[inv.index()] * hat
    }
}

/// Normalized invariants together with the constants that produced them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedInvariants {
    pub values: [f64; 4],
    pub constants: NormalizationConstants,
}

impl NormalizedInvariants {
    pub fn get(&self, inv: Invariant) -> f64 {
        self.values[inv.index()]
    }
}

/// Raw invariants of `C`, optionally replaced by their isochoric variants and
/// carrying the normalized values once [`normalize_invariants`] ran.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantBundle {
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub i4a: f64,
    pub i4s: f64,
    /// Set when the values are the isochoric invariants.
    pub isochoric: bool,
    pub normalized: Option<NormalizedInvariants>,
}

impl InvariantBundle {
    /// The four energy-relevant invariants in [`Invariant::ALL`] order.
    pub fn raw(&self) -> [f64; 4] {
        [self.i1, self.i2, self.i4a, self.i4s]
    }

    pub fn get(&self, inv: Invariant) -> f64 {
        self.raw()[inv.index()]
    }
}

/// Computes `I1 = tr C`, `I2 = ½((tr C)² − tr C²)`, `I3 = det C`,
/// `I4a = C : a0⊗a0` and `I4s = C : s0⊗s0`.
pub fn invariants_from_deformation(state: &DeformationState, frame: &MaterialFrame) -> InvariantBundle {
    let c = state.right_cauchy_green();
    let tr = c.trace();
    let tr_sq = (c * c).trace();
    let a = frame.a0();
    let s = frame.s0();
    InvariantBundle {
        i1: tr,
        i2: 0.5 * (tr * tr - tr_sq),
        i3: c.det(),
        i4a: dot(&a, &c.mul_vec(&a)),
        i4s: dot(&s, &c.mul_vec(&s)),
        isochoric: false,
        normalized: None,
    }
}

/// Isochoric invariants `Ī1 = J^{-2/3} I1`, `Ī2 = J^{-4/3} I2`,
/// `Ī4 = J^{-2/3} I4` with `J = √I3`. The returned bundle has `i3 = 1`.
pub fn isochoric_invariants(bundle: &InvariantBundle) -> Result<InvariantBundle> {
    if !(bundle.i3 > 0.0) {
        return Err(Error::InvalidInvariant(format!("I3 = {} must be positive", bundle.i3)));
    }
    if bundle.isochoric {
        return Ok(*bundle);
    }
    // J^{-2/3} = I3^{-1/3}
    let s = bundle.i3.powf(-1.0 / 3.0);
    Ok(InvariantBundle {
        i1: s * bundle.i1,
        i2: s * s * bundle.i2,
        i3: 1.0,
        i4a: s * bundle.i4a,
        i4s: s * bundle.i4s,
        isochoric: true,
        normalized: None,
    })
}

/// Attaches `î = (I − a) / b` to the bundle.
pub fn normalize_invariants(bundle: &InvariantBundle, constants: &NormalizationConstants) -> Result<InvariantBundle> {
    let checked = NormalizationConstants::new(constants.offsets, constants.scales)?;
    let mut out = *bundle;
    out.normalized = Some(NormalizedInvariants { values: checked.normalize(&bundle.raw()), constants: checked });
    Ok(out)
}

/// `k̂ = α î_i + (1 − α) î_j` for `α ∈ [0, 1]`.
pub fn mixed_invariant(hat_i: f64, hat_j: f64, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!("mixing weight {alpha} outside [0, 1]")));
    }
    Ok(alpha * hat_i + (1.0 - alpha) * hat_j)
}

/// A mixed invariant of a named pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedInvariant {
    pub value: f64,
    pub alpha: f64,
    pub pair: (Invariant, Invariant),
}

impl MixedInvariant {
    pub fn new(pair: (Invariant, Invariant), normalized: &NormalizedInvariants, alpha: f64) -> Result<Self> {
        let value = mixed_invariant(normalized.get(pair.0), normalized.get(pair.1), alpha)?;
        Ok(MixedInvariant { value, alpha, pair })
    }
}

/// Derivatives of the invariants with respect to `C`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantDerivatives {
    pub d_i1: Mat3,
    pub d_i2: Mat3,
    pub d_i3: Mat3,
    pub d_i4a: Mat3,
    pub d_i4s: Mat3,
}

impl InvariantDerivatives {
    pub fn get(&self, inv: Invariant) -> Mat3 {
        match inv {
            Invariant::I1 => self.d_i1,
            Invariant::I2 => self.d_i2,
            Invariant::I4a => self.d_i4a,
            Invariant::I4s => self.d_i4s,
        }
    }
}

/// `∂I1/∂C = 1`, `∂I2/∂C = I1·1 − C`, `∂I3/∂C = I3 C⁻¹`,
/// `∂I4a/∂C = a0⊗a0`, `∂I4s/∂C = s0⊗s0`.
pub fn invariant_c_derivatives(state: &DeformationState, frame: &MaterialFrame) -> Result<InvariantDerivatives> {
    let c = state.right_cauchy_green();
    invariant_c_derivatives_of(&c, frame)
}

/// Same as [`invariant_c_derivatives`] for an arbitrary symmetric `C`.
pub fn invariant_c_derivatives_of(c: &Mat3, frame: &MaterialFrame) -> Result<InvariantDerivatives> {
    let c_inv = c
        .inverse()
        .ok_or_else(|| Error::InvalidDeformation(format!("C is singular (det C = {})", c.det())))?;
    let i1 = c.trace();
    let i3 = c.det();
    Ok(InvariantDerivatives {
        d_i1: Mat3::IDENTITY,
        d_i2: Mat3::IDENTITY.scale(i1) - *c,
        d_i3: c_inv.scale(i3),
        d_i4a: Mat3::outer(&frame.a0(), &frame.a0()),
        d_i4s: Mat3::outer(&frame.s0(), &frame.s0()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn identity_deformation_gives_reference_invariants() {
        let s = DeformationState::from_stretches(1.0, 1.0, 1.0).unwrap();
        let b = invariants_from_deformation(&s, &MaterialFrame::default());
        assert_eq!((b.i1, b.i2, b.i3, b.i4a, b.i4s), (3.0, 3.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn incompressible_uniaxial_stretch_of_two() {
        let l = 2.0_f64;
        let s = DeformationState::from_stretches(l, l.powf(-0.5), l.powf(-0.5)).unwrap();
        let b = invariants_from_deformation(&s, &MaterialFrame::default());
        assert!(close(b.i1, 5.0, 1e-14));
        assert!(close(b.i2, 4.25, 1e-14));
        assert!(close(b.i3, 1.0, 1e-14));
        assert!(close(b.i4a, 4.0, 1e-14));
    }

    #[test]
    fn incompressible_constructor_fixes_thickness_stretch() {
        let s = DeformationState::incompressible(1.25, 0.8).unwrap();
        assert!((s.jacobian() - 1.0).abs() < 1e-12);
        assert!(DeformationState::incompressible(-1.0, 1.0).is_err());
    }

    #[test]
    fn non_positive_determinant_is_rejected() {
        let f = Mat3::diag([1.0, 1.0, -1.0]);
        assert!(matches!(DeformationState::from_gradient(f), Err(Error::InvalidDeformation(_))));
        assert!(DeformationState::from_gradient(Mat3::ZERO).is_err());
    }

    #[test]
    fn frame_requires_unit_vectors() {
        assert!(MaterialFrame::new([1.0, 0.0, 0.0], [0.0, 2.0, 0.0]).is_err());
        assert!(MaterialFrame::new([0.6, 0.8, 0.0], [-0.8, 0.6, 0.0]).is_ok());
    }

    #[test]
    fn isochoric_of_uniform_dilation() {
        let s = DeformationState::from_stretches(2.0, 2.0, 2.0).unwrap();
        let b = invariants_from_deformation(&s, &MaterialFrame::default());
        assert_eq!(b.i1, 12.0);
        let iso = isochoric_invariants(&b).unwrap();
        assert!(close(iso.i1, 3.0, 1e-14));
        assert!(close(iso.i2, 3.0, 1e-14));
        for l in [0.3, 1.7, 25.0] {
            let s = DeformationState::from_stretches(l, l, l).unwrap();
            let iso = isochoric_invariants(&invariants_from_deformation(&s, &MaterialFrame::default())).unwrap();
            assert!(close(iso.i1, 3.0, 1e-13) && close(iso.i2, 3.0, 1e-13));
        }
    }

    #[test]
    fn isochoric_is_identity_for_unit_jacobian() {
        let s = DeformationState::from_stretches(2.0, 0.5, 1.0).unwrap();
        let b = invariants_from_deformation(&s, &MaterialFrame::default());
        assert_eq!(b.i3, 1.0);
        let iso = isochoric_invariants(&b).unwrap();
        assert_eq!(iso.raw(), b.raw());
    }

    #[test]
    fn isochoric_rejects_non_positive_i3() {
        let mut b = invariants_from_deformation(&DeformationState::from_stretches(1.0, 1.0, 1.0).unwrap(), &MaterialFrame::default());
        b.i3 = 0.0;
        assert!(matches!(isochoric_invariants(&b), Err(Error::InvalidInvariant(_))));
    }

    #[test]
    fn normalization_examples() {
        let c = NormalizationConstants::with_scales([1.0, 1.0, 3.0, 1.0]).unwrap();
        let bundle = InvariantBundle { i1: 5.0, i2: 3.0, i3: 1.0, i4a: 4.0, i4s: 1.0, isochoric: false, normalized: None };
        let n = normalize_invariants(&bundle, &c).unwrap().normalized.unwrap();
        assert_eq!(n.get(Invariant::I1), 2.0);
        assert_eq!(n.get(Invariant::I2), 0.0);
        assert_eq!(n.get(Invariant::I4a), 1.0);
        assert_eq!(n.get(Invariant::I4s), 0.0);
    }

    #[test]
    fn non_positive_scale_is_a_config_error() {
        assert!(matches!(NormalizationConstants::with_scales([1.0, 0.0, 1.0, 1.0]), Err(Error::InvalidConfig(_))));
        assert!(NormalizationConstants::with_scales([1.0, 1.0, -2.0, 1.0]).is_err());
    }

    #[test]
    fn fitted_scales_map_the_data_to_zero_three() {
        let c = NormalizationConstants::fit_to([[9.0, 6.0, 1.0, 1.0], [4.0, 3.5, 1.0, 1.0]]);
        assert_eq!(c.scales(), [2.0, 1.0, MIN_SCALE, MIN_SCALE]);
        assert_eq!(c.normalize(&[9.0, 6.0, 1.0, 1.0])[0], 3.0);
    }

    #[test]
    fn mixed_invariant_examples() {
        assert_eq!(mixed_invariant(2.0, 1.0, 1.0).unwrap(), 2.0);
        assert!((mixed_invariant(2.0, 1.0, 0.3).unwrap() - 1.3).abs() < 1e-15);
        for a in [0.0, 0.25, 0.5, 0.9] {
            assert!((mixed_invariant(0.7, 0.7, a).unwrap() - 0.7).abs() < 1e-15);
        }
        assert!(matches!(mixed_invariant(1.0, 1.0, 1.5), Err(Error::InvalidParameter(_))));
        assert!(mixed_invariant(1.0, 1.0, -0.1).is_err());
    }

    #[test]
    fn c_derivatives_at_identity() {
        let s = DeformationState::from_stretches(1.0, 1.0, 1.0).unwrap();
        let d = invariant_c_derivatives(&s, &MaterialFrame::default()).unwrap();
        assert_eq!(d.d_i2, Mat3::IDENTITY.scale(2.0));
        assert_eq!(d.d_i1, Mat3::IDENTITY);
        let mut e11 = Mat3::ZERO;
        e11[(0, 0)] = 1.0;
        assert_eq!(d.d_i4a, e11);
    }

    #[test]
    fn c_derivatives_match_finite_differences() {
        let f = Mat3([[1.2, 0.1, -0.05], [0.03, 0.9, 0.2], [0.0, -0.1, 1.1]]);
        let c = f.transpose() * f;
        let frame = MaterialFrame::new([0.6, 0.8, 0.0], [0.0, 0.6, 0.8]).unwrap();
        let d = invariant_c_derivatives_of(&c, &frame).unwrap();
        let inv = |c: &Mat3| {
            let tr = c.trace();
            [
                tr,
                0.5 * (tr * tr - (*c * *c).trace()),
                c.det(),
                dot(&frame.a0(), &c.mul_vec(&frame.a0())),
                dot(&frame.s0(), &c.mul_vec(&frame.s0())),
            ]
        };
        let mats = [d.d_i1, d.d_i2, d.d_i3, d.d_i4a, d.d_i4s];
        let h = 1e-6;
        for i in 0..3 {
            for j in i..3 {
                // Symmetric perturbation: an off-diagonal step moves two entries.
                let mut e = Mat3::ZERO;
                e[(i, j)] = h;
                e[(j, i)] = h;
                let up = inv(&(c + e));
                let down = inv(&(c - e));
                let weight = if i == j { 1.0 } else { 2.0 };
                for k in 0..5 {
                    let fd = (up[k] - down[k]) / (2.0 * h);
                    let exact = weight * mats[k][(i, j)];
                    assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "invariant {k} entry ({i},{j}): {fd} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn singular_c_is_rejected() {
        let c = Mat3::diag([1.0, 0.0, 1.0]);
        assert!(matches!(invariant_c_derivatives_of(&c, &MaterialFrame::default()), Err(Error::InvalidDeformation(_))));
    }
}
