//! Nominal stress of incompressible specimens under the standard protocols.
//!
//! All protocols are homogeneous, diagonal deformations `F = diag(λx, λy, λz)`
//! with `λz = 1 / (λx λy)` and a traction-free thickness direction. The second
//! Piola–Kirchhoff stress is
//!
//! ```text
//! S = 2 Σ_k ∂ψ/∂I_k ∂I_k/∂C − p C⁻¹
//! ```
//!
//! and the pressure `p` follows from `S_zz = 0`. Nominal stress is `P = F S`.
//! Stress is linear in the derivatives `D_k = ∂ψ/∂I_k`, so every protocol is
//! described by coefficient rows with `P = Σ_k row[k] · D_k`.

use alloc::format;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::kinematics::MaterialFrame;
use crate::potential::{ConvexTermBank, EnergyDerivatives};
use crate::tensor::Vec3;
use crate::{Error, Result};

/// A loading protocol at a given stretch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LoadingMode {
    Uniaxial(f64),
    PureShear(f64),
    Equibiaxial(f64),
    Biaxial { lx: f64, ly: f64 },
}

impl LoadingMode {
    /// Strip biaxial along x: `BIAX(λ, 1)`.
    pub fn strip_x(lambda: f64) -> Self {
        LoadingMode::Biaxial { lx: lambda, ly: 1.0 }
    }

    /// Strip biaxial along y: `BIAX(1, λ)`.
    pub fn strip_y(lambda: f64) -> Self {
        LoadingMode::Biaxial { lx: 1.0, ly: lambda }
    }

    /// Equibiaxial through the biaxial formula: `BIAX(λ, λ)`.
    pub fn equibiaxial_biax(lambda: f64) -> Self {
        LoadingMode::Biaxial { lx: lambda, ly: lambda }
    }

    pub fn is_biaxial(&self) -> bool {
        matches!(self, LoadingMode::Biaxial { .. })
    }

    /// Number of reported stress components (one, or `Pxx, Pyy`).
    pub fn components(&self) -> usize {
        if self.is_biaxial() {
            2
        } else {
            1
        }
    }

    /// Principal stretches `(λx, λy, λz)`.
    pub fn stretches(&self) -> Vec3 {
        let (lx, ly) = match *self {
            LoadingMode::Uniaxial(l) => (l, 1.0 / l.sqrt()),
            LoadingMode::PureShear(l) => (l, 1.0),
            LoadingMode::Equibiaxial(l) => (l, l),
            LoadingMode::Biaxial { lx, ly } => (lx, ly),
        };
        [lx, ly, 1.0 / (lx * ly)]
    }

    fn check(&self) -> Result<()> {
        let ok = match *self {
            LoadingMode::Uniaxial(l) | LoadingMode::PureShear(l) | LoadingMode::Equibiaxial(l) => l > 0.0 && l.is_finite(),
            LoadingMode::Biaxial { lx, ly } => lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(match *self {
                LoadingMode::Uniaxial(l) | LoadingMode::PureShear(l) | LoadingMode::Equibiaxial(l) => l,
                LoadingMode::Biaxial { lx, ly } => lx.min(ly),
            }))
        }
    }

    /// Raw invariants `(I1, I2, I4a, I4s)` of the protocol's deformation.
    pub fn invariants(&self, frame: &MaterialFrame) -> Result<[f64; 4]> {
        self.check()?;
        let [sx, sy, sz] = self.stretches().map(|l| l * l);
        let a = frame.a0();
        let s = frame.s0();
        Ok([
            sx + sy + sz,
            sx * sy + sy * sz + sz * sx,
            a[0] * a[0] * sx + a[1] * a[1] * sy + a[2] * a[2] * sz,
            s[0] * s[0] * sx + s[1] * s[1] * sy + s[2] * s[2] * sz,
        ])
    }

    /// Coefficient rows: `P_c = Σ_k rows[c][k] D_k` for the first
    /// [`components`](Self::components) rows.
    pub fn coefficients(&self, frame: &MaterialFrame) -> Result<[[f64; 4]; 2]> {
        self.check()?;
        let mut rows = [[0.0; 4]; 2];
        match *self {
            LoadingMode::Uniaxial(l) => {
                let k = 2.0 * (l - l.powi(-2));
                rows[0] = [k, k / l, 0.0, 0.0];
            }
            LoadingMode::PureShear(l) => {
                let k = 2.0 * (l - l.powi(-3));
                rows[0] = [k, k, 0.0, 0.0];
            }
            LoadingMode::Equibiaxial(l) => {
                let k = 2.0 * (l - l.powi(-5));
                rows[0] = [k, k * l * l, 0.0, 0.0];
            }
            LoadingMode::Biaxial { .. } => {
                let [lx, ly, lz] = self.stretches();
                let i1 = lx * lx + ly * ly + lz * lz;
                let a = frame.a0();
                let s = frame.s0();
                // S_dd / 2 without pressure, per direction d.
                let dir = |l: f64, d: usize| [1.0, i1 - l * l, a[d] * a[d], s[d] * s[d]];
                let pz = dir(lz, 2);
                let z2 = lz * lz;
                for (c, (l, d)) in [(lx, 0), (ly, 1)].into_iter().enumerate() {
                    let own = dir(l, d);
                    for k in 0..4 {
                        rows[c][k] = 2.0 * l * own[k] - 2.0 * z2 * pz[k] / l;
                    }
                }
            }
        }
        Ok(rows)
    }
}

/// Stress state of a biaxial test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StressResponse {
    pub pxx: f64,
    pub pyy: f64,
    pub pressure: f64,
    pub lambda_z: f64,
}

fn dot4(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Biaxial response for known energy derivatives.
pub fn biaxial_from_derivatives(d: &EnergyDerivatives, lx: f64, ly: f64, frame: &MaterialFrame) -> Result<StressResponse> {
    let mode = LoadingMode::Biaxial { lx, ly };
    let rows = mode.coefficients(frame)?;
    let lz = 1.0 / (lx * ly);
    let i1 = lx * lx + ly * ly + lz * lz;
    let a = frame.a0();
    let s = frame.s0();
    let z2 = lz * lz;
    let pressure = 2.0 * z2 * dot4(&[1.0, i1 - z2, a[2] * a[2], s[2] * s[2]], &d.first);
    Ok(StressResponse { pxx: dot4(&rows[0], &d.first), pyy: dot4(&rows[1], &d.first), pressure, lambda_z: lz })
}

/// Stress components of any protocol for known energy derivatives.
pub fn stress_from_derivatives(d: &EnergyDerivatives, mode: LoadingMode, frame: &MaterialFrame) -> Result<[f64; 2]> {
    let rows = mode.coefficients(frame)?;
    let mut out = [0.0; 2];
    for c in 0..mode.components() {
        out[c] = dot4(&rows[c], &d.first);
    }
    Ok(out)
}

/// Energy derivatives of a bank at a protocol's deformation.
pub fn derivatives_under(bank: &ConvexTermBank, mode: LoadingMode, frame: &MaterialFrame) -> Result<EnergyDerivatives> {
    let raw = mode.invariants(frame)?;
    bank.derivatives_at(&bank.normalize(&raw))
}

fn isotropic_only(bank: &ConvexTermBank, protocol: &str) -> Result<()> {
    if bank.is_anisotropic() {
        Err(Error::ProtocolMismatch(format!(
            "{protocol} needs an isotropic model, but the model has fiber terms"
        )))
    } else {
        Ok(())
    }
}

/// Stress components of `bank` under `mode`.
pub fn stress(bank: &ConvexTermBank, mode: LoadingMode, frame: &MaterialFrame) -> Result<[f64; 2]> {
    match mode {
        LoadingMode::Uniaxial(_) => isotropic_only(bank, "uniaxial tension")?,
        LoadingMode::PureShear(_) => isotropic_only(bank, "pure shear")?,
        LoadingMode::Equibiaxial(_) => isotropic_only(bank, "equibiaxial tension")?,
        LoadingMode::Biaxial { .. } => {}
    }
    let d = derivatives_under(bank, mode, frame)?;
    stress_from_derivatives(&d, mode, frame)
}

/// `P = 2(λ − λ⁻²)(∂ψ/∂I1 + ∂ψ/∂I2 / λ)`
pub fn stress_uniaxial(bank: &ConvexTermBank, lambda: f64) -> Result<f64> {
    Ok(stress(bank, LoadingMode::Uniaxial(lambda), &MaterialFrame::default())?[0])
}

/// `P = 2(λ − λ⁻³)(∂ψ/∂I1 + ∂ψ/∂I2)`
pub fn stress_pure_shear(bank: &ConvexTermBank, lambda: f64) -> Result<f64> {
    Ok(stress(bank, LoadingMode::PureShear(lambda), &MaterialFrame::default())?[0])
}

/// `P = 2(λ − λ⁻⁵)(∂ψ/∂I1 + λ² ∂ψ/∂I2)`
pub fn stress_equibiaxial(bank: &ConvexTermBank, lambda: f64) -> Result<f64> {
    Ok(stress(bank, LoadingMode::Equibiaxial(lambda), &MaterialFrame::default())?[0])
}

pub fn stress_biaxial(bank: &ConvexTermBank, lx: f64, ly: f64, frame: &MaterialFrame) -> Result<StressResponse> {
    let d = derivatives_under(bank, LoadingMode::Biaxial { lx, ly }, frame)?;
    biaxial_from_derivatives(&d, lx, ly, frame)
}
