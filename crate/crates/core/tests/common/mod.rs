#![allow(dead_code)]

use std::f64::consts::PI;

use polyfit_core::kinematics::{MaterialFrame, NormalizationConstants};
use polyfit_core::potential::{Ansatz, ConvexTermBank, Family, FamilySpec};
use polyfit_core::tensor::Mat3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Rotation about a unit axis (Rodrigues).
pub fn rotation(axis: [f64; 3], angle: f64) -> Mat3 {
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let [x, y, z] = [axis[0] / n, axis[1] / n, axis[2] / n];
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    Mat3([
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ])
}

pub fn random_rotation<R: Rng>(rng: &mut R) -> Mat3 {
    let axis = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.1..1.0)];
    rotation(axis, rng.random_range(-PI..PI))
}

/// Identity plus a random perturbation, rejected until det F > 0.1.
pub fn random_gradient<R: Rng>(rng: &mut R) -> Mat3 {
    loop {
        let mut f = Mat3::IDENTITY;
        for i in 0..3 {
            for j in 0..3 {
                f[(i, j)] += rng.random_range(-0.5..0.5);
            }
        }
        if f.det() > 0.1 {
            return f;
        }
    }
}

pub fn random_constants<R: Rng>(rng: &mut R) -> NormalizationConstants {
    NormalizationConstants::with_scales([
        rng.random_range(0.2..3.0),
        rng.random_range(0.2..3.0),
        rng.random_range(0.1..1.0),
        rng.random_range(0.1..1.0),
    ])
    .unwrap()
}

pub fn random_bank(family: Family, ansatz: Ansatz, anisotropic: bool, seed: u64) -> ConvexTermBank {
    let mut r = rng(seed);
    let constants = random_constants(&mut r);
    FamilySpec::new(family, ansatz).build(constants, anisotropic, &mut r).unwrap()
}

/// `∂ψ/∂I` of a bank at raw invariants.
pub fn raw_derivatives(bank: &ConvexTermBank, raw: &[f64; 4]) -> [f64; 4] {
    bank.derivatives_at(&bank.normalize(raw)).unwrap().first
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-12)
}

pub fn default_frame() -> MaterialFrame {
    MaterialFrame::default()
}

/// Bank whose normalization maps the given raw invariants into `[0, 3]`.
pub fn fitted_bank(family: Family, ansatz: Ansatz, anisotropic: bool, seed: u64, raw: &[[f64; 4]]) -> ConvexTermBank {
    let mut r = rng(seed);
    let constants = NormalizationConstants::fit_to(raw.iter().copied());
    FamilySpec::new(family, ansatz).build(constants, anisotropic, &mut r).unwrap()
}

/// First Piola–Kirchhoff stress of an incompressible material under diagonal
/// `F`, built from the tensors directly: `S = 2 Σ ψ_k ∂I_k/∂C − p C⁻¹` with
/// `p` set by `S_zz = 0`, then `P = F S`.
pub fn tensor_stress(d: [f64; 4], stretches: [f64; 3], frame: &MaterialFrame) -> Mat3 {
    let f = Mat3::diag(stretches);
    let c = f.transpose() * f;
    let i1 = c.trace();
    let (a, s) = (frame.a0(), frame.s0());
    let mut s_iso = Mat3::ZERO;
    for i in 0..3 {
        for j in 0..3 {
            let delta = if i == j { 1.0 } else { 0.0 };
            s_iso[(i, j)] = 2.0
                * (d[0] * delta + d[1] * (i1 * delta - c[(i, j)]) + d[2] * a[i] * a[j] + d[3] * s[i] * s[j]);
        }
    }
    let c_inv = c.inverse().unwrap();
    let p = s_iso[(2, 2)] / c_inv[(2, 2)];
    f * (s_iso - c_inv.scale(p))
}
