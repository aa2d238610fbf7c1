//! CANN terms: `ψ(x) = Σ_{a,b} g_ab · f_b(w_ab · x^a)` with `a ∈ {1, 2, 3}`,
//! `f_identity(t) = t`, `f_exp(t) = exp(t) − 1` and non-negative weights.
//!
//! With non-negative weights every summand is convex and non-decreasing on
//! `x ≥ 0`. Non-negativity is kept during training by clipping after each
//! optimizer step, so exact zeros (pruned terms) are reachable.

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::potential::{check_argument, ConvexScalar, TermEval};
use crate::Result;

/// Polynomial degrees of the expansion.
pub const DEGREES: [i32; 3] = [1, 2, 3];

/// Inner arguments are clamped here before exponentiation while training.
pub const TRAINING_EXP_LIMIT: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Exp,
}

impl Activation {
    pub const ALL: [Activation; 2] = [Activation::Identity, Activation::Exp];

    fn eval(self, t: f64) -> f64 {
        match self {
            Activation::Identity => t,
            Activation::Exp => t.exp_m1(),
        }
    }

    /// `(f'(t), f''(t))`
    fn slopes(self, t: f64) -> (f64, f64) {
        match self {
            Activation::Identity => (1.0, 0.0),
            Activation::Exp => {
                let e = t.exp();
                (e, e)
            }
        }
    }
}

/// Inner weight `w` and outer weight `g` of one `(degree, activation)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WeightPair {
    pub w: f64,
    pub g: f64,
}

/// The twelve weights of one CANN term, indexed `[degree − 1][activation]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CannTermParams {
    pub pairs: [[WeightPair; 2]; 3],
}

impl CannTermParams {
    pub const NUM_PARAMS: usize = 12;

    /// A term with a single active pair.
    pub fn single(degree: i32, activation: Activation, w: f64, g: f64) -> Self {
        let mut p = CannTermParams::default();
        *p.pair_mut(degree, activation) = WeightPair { w, g };
        p
    }

    /// Weights drawn uniformly from `[0, 0.1)`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut p = CannTermParams::default();
        for row in p.pairs.iter_mut() {
            for pair in row.iter_mut() {
                pair.w = 0.1 * rng.random::<f64>();
                pair.g = 0.1 * rng.random::<f64>();
            }
        }
        p
    }

    pub fn pair_mut(&mut self, degree: i32, activation: Activation) -> &mut WeightPair {
        &mut self.pairs[(degree - 1) as usize][activation as usize]
    }

    fn iter(&self) -> impl Iterator<Item = (i32, Activation, WeightPair)> + '_ {
        DEGREES.iter().flat_map(move |&a| {
            Activation::ALL.iter().map(move |&b| (a, b, self.pairs[(a - 1) as usize][b as usize]))
        })
    }

    pub fn all_non_negative(&self) -> bool {
        self.iter().all(|(_, _, p)| p.w >= 0.0 && p.g >= 0.0)
    }
}

impl ConvexScalar for CannTermParams {
    fn value(&self, x: f64) -> f64 {
        self.iter().map(|(a, b, p)| p.g * b.eval(p.w * x.powi(a))).sum()
    }

    fn first_derivative(&self, x: f64) -> f64 {
        self.iter()
            .map(|(a, b, p)| {
                let (f1, _) = b.slopes(p.w * x.powi(a));
                p.g * f1 * p.w * a as f64 * x.powi(a - 1)
            })
            .sum()
    }

    fn second_derivative(&self, x: f64) -> f64 {
        self.iter()
            .map(|(a, b, p)| {
                let (f1, f2) = b.slopes(p.w * x.powi(a));
                let du = p.w * a as f64 * x.powi(a - 1);
                let d2u = if a >= 2 { p.w * (a * (a - 1)) as f64 * x.powi(a - 2) } else { 0.0 };
                p.g * (f2 * du * du + f1 * d2u)
            })
            .sum()
    }

    fn num_params(&self) -> usize {
        Self::NUM_PARAMS
    }

    fn write_params(&self, out: &mut [f64]) {
        for (k, (_, _, p)) in self.iter().enumerate() {
            out[2 * k] = p.w;
            out[2 * k + 1] = p.g;
        }
    }

    fn read_params(&mut self, src: &[f64]) {
        for (k, &a) in DEGREES.iter().enumerate() {
            for (m, b) in Activation::ALL.iter().enumerate() {
                let idx = 2 * (2 * k + m);
                *self.pair_mut(a, *b) = WeightPair { w: src[idx], g: src[idx + 1] };
            }
        }
    }

    fn first_derivative_with_gradient(&self, x: f64, grad: &mut [f64]) -> TermEval {
        let mut first = 0.0;
        let mut second = 0.0;
        let mut clamped = false;
        for (k, (a, b, p)) in self.iter().enumerate() {
            let mut u = p.w * x.powi(a);
            if b == Activation::Exp && u > TRAINING_EXP_LIMIT {
                u = TRAINING_EXP_LIMIT;
                clamped = true;
            }
            let (f1, f2) = b.slopes(u);
            let af = a as f64;
            let xa1 = x.powi(a - 1);
            let du = p.w * af * xa1;
            let d2u = if a >= 2 { p.w * af * (af - 1.0) * x.powi(a - 2) } else { 0.0 };
            first += p.g * f1 * du;
            second += p.g * (f2 * du * du + f1 * d2u);
            // d/dw [g f'(w x^a) w a x^{a-1}] = g a x^{a-1} (f''(u) x^a w + f'(u))
            grad[2 * k] = p.g * af * xa1 * (f2 * x.powi(a) * p.w + f1);
            grad[2 * k + 1] = f1 * du;
        }
        TermEval { first, second, clamped }
    }

    fn project(&mut self) {
        for row in self.pairs.iter_mut() {
            for pair in row.iter_mut() {
                pair.w = pair.w.max(0.0);
                pair.g = pair.g.max(0.0);
            }
        }
    }
}

/// `Σ g f_b(w x^a)` for `x ≥ 0`.
pub fn cann_value(params: &CannTermParams, x: f64) -> Result<f64> {
    let x = check_argument(x)?;
    Ok(params.value(x))
}

pub fn cann_first_derivative(params: &CannTermParams, x: f64) -> Result<f64> {
    let x = check_argument(x)?;
    Ok(params.first_derivative(x))
}

pub fn cann_second_derivative(params: &CannTermParams, x: f64) -> Result<f64> {
    let x = check_argument(x)?;
    Ok(params.second_derivative(x))
}
