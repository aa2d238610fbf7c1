//! NODE terms: the energy derivative is the time-one flow map of a learned
//! scalar ODE,
//!
//! ```text
//! dy/dω = f(y),   y(0) = x,   ψ'(x) = y(1)
//! ```
//!
//! Trajectories of a scalar ODE cannot cross, so `y(1)` is non-decreasing in
//! `x` and `ψ` is convex. The field is a bias-free network with an odd
//! activation, hence `f(0) = 0`: the origin is a fixed point and `x ≥ 0`
//! implies `ψ'(x) ≥ 0`. The field does not take `ω` as an input.
//!
//! Integration uses classical RK4 with a fixed step count. Sensitivities with
//! respect to the initial value (`ψ''`) and to the weights are co-integrated
//! with the same scheme, which gives the exact derivatives of the discrete
//! flow map.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::potential::{check_argument, ConvexScalar, TermEval};
use crate::{Error, Result};

pub const DEFAULT_WIDTHS: [usize; 2] = [5, 5];
pub const DEFAULT_STEPS: usize = 20;
/// Gauss–Legendre nodes per unit interval of the energy quadrature.
pub const DEFAULT_QUADRATURE_NODES: usize = 16;
/// Standard deviation of the initial weights.
pub const INIT_STD: f64 = 0.5;
/// Largest supported hidden width.
pub const MAX_WIDTH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldActivation {
    Tanh,
    /// Identity activation; makes the field linear in `y`.
    Linear,
}

impl FieldActivation {
    /// `(σ(a), σ'(a))`
    fn eval(self, a: f64) -> (f64, f64) {
        match self {
            FieldActivation::Tanh => {
                let t = a.tanh();
                (t, 1.0 - t * t)
            }
            FieldActivation::Linear => (a, 1.0),
        }
    }
}

/// Fixed-step integration settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub steps: usize,
    pub quadrature_nodes: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig { steps: DEFAULT_STEPS, quadrature_nodes: DEFAULT_QUADRATURE_NODES }
    }
}

/// Bias-free feed-forward field `f(y) = out · σ(W_L ⋯ σ(W_1 y))`.
///
/// `weights[l]` is row-major `widths[l] × widths[l − 1]` (one input column for
/// the first layer). With no hidden layers the field is `f(y) = out[0] · y`.
/// The bias vectors are stored for completeness and are always zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeParams {
    widths: Vec<usize>,
    activation: FieldActivation,
    weights: Vec<Vec<f64>>,
    out: Vec<f64>,
    biases: Vec<Vec<f64>>,
    pub integrator: IntegratorConfig,
}

/// Field value, `∂f/∂y`, and optionally `∂f/∂θ`.
struct FieldEval {
    f: f64,
    fy: f64,
}

impl NodeParams {
    pub fn zeros(widths: &[usize], activation: FieldActivation, integrator: IntegratorConfig) -> Result<Self> {
        if widths.iter().any(|&w| w == 0 || w > MAX_WIDTH) {
            return Err(Error::InvalidConfig(format!("NODE widths must lie in 1..={MAX_WIDTH}, got {widths:?}")));
        }
        if integrator.steps == 0 || integrator.quadrature_nodes == 0 {
            return Err(Error::InvalidConfig("NODE step and quadrature counts must be positive".into()));
        }
        let mut weights = Vec::with_capacity(widths.len());
        for (l, &n) in widths.iter().enumerate() {
            let m = if l == 0 { 1 } else { widths[l - 1] };
            weights.push(vec![0.0; n * m]);
        }
        let out_len = widths.last().copied().unwrap_or(1);
        Ok(NodeParams {
            widths: widths.to_vec(),
            activation,
            weights,
            out: vec![0.0; out_len],
            biases: widths.iter().map(|&n| vec![0.0; n]).collect(),
            integrator,
        })
    }

    /// Tanh field with weights drawn from `N(0, 0.5²)`.
    pub fn random<R: Rng + ?Sized>(widths: &[usize], integrator: IntegratorConfig, rng: &mut R) -> Result<Self> {
        let mut p = Self::zeros(widths, FieldActivation::Tanh, integrator)?;
        let normal = Normal::new(0.0, INIT_STD).expect("valid normal");
        for w in p.weights.iter_mut().flatten().chain(p.out.iter_mut()) {
            *w = normal.sample(rng);
        }
        Ok(p)
    }

    /// The linear field `f(y) = rate · y`.
    pub fn linear(rate: f64, integrator: IntegratorConfig) -> Self {
        let mut p = Self::zeros(&[1], FieldActivation::Linear, integrator).expect("valid widths");
        p.weights[0][0] = 1.0;
        p.out[0] = rate;
        p
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activation(&self) -> FieldActivation {
        self.activation
    }

    pub fn weights_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.weights
    }

    pub fn out_weights_mut(&mut self) -> &mut [f64] {
        &mut self.out
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn biases_are_zero(&self) -> bool {
        self.biases.iter().flatten().all(|&b| b == 0.0)
    }

    pub fn count_params(widths: &[usize]) -> usize {
        let mut n = 0;
        for (l, &w) in widths.iter().enumerate() {
            let m = if l == 0 { 1 } else { widths[l - 1] };
            n += w * m;
        }
        n + widths.last().copied().unwrap_or(1)
    }

    /// Checks array shapes, zero biases and integrator settings.
    pub fn validate(&self) -> Result<()> {
        let shapes = self.weights.len() == self.widths.len()
            && self.biases.len() == self.widths.len()
            && self.widths.iter().enumerate().all(|(l, &n)| {
                let m = if l == 0 { 1 } else { self.widths[l - 1] };
                n > 0 && n <= MAX_WIDTH && self.weights[l].len() == n * m && self.biases[l].len() == n
            })
            && self.out.len() == self.widths.last().copied().unwrap_or(1);
        if !shapes {
            return Err(Error::InvalidConfig(format!("NODE arrays do not match widths {:?}", self.widths)));
        }
        if !self.biases_are_zero() {
            return Err(Error::InvalidConfig("NODE biases must be identically zero".into()));
        }
        if self.integrator.steps == 0 || self.integrator.quadrature_nodes == 0 {
            return Err(Error::InvalidConfig("NODE step and quadrature counts must be positive".into()));
        }
        Ok(())
    }

    /// Evaluates the field; when `grad` is given it receives `∂f/∂θ`.
    /// `scratch` must hold at least [`Self::scratch_len`] entries.
    fn field(&self, y: f64, grad: Option<&mut [f64]>, scratch: &mut [f64]) -> FieldEval {
        if self.widths.is_empty() {
            if let Some(g) = grad {
                g[0] = y;
            }
            return FieldEval { f: self.out[0] * y, fy: self.out[0] };
        }
        let total: usize = self.widths.iter().sum();
        let (acts, rest) = scratch.split_at_mut(total);
        let (slopes, rest) = rest.split_at_mut(total);
        let (tangent, rest) = rest.split_at_mut(total);
        // Forward pass, plus the tangent along y.
        let mut offset = 0;
        let mut prev = 0;
        for (l, &n) in self.widths.iter().enumerate() {
            let w = &self.weights[l];
            if l == 0 {
                for i in 0..n {
                    let (s, ds) = self.activation.eval(w[i] * y);
                    acts[i] = s;
                    slopes[i] = ds;
                    tangent[i] = ds * w[i];
                }
            } else {
                let m = self.widths[l - 1];
                for i in 0..n {
                    let row = &w[i * m..(i + 1) * m];
                    let mut a = 0.0;
                    let mut da = 0.0;
                    for j in 0..m {
                        a += row[j] * acts[prev + j];
                        da += row[j] * tangent[prev + j];
                    }
                    let (s, ds) = self.activation.eval(a);
                    acts[offset + i] = s;
                    slopes[offset + i] = ds;
                    tangent[offset + i] = ds * da;
                }
            }
            prev = offset;
            offset += n;
        }
        let mut f = 0.0;
        let mut fy = 0.0;
        for (j, w) in self.out.iter().enumerate() {
            f += w * acts[prev + j];
            fy += w * tangent[prev + j];
        }
        if let Some(g) = grad {
            self.field_gradient(y, acts, slopes, rest, g);
        }
        FieldEval { f, fy }
    }

    /// Back-propagates `∂f/∂θ` from a completed forward pass.
    fn field_gradient(&self, y: f64, acts: &[f64], slopes: &[f64], buf: &mut [f64], g: &mut [f64]) {
        let nl = self.widths.len();
        let max_w = *self.widths.iter().max().expect("non-empty");
        let (bar, next) = buf.split_at_mut(max_w);
        let mut p_end: usize = self.weights.iter().map(Vec::len).sum();
        let mut u_end: usize = acts.len();
        let last = self.widths[nl - 1];
        for (j, w) in self.out.iter().enumerate() {
            g[p_end + j] = acts[u_end - last + j];
            bar[j] = *w;
        }
        for l in (0..nl).rev() {
            let n = self.widths[l];
            let w = &self.weights[l];
            let u_start = u_end - n;
            for i in 0..n {
                bar[i] *= slopes[u_start + i];
            }
            if l == 0 {
                for i in 0..n {
                    g[i] = bar[i] * y;
                }
            } else {
                let m = self.widths[l - 1];
                let p_start = p_end - n * m;
                let below = &acts[u_start - m..u_start];
                next[..m].fill(0.0);
                for i in 0..n {
                    let row = &w[i * m..(i + 1) * m];
                    let gi = &mut g[p_start + i * m..p_start + (i + 1) * m];
                    for j in 0..m {
                        gi[j] = bar[i] * below[j];
                        next[j] += row[j] * bar[i];
                    }
                }
                bar[..m].copy_from_slice(&next[..m]);
                p_end = p_start;
            }
            u_end = u_start;
        }
    }

    fn scratch_len(&self) -> usize {
        3 * self.widths.iter().sum::<usize>() + 2 * self.widths.iter().max().copied().unwrap_or(0) + 1
    }

    /// Integrates the flow map with `steps` RK4 steps. Returns `(y(1), dy(1)/dy(0))`;
    /// with `grad` it also accumulates `dy(1)/dθ`.
    fn flow(&self, x: f64, steps: usize, grad: Option<&mut [f64]>) -> (f64, f64) {
        let h = 1.0 / steps as f64;
        let mut scratch = vec![0.0; self.scratch_len()];
        let mut y = x;
        let mut s = 1.0;
        match grad {
            None => {
                for _ in 0..steps {
                    let k1 = self.field(y, None, &mut scratch);
                    let (y2, s2) = (y + 0.5 * h * k1.f, s + 0.5 * h * k1.fy * s);
                    let k2 = self.field(y2, None, &mut scratch);
                    let (y3, s3) = (y + 0.5 * h * k2.f, s + 0.5 * h * k2.fy * s2);
                    let k3 = self.field(y3, None, &mut scratch);
                    let (y4, s4) = (y + h * k3.f, s + h * k3.fy * s3);
                    let k4 = self.field(y4, None, &mut scratch);
                    y += h / 6.0 * (k1.f + 2.0 * k2.f + 2.0 * k3.f + k4.f);
                    s += h / 6.0 * (k1.fy * s + 2.0 * k2.fy * s2 + 2.0 * k3.fy * s3 + k4.fy * s4);
                }
                (y, s)
            }
            Some(g) => {
                let np = g.len();
                // dy/dθ at the step start, the current stage input, the stage
                // slope and the weighted sum of stage slopes.
                let mut dy = vec![0.0; np];
                let mut stage_in = vec![0.0; np];
                let mut kg = vec![0.0; np];
                let mut acc = vec![0.0; np];
                let mut df = vec![0.0; np];
                let coef = [0.5 * h, 0.5 * h, h];
                let weight = [1.0, 2.0, 2.0, 1.0];
                for _ in 0..steps {
                    let mut yi = y;
                    let mut si = s;
                    stage_in.copy_from_slice(&dy);
                    acc.fill(0.0);
                    let mut kf = [0.0; 4];
                    let mut ks = [0.0; 4];
                    for st in 0..4 {
                        let e = self.field(yi, Some(&mut df), &mut scratch);
                        kf[st] = e.f;
                        ks[st] = e.fy * si;
                        for p in 0..np {
                            kg[p] = e.fy * stage_in[p] + df[p];
                            acc[p] += weight[st] * kg[p];
                        }
                        if st < 3 {
                            let c = coef[st];
                            yi = y + c * e.f;
                            si = s + c * ks[st];
                            for p in 0..np {
                                stage_in[p] = dy[p] + c * kg[p];
                            }
                        }
                    }
                    y += h / 6.0 * (kf[0] + 2.0 * kf[1] + 2.0 * kf[2] + kf[3]);
                    s += h / 6.0 * (ks[0] + 2.0 * ks[1] + 2.0 * ks[2] + ks[3]);
                    for p in 0..np {
                        dy[p] += h / 6.0 * acc[p];
                    }
                }
                g.copy_from_slice(&dy);
                (y, s)
            }
        }
    }

    /// `y(1)` and `dy(1)/dy(0)` with an explicit step count.
    pub fn flow_with_steps(&self, x: f64, steps: usize) -> (f64, f64) {
        self.flow(x, steps.max(1), None)
    }

    /// `∫₀ˣ y(1; t) dt` by composite Gauss–Legendre quadrature on unit panels.
    fn integrate(&self, x: f64) -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        let (nodes, weights) = gauss_legendre(self.integrator.quadrature_nodes);
        let panels = (x.abs().ceil() as usize).max(1);
        let width = x / panels as f64;
        let mut total = 0.0;
        for p in 0..panels {
            let lo = p as f64 * width;
            for (t, w) in nodes.iter().zip(&weights) {
                let at = lo + 0.5 * width * (t + 1.0);
                total += 0.5 * width * w * self.flow(at, self.integrator.steps, None).0;
            }
        }
        total
    }
}

impl ConvexScalar for NodeParams {
    fn value(&self, x: f64) -> f64 {
        self.integrate(x)
    }

    fn first_derivative(&self, x: f64) -> f64 {
        self.flow(x, self.integrator.steps, None).0
    }

    fn second_derivative(&self, x: f64) -> f64 {
        self.flow(x, self.integrator.steps, None).1
    }

    fn num_params(&self) -> usize {
        Self::count_params(&self.widths)
    }

    fn write_params(&self, out: &mut [f64]) {
        for (k, v) in self.weights.iter().flatten().chain(&self.out).enumerate() {
            out[k] = *v;
        }
    }

    fn read_params(&mut self, src: &[f64]) {
        for (k, v) in self.weights.iter_mut().flatten().chain(self.out.iter_mut()).enumerate() {
            *v = src[k];
        }
    }

    fn first_derivative_with_gradient(&self, x: f64, grad: &mut [f64]) -> TermEval {
        let (first, second) = self.flow(x, self.integrator.steps, Some(grad));
        TermEval { first, second, clamped: false }
    }
}

/// Gauss–Legendre nodes and weights on `[−1, 1]` (Newton iteration on the
/// Legendre recurrence).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (core::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = nf * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numerical(format!(
            "NODE integration produced {v}; reduce the step size (increase the step count)"
        )))
    }
}

/// `ψ'(x) = y(1)` with `y(0) = x`.
pub fn node_first_derivative(params: &NodeParams, x: f64) -> Result<f64> {
    let x = check_argument(x)?;
    finite(params.first_derivative(x))
}

/// `dy(1)/dy(0)` from the co-integrated variational equation.
pub fn node_second_derivative(params: &NodeParams, x: f64) -> Result<f64> {
    let x = check_argument(x)?;
    finite(params.second_derivative(x))
}

/// `ψ(x) = ∫₀ˣ ψ'(t) dt`.
pub fn node_energy(params: &NodeParams, x: f64) -> Result<f64> {
    let x = check_argument(x)?;
    finite(params.value(x))
}
