//! Input-convex scalar networks.
//!
//! ```text
//! Z_1 = sp²(x·exp(Wx_1) + b_1)
//! Z_i = sp²(exp(Wz_i) Z_{i−1} + x·exp(Wx_i) + b_i)
//! out = exp(Wz_n)·Z_{n−1} + x·exp(Wx_n) + b_n
//! ```
//!
//! `sp²` (squared softplus, applied per unit) is convex and non-decreasing and
//! every weight enters through `exp`, so the output is convex and
//! non-decreasing in `x`. Derivatives with respect to `x` are propagated in
//! forward mode alongside the values; parameter gradients of `ψ'(x)` are
//! back-propagated through that forward recursion.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::potential::{ConvexScalar, TermEval};
use crate::{Error, Result};

/// Standard deviation of the raw initial weights.
pub const INIT_STD: f64 = 0.5;

pub const DEFAULT_WIDTHS: [usize; 2] = [4, 4];

fn init_mean(fan_in: f64) -> f64 {
    -1.0 - fan_in.ln()
}

/// One hidden layer. `wz` is row-major `width × previous width` and empty for
/// the first layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcnnLayer {
    pub wz: Vec<f64>,
    pub wx: Vec<f64>,
    pub b: Vec<f64>,
}

/// The linear output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcnnHead {
    pub wz: Vec<f64>,
    pub wx: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcnnParams {
    widths: Vec<usize>,
    layers: Vec<IcnnLayer>,
    head: IcnnHead,
}

fn softplus(u: f64) -> f64 {
    u.max(0.0) + (-u.abs()).exp().ln_1p()
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// `(sp², (sp²)', (sp²)'')` at `u`.
fn activation(u: f64) -> (f64, f64, f64) {
    let sp = softplus(u);
    let s = sigmoid(u);
    (sp * sp, 2.0 * sp * s, 2.0 * (s * s + sp * s * (1.0 - s)))
}

/// Per-unit quantities of one forward pass: pre-activation `u`, its tangent
/// `t = du/dx`, second tangent `t2`, and the activated `z`, `dz`, `d2z`.
struct Trace {
    u: Vec<f64>,
    t: Vec<f64>,
    z: Vec<f64>,
    dz: Vec<f64>,
    d2z: Vec<f64>,
}

impl IcnnParams {
    /// All raw weights and biases zero.
    pub fn zeros(widths: &[usize]) -> Result<Self> {
        if widths.contains(&0) {
            return Err(Error::InvalidConfig(format!("ICNN widths must be positive, got {widths:?}")));
        }
        let mut layers = Vec::with_capacity(widths.len());
        for (l, &n) in widths.iter().enumerate() {
            let m = if l == 0 { 0 } else { widths[l - 1] };
            layers.push(IcnnLayer { wz: vec![0.0; n * m], wx: vec![0.0; n], b: vec![0.0; n] });
        }
        let last = widths.last().copied().unwrap_or(0);
        Ok(IcnnParams { widths: widths.to_vec(), layers, head: IcnnHead { wz: vec![0.0; last], wx: 0.0, b: 0.0 } })
    }

    /// Raw weights drawn from `N(μ, 0.5²)` with `μ = −1 − ln(fan-in)`, biases
    /// zero. The shift keeps `ψ'` of order one on `[0, 3]`; with `μ = 0`
    /// stacked softplus² layers start out several orders of magnitude large.
    pub fn random<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Result<Self> {
        let mut p = Self::zeros(widths)?;
        let mut fan_in = 1.0;
        for layer in p.layers.iter_mut() {
            let normal = Normal::new(init_mean(fan_in), INIT_STD).expect("valid normal");
            for w in layer.wz.iter_mut().chain(layer.wx.iter_mut()) {
                *w = normal.sample(rng);
            }
            fan_in = layer.b.len() as f64 + 1.0;
        }
        let normal = Normal::new(init_mean(fan_in), INIT_STD).expect("valid normal");
        for w in p.head.wz.iter_mut() {
            *w = normal.sample(rng);
        }
        p.head.wx = normal.sample(rng);
        Ok(p)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn layers(&self) -> &[IcnnLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [IcnnLayer] {
        &mut self.layers
    }

    pub fn head(&self) -> &IcnnHead {
        &self.head
    }

    pub fn head_mut(&mut self) -> &mut IcnnHead {
        &mut self.head
    }

    /// Trainable scalar count for the given hidden widths.
    pub fn count_params(widths: &[usize]) -> usize {
        let mut n = 0;
        for (l, &w) in widths.iter().enumerate() {
            let m = if l == 0 { 0 } else { widths[l - 1] };
            n += w * m + 2 * w;
        }
        n + widths.last().copied().unwrap_or(0) + 2
    }

    /// Checks that the stored arrays match the declared widths.
    pub fn validate(&self) -> Result<()> {
        let ok = self.layers.len() == self.widths.len()
            && self.widths.iter().enumerate().all(|(l, &n)| {
                let m = if l == 0 { 0 } else { self.widths[l - 1] };
                let layer = &self.layers[l];
                n > 0 && layer.wz.len() == n * m && layer.wx.len() == n && layer.b.len() == n
            })
            && self.head.wz.len() == self.widths.last().copied().unwrap_or(0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("ICNN arrays do not match widths {:?}", self.widths)))
        }
    }

    fn forward(&self, x: f64) -> (Trace, [f64; 3]) {
        let total: usize = self.widths.iter().sum();
        let mut tr = Trace {
            u: vec![0.0; total],
            t: vec![0.0; total],
            z: vec![0.0; total],
            dz: vec![0.0; total],
            d2z: vec![0.0; total],
        };
        let mut offset = 0;
        let mut prev = 0;
        for (l, layer) in self.layers.iter().enumerate() {
            let n = self.widths[l];
            let m = if l == 0 { 0 } else { self.widths[l - 1] };
            for i in 0..n {
                let e = layer.wx[i].exp();
                let mut u = x * e + layer.b[i];
                let mut t = e;
                let mut t2 = 0.0;
                for j in 0..m {
                    let a = layer.wz[i * m + j].exp();
                    u += a * tr.z[prev + j];
                    t += a * tr.dz[prev + j];
                    t2 += a * tr.d2z[prev + j];
                }
                let (h, h1, h2) = activation(u);
                let k = offset + i;
                tr.u[k] = u;
                tr.t[k] = t;
                tr.z[k] = h;
                tr.dz[k] = h1 * t;
                tr.d2z[k] = h2 * t * t + h1 * t2;
            }
            prev = offset;
            offset += n;
        }
        let e = self.head.wx.exp();
        let mut out = [x * e + self.head.b, e, 0.0];
        for (j, w) in self.head.wz.iter().enumerate() {
            let a = w.exp();
            out[0] += a * tr.z[prev + j];
            out[1] += a * tr.dz[prev + j];
            out[2] += a * tr.d2z[prev + j];
        }
        (tr, out)
    }

    /// Value, first and second derivative in one pass.
    pub fn evaluate(&self, x: f64) -> [f64; 3] {
        self.forward(x).1
    }
}

impl ConvexScalar for IcnnParams {
    fn value(&self, x: f64) -> f64 {
        self.evaluate(x)[0]
    }

    fn first_derivative(&self, x: f64) -> f64 {
        self.evaluate(x)[1]
    }

    fn second_derivative(&self, x: f64) -> f64 {
        self.evaluate(x)[2]
    }

    fn num_params(&self) -> usize {
        Self::count_params(&self.widths)
    }

    fn write_params(&self, out: &mut [f64]) {
        let mut k = 0;
        for layer in &self.layers {
            for v in layer.wz.iter().chain(&layer.wx).chain(&layer.b) {
                out[k] = *v;
                k += 1;
            }
        }
        for v in &self.head.wz {
            out[k] = *v;
            k += 1;
        }
        out[k] = self.head.wx;
        out[k + 1] = self.head.b;
    }

    fn read_params(&mut self, src: &[f64]) {
        let mut k = 0;
        for layer in self.layers.iter_mut() {
            for v in layer.wz.iter_mut().chain(layer.wx.iter_mut()).chain(layer.b.iter_mut()) {
                *v = src[k];
                k += 1;
            }
        }
        for v in self.head.wz.iter_mut() {
            *v = src[k];
            k += 1;
        }
        self.head.wx = src[k];
        self.head.b = src[k + 1];
    }

    fn first_derivative_with_gradient(&self, x: f64, grad: &mut [f64]) -> TermEval {
        let (tr, out) = self.forward(x);
        let nl = self.widths.len();
        // Parameter offsets of each layer in the flat vector.
        let mut param_offsets = Vec::with_capacity(nl + 1);
        let mut unit_offsets = Vec::with_capacity(nl);
        let (mut p, mut u) = (0, 0);
        for (l, &n) in self.widths.iter().enumerate() {
            let m = if l == 0 { 0 } else { self.widths[l - 1] };
            param_offsets.push(p);
            unit_offsets.push(u);
            p += n * m + 2 * n;
            u += n;
        }
        param_offsets.push(p);

        // Head: d1 = Σ exp(wz_j) dz_j + exp(wx).
        let head = param_offsets[nl];
        let last_units = unit_offsets.last().copied().unwrap_or(0);
        let mut bar_dz: Vec<f64> = Vec::new();
        let mut bar_z: Vec<f64> = Vec::new();
        for (j, w) in self.head.wz.iter().enumerate() {
            let a = w.exp();
            grad[head + j] = a * tr.dz[last_units + j];
            bar_dz.push(a);
            bar_z.push(0.0);
        }
        let nw = self.head.wz.len();
        grad[head + nw] = self.head.wx.exp();
        grad[head + nw + 1] = 0.0;

        for l in (0..nl).rev() {
            let n = self.widths[l];
            let m = if l == 0 { 0 } else { self.widths[l - 1] };
            let layer = &self.layers[l];
            let base = param_offsets[l];
            let uo = unit_offsets[l];
            let prev = if l == 0 { 0 } else { unit_offsets[l - 1] };
            let mut next_dz = vec![0.0; m];
            let mut next_z = vec![0.0; m];
            for i in 0..n {
                let k = uo + i;
                let (_, h1, h2) = activation(tr.u[k]);
                let bar_t = bar_dz[i] * h1;
                let bar_u = bar_dz[i] * h2 * tr.t[k] + bar_z[i] * h1;
                for j in 0..m {
                    let a = layer.wz[i * m + j].exp();
                    grad[base + i * m + j] = a * (bar_t * tr.dz[prev + j] + bar_u * tr.z[prev + j]);
                    next_dz[j] += a * bar_t;
                    next_z[j] += a * bar_u;
                }
                grad[base + n * m + i] = layer.wx[i].exp() * (bar_t + x * bar_u);
                grad[base + n * m + n + i] = bar_u;
            }
            bar_dz = next_dz;
            bar_z = next_z;
        }
        TermEval { first: out[1], second: out[2], clamped: false }
    }
}

fn finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numerical(format!("ICNN produced a non-finite value {v}")))
    }
}

pub fn icnn_value(params: &IcnnParams, x: f64) -> Result<f64> {
    finite(params.value(x))
}

pub fn icnn_first_derivative(params: &IcnnParams, x: f64) -> Result<f64> {
    finite(params.first_derivative(x))
}

pub fn icnn_second_derivative(params: &IcnnParams, x: f64) -> Result<f64> {
    finite(params.second_derivative(x))
}
