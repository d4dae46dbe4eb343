//! Invertible recurrent transform: scanning the dimensions of its input in
//! a fixed direction, each step emits zᵢ = r_α(y·xᵢ + wᵀh + b) and updates
//! the hidden state h ← ReLU(u·xᵢ + vᵀh + a)·𝟙. The output unit y and the
//! leaky slope α keep the map invertible; the Jacobian is triangular in the
//! scan direction, so log|det| = d·log|y| + Σ log r′_α(preᵢ).
//!
//! The hidden pre-activation u·xᵢ + vᵀh + a is a scalar, broadcast across
//! the h-vector, so all components of h stay equal after the (constant,
//! zero) initial state; w and v still enter as full vectors through their
//! inner products with h.

use crate::error::{RedError, Result};
use crate::numerics::Vector;
use crate::transforms::{leaky_relu, leaky_relu_deriv, leaky_relu_inv};
use ndarray::Array1;

/// Magnitude floor on the output unit y.
pub const Y_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct RecurrentTransformParams {
    /// Output unit multiplying the current input dimension.
    pub y: f64,
    /// Hidden-update input weight.
    pub u: f64,
    /// Output bias.
    pub b: f64,
    /// Hidden-update bias.
    pub a: f64,
    /// Output weights on the hidden state.
    pub w: Vector,
    /// Hidden-update weights on the hidden state.
    pub v: Vector,
    /// Leaky-ReLU slope; fixed hyperparameter, not learned.
    pub alpha: f64,
    pub hidden_size: usize,
    /// Initial hidden state: known, constant zero (not learned).
    pub h0: Vector,
}

/// Per-step values cached by the forward pass, indexed by scan step
/// (step k handles dimension `order[k]`).
#[derive(Debug, Clone)]
pub struct RecurrentCache {
    pub x: Vector,
    /// Output pre-activations, one per step.
    pub pre: Vec<f64>,
    /// Hidden pre-activations, one per step.
    pub hq: Vec<f64>,
    /// Scalar hidden values hs[0..=d]; hs[0] is the initial state.
    pub hs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RecurrentGrads {
    pub y: f64,
    pub u: f64,
    pub b: f64,
    pub a: f64,
    pub w: Vector,
    pub v: Vector,
}

fn scan_order(d: usize, reversed: bool) -> Box<dyn Iterator<Item = usize>> {
    if reversed {
        Box::new((0..d).rev())
    } else {
        Box::new(0..d)
    }
}

impl RecurrentTransformParams {
    /// Identity-like start: y = 1, u = 1, a = b = 0, w and v small random.
    pub fn init(hidden_size: usize, alpha: f64, rng: &mut crate::numerics::Rng) -> Self {
        let w = Array1::from_iter((0..hidden_size).map(|_| 0.01 * rng.standard_normal()));
        let v = Array1::from_iter((0..hidden_size).map(|_| 0.01 * rng.standard_normal()));
        RecurrentTransformParams {
            y: 1.0,
            u: 1.0,
            b: 0.0,
            a: 0.0,
            w,
            v,
            alpha,
            hidden_size,
            h0: Array1::zeros(hidden_size),
        }
    }

    fn check(&self) -> Result<()> {
        if self.alpha <= 0.0 {
            return Err(RedError::Domain(format!(
                "leaky slope alpha must be > 0, got {}",
                self.alpha
            )));
        }
        if self.y.abs() < Y_FLOOR {
            return Err(RedError::Singular(format!(
                "|y| = {} below floor {Y_FLOOR}",
                self.y.abs()
            )));
        }
        Ok(())
    }

    /// Sum over hidden components; with the broadcast hidden state,
    /// wᵀh = (Σw)·hs for steps past the first.
    fn w_sum(&self) -> f64 {
        self.w.sum()
    }

    fn v_sum(&self) -> f64 {
        self.v.sum()
    }

    pub fn forward(&self, x: &Vector, reversed: bool) -> Result<(Vector, f64, RecurrentCache)> {
        self.check()?;
        let d = x.len();
        let (sw, sv) = (self.w_sum(), self.v_sum());
        // First step uses the true inner products with h0 (a constant zero
        // vector, but kept general).
        let wh0 = self.w.dot(&self.h0);
        let vh0 = self.v.dot(&self.h0);

        let mut z = Array1::zeros(d);
        let mut pre = Vec::with_capacity(d);
        let mut hq = Vec::with_capacity(d);
        let mut hs = Vec::with_capacity(d + 1);
        hs.push(0.0); // scalar stand-in for h0 (see wh0/vh0 above)
        let mut logdet = d as f64 * self.y.abs().ln();

        for (k, i) in scan_order(d, reversed).enumerate() {
            let (wh, vh) = if k == 0 {
                (wh0, vh0)
            } else {
                (sw * hs[k], sv * hs[k])
            };
            let p = self.y * x[i] + wh + self.b;
            let q = self.u * x[i] + vh + self.a;
            z[i] = leaky_relu(p, self.alpha);
            logdet += leaky_relu_deriv(p, self.alpha).ln();
            pre.push(p);
            hq.push(q);
            hs.push(q.max(0.0));
        }
        Ok((
            z,
            logdet,
            RecurrentCache {
                x: x.clone(),
                pre,
                hq,
                hs,
            },
        ))
    }

    /// Invert by recovering xᵢ = y⁻¹(r_α⁻¹(zᵢ) − wᵀh − b) in the forward
    /// scan order, re-simulating the hidden state from recovered inputs.
    pub fn inverse(&self, z: &Vector, reversed: bool) -> Result<Vector> {
        self.check()?;
        let d = z.len();
        let (sw, sv) = (self.w_sum(), self.v_sum());
        let wh0 = self.w.dot(&self.h0);
        let vh0 = self.v.dot(&self.h0);

        let mut x = Array1::zeros(d);
        let mut hs = 0.0;
        for (k, i) in scan_order(d, reversed).enumerate() {
            let (wh, vh) = if k == 0 { (wh0, vh0) } else { (sw * hs, sv * hs) };
            let xi = (leaky_relu_inv(z[i], self.alpha) - wh - self.b) / self.y;
            x[i] = xi;
            hs = (self.u * xi + vh + self.a).max(0.0);
        }
        Ok(x)
    }

    /// Accumulate gradients for upstream ∂loss/∂z = `gz` plus `logdet_w`
    /// times this stage's logdet; returns ∂loss/∂x.
    ///
    /// The Σ log r′_α term is locally constant in the parameters (r′_α is
    /// piecewise constant), so the only logdet gradient is d·logdet_w/y.
    pub fn vjp(
        &self,
        cache: &RecurrentCache,
        reversed: bool,
        gz: &Vector,
        logdet_w: f64,
        grads: &mut RecurrentGrads,
    ) -> Vector {
        let d = cache.x.len();
        let (sw, sv) = (self.w_sum(), self.v_sum());
        let order: Vec<usize> = scan_order(d, reversed).collect();

        let mut gx = Array1::zeros(d);
        let mut d_sw = 0.0;
        let mut d_sv = 0.0;
        let mut ghs = 0.0; // gradient w.r.t. hs[k+1] while walking step k

        grads.y += logdet_w * d as f64 / self.y;

        for k in (0..d).rev() {
            let i = order[k];
            // Hidden update hs[k+1] = ReLU(hq[k]).
            let dq = if cache.hq[k] > 0.0 { ghs } else { 0.0 };
            grads.u += dq * cache.x[i];
            grads.a += dq;
            // Output z[i] = r_alpha(pre[k]).
            let dp = gz[i] * leaky_relu_deriv(cache.pre[k], self.alpha);
            grads.y += dp * cache.x[i];
            grads.b += dp;
            if k > 0 {
                d_sw += dp * cache.hs[k];
                d_sv += dq * cache.hs[k];
                ghs = dp * sw + dq * sv;
            } else {
                // Step 0 reads h0, a constant; nothing flows further back.
                // w/v gradients via the true inner product with h0:
                for j in 0..self.hidden_size {
                    grads.w[j] += dp * self.h0[j];
                    grads.v[j] += dq * self.h0[j];
                }
                ghs = 0.0;
            }
            gx[i] += dp * self.y + dq * self.u;
        }
        // hs enters only through the component sums, so every component of
        // w (and v) carries the same accumulated gradient.
        for j in 0..self.hidden_size {
            grads.w[j] += d_sw;
            grads.v[j] += d_sv;
        }
        gx
    }

    /// Clamp |y| to the floor, preserving sign.
    pub fn project(&mut self) {
        if self.y.abs() < Y_FLOOR {
            self.y = if self.y < 0.0 { -Y_FLOOR } else { Y_FLOOR };
        }
    }
}

impl RecurrentGrads {
    pub fn zeros(hidden_size: usize) -> Self {
        RecurrentGrads {
            y: 0.0,
            u: 0.0,
            b: 0.0,
            a: 0.0,
            w: Array1::zeros(hidden_size),
            v: Array1::zeros(hidden_size),
        }
    }
}
