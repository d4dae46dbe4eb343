//! Gated recurrent unit scanning one scalar dimension per step. Gates are
//! sigmoids of linear projections of (xᵢ, h); the candidate uses a sigmoid
//! by default (a tanh variant is available through the model config) and
//! the state update is h ← u ⊙ h + (1−u) ⊙ c.

use crate::numerics::{sigmoid, Rng, Vector};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

/// Activation of the candidate state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CandidateActivation {
    #[default]
    Sigmoid,
    Tanh,
}

impl CandidateActivation {
    fn apply(self, s: f64) -> f64 {
        match self {
            CandidateActivation::Sigmoid => sigmoid(s),
            CandidateActivation::Tanh => s.tanh(),
        }
    }

    /// Derivative expressed through the activation value.
    fn deriv_from_value(self, c: f64) -> f64 {
        match self {
            CandidateActivation::Sigmoid => c * (1.0 - c),
            CandidateActivation::Tanh => 1.0 - c * c,
        }
    }
}

/// Per-gate weights: each gate sees the scalar input and the hidden state.
#[derive(Debug, Clone)]
pub struct GruParams {
    pub hidden_size: usize,
    // update gate
    pub w_u: Vector,
    pub a_u: Array2<f64>,
    pub b_u: Vector,
    // reset gate
    pub w_r: Vector,
    pub a_r: Array2<f64>,
    pub b_r: Vector,
    // candidate
    pub w_c: Vector,
    pub a_c: Array2<f64>,
    pub b_c: Vector,
    pub candidate: CandidateActivation,
}

#[derive(Debug, Clone)]
pub struct GruCache {
    pub x: f64,
    pub h_prev: Vector,
    pub u: Vector,
    pub r: Vector,
    pub c: Vector,
}

#[derive(Debug, Clone)]
pub struct GruGrads {
    pub w_u: Vector,
    pub a_u: Array2<f64>,
    pub b_u: Vector,
    pub w_r: Vector,
    pub a_r: Array2<f64>,
    pub b_r: Vector,
    pub w_c: Vector,
    pub a_c: Array2<f64>,
    pub b_c: Vector,
}

impl GruParams {
    /// Small-random weights N(0, 0.01²), zero biases.
    pub fn init(hidden_size: usize, candidate: CandidateActivation, rng: &mut Rng) -> Self {
        let h = hidden_size;
        let mut vec = |n: usize| Array1::from_iter((0..n).map(|_| 0.01 * rng.standard_normal()));
        let w_u = vec(h);
        let w_r = vec(h);
        let w_c = vec(h);
        let mut mat = || {
            Array2::from_shape_fn((h, h), |_| 0.01 * rng.standard_normal())
        };
        let a_u = mat();
        let a_r = mat();
        let a_c = mat();
        GruParams {
            hidden_size: h,
            w_u,
            a_u,
            b_u: Array1::zeros(h),
            w_r,
            a_r,
            b_r: Array1::zeros(h),
            w_c,
            a_c,
            b_c: Array1::zeros(h),
            candidate: candidate,
        }
    }

    /// One scan step: h_new = u ⊙ h_prev + (1−u) ⊙ c.
    pub fn step(&self, x: f64, h_prev: &Vector) -> Vector {
        self.step_cached(x, h_prev).0
    }

    pub fn step_cached(&self, x: f64, h_prev: &Vector) -> (Vector, GruCache) {
        debug_assert_eq!(h_prev.len(), self.hidden_size);
        let su = &self.a_u.dot(h_prev) + &(&self.w_u * x) + &self.b_u;
        let sr = &self.a_r.dot(h_prev) + &(&self.w_r * x) + &self.b_r;
        let u = su.mapv(sigmoid);
        let r = sr.mapv(sigmoid);
        let gated = &r * h_prev;
        let sc = &self.a_c.dot(&gated) + &(&self.w_c * x) + &self.b_c;
        let c = sc.mapv(|s| self.candidate.apply(s));
        let h_new = &(&u * h_prev) + &(&(1.0 - &u) * &c);
        (
            h_new,
            GruCache {
                x,
                h_prev: h_prev.clone(),
                u,
                r,
                c,
            },
        )
    }

    /// Backprop one step: upstream ∂loss/∂h_new → parameter grads,
    /// (∂loss/∂x, ∂loss/∂h_prev).
    pub fn vjp(&self, cache: &GruCache, gh: &Vector, grads: &mut GruGrads) -> (f64, Vector) {
        let GruCache { x, h_prev, u, r, c } = cache;
        let mut gx = 0.0;
        let mut gh_prev: Vector = gh * u;

        // h_new = u ⊙ h_prev + (1−u) ⊙ c
        let dc = gh * &(1.0 - u);
        let du = gh * &(h_prev - c);

        // candidate: c = act(w_c x + A_c (r ⊙ h_prev) + b_c)
        let dsc = &dc * &c.mapv(|cv| self.candidate.deriv_from_value(cv));
        gx += self.w_c.dot(&dsc);
        grads.w_c.scaled_add(*x, &dsc);
        grads.b_c += &dsc;
        let gated = r * h_prev;
        outer_add(&mut grads.a_c, &dsc, &gated);
        let dgated = self.a_c.t().dot(&dsc);
        let dr = &dgated * h_prev;
        gh_prev += &(&dgated * r);

        // gates
        let dsu = &du * &(u * &(1.0 - u));
        gx += self.w_u.dot(&dsu);
        grads.w_u.scaled_add(*x, &dsu);
        grads.b_u += &dsu;
        outer_add(&mut grads.a_u, &dsu, h_prev);
        gh_prev += &self.a_u.t().dot(&dsu);

        let dsr = &dr * &(r * &(1.0 - r));
        gx += self.w_r.dot(&dsr);
        grads.w_r.scaled_add(*x, &dsr);
        grads.b_r += &dsr;
        outer_add(&mut grads.a_r, &dsr, h_prev);
        gh_prev += &self.a_r.t().dot(&dsr);

        (gx, gh_prev)
    }
}

fn outer_add(m: &mut Array2<f64>, col: &Vector, row: &Vector) {
    for i in 0..col.len() {
        for j in 0..row.len() {
            m[[i, j]] += col[i] * row[j];
        }
    }
}

impl GruGrads {
    pub fn zeros(hidden_size: usize) -> Self {
        let h = hidden_size;
        GruGrads {
            w_u: Array1::zeros(h),
            a_u: Array2::zeros((h, h)),
            b_u: Array1::zeros(h),
            w_r: Array1::zeros(h),
            a_r: Array2::zeros((h, h)),
            b_r: Array1::zeros(h),
            w_c: Array1::zeros(h),
            a_c: Array2::zeros((h, h)),
            b_c: Array1::zeros(h),
        }
    }
}
