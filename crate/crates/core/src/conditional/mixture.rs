//! Mixture head: stacked fully connected layers map a hidden state to the
//! 3K raw outputs of a one-dimensional Gaussian mixture — K means, K log
//! standard deviations (clamped before exponentiation), K weight logits.

use crate::error::Result;
use crate::numerics::{gaussian_logpdf, log_softmax, log_sum_exp, softmax, Rng, Vector};
use ndarray::{Array1, Array2};

/// Clamp range for log standard deviations: σ ∈ [1e-3, 1e3].
pub const LOG_STD_MIN: f64 = -6.907755278982137; // ln 1e-3
pub const LOG_STD_MAX: f64 = 6.907755278982137; // ln 1e3

/// One fully connected layer.
#[derive(Debug, Clone)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Vector,
}

/// `num_fcs` tanh layers (hidden → hidden) followed by a linear projection
/// to the 3K mixture outputs.
#[derive(Debug, Clone)]
pub struct MixtureHeadParams {
    pub hidden_layers: Vec<Dense>,
    pub out: Dense,
    pub k: usize,
}

/// Activated parameters of a 1-D Gaussian mixture. `log_stds` are already
/// clamped; `log_stds_raw` keeps the pre-clamp values for the reverse pass.
#[derive(Debug, Clone)]
pub struct MixtureParams {
    pub means: Vector,
    pub log_stds: Vector,
    pub logits: Vector,
    pub log_stds_raw: Vector,
}

#[derive(Debug, Clone)]
pub struct HeadCache {
    /// Activations a₀ (input) through a_F (last tanh layer output).
    pub acts: Vec<Vector>,
}

#[derive(Debug, Clone)]
pub struct HeadGrads {
    pub hidden_layers: Vec<(Array2<f64>, Vector)>,
    pub out: (Array2<f64>, Vector),
}

/// Gradient of a mixture log-density w.r.t. the raw 3K head outputs.
#[derive(Debug, Clone)]
pub struct MixtureGrad {
    pub means: Vector,
    pub log_stds_raw: Vector,
    pub logits: Vector,
}

impl MixtureParams {
    pub fn stds(&self) -> Vector {
        self.log_stds.mapv(f64::exp)
    }

    pub fn weights(&self) -> Vec<f64> {
        softmax(self.logits.as_slice().unwrap())
    }

    pub fn from_raw(raw: &Vector, k: usize) -> Self {
        debug_assert_eq!(raw.len(), 3 * k);
        let means = raw.slice(ndarray::s![0..k]).to_owned();
        let log_stds_raw = raw.slice(ndarray::s![k..2 * k]).to_owned();
        let logits = raw.slice(ndarray::s![2 * k..3 * k]).to_owned();
        let log_stds = log_stds_raw.mapv(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX));
        MixtureParams {
            means,
            log_stds,
            logits,
            log_stds_raw,
        }
    }
}

impl MixtureHeadParams {
    /// Small-random weights N(0, 0.01²), zero biases.
    pub fn init(hidden_size: usize, num_fcs: usize, k: usize, rng: &mut Rng) -> Self {
        let mut layer = |rows: usize, cols: usize| Dense {
            w: Array2::from_shape_fn((rows, cols), |_| 0.01 * rng.standard_normal()),
            b: Array1::zeros(rows),
        };
        let hidden_layers = (0..num_fcs).map(|_| layer(hidden_size, hidden_size)).collect();
        let out = layer(3 * k, hidden_size);
        MixtureHeadParams {
            hidden_layers,
            out,
            k,
        }
    }

    /// Map a hidden state to activated mixture parameters.
    pub fn mixture_from_state(&self, h: &Vector) -> MixtureParams {
        self.mixture_cached(h).0
    }

    pub fn mixture_cached(&self, h: &Vector) -> (MixtureParams, HeadCache) {
        let mut acts = Vec::with_capacity(self.hidden_layers.len() + 1);
        acts.push(h.clone());
        let mut a = h.clone();
        for layer in &self.hidden_layers {
            a = (layer.w.dot(&a) + &layer.b).mapv(f64::tanh);
            acts.push(a.clone());
        }
        let raw = self.out.w.dot(&a) + &self.out.b;
        (MixtureParams::from_raw(&raw, self.k), HeadCache { acts })
    }

    /// Backprop from raw-output gradients to parameter grads and ∂loss/∂h.
    pub fn vjp(&self, cache: &HeadCache, graw: &Vector, grads: &mut HeadGrads) -> Vector {
        let last = cache.acts.last().unwrap();
        for i in 0..graw.len() {
            for j in 0..last.len() {
                grads.out.0[[i, j]] += graw[i] * last[j];
            }
        }
        grads.out.1 += graw;
        let mut ga = self.out.w.t().dot(graw);
        for (idx, layer) in self.hidden_layers.iter().enumerate().rev() {
            let a_out = &cache.acts[idx + 1];
            let a_in = &cache.acts[idx];
            let dpre = &ga * &a_out.mapv(|t| 1.0 - t * t);
            let (gw, gb) = &mut grads.hidden_layers[idx];
            for i in 0..dpre.len() {
                for j in 0..a_in.len() {
                    gw[[i, j]] += dpre[i] * a_in[j];
                }
            }
            *gb += &dpre;
            ga = layer.w.t().dot(&dpre);
        }
        ga
    }
}

impl HeadGrads {
    pub fn zeros(hidden_size: usize, num_fcs: usize, k: usize) -> Self {
        HeadGrads {
            hidden_layers: (0..num_fcs)
                .map(|_| (Array2::zeros((hidden_size, hidden_size)), Array1::zeros(hidden_size)))
                .collect(),
            out: (Array2::zeros((3 * k, hidden_size)), Array1::zeros(3 * k)),
        }
    }
}

/// log Σₖ softmax(logits)ₖ N(z; μₖ, σₖ²), computed as a log-sum-exp over
/// log-weights plus component log-densities.
pub fn gmm_log_density(m: &MixtureParams, z: f64) -> Result<f64> {
    let log_w = log_softmax(m.logits.as_slice().unwrap());
    let mut terms = Vec::with_capacity(log_w.len());
    for k in 0..log_w.len() {
        let sigma = m.log_stds[k].exp();
        terms.push(log_w[k] + gaussian_logpdf(z, m.means[k], sigma)?);
    }
    log_sum_exp(&terms)
}

/// Gradient of `weight · gmm_log_density(m, z)` w.r.t. the raw head outputs
/// and the evaluation point z.
pub fn gmm_vjp(m: &MixtureParams, z: f64, weight: f64) -> (MixtureGrad, f64) {
    let k = m.means.len();
    let log_w = log_softmax(m.logits.as_slice().unwrap());
    let w = softmax(m.logits.as_slice().unwrap());
    let mut terms = vec![0.0; k];
    for j in 0..k {
        let sigma = m.log_stds[j].exp();
        terms[j] = log_w[j] + gaussian_logpdf(z, m.means[j], sigma).unwrap();
    }
    // Responsibilities p = softmax(terms).
    let resp = softmax(&terms);

    let mut g_means = Array1::zeros(k);
    let mut g_ls = Array1::zeros(k);
    let mut g_logits = Array1::zeros(k);
    let mut gz = 0.0;
    for j in 0..k {
        let sigma = m.log_stds[j].exp();
        let t = (z - m.means[j]) / sigma;
        g_means[j] = weight * resp[j] * t / sigma;
        // d/d(logσ) of the component log-density is t² − 1; zero once the
        // clamp is active.
        let active = m.log_stds_raw[j] > LOG_STD_MIN && m.log_stds_raw[j] < LOG_STD_MAX;
        g_ls[j] = if active { weight * resp[j] * (t * t - 1.0) } else { 0.0 };
        g_logits[j] = weight * (resp[j] - w[j]);
        gz += weight * resp[j] * (-t / sigma);
    }
    (
        MixtureGrad {
            means: g_means,
            log_stds_raw: g_ls,
            logits: g_logits,
        },
        gz,
    )
}

impl MixtureGrad {
    /// Concatenate into raw-output order (means, log-stds, logits).
    pub fn into_raw(self) -> Vector {
        let k = self.means.len();
        let mut raw = Array1::zeros(3 * k);
        for j in 0..k {
            raw[j] = self.means[j];
            raw[k + j] = self.log_stds_raw[j];
            raw[2 * k + j] = self.logits[j];
        }
        raw
    }
}
