//! Autoregressive conditional density p(z) = ∏ᵢ p(zᵢ | h_{i−1}): a GRU
//! scans the dimensions in index order while a mixture head maps each
//! hidden state to the Gaussian-mixture parameters of the next conditional.
//! Evaluating a d-vector costs exactly d mixture evaluations and d−1 GRU
//! steps on top of the learned initial state.

mod gru;
mod mixture;

pub use gru::{CandidateActivation, GruCache, GruGrads, GruParams};
pub use mixture::{
    gmm_log_density, gmm_vjp, Dense, HeadCache, HeadGrads, MixtureGrad, MixtureHeadParams,
    MixtureParams, LOG_STD_MAX, LOG_STD_MIN,
};

use crate::error::{RedError, Result};
use crate::numerics::{Rng, Vector};
use ndarray::Array1;

#[derive(Debug, Clone)]
pub struct ConditionalModel {
    pub gru: GruParams,
    pub head: MixtureHeadParams,
    /// Learned initial hidden state.
    pub h0: Vector,
    pub k: usize,
    pub d: usize,
}

/// Forward activations for one evaluated vector.
pub struct CondCache {
    /// Hidden states h₀ .. h_{d−1} (the states feeding each mixture).
    pub states: Vec<Vector>,
    pub gru_caches: Vec<GruCache>,
    pub head_caches: Vec<HeadCache>,
    pub mixtures: Vec<MixtureParams>,
    pub z: Vector,
}

#[derive(Debug, Clone)]
pub struct CondGrads {
    pub gru: GruGrads,
    pub head: HeadGrads,
    pub h0: Vector,
}

impl ConditionalModel {
    pub fn init(
        d: usize,
        hidden_size: usize,
        k: usize,
        num_fcs: usize,
        candidate: CandidateActivation,
        rng: &mut Rng,
    ) -> Self {
        ConditionalModel {
            gru: GruParams::init(hidden_size, candidate, rng),
            head: MixtureHeadParams::init(hidden_size, num_fcs, k, rng),
            h0: Array1::zeros(hidden_size),
            k,
            d,
        }
    }

    fn check_dim(&self, len: usize, context: &str) -> Result<()> {
        if len != self.d {
            return Err(RedError::shape(
                format!("{}", self.d),
                format!("{len}"),
                context,
            ));
        }
        Ok(())
    }

    /// Total and per-dimension log-likelihood of `z` under the chain of
    /// mixture conditionals.
    pub fn log_likelihood(&self, z: &Vector) -> Result<(f64, Vector)> {
        let (total, per_dim, _) = self.log_likelihood_cached(z)?;
        Ok((total, per_dim))
    }

    pub fn log_likelihood_cached(&self, z: &Vector) -> Result<(f64, Vector, CondCache)> {
        self.check_dim(z.len(), "conditional_log_likelihood input")?;
        let d = self.d;
        let mut states = Vec::with_capacity(d);
        let mut gru_caches = Vec::with_capacity(d.saturating_sub(1));
        let mut head_caches = Vec::with_capacity(d);
        let mut mixtures = Vec::with_capacity(d);
        let mut per_dim = Array1::zeros(d);

        let mut h = self.h0.clone();
        for i in 0..d {
            let (mix, hcache) = self.head.mixture_cached(&h);
            per_dim[i] = gmm_log_density(&mix, z[i])?;
            states.push(h.clone());
            head_caches.push(hcache);
            mixtures.push(mix);
            if i + 1 < d {
                let (h_next, gcache) = self.gru.step_cached(z[i], &h);
                gru_caches.push(gcache);
                h = h_next;
            }
        }
        let total = per_dim.sum();
        Ok((
            total,
            per_dim.clone(),
            CondCache {
                states,
                gru_caches,
                head_caches,
                mixtures,
                z: z.clone(),
            },
        ))
    }

    /// Reverse pass for `weight · Σᵢ per_dim[i]`: accumulates parameter
    /// grads and returns ∂loss/∂z.
    pub fn vjp(&self, cache: &CondCache, weight: f64, grads: &mut CondGrads) -> Vector {
        let d = self.d;
        let mut gz = Array1::zeros(d);
        let mut gh = Array1::zeros(self.h0.len());
        for i in (0..d).rev() {
            if i + 1 < d {
                // h_{i+1} = gru(z_i, h_i); gh currently holds ∂/∂h_{i+1}.
                let (gx, gh_prev) = self.gru.vjp(&cache.gru_caches[i], &gh, &mut grads.gru);
                gz[i] += gx;
                gh = gh_prev;
            }
            let (mgrad, gzi) = gmm_vjp(&cache.mixtures[i], cache.z[i], weight);
            gz[i] += gzi;
            gh += &self.head.vjp(&cache.head_caches[i], &mgrad.into_raw(), &mut grads.head);
        }
        grads.h0 += &gh;
        gz
    }

    /// Draw one latent vector: per dimension, pick a component by
    /// inverse-CDF on the softmax weights (one uniform), then one normal
    /// draw, feeding each drawn value back through the GRU.
    pub fn sample(&self, rng: &mut Rng) -> Vector {
        let mut z = Array1::zeros(self.d);
        let mut h = self.h0.clone();
        for i in 0..self.d {
            let mix = self.head.mixture_from_state(&h);
            let weights = mix.weights();
            let u = rng.uniform();
            let mut k = weights.len() - 1;
            let mut acc = 0.0;
            for (j, wj) in weights.iter().enumerate() {
                acc += wj;
                if u < acc {
                    k = j;
                    break;
                }
            }
            let sigma = mix.log_stds[k].exp();
            z[i] = mix.means[k] + sigma * rng.standard_normal();
            if i + 1 < self.d {
                h = self.gru.step(z[i], &h);
            }
        }
        z
    }
}

impl CondGrads {
    pub fn zeros(hidden_size: usize, num_fcs: usize, k: usize) -> Self {
        CondGrads {
            gru: GruGrads::zeros(hidden_size),
            head: HeadGrads::zeros(hidden_size, num_fcs, k),
            h0: Array1::zeros(hidden_size),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::draw_standard_normal;

    fn random_model(d: usize, h: usize, k: usize, seed: u64) -> ConditionalModel {
        let mut rng = crate::numerics::Rng::seed_from_u64(seed);
        let mut m = ConditionalModel::init(d, h, k, 1, CandidateActivation::Sigmoid, &mut rng);
        // Asymmetric weights so ordering matters.
        for arr in [
            &mut m.gru.w_u,
            &mut m.gru.w_r,
            &mut m.gru.w_c,
            &mut m.gru.b_u,
            &mut m.gru.b_r,
            &mut m.gru.b_c,
        ] {
            arr.mapv_inplace(|_| 0.6 * rng.standard_normal());
        }
        for arr in [&mut m.gru.a_u, &mut m.gru.a_r, &mut m.gru.a_c] {
            arr.mapv_inplace(|_| 0.6 * rng.standard_normal());
        }
        for layer in m
            .head
            .hidden_layers
            .iter_mut()
            .chain(std::iter::once(&mut m.head.out))
        {
            layer.w.mapv_inplace(|_| 0.5 * rng.standard_normal());
            layer.b.mapv_inplace(|_| 0.3 * rng.standard_normal());
        }
        m.h0.mapv_inplace(|_| 0.3 * rng.standard_normal());
        m
    }

    #[test]
    fn d1_reduces_to_single_mixture() {
        let m = random_model(1, 4, 3, 9);
        let z = ndarray::array![0.37];
        let (total, per_dim) = m.log_likelihood(&z).unwrap();
        let mix = m.head.mixture_from_state(&m.h0);
        let direct = gmm_log_density(&mix, 0.37).unwrap();
        assert_eq!(total, per_dim[0]);
        assert!((total - direct).abs() < 1e-15);
    }

    #[test]
    fn permuting_input_changes_total() {
        let m = random_model(4, 5, 3, 10);
        let mut rng = crate::numerics::Rng::seed_from_u64(11);
        let z = draw_standard_normal(&mut rng, 4).unwrap();
        let mut z_rev = z.clone();
        z_rev.as_slice_mut().unwrap().reverse();
        let (a, _) = m.log_likelihood(&z).unwrap();
        let (b, _) = m.log_likelihood(&z_rev).unwrap();
        assert!((a - b).abs() > 1e-6, "order-insensitive: {a} vs {b}");
    }

    #[test]
    fn autoregressive_masking_holds() {
        let m = random_model(5, 4, 2, 12);
        let mut rng = crate::numerics::Rng::seed_from_u64(13);
        let z = draw_standard_normal(&mut rng, 5).unwrap();
        let (_, base) = m.log_likelihood(&z).unwrap();
        for j in 0..5 {
            let mut zp = z.clone();
            zp[j] += 0.5;
            let (_, perturbed) = m.log_likelihood(&zp).unwrap();
            for i in 0..j {
                assert_eq!(base[i], perturbed[i], "per_dim[{i}] changed by z[{j}]");
            }
            assert!((base[j] - perturbed[j]).abs() > 0.0);
        }
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let m = random_model(3, 4, 2, 14);
        assert!(m.log_likelihood(&ndarray::array![1.0, 2.0]).is_err());
    }

    #[test]
    fn full_gradient_matches_finite_differences() {
        let (d, h, k) = (5usize, 8usize, 3usize);
        let m = random_model(d, h, k, 15);
        let mut rng = crate::numerics::Rng::seed_from_u64(16);
        let z = draw_standard_normal(&mut rng, d).unwrap();

        let (_, _, cache) = m.log_likelihood_cached(&z).unwrap();
        let mut grads = CondGrads::zeros(h, 1, k);
        let gz = m.vjp(&cache, 1.0, &mut grads);

        let eps = 1e-5;
        let total = |m: &ConditionalModel, z: &Vector| m.log_likelihood(z).unwrap().0;
        let check = |analytic: f64, fp: f64, fm: f64, what: &str| {
            let numeric = (fp - fm) / (2.0 * eps);
            let denom = analytic.abs().max(numeric.abs()).max(1e-6);
            assert!(
                ((analytic - numeric) / denom).abs() < 1e-4,
                "{what}: analytic {analytic} numeric {numeric}"
            );
        };

        for i in 0..d {
            let mut zp = z.clone();
            zp[i] += eps;
            let fp = total(&m, &zp);
            zp[i] -= 2.0 * eps;
            let fm = total(&m, &zp);
            check(gz[i], fp, fm, "gz");
        }
        for j in 0..h {
            let mut mp = m.clone();
            mp.h0[j] += eps;
            let fp = total(&mp, &z);
            mp.h0[j] -= 2.0 * eps;
            let fm = total(&mp, &z);
            check(grads.h0[j], fp, fm, "h0");
        }
        // Spot-check a representative subset of GRU and head entries.
        for j in 0..h {
            let mut mp = m.clone();
            mp.gru.w_c[j] += eps;
            let fp = total(&mp, &z);
            mp.gru.w_c[j] -= 2.0 * eps;
            let fm = total(&mp, &z);
            check(grads.gru.w_c[j], fp, fm, "gru.w_c");

            let mut mp = m.clone();
            mp.gru.a_u[[j, (j + 1) % h]] += eps;
            let fp = total(&mp, &z);
            mp.gru.a_u[[j, (j + 1) % h]] -= 2.0 * eps;
            let fm = total(&mp, &z);
            check(grads.gru.a_u[[j, (j + 1) % h]], fp, fm, "gru.a_u");
        }
        for i in 0..3 * k {
            let mut mp = m.clone();
            mp.head.out.b[i] += eps;
            let fp = total(&mp, &z);
            mp.head.out.b[i] -= 2.0 * eps;
            let fm = total(&mp, &z);
            check(grads.head.out.1[i], fp, fm, "head.out.b");
        }
    }

    #[test]
    fn standard_normal_sampler_has_unit_moments() {
        // Zero-weight K=1 head: every conditional is exactly N(0,1).
        let mut rng = crate::numerics::Rng::seed_from_u64(17);
        let mut m = ConditionalModel::init(3, 4, 1, 1, CandidateActivation::Sigmoid, &mut rng);
        for layer in m
            .head
            .hidden_layers
            .iter_mut()
            .chain(std::iter::once(&mut m.head.out))
        {
            layer.w.fill(0.0);
            layer.b.fill(0.0);
        }
        let n = 100_000usize;
        let mut sum = [0.0f64; 3];
        let mut sumsq = [0.0f64; 3];
        for _ in 0..n {
            let z = m.sample(&mut rng);
            for j in 0..3 {
                sum[j] += z[j];
                sumsq[j] += z[j] * z[j];
            }
        }
        for j in 0..3 {
            let mean = sum[j] / n as f64;
            let std = (sumsq[j] / n as f64 - mean * mean).sqrt();
            assert!(mean.abs() < 0.02, "dim {j} mean {mean}");
            assert!((std - 1.0).abs() < 0.02, "dim {j} std {std}");
        }
    }

    #[test]
    fn sampling_is_deterministic_under_seed() {
        let m = random_model(4, 4, 3, 18);
        let mut r1 = crate::numerics::Rng::seed_from_u64(99);
        let mut r2 = crate::numerics::Rng::seed_from_u64(99);
        assert_eq!(m.sample(&mut r1), m.sample(&mut r2));
    }

    #[test]
    fn sampler_agrees_with_density_entropy() {
        // Toy d=2 model: Monte Carlo E[log p] from self-samples must match
        // the quadrature entropy of the same density.
        let m = random_model(2, 3, 2, 19);

        // Quadrature entropy: −∬ p log p over a wide box, using the chain
        // rule p(z₁,z₂) = p(z₁)p(z₂|z₁) evaluated on a grid.
        let n = 600usize;
        let (lo, hi) = (-12.0, 12.0);
        let h = (hi - lo) / (n - 1) as f64;
        let mut entropy = 0.0;
        let mut mass = 0.0;
        for i in 0..n {
            let wi = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            for j in 0..n {
                let wj = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
                let z = ndarray::array![lo + i as f64 * h, lo + j as f64 * h];
                let (lp, _) = m.log_likelihood(&z).unwrap();
                let p = lp.exp();
                entropy -= wi * wj * p * lp;
                mass += wi * wj * p;
            }
        }
        entropy *= h * h;
        mass *= h * h;
        assert!((mass - 1.0).abs() < 1e-3, "mass {mass}");

        let mut rng = crate::numerics::Rng::seed_from_u64(20);
        let draws = 10_000usize;
        let mut mean_lp = 0.0;
        for _ in 0..draws {
            let z = m.sample(&mut rng);
            mean_lp += m.log_likelihood(&z).unwrap().0;
        }
        mean_lp /= draws as f64;
        assert!(
            (mean_lp + entropy).abs() < 0.05,
            "E[log p] {mean_lp} vs −H {}",
            -entropy
        );
    }
}
