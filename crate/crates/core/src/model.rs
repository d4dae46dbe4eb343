//! The full density model: transform stack composed with the autoregressive
//! mixture conditionals. log p(x) = log|det dz/dx| + Σᵢ log p(zᵢ | h_{i−1}),
//! sampling inverts the stack on a latent draw, and all trainable parameters
//! are reachable through a fixed, named enumeration.

use crate::conditional::{CandidateActivation, CondGrads, ConditionalModel};
use crate::error::{RedError, Result};
use crate::numerics::{derive_seed, Matrix, Rng, Vector};
use crate::transforms::{StackGrads, TransformStack};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelConfig {
    /// Data dimensionality; filled from the dataset when omitted.
    #[serde(default)]
    pub d: usize,
    /// Conditional GRU hidden size.
    #[serde(default = "default_num_units")]
    pub num_units: usize,
    /// Hidden size of the two recurrent transforms.
    #[serde(default = "default_transform_hidden")]
    pub transform_hidden: usize,
    /// Mixture components per conditional.
    #[serde(default = "default_num_components")]
    pub num_components: usize,
    /// Stacked fully connected layers applied to hidden states.
    #[serde(default = "default_num_fcs")]
    pub num_fcs: usize,
    /// Leaky-ReLU slope of the transform outputs (fixed, not learned).
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub candidate_activation: CandidateActivation,
    #[serde(default)]
    pub seed: u64,
}

fn default_num_units() -> usize {
    32
}
fn default_transform_hidden() -> usize {
    4
}
fn default_num_components() -> usize {
    5
}
fn default_num_fcs() -> usize {
    1
}
fn default_alpha() -> f64 {
    0.1
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d: 0,
            num_units: default_num_units(),
            transform_hidden: default_transform_hidden(),
            num_components: default_num_components(),
            num_fcs: default_num_fcs(),
            alpha: default_alpha(),
            candidate_activation: CandidateActivation::default(),
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0
            || self.num_units == 0
            || self.transform_hidden == 0
            || self.num_components == 0
            || self.num_fcs == 0
        {
            return Err(RedError::Contract(
                "model config counts must all be positive".into(),
            ));
        }
        if self.alpha <= 0.0 {
            return Err(RedError::Contract("alpha must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RedModel {
    pub stack: TransformStack,
    pub cond: ConditionalModel,
    pub config: ModelConfig,
}

#[derive(Debug, Clone)]
pub struct ModelGrads {
    pub stack: StackGrads,
    pub cond: CondGrads,
}

/// A view of one named parameter (or gradient) array.
pub struct ParamView<'a> {
    pub name: &'static str,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
}

/// Stream id for the deterministic probe batch used in checkpoint hashes.
pub(crate) const PROBE_STREAM: u64 = 0x70726f6265; // "probe"

pub fn init_model(config: &ModelConfig, rng: &mut Rng) -> Result<RedModel> {
    config.validate()?;
    let stack = TransformStack::init(config.d, config.transform_hidden, config.alpha, rng);
    let cond = ConditionalModel::init(
        config.d,
        config.num_units,
        config.num_components,
        config.num_fcs,
        config.candidate_activation,
        rng,
    );
    Ok(RedModel {
        stack,
        cond,
        config: config.clone(),
    })
}

impl RedModel {
    /// Initialize deterministically from the config's own seed.
    pub fn from_config(config: &ModelConfig) -> Result<Self> {
        let mut rng = Rng::seed_from_u64(derive_seed(config.seed, 0x696e6974)); // "init"
        init_model(config, &mut rng)
    }

    pub fn d(&self) -> usize {
        self.config.d
    }

    fn check_row(&self, x: &Vector) -> Result<()> {
        if x.len() != self.config.d {
            return Err(RedError::shape(
                format!("{}", self.config.d),
                format!("{}", x.len()),
                "log_prob input",
            ));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(RedError::NonFinite {
                location: "log_prob input".into(),
            });
        }
        Ok(())
    }

    pub fn log_prob(&self, x: &Vector) -> Result<f64> {
        let (_, logdet, cond_total, _) = self.log_prob_parts(x)?;
        Ok(logdet + cond_total)
    }

    /// (z, logdet, conditional total, per-dimension conditionals).
    pub fn log_prob_parts(&self, x: &Vector) -> Result<(Vector, f64, f64, Vector)> {
        self.check_row(x)?;
        let (z, logdet, _) = self.stack.forward(x)?;
        let (total, per_dim) = self.cond.log_likelihood(&z)?;
        Ok((z, logdet, total, per_dim))
    }

    /// Mean negative log-likelihood over the rows of `x`, in nats.
    pub fn nll(&self, x: &Matrix) -> Result<f64> {
        let per_row = self.nll_per_row(x)?;
        Ok(per_row.sum() / per_row.len() as f64)
    }

    pub fn nll_per_row(&self, x: &Matrix) -> Result<Vector> {
        if x.nrows() == 0 {
            return Err(RedError::Contract("nll of an empty matrix".into()));
        }
        if x.ncols() != self.config.d {
            return Err(RedError::shape(
                format!("{} columns", self.config.d),
                format!("{}", x.ncols()),
                "nll input",
            ));
        }
        let mut out = Array1::zeros(x.nrows());
        for (i, row) in x.rows().into_iter().enumerate() {
            out[i] = -self.log_prob(&row.to_owned())?;
        }
        Ok(out)
    }

    /// Draw n samples: latent draws through the conditionals, then the
    /// exact stack inverse.
    pub fn sample(&self, rng: &mut Rng, n: usize) -> Result<Matrix> {
        if n == 0 {
            return Err(RedError::Contract("sample requires n >= 1".into()));
        }
        let d = self.config.d;
        let mut out = Array2::zeros((n, d));
        for i in 0..n {
            let z = self.cond.sample(rng);
            let x = self.stack.inverse(&z)?;
            out.row_mut(i).assign(&x);
        }
        Ok(out)
    }

    /// Re-impose parameter floors after an optimizer step.
    pub fn project_constraints(&mut self) {
        self.stack.project();
    }

    pub fn zero_grads(&self) -> ModelGrads {
        ModelGrads {
            stack: StackGrads::zeros(self.config.d, self.config.transform_hidden),
            cond: CondGrads::zeros(
                self.config.num_units,
                self.config.num_fcs,
                self.config.num_components,
            ),
        }
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.for_each_param(|p| n += p.data.len());
        n
    }

    /// Visit every trainable parameter array in a fixed, documented order.
    /// The same order is used by the optimizer state, checkpoints, and the
    /// gradient checker.
    pub fn for_each_param(&self, mut f: impl FnMut(ParamView<'_>)) {
        let d = self.config.d;
        let ht = self.config.transform_hidden;
        fn view<'a>(name: &'static str, shape: Vec<usize>, data: &'a [f64]) -> ParamView<'a> {
            ParamView { name, shape, data }
        }
        f(view("linear.l_lower", vec![d * (d - 1) / 2], &self.stack.linear.l_lower));
        f(view("linear.u_upper", vec![d * (d + 1) / 2], &self.stack.linear.u_upper));
        f(view("linear.b", vec![d], self.stack.linear.b.as_slice().unwrap()));
        for (tag, p) in [("fwd", &self.stack.fwd), ("bwd", &self.stack.bwd)] {
            let scalars: [(&'static str, &f64); 4] = match tag {
                "fwd" => [
                    ("fwd.y", &p.y),
                    ("fwd.u", &p.u),
                    ("fwd.b", &p.b),
                    ("fwd.a", &p.a),
                ],
                _ => [
                    ("bwd.y", &p.y),
                    ("bwd.u", &p.u),
                    ("bwd.b", &p.b),
                    ("bwd.a", &p.a),
                ],
            };
            for (name, s) in scalars {
                f(view(name, vec![1], std::slice::from_ref(s)));
            }
            let (wn, vn) = if tag == "fwd" {
                ("fwd.w", "fwd.v")
            } else {
                ("bwd.w", "bwd.v")
            };
            f(view(wn, vec![ht], p.w.as_slice().unwrap()));
            f(view(vn, vec![ht], p.v.as_slice().unwrap()));
        }
        let h = self.config.num_units;
        let g = &self.cond.gru;
        f(view("gru.w_u", vec![h], g.w_u.as_slice().unwrap()));
        f(view("gru.a_u", vec![h, h], g.a_u.as_slice().unwrap()));
        f(view("gru.b_u", vec![h], g.b_u.as_slice().unwrap()));
        f(view("gru.w_r", vec![h], g.w_r.as_slice().unwrap()));
        f(view("gru.a_r", vec![h, h], g.a_r.as_slice().unwrap()));
        f(view("gru.b_r", vec![h], g.b_r.as_slice().unwrap()));
        f(view("gru.w_c", vec![h], g.w_c.as_slice().unwrap()));
        f(view("gru.a_c", vec![h, h], g.a_c.as_slice().unwrap()));
        f(view("gru.b_c", vec![h], g.b_c.as_slice().unwrap()));
        f(view("cond.h0", vec![h], self.cond.h0.as_slice().unwrap()));
        for (i, layer) in self.cond.head.hidden_layers.iter().enumerate() {
            f(ParamView {
                name: head_w_name(i),
                shape: vec![h, h],
                data: layer.w.as_slice().unwrap(),
            });
            f(ParamView {
                name: head_b_name(i),
                shape: vec![h],
                data: layer.b.as_slice().unwrap(),
            });
        }
        let k3 = 3 * self.config.num_components;
        f(view("head.out.w", vec![k3, h], self.cond.head.out.w.as_slice().unwrap()));
        f(view("head.out.b", vec![k3], self.cond.head.out.b.as_slice().unwrap()));
    }

    /// Mutable counterpart of [`for_each_param`], same order.
    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(&'static str, &mut [f64])) {
        f("linear.l_lower", &mut self.stack.linear.l_lower);
        f("linear.u_upper", &mut self.stack.linear.u_upper);
        f("linear.b", self.stack.linear.b.as_slice_mut().unwrap());
        for (tag, p) in [
            ("fwd", &mut self.stack.fwd),
            ("bwd", &mut self.stack.bwd),
        ] {
            if tag == "fwd" {
                f("fwd.y", std::slice::from_mut(&mut p.y));
                f("fwd.u", std::slice::from_mut(&mut p.u));
                f("fwd.b", std::slice::from_mut(&mut p.b));
                f("fwd.a", std::slice::from_mut(&mut p.a));
                f("fwd.w", p.w.as_slice_mut().unwrap());
                f("fwd.v", p.v.as_slice_mut().unwrap());
            } else {
                f("bwd.y", std::slice::from_mut(&mut p.y));
                f("bwd.u", std::slice::from_mut(&mut p.u));
                f("bwd.b", std::slice::from_mut(&mut p.b));
                f("bwd.a", std::slice::from_mut(&mut p.a));
                f("bwd.w", p.w.as_slice_mut().unwrap());
                f("bwd.v", p.v.as_slice_mut().unwrap());
            }
        }
        let g = &mut self.cond.gru;
        f("gru.w_u", g.w_u.as_slice_mut().unwrap());
        f("gru.a_u", g.a_u.as_slice_mut().unwrap());
        f("gru.b_u", g.b_u.as_slice_mut().unwrap());
        f("gru.w_r", g.w_r.as_slice_mut().unwrap());
        f("gru.a_r", g.a_r.as_slice_mut().unwrap());
        f("gru.b_r", g.b_r.as_slice_mut().unwrap());
        f("gru.w_c", g.w_c.as_slice_mut().unwrap());
        f("gru.a_c", g.a_c.as_slice_mut().unwrap());
        f("gru.b_c", g.b_c.as_slice_mut().unwrap());
        f("cond.h0", self.cond.h0.as_slice_mut().unwrap());
        for (i, layer) in self.cond.head.hidden_layers.iter_mut().enumerate() {
            f(head_w_name(i), layer.w.as_slice_mut().unwrap());
            f(head_b_name(i), layer.b.as_slice_mut().unwrap());
        }
        f("head.out.w", self.cond.head.out.w.as_slice_mut().unwrap());
        f("head.out.b", self.cond.head.out.b.as_slice_mut().unwrap());
    }

    /// Deterministic probe batch for checkpoint integrity hashing.
    pub fn probe_batch(config: &ModelConfig) -> Matrix {
        let mut rng = Rng::seed_from_u64(derive_seed(config.seed, PROBE_STREAM));
        Array2::from_shape_fn((8, config.d), |_| rng.standard_normal())
    }
}

fn head_w_name(i: usize) -> &'static str {
    // num_fcs is small and bounded by the grid; fixed names keep ParamView
    // allocation-free.
    const NAMES: [&str; 8] = [
        "head.fc0.w",
        "head.fc1.w",
        "head.fc2.w",
        "head.fc3.w",
        "head.fc4.w",
        "head.fc5.w",
        "head.fc6.w",
        "head.fc7.w",
    ];
    NAMES[i]
}

fn head_b_name(i: usize) -> &'static str {
    const NAMES: [&str; 8] = [
        "head.fc0.b",
        "head.fc1.b",
        "head.fc2.b",
        "head.fc3.b",
        "head.fc4.b",
        "head.fc5.b",
        "head.fc6.b",
        "head.fc7.b",
    ];
    NAMES[i]
}

impl ModelGrads {
    /// Gradient arrays in exactly the parameter enumeration order.
    pub fn slices(&self) -> Vec<(&'static str, &[f64])> {
        let mut out: Vec<(&'static str, &[f64])> = Vec::new();
        out.push(("linear.l_lower", &self.stack.linear.l_lower));
        out.push(("linear.u_upper", &self.stack.linear.u_upper));
        out.push(("linear.b", self.stack.linear.b.as_slice().unwrap()));
        for (tag, p) in [("fwd", &self.stack.fwd), ("bwd", &self.stack.bwd)] {
            if tag == "fwd" {
                out.push(("fwd.y", std::slice::from_ref(&p.y)));
                out.push(("fwd.u", std::slice::from_ref(&p.u)));
                out.push(("fwd.b", std::slice::from_ref(&p.b)));
                out.push(("fwd.a", std::slice::from_ref(&p.a)));
                out.push(("fwd.w", p.w.as_slice().unwrap()));
                out.push(("fwd.v", p.v.as_slice().unwrap()));
            } else {
                out.push(("bwd.y", std::slice::from_ref(&p.y)));
                out.push(("bwd.u", std::slice::from_ref(&p.u)));
                out.push(("bwd.b", std::slice::from_ref(&p.b)));
                out.push(("bwd.a", std::slice::from_ref(&p.a)));
                out.push(("bwd.w", p.w.as_slice().unwrap()));
                out.push(("bwd.v", p.v.as_slice().unwrap()));
            }
        }
        let g = &self.cond.gru;
        out.push(("gru.w_u", g.w_u.as_slice().unwrap()));
        out.push(("gru.a_u", g.a_u.as_slice().unwrap()));
        out.push(("gru.b_u", g.b_u.as_slice().unwrap()));
        out.push(("gru.w_r", g.w_r.as_slice().unwrap()));
        out.push(("gru.a_r", g.a_r.as_slice().unwrap()));
        out.push(("gru.b_r", g.b_r.as_slice().unwrap()));
        out.push(("gru.w_c", g.w_c.as_slice().unwrap()));
        out.push(("gru.a_c", g.a_c.as_slice().unwrap()));
        out.push(("gru.b_c", g.b_c.as_slice().unwrap()));
        out.push(("cond.h0", self.cond.h0.as_slice().unwrap()));
        for (i, (w, b)) in self.cond.head.hidden_layers.iter().enumerate() {
            out.push((head_w_name(i), w.as_slice().unwrap()));
            out.push((head_b_name(i), b.as_slice().unwrap()));
        }
        out.push(("head.out.w", self.cond.head.out.0.as_slice().unwrap()));
        out.push(("head.out.b", self.cond.head.out.1.as_slice().unwrap()));
        out
    }

    /// Visit gradient arrays in exactly the parameter enumeration order.
    pub fn for_each(&self, mut f: impl FnMut(&'static str, &[f64])) {
        for (name, data) in self.slices() {
            f(name, data);
        }
    }

    pub fn global_norm(&self) -> f64 {
        let mut sq = 0.0;
        self.for_each(|_, data| {
            for v in data {
                sq += v * v;
            }
        });
        sq.sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        self.for_each_mut(|_, data| {
            for v in data {
                *v *= factor;
            }
        });
    }

    pub fn for_each_mut(&mut self, mut f: impl FnMut(&'static str, &mut [f64])) {
        f("linear.l_lower", &mut self.stack.linear.l_lower);
        f("linear.u_upper", &mut self.stack.linear.u_upper);
        f("linear.b", self.stack.linear.b.as_slice_mut().unwrap());
        for (tag, p) in [
            ("fwd", &mut self.stack.fwd),
            ("bwd", &mut self.stack.bwd),
        ] {
            if tag == "fwd" {
                f("fwd.y", std::slice::from_mut(&mut p.y));
                f("fwd.u", std::slice::from_mut(&mut p.u));
                f("fwd.b", std::slice::from_mut(&mut p.b));
                f("fwd.a", std::slice::from_mut(&mut p.a));
                f("fwd.w", p.w.as_slice_mut().unwrap());
                f("fwd.v", p.v.as_slice_mut().unwrap());
            } else {
                f("bwd.y", std::slice::from_mut(&mut p.y));
                f("bwd.u", std::slice::from_mut(&mut p.u));
                f("bwd.b", std::slice::from_mut(&mut p.b));
                f("bwd.a", std::slice::from_mut(&mut p.a));
                f("bwd.w", p.w.as_slice_mut().unwrap());
                f("bwd.v", p.v.as_slice_mut().unwrap());
            }
        }
        let g = &mut self.cond.gru;
        f("gru.w_u", g.w_u.as_slice_mut().unwrap());
        f("gru.a_u", g.a_u.as_slice_mut().unwrap());
        f("gru.b_u", g.b_u.as_slice_mut().unwrap());
        f("gru.w_r", g.w_r.as_slice_mut().unwrap());
        f("gru.a_r", g.a_r.as_slice_mut().unwrap());
        f("gru.b_r", g.b_r.as_slice_mut().unwrap());
        f("gru.w_c", g.w_c.as_slice_mut().unwrap());
        f("gru.a_c", g.a_c.as_slice_mut().unwrap());
        f("gru.b_c", g.b_c.as_slice_mut().unwrap());
        f("cond.h0", self.cond.h0.as_slice_mut().unwrap());
        for (i, (w, b)) in self.cond.head.hidden_layers.iter_mut().enumerate() {
            f(head_w_name(i), w.as_slice_mut().unwrap());
            f(head_b_name(i), b.as_slice_mut().unwrap());
        }
        f("head.out.w", self.cond.head.out.0.as_slice_mut().unwrap());
        f("head.out.b", self.cond.head.out.1.as_slice_mut().unwrap());
    }
}
