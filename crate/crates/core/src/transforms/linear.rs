//! Invertible linear map z = Ax + b parameterized directly by an LU
//! factorization A = LU, where L is unit-lower-triangular (strict-lower
//! entries stored packed) and U is upper-triangular with its diagonal
//! stored. The Jacobian determinant is ∏ Uᵢᵢ, and inversion is two
//! triangular solves; the dense A is never materialized internally.

use crate::error::{RedError, Result};
use crate::numerics::Vector;
use ndarray::{Array1, Array2};

/// Magnitude floor on Uᵢᵢ; re-imposed by projection after optimizer steps.
pub const DIAG_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct LinearLUParams {
    pub d: usize,
    /// Strict lower triangle of L, row-major: (1,0), (2,0), (2,1), ...
    pub l_lower: Vec<f64>,
    /// Upper triangle of U including the diagonal, row-major:
    /// (0,0), (0,1), ..., (0,d-1), (1,1), ...
    pub u_upper: Vec<f64>,
    pub b: Vector,
}

#[inline]
fn lower_index(i: usize, j: usize) -> usize {
    debug_assert!(j < i);
    (i * i - i) / 2 + j
}

#[inline]
fn upper_index(d: usize, i: usize, j: usize) -> usize {
    debug_assert!(j >= i);
    // Row i starts after the first i rows, which hold d + (d-1) + ... + (d-i+1) entries.
    i * d - (i * i - i) / 2 + (j - i)
}

/// Caches the intermediate triangular product for the reverse pass.
#[derive(Debug, Clone)]
pub struct LinearCache {
    pub x: Vector,
    /// t = Ux
    pub t: Vector,
}

#[derive(Debug, Clone)]
pub struct LinearGrads {
    pub l_lower: Vec<f64>,
    pub u_upper: Vec<f64>,
    pub b: Vector,
}

impl LinearLUParams {
    /// Identity start: L strict-lower zero, U = I, b = 0.
    pub fn identity(d: usize) -> Self {
        let mut u_upper = vec![0.0; d * (d + 1) / 2];
        for i in 0..d {
            u_upper[upper_index(d, i, i)] = 1.0;
        }
        LinearLUParams {
            d,
            l_lower: vec![0.0; d * (d - 1) / 2],
            u_upper,
            b: Array1::zeros(d),
        }
    }

    pub fn l_entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            1.0
        } else if j < i {
            self.l_lower[lower_index(i, j)]
        } else {
            0.0
        }
    }

    pub fn u_entry(&self, i: usize, j: usize) -> f64 {
        if j >= i {
            self.u_upper[upper_index(self.d, i, j)]
        } else {
            0.0
        }
    }

    pub fn set_l_entry(&mut self, i: usize, j: usize, v: f64) {
        self.l_lower[lower_index(i, j)] = v;
    }

    pub fn set_u_entry(&mut self, i: usize, j: usize, v: f64) {
        let idx = upper_index(self.d, i, j);
        self.u_upper[idx] = v;
    }

    fn u_diag(&self, i: usize) -> f64 {
        self.u_upper[upper_index(self.d, i, i)]
    }

    fn check_diag(&self) -> Result<()> {
        for i in 0..self.d {
            if self.u_diag(i).abs() < DIAG_FLOOR {
                return Err(RedError::Singular(format!(
                    "|U[{i},{i}]| = {} below floor {DIAG_FLOOR}",
                    self.u_diag(i).abs()
                )));
            }
        }
        Ok(())
    }

    /// Materialize A = LU on demand (tests and diagnostics only).
    pub fn dense_a(&self) -> Array2<f64> {
        let d = self.d;
        let mut a = Array2::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for k in 0..d {
                    s += self.l_entry(i, k) * self.u_entry(k, j);
                }
                a[[i, j]] = s;
            }
        }
        a
    }

    /// z = L(Ux) + b and logdet = Σ log|Uᵢᵢ|, via two triangular products.
    pub fn forward(&self, x: &Vector) -> Result<(Vector, f64, LinearCache)> {
        let d = self.d;
        if x.len() != d {
            return Err(RedError::shape(format!("{d}"), format!("{}", x.len()), "linear_forward input"));
        }
        self.check_diag()?;
        let mut t = Array1::zeros(d);
        for i in 0..d {
            let mut s = 0.0;
            for j in i..d {
                s += self.u_entry(i, j) * x[j];
            }
            t[i] = s;
        }
        let mut z = Array1::zeros(d);
        for i in 0..d {
            let mut s = t[i];
            for j in 0..i {
                s += self.l_entry(i, j) * t[j];
            }
            z[i] = s + self.b[i];
        }
        let logdet = (0..d).map(|i| self.u_diag(i).abs().ln()).sum();
        Ok((
            z,
            logdet,
            LinearCache { x: x.clone(), t },
        ))
    }

    /// Solve L(Ux) + b = z: forward substitution on L, back substitution on U.
    pub fn inverse(&self, z: &Vector) -> Result<Vector> {
        let d = self.d;
        if z.len() != d {
            return Err(RedError::shape(format!("{d}"), format!("{}", z.len()), "linear_inverse input"));
        }
        self.check_diag()?;
        // L t = z - b
        let mut t = Array1::zeros(d);
        for i in 0..d {
            let mut s = z[i] - self.b[i];
            for j in 0..i {
                s -= self.l_entry(i, j) * t[j];
            }
            t[i] = s; // unit diagonal
        }
        // U x = t
        let mut x = Array1::zeros(d);
        for i in (0..d).rev() {
            let mut s = t[i];
            for j in (i + 1)..d {
                s -= self.u_entry(i, j) * x[j];
            }
            x[i] = s / self.u_diag(i);
        }
        Ok(x)
    }

    /// Accumulate gradients for upstream ∂loss/∂z = `gz` plus `logdet_w` times
    /// this stage's logdet contribution; returns ∂loss/∂x.
    ///
    /// With t = Ux: ∂/∂b = gz, ∂/∂Lᵢⱼ = gzᵢ tⱼ, ∂/∂t = Lᵀgz,
    /// ∂/∂Uᵢⱼ = (Lᵀgz)ᵢ xⱼ, ∂/∂x = Uᵀ(Lᵀgz); logdet adds 1/Uᵢᵢ on the diagonal.
    pub fn vjp(
        &self,
        cache: &LinearCache,
        gz: &Vector,
        logdet_w: f64,
        grads: &mut LinearGrads,
    ) -> Vector {
        let d = self.d;
        debug_assert_eq!(gz.len(), d);
        for i in 0..d {
            grads.b[i] += gz[i];
            for j in 0..i {
                grads.l_lower[lower_index(i, j)] += gz[i] * cache.t[j];
            }
        }
        // gt = Lᵀ gz
        let mut gt = Array1::zeros(d);
        for j in 0..d {
            let mut s = gz[j]; // unit diagonal
            for i in (j + 1)..d {
                s += self.l_entry(i, j) * gz[i];
            }
            gt[j] = s;
        }
        for i in 0..d {
            for j in i..d {
                grads.u_upper[upper_index(d, i, j)] += gt[i] * cache.x[j];
            }
        }
        if logdet_w != 0.0 {
            for i in 0..d {
                grads.u_upper[upper_index(d, i, i)] += logdet_w / self.u_diag(i);
            }
        }
        // gx = Uᵀ gt
        let mut gx = Array1::zeros(d);
        for j in 0..d {
            let mut s = 0.0;
            for i in 0..=j {
                s += self.u_entry(i, j) * gt[i];
            }
            gx[j] = s;
        }
        gx
    }

    /// Clamp |Uᵢᵢ| to the floor, preserving sign (sign of 0 counts as +).
    pub fn project(&mut self) {
        for i in 0..self.d {
            let idx = upper_index(self.d, i, i);
            let v = self.u_upper[idx];
            if v.abs() < DIAG_FLOOR {
                self.u_upper[idx] = if v < 0.0 { -DIAG_FLOOR } else { DIAG_FLOOR };
            }
        }
    }
}

impl LinearGrads {
    pub fn zeros(d: usize) -> Self {
        LinearGrads {
            l_lower: vec![0.0; d * (d - 1) / 2],
            u_upper: vec![0.0; d * (d + 1) / 2],
            b: Array1::zeros(d),
        }
    }
}
