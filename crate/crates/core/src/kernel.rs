//! Mixed second derivative of the Laplace Green's function.
//!
//! For `n >= 3` the kernel is `K(r) = ∂_μ ∂_ν' |x - x'|^{-(n-2)}`, which works out
//! to `(n-2) [δ_μν / |r|^n - n r_μ r_ν / |r|^{n+2}]`. In two dimensions the
//! logarithmic potential `-ln|x - x'|` gives the same bracket with prefactor 1.
//! `K` is symmetric, traceless, even in `r` and homogeneous of degree `-n`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::sample::Dimension;

/// Displacements shorter than this are treated as coincident points.
pub const DISTANCE_FLOOR: f64 = 1e-12;

/// Surface area `S_n = 2 π^{n/2} / Γ(n/2)` of the unit sphere in `n` dimensions.
pub fn unit_sphere_surface(dim: Dimension) -> f64 {
    let n = dim.get();
    2.0 * PI.powf(n as f64 / 2.0) / gamma_half(n)
}

/// Volume of the unit ball, `π^{n/2} / Γ(n/2 + 1)`.
pub fn unit_ball_volume(dim: Dimension) -> f64 {
    let n = dim.get();
    PI.powf(n as f64 / 2.0) / gamma_half(n + 2)
}

/// `Γ(m / 2)` for a positive integer `m`, by the half-integer recurrence.
fn gamma_half(m: usize) -> f64 {
    debug_assert!(m > 0);
    let (mut value, mut arg) = if m % 2 == 0 {
        (1.0, 1.0)
    } else {
        (PI.sqrt(), 0.5)
    };
    let target = m as f64 / 2.0;
    while arg < target {
        value *= arg;
        arg += 1.0;
    }
    value
}

/// Prefactor `c_n` of the kernel bracket: `n - 2`, or 1 in two dimensions.
#[inline]
pub fn kernel_prefactor(dim: Dimension) -> f64 {
    match dim.get() {
        2 => 1.0,
        n => (n - 2) as f64,
    }
}

/// Normalization turning a kernel sum into a density: `1 / (c_n S_n)`.
///
/// With this factor the induced field of an exact dipole configuration
/// reproduces `g φ` in every dimension; for `n = 2, 3` it equals `1 / S_n`.
pub fn green_normalization(dim: Dimension) -> f64 {
    1.0 / (kernel_prefactor(dim) * unit_sphere_surface(dim))
}

/// Difference `x - x'` between two distinct points.
#[derive(Clone, Debug, PartialEq)]
pub struct Displacement {
    r: Vec<f64>,
    r2: f64,
}

impl Displacement {
    pub fn new(r: Vec<f64>) -> Result<Self> {
        let r2: f64 = r.iter().map(|c| c * c).sum();
        if !(r2.sqrt() >= DISTANCE_FLOOR) {
            return Err(Error::ZeroDisplacement);
        }
        Ok(Displacement { r, r2 })
    }

    pub fn between(x: &[f64], y: &[f64]) -> Result<Self> {
        Displacement::new(x.iter().zip(y).map(|(a, b)| a - b).collect())
    }

    pub fn components(&self) -> &[f64] {
        &self.r
    }

    pub fn norm_sq(&self) -> f64 {
        self.r2
    }

    fn check_dim(&self, dim: Dimension) -> Result<()> {
        if self.r.len() != dim.get() {
            return Err(Error::DimensionMismatch {
                expected: dim.get(),
                found: self.r.len(),
            });
        }
        Ok(())
    }
}

/// Dense `n × n` kernel matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelMatrix {
    n: usize,
    data: Vec<f64>,
}

impl KernelMatrix {
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n + col]
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }
}

/// `|r|^{-n}` from the inverse squared norm.
#[inline(always)]
fn inverse_power(inv_r2: f64, n: usize) -> f64 {
    let s = inv_r2.powi((n / 2) as i32);
    if n % 2 == 1 {
        s * inv_r2.sqrt()
    } else {
        s
    }
}

pub fn dipole_kernel(r: &Displacement, dim: Dimension) -> Result<KernelMatrix> {
    r.check_dim(dim)?;
    let n = dim.get();
    let c = kernel_prefactor(dim);
    let inv = 1.0 / r.r2;
    let s = inverse_power(inv, n);
    let t = n as f64 * inv;
    let mut data = vec![0.0; n * n];
    for mu in 0..n {
        for nu in mu..n {
            let delta = if mu == nu { 1.0 } else { 0.0 };
            let v = c * s * (delta - t * (r.r[mu] * r.r[nu]));
            data[mu * n + nu] = v;
            data[nu * n + mu] = v;
        }
    }
    Ok(KernelMatrix { n, data })
}

/// Matrix-free `K(r) · φ`.
pub fn apply_dipole(r: &Displacement, phi: &[f64], dim: Dimension) -> Result<Vec<f64>> {
    r.check_dim(dim)?;
    if phi.len() != dim.get() {
        return Err(Error::DimensionMismatch {
            expected: dim.get(),
            found: phi.len(),
        });
    }
    let mut out = vec![0.0; dim.get()];
    accumulate_dipole(&r.r, 1.0 / r.r2, phi, kernel_prefactor(dim), &mut out);
    Ok(out)
}

/// Adds `weight · K(r) · φ` to `out`, given `inv_r2 = 1 / |r|²`.
///
/// `weight` carries the kernel prefactor; a zero weight adds exact zeros,
/// which lets callers mask excluded points without branching.
#[inline(always)]
pub(crate) fn accumulate_dipole(r: &[f64], inv_r2: f64, phi: &[f64], weight: f64, out: &mut [f64]) {
    let n = r.len();
    let s = weight * inverse_power(inv_r2, n);
    let proj: f64 = r.iter().zip(phi).map(|(a, b)| a * b).sum();
    let t = n as f64 * proj * inv_r2;
    for ((o, &p), &rc) in out.iter_mut().zip(phi).zip(r) {
        *o += s * (p - t * rc);
    }
}
