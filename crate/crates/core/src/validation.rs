//! Numerical oracles for the kernel and the estimator.
//!
//! The kernel is compared against central finite differences of the scalar
//! potential; the vanishing shell integral is checked by quadrature (two
//! dimensions) or Monte Carlo (higher); fitted models are integrated on a grid.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::estimator::DensityModel;
use crate::exec::Execution;
use crate::kernel::{apply_dipole, dipole_kernel, Displacement, KernelMatrix};
use crate::sample::{Dimension, SampleSet};

/// Step of the finite-difference oracle.
pub const FD_STEP: f64 = 1e-4;

fn random_direction<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let len = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if len > 1e-12 {
            return v.into_iter().map(|c| c / len).collect();
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// `|x - y|^{-(n-2)}`, or `-ln|x - y|` in two dimensions.
fn potential(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let r = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    if n == 2 {
        -r.ln()
    } else {
        r.powi(-(n as i32 - 2))
    }
}

/// Mixed partials `∂²/∂x_μ ∂y_ν` of the potential at `(r, 0)`, by central
/// differences.
pub fn finite_difference_kernel(r: &[f64], h: f64) -> Vec<f64> {
    let n = r.len();
    let mut out = vec![0.0; n * n];
    for mu in 0..n {
        for nu in 0..n {
            let eval = |sx: f64, sy: f64| {
                let mut x = r.to_vec();
                let mut y = vec![0.0; n];
                x[mu] += sx * h;
                y[nu] += sy * h;
                potential(&x, &y)
            };
            out[mu * n + nu] =
                (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0)) / (4.0 * h * h);
        }
    }
    out
}

fn random_displacement<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let len = rng.random_range(0.5..2.0);
    random_direction(rng, n).into_iter().map(|c| c * len).collect()
}

/// Worst deviation between the kernel and finite differences over
/// `samples` random displacements with `|r|` in `[0.5, 2]`, relative to the
/// largest kernel entry.
pub fn kernel_fd_check(dim: Dimension, samples: usize, seed: u64) -> Result<f64> {
    if samples == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let r = random_displacement(&mut rng, dim.get());
        let k = dipole_kernel(&Displacement::new(r.clone())?, dim)?;
        let fd = finite_difference_kernel(&r, FD_STEP);
        let scale = k.max_abs();
        for mu in 0..dim.get() {
            for nu in 0..dim.get() {
                worst = worst.max((k.get(mu, nu) - fd[mu * dim.get() + nu]).abs() / scale);
            }
        }
    }
    Ok(worst)
}

/// Worst relative violations of the algebraic kernel properties.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelInvariants {
    pub asymmetry: f64,
    pub trace: f64,
    pub parity: f64,
    /// Deviation from `K(λr) = λ^{-n} K(r)` for `λ ∈ {0.5, 2, 10}`.
    pub scaling: f64,
    /// Deviation of the matrix-free product from the dense one.
    pub matrix_free: f64,
}

impl KernelInvariants {
    pub fn worst(&self) -> f64 {
        [self.asymmetry, self.trace, self.parity, self.scaling, self.matrix_free]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

fn max_rel_diff(a: &KernelMatrix, b: &KernelMatrix, factor: f64, scale: f64) -> f64 {
    let n = a.dim();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((a.get(i, j) * factor - b.get(i, j)).abs() / scale);
        }
    }
    worst
}

pub fn kernel_invariants(dim: Dimension, samples: usize, seed: u64) -> Result<KernelInvariants> {
    let n = dim.get();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = KernelInvariants {
        asymmetry: 0.0,
        trace: 0.0,
        parity: 0.0,
        scaling: 0.0,
        matrix_free: 0.0,
    };
    for _ in 0..samples {
        let r = random_displacement(&mut rng, n);
        let k = dipole_kernel(&Displacement::new(r.clone())?, dim)?;
        let scale = k.max_abs();
        for i in 0..n {
            for j in 0..n {
                out.asymmetry = out.asymmetry.max((k.get(i, j) - k.get(j, i)).abs() / scale);
            }
        }
        out.trace = out.trace.max(k.trace().abs() / scale);
        let neg: Vec<f64> = r.iter().map(|c| -c).collect();
        let kn = dipole_kernel(&Displacement::new(neg)?, dim)?;
        out.parity = out.parity.max(max_rel_diff(&k, &kn, 1.0, scale));
        for lambda in [0.5, 2.0, 10.0] {
            let scaled: Vec<f64> = r.iter().map(|c| c * lambda).collect();
            let ks = dipole_kernel(&Displacement::new(scaled)?, dim)?;
            let factor = lambda.powi(-(n as i32));
            out.scaling = out.scaling.max(max_rel_diff(&k, &ks, factor, scale * factor));
        }
        let phi = random_direction(&mut rng, n);
        let dense = k.mul_vec(&phi);
        let free = apply_dipole(&Displacement::new(r)?, &phi, dim)?;
        let dev = dense.iter().zip(&free).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        out.matrix_free = out.matrix_free.max(dev / scale);
    }
    Ok(out)
}

/// Relative magnitude of the kernel integrated over a sphere of radius
/// `radius` around the origin with a constant dipole `phi`:
/// `|mean K(-x') φ| / mean |K(-x') φ|`.
///
/// Two dimensions use `points` equally spaced nodes on the circle; higher
/// dimensions use `points` uniform Monte Carlo draws seeded by `seed`.
pub fn shell_null_integral(dim: Dimension, radius: f64, points: usize, phi: &[f64], seed: u64) -> Result<f64> {
    if points < 100 {
        return Err(Error::InvalidParameter("shell integral needs at least 100 points".into()));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter(format!("radius {radius} must be positive")));
    }
    let n = dim.get();
    if phi.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: phi.len(),
        });
    }
    let len = norm(phi);
    let phi: Vec<f64> = phi.iter().map(|c| c / len).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = vec![0.0; n];
    let mut magnitude = 0.0;
    for k in 0..points {
        let dir = if n == 2 {
            let t = 2.0 * PI * k as f64 / points as f64;
            vec![t.cos(), t.sin()]
        } else {
            random_direction(&mut rng, n)
        };
        // displacement x - x' from the shell point x' to the center x = 0
        let r: Vec<f64> = dir.iter().map(|c| -c * radius).collect();
        let v = apply_dipole(&Displacement::new(r)?, &phi, dim)?;
        magnitude += norm(&v);
        sum.iter_mut().zip(&v).for_each(|(s, c)| *s += c);
    }
    Ok(norm(&sum) / magnitude)
}

/// Axis-aligned tensor grid for trapezoid integration.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub points_per_axis: usize,
}

impl GridSpec {
    /// The cube `[lo, hi]^n`.
    pub fn cube(dim: Dimension, lo: f64, hi: f64, points_per_axis: usize) -> GridSpec {
        GridSpec {
            lo: vec![lo; dim.get()],
            hi: vec![hi; dim.get()],
            points_per_axis,
        }
    }

    /// Bounding box of `sample` padded by three sample standard deviations
    /// per axis.
    pub fn covering(sample: &SampleSet, points_per_axis: usize) -> GridSpec {
        let n = sample.dim().get();
        let len = sample.len() as f64;
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        let mut mean = vec![0.0; n];
        for p in sample.points() {
            for a in 0..n {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
                mean[a] += p[a] / len;
            }
        }
        for a in 0..n {
            let var = sample.points().map(|p| (p[a] - mean[a]).powi(2)).sum::<f64>() / (len - 1.0);
            lo[a] -= 3.0 * var.sqrt();
            hi[a] += 3.0 * var.sqrt();
        }
        GridSpec {
            lo,
            hi,
            points_per_axis,
        }
    }

    fn validate(&self, dim: Dimension) -> Result<()> {
        if self.lo.len() != dim.get() || self.hi.len() != dim.get() {
            return Err(Error::DimensionMismatch {
                expected: dim.get(),
                found: self.lo.len(),
            });
        }
        if self.points_per_axis < 2 {
            return Err(Error::InvalidParameter("grid needs two points per axis".into()));
        }
        if self.lo.iter().zip(&self.hi).any(|(l, h)| !(h > l)) {
            return Err(Error::InvalidParameter("grid bounds must be increasing".into()));
        }
        Ok(())
    }
}

/// Trapezoid integral of `values` sampled on `grid` (last axis fastest).
fn trapezoid(grid: &GridSpec, values: &[f64]) -> f64 {
    let m = grid.points_per_axis;
    let n = grid.lo.len();
    let steps: Vec<f64> = grid.lo.iter().zip(&grid.hi).map(|(l, h)| (h - l) / (m - 1) as f64).collect();
    let cell: f64 = steps.iter().product();
    values
        .iter()
        .enumerate()
        .map(|(flat, v)| {
            let mut idx = flat;
            let mut w = 1.0;
            for _ in 0..n {
                let i = idx % m;
                idx /= m;
                if i == 0 || i == m - 1 {
                    w *= 0.5;
                }
            }
            w * v
        })
        .sum::<f64>()
        * cell
}

fn grid_points(grid: &GridSpec) -> Vec<f64> {
    let m = grid.points_per_axis;
    let n = grid.lo.len();
    let total = m.pow(n as u32);
    let mut coords = Vec::with_capacity(total * n);
    for flat in 0..total {
        let mut idx = flat;
        let mut p = vec![0.0; n];
        for a in (0..n).rev() {
            let i = idx % m;
            idx /= m;
            p[a] = grid.lo[a] + (grid.hi[a] - grid.lo[a]) * i as f64 / (m - 1) as f64;
        }
        coords.extend(p);
    }
    coords
}

/// Trapezoid integral of the model's density estimate over `grid`.
pub fn normalization_check(model: &DensityModel, grid: &GridSpec) -> Result<f64> {
    normalization_check_with(model, grid, Execution::default())
}

pub fn normalization_check_with(model: &DensityModel, grid: &GridSpec, exec: Execution) -> Result<f64> {
    grid.validate(model.dim())?;
    let values = model.estimate_batch_with(&grid_points(grid), exec)?;
    Ok(trapezoid(grid, &values))
}

/// Thresholds of the `validate` report.
pub const FD_THRESHOLD: f64 = 1e-5;
pub const INVARIANT_THRESHOLD: f64 = 1e-12;
pub const SHELL_POINTS: usize = 100_000;

/// Shell-integral threshold: quadrature in two dimensions, Monte Carlo above.
pub fn shell_threshold(dim: Dimension) -> f64 {
    if dim.get() == 2 {
        1e-3
    } else {
        1e-2
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.value < self.threshold
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub dim: Dimension,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} n={} {}: {:.3e} (threshold {:.1e})",
                if c.passed() { "PASS" } else { "FAIL" },
                self.dim,
                c.name,
                c.value,
                c.threshold
            )?;
        }
        Ok(())
    }
}

/// Kernel and shell-integral oracles for one dimension.
pub fn run_validation(dim: Dimension, seed: u64) -> Result<ValidationReport> {
    let inv = kernel_invariants(dim, 100, seed)?;
    let mut phi_rng = ChaCha8Rng::seed_from_u64(seed);
    phi_rng.set_stream(1);
    let phi = random_direction(&mut phi_rng, dim.get());
    let check = |name: &str, value: f64, threshold: f64| Check {
        name: name.to_string(),
        value,
        threshold,
    };
    let checks = vec![
        check("kernel vs finite differences", kernel_fd_check(dim, 100, seed)?, FD_THRESHOLD),
        check("kernel symmetry", inv.asymmetry, INVARIANT_THRESHOLD),
        check("kernel trace", inv.trace, INVARIANT_THRESHOLD),
        check("kernel parity", inv.parity, INVARIANT_THRESHOLD),
        check("kernel scaling", inv.scaling, INVARIANT_THRESHOLD),
        check("matrix-free product", inv.matrix_free, INVARIANT_THRESHOLD),
        check(
            "shell null integral",
            shell_null_integral(dim, 1.0, SHELL_POINTS, &phi, seed)?,
            shell_threshold(dim),
        ),
    ];
    Ok(ValidationReport { dim, checks })
}
