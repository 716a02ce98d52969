//! Kernel sums over a sample, the O(N) inner loop of every sweep and estimate.
//!
//! Points and dipoles are held column-wise. For `n <= 5` the sum over `j`
//! is split into four interleaved lanes (lane `l` takes `j ≡ l mod 4` in
//! ascending order) combined as `(l0 + l1) + (l2 + l3)`; larger `n` sums
//! in plain ascending order. Either way the order is fixed, so a sum never
//! depends on how the surrounding loop is scheduled.

use crate::kernel::{green_normalization, kernel_prefactor};
use crate::sample::{Dimension, SampleSet};
use crate::solver::DipoleField;

const LANES: usize = 4;

/// Column-major snapshot of a sample and its dipole field.
#[derive(Clone, Debug)]
pub(crate) struct FieldSummer {
    dim: Dimension,
    points: Vec<Vec<f64>>,
    dipoles: Vec<Vec<f64>>,
    prefactor: f64,
    scale: f64,
}

fn columns(rows: &[f64], n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|k| rows.iter().skip(k).step_by(n).copied().collect()).collect()
}

impl FieldSummer {
    pub(crate) fn new(sample: &SampleSet, field: &DipoleField) -> FieldSummer {
        let dim = sample.dim();
        FieldSummer {
            dim,
            points: columns(sample.coords(), dim.get()),
            dipoles: columns(field.components(), dim.get()),
            prefactor: kernel_prefactor(dim),
            scale: green_normalization(dim) / sample.len() as f64,
        }
    }

    /// `1/(N c_n S_n) Σ_{j : |x - x_j|² > radius_sq} K(x - x_j) φ_j`.
    pub(crate) fn sum(&self, x: &[f64], radius_sq: f64) -> Vec<f64> {
        let mut acc = match self.dim.get() {
            2 => self.sum_fixed::<2>(x, radius_sq).to_vec(),
            3 => self.sum_fixed::<3>(x, radius_sq).to_vec(),
            4 => self.sum_fixed::<4>(x, radius_sq).to_vec(),
            5 => self.sum_fixed::<5>(x, radius_sq).to_vec(),
            _ => self.sum_dyn(x, radius_sq),
        };
        acc.iter_mut().for_each(|c| *c *= self.scale);
        acc
    }

    #[inline(always)]
    fn lanes<const N: usize>(
        &self,
        cols: &[[f64; LANES]; N],
        dips: &[[f64; LANES]; N],
        x: &[f64; N],
        radius_sq: f64,
        acc: &mut [[f64; LANES]; N],
    ) {
        let mut r = [[0.0; LANES]; N];
        let mut d2 = [0.0; LANES];
        let mut proj = [0.0; LANES];
        for k in 0..N {
            for l in 0..LANES {
                r[k][l] = x[k] - cols[k][l];
                d2[l] += r[k][l] * r[k][l];
                proj[l] += r[k][l] * dips[k][l];
            }
        }
        let mut s = [0.0; LANES];
        let mut t = [0.0; LANES];
        for l in 0..LANES {
            // excluded points get weight 0 and a harmless finite inverse
            let beyond = d2[l] > radius_sq;
            let inv = 1.0 / if beyond { d2[l] } else { 1.0 };
            let weight = if beyond { self.prefactor } else { 0.0 };
            let mut p = weight * inv.powi((N / 2) as i32);
            if N % 2 == 1 {
                p *= inv.sqrt();
            }
            s[l] = p;
            t[l] = N as f64 * proj[l] * inv;
        }
        for k in 0..N {
            for l in 0..LANES {
                acc[k][l] += s[l] * (dips[k][l] - t[l] * r[k][l]);
            }
        }
    }

    fn sum_fixed<const N: usize>(&self, x: &[f64], radius_sq: f64) -> [f64; N] {
        let x: [f64; N] = x.try_into().expect("query dimension checked by caller");
        let len = self.points[0].len();
        let mut acc = [[0.0; LANES]; N];
        let chunk = |cols: &[Vec<f64>], base: usize, fill: f64| -> [[f64; LANES]; N] {
            std::array::from_fn(|k| {
                std::array::from_fn(|l| cols[k].get(base + l).copied().unwrap_or(fill))
            })
        };
        let full = len - len % LANES;
        for base in (0..full).step_by(LANES) {
            let cols: [[f64; LANES]; N] =
                std::array::from_fn(|k| self.points[k][base..base + LANES].try_into().unwrap());
            let dips: [[f64; LANES]; N] =
                std::array::from_fn(|k| self.dipoles[k][base..base + LANES].try_into().unwrap());
            self.lanes(&cols, &dips, &x, radius_sq, &mut acc);
        }
        if full < len {
            // padding lanes sit on the query point itself, which is always excluded
            let mut cols = chunk(&self.points, full, 0.0);
            for k in 0..N {
                for l in len - full..LANES {
                    cols[k][l] = x[k];
                }
            }
            let dips = chunk(&self.dipoles, full, 0.0);
            self.lanes(&cols, &dips, &x, radius_sq.max(0.0), &mut acc);
        }
        std::array::from_fn(|k| (acc[k][0] + acc[k][1]) + (acc[k][2] + acc[k][3]))
    }

    fn sum_dyn(&self, x: &[f64], radius_sq: f64) -> Vec<f64> {
        let n = x.len();
        let len = self.points[0].len();
        let mut acc = vec![0.0; n];
        let mut r = vec![0.0; n];
        let mut phi = vec![0.0; n];
        for j in 0..len {
            let mut d2 = 0.0;
            for k in 0..n {
                r[k] = x[k] - self.points[k][j];
                d2 += r[k] * r[k];
                phi[k] = self.dipoles[k][j];
            }
            if d2 > radius_sq {
                crate::kernel::accumulate_dipole(&r, 1.0 / d2, &phi, self.prefactor, &mut acc);
            }
        }
        acc
    }
}
