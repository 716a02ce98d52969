//! Fitting the unit dipole field by energy descent.
//!
//! Each point `i` carries a unit vector `φ_i`. The induced field
//!
//! ```text
//! E_i = 1/(N c_n S_n) Σ_{j : |x_i - x_j| > R_i} K(x_i - x_j) φ_j
//! ```
//!
//! sums the kernel over all points outside the exclusion sphere of `x_i`,
//! whose radius `R_i` is the distance to the `n · n_large_fit`-th neighbour.
//! The dipole energy `U = -(1/N) Σ φ_i · E_i` is lowered by rotating every
//! `φ_i` towards its `E_i` by at most `step_cap` radians per sweep. A fit has
//! converged when the mean angle between `φ_i` and `E_i` drops below
//! `tolerance`.
//!
//! Sweeps are synchronous: all fields are computed from one snapshot of the
//! dipoles before any dipole moves. Each `E_i` is summed in a fixed order
//! (see [`crate::summation`]), so results are identical for any thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::neighbors::NeighborIndex;
use crate::sample::{Dimension, SampleSet};
use crate::summation::FieldSummer;

/// Tolerance on unit norms of dipole rows.
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// Rotation applied to a dipole sitting exactly antiparallel to its field.
const ANTIPARALLEL_KICK: f64 = 0.01;

const FIELD_STREAM: u64 = 0x6469_706f_6c65;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Target number of points in the stable shell just outside the
    /// exclusion sphere; the sphere itself holds `n · n_large_fit` points.
    pub n_large_fit: usize,
    /// Largest rotation of a dipole per sweep, in radians.
    pub step_cap: f64,
    /// Mean misalignment angle, in radians, below which the fit stops.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Additional random initializations; the lowest-energy run wins.
    pub restarts: usize,
    pub seed: u64,
}

impl FitConfig {
    pub fn new(n_large_fit: usize, seed: u64) -> Self {
        FitConfig {
            n_large_fit,
            step_cap: 0.1,
            tolerance: 1e-3,
            max_iterations: 2000,
            restarts: 3,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_large_fit == 0 {
            return Err(Error::InvalidParameter("n_large_fit must be positive".into()));
        }
        if !(self.step_cap > 0.0 && self.step_cap < std::f64::consts::PI) {
            return Err(Error::InvalidParameter(format!(
                "step_cap {} must lie in (0, pi)",
                self.step_cap
            )));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "tolerance {} must be positive",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be positive".into()));
        }
        Ok(())
    }

    /// Number of neighbours excluded around each point while fitting.
    pub fn n_discr(&self, dim: Dimension) -> usize {
        dim.get() * self.n_large_fit
    }
}

/// One unit vector per sample point, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DipoleField {
    dim: Dimension,
    phi: Vec<f64>,
}

impl DipoleField {
    /// Rows drawn uniformly on the unit sphere from normalized Gaussian draws.
    pub fn init(len: usize, dim: Dimension, seed: u64) -> DipoleField {
        let n = dim.get();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // keep clear of the sample generators, which use streams 0 and 1
        rng.set_stream(FIELD_STREAM);
        let mut phi = Vec::with_capacity(len * n);
        for _ in 0..len {
            phi.extend(random_unit(&mut rng, n));
        }
        DipoleField { dim, phi }
    }

    pub fn from_rows(dim: Dimension, phi: Vec<f64>) -> Result<DipoleField> {
        let n = dim.get();
        if phi.len() % n != 0 {
            return Err(Error::Format(format!(
                "{} components do not form rows of length {n}",
                phi.len()
            )));
        }
        for (row, v) in phi.chunks_exact(n).enumerate() {
            if (norm(v) - 1.0).abs() > UNIT_TOLERANCE {
                return Err(Error::Format(format!("dipole row {row} is not a unit vector")));
            }
        }
        Ok(DipoleField { dim, phi })
    }

    pub fn dim(&self) -> Dimension {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.phi.len() / self.dim.get()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.dim.get();
        &self.phi[i * n..(i + 1) * n]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.phi.chunks_exact(self.dim.get())
    }

    pub fn components(&self) -> &[f64] {
        &self.phi
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub iterations_used: usize,
    pub energy_initial: f64,
    pub energy_final: f64,
    /// Mean angle between `φ_i` and `E_i` over points with a nonzero field.
    pub mean_misalignment: f64,
    /// Final energy of every restart, in restart order.
    pub restart_energies: Vec<f64>,
    pub converged: bool,
}

fn random_unit<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let len = norm(&v);
        if len > 1e-12 {
            return v.into_iter().map(|c| c / len).collect();
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn check_n_discr(n_discr: usize, len: usize) -> Result<()> {
    if n_discr + 2 > len {
        return Err(Error::ExclusionTooLarge {
            n_discr,
            n_points: len,
        });
    }
    Ok(())
}

/// Squared exclusion radius of every sample point: the squared distance to
/// its `n_discr`-th neighbour, the point itself not counted. Zero when
/// `n_discr` is zero.
pub fn exclusion_radii_sq(index: &NeighborIndex, n_discr: usize, exec: Execution) -> Result<Vec<f64>> {
    let sample = index.sample();
    check_n_discr(n_discr, sample.len())?;
    if n_discr == 0 {
        return Ok(vec![0.0; sample.len()]);
    }
    exec.map_indices(sample.len(), |i| index.kth_distance_sq(sample.point(i), n_discr, true))
        .into_iter()
        .collect()
}

fn check_field(sample: &SampleSet, field: &DipoleField) -> Result<()> {
    if field.dim() != sample.dim() {
        return Err(Error::DimensionMismatch {
            expected: sample.dim().get(),
            found: field.dim().get(),
        });
    }
    if field.len() != sample.len() {
        return Err(Error::Format(format!(
            "field has {} rows for {} points",
            field.len(),
            sample.len()
        )));
    }
    Ok(())
}

/// Induced field at every sample point given precomputed exclusion radii,
/// flattened row-major.
pub fn compute_fields(
    sample: &SampleSet,
    field: &DipoleField,
    radii_sq: &[f64],
    exec: Execution,
) -> Result<Vec<f64>> {
    check_field(sample, field)?;
    if radii_sq.len() != sample.len() {
        return Err(Error::Format("one exclusion radius per point required".into()));
    }
    let summer = FieldSummer::new(sample, field);
    Ok(exec
        .map_indices(sample.len(), |i| summer.sum(sample.point(i), radii_sq[i]))
        .concat())
}

/// Induced field `E_i` at sample point `i`.
pub fn compute_field(index: &NeighborIndex, field: &DipoleField, cfg: &FitConfig, i: usize) -> Result<Vec<f64>> {
    let sample = index.sample();
    check_field(sample, field)?;
    let n_discr = cfg.n_discr(sample.dim());
    check_n_discr(n_discr, sample.len())?;
    let x = sample.point(i);
    let r2 = if n_discr == 0 { 0.0 } else { index.kth_distance_sq(x, n_discr, true)? };
    Ok(FieldSummer::new(sample, field).sum(x, r2))
}

/// Dipole energy `-(1/N) Σ φ_i · E_i` of precomputed fields, summed in index order.
pub fn energy_of(field: &DipoleField, fields: &[f64]) -> f64 {
    let n = field.dim().get();
    let total: f64 = field
        .rows()
        .zip(fields.chunks_exact(n))
        .map(|(phi, e)| dot(phi, e))
        .sum();
    -total / field.len() as f64
}

pub fn energy(index: &NeighborIndex, field: &DipoleField, cfg: &FitConfig) -> Result<f64> {
    let sample = index.sample();
    let exec = Execution::default();
    let radii = exclusion_radii_sq(index, cfg.n_discr(sample.dim()), exec)?;
    let fields = compute_fields(sample, field, &radii, exec)?;
    Ok(energy_of(field, &fields))
}

/// Angle between `phi` and `e`, or `None` when `e` vanishes.
pub fn misalignment(phi: &[f64], e: &[f64]) -> Option<f64> {
    let along = dot(phi, e);
    let perp_sq = e.iter().zip(phi).map(|(ec, pc)| (ec - along * pc).powi(2)).sum::<f64>();
    if along == 0.0 && perp_sq == 0.0 {
        return None;
    }
    Some(perp_sq.sqrt().atan2(along))
}

/// Mean misalignment over points with a nonzero field; 0 if there are none.
pub fn mean_misalignment(field: &DipoleField, fields: &[f64]) -> f64 {
    let n = field.dim().get();
    let (sum, count) = field
        .rows()
        .zip(fields.chunks_exact(n))
        .filter_map(|(phi, e)| misalignment(phi, e))
        .fold((0.0, 0usize), |(s, c), a| (s + a, c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Rotates `phi` towards `e` within their common plane by
/// `min(step_cap, angle)`. The result is renormalized; a vanishing or
/// (anti)parallel `e` leaves `phi` unchanged.
pub fn rotate_toward(phi: &[f64], e: &[f64], step_cap: f64) -> Result<Vec<f64>> {
    if phi.len() != e.len() {
        return Err(Error::DimensionMismatch {
            expected: phi.len(),
            found: e.len(),
        });
    }
    let len = norm(phi);
    if !(len > 0.0) {
        return Err(Error::ZeroVector);
    }
    let phi: Vec<f64> = phi.iter().map(|c| c / len).collect();
    Ok(rotate_unit(&phi, e, step_cap).unwrap_or(phi))
}

/// Rotation step for a unit `phi`; `None` when there is no tangential pull.
fn rotate_unit(phi: &[f64], e: &[f64], step_cap: f64) -> Option<Vec<f64>> {
    let along = dot(phi, e);
    let perp: Vec<f64> = e.iter().zip(phi).map(|(ec, pc)| ec - along * pc).collect();
    let perp_len = norm(&perp);
    // a tangential part at rounding level counts as parallel
    if perp_len <= 4.0 * f64::EPSILON * along.abs() || perp_len == 0.0 {
        return None;
    }
    let angle = perp_len.atan2(along);
    if angle <= step_cap {
        let e_len = norm(e);
        return Some(e.iter().map(|c| c / e_len).collect());
    }
    let (s, c) = step_cap.sin_cos();
    let mut out: Vec<f64> = phi
        .iter()
        .zip(&perp)
        .map(|(p, t)| c * p + s * t / perp_len)
        .collect();
    let out_len = norm(&out);
    out.iter_mut().for_each(|v| *v /= out_len);
    Some(out)
}

/// Deterministic escape from the antiparallel stall: rotate by a small angle
/// towards a random axis drawn from `(seed, point, sweep)`.
fn kick(phi: &[f64], seed: u64, point: usize, sweep: usize) -> Vec<f64> {
    let mix = seed
        ^ (point as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (sweep as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    let mut rng = ChaCha8Rng::seed_from_u64(mix);
    loop {
        let axis = random_unit(&mut rng, phi.len());
        if let Some(out) = rotate_unit(phi, &axis, ANTIPARALLEL_KICK) {
            return out;
        }
    }
}

fn is_antiparallel(phi: &[f64], e: &[f64]) -> bool {
    let along = dot(phi, e);
    along < 0.0 && {
        let perp_sq: f64 = e.iter().zip(phi).map(|(ec, pc)| (ec - along * pc).powi(2)).sum();
        perp_sq.sqrt() <= 1e-12 * along.abs()
    }
}

/// One synchronous rotation of every dipole towards its field.
fn sweep(field: &DipoleField, fields: &[f64], cfg: &FitConfig, seed: u64, iteration: usize, exec: Execution) -> DipoleField {
    let n = field.dim().get();
    let rows = exec.map_indices(field.len(), |i| {
        let phi = field.row(i);
        let e = &fields[i * n..(i + 1) * n];
        if is_antiparallel(phi, e) {
            kick(phi, seed, i, iteration)
        } else {
            rotate_unit(phi, e, cfg.step_cap).unwrap_or_else(|| phi.to_vec())
        }
    });
    DipoleField {
        dim: field.dim(),
        phi: rows.concat(),
    }
}

struct RunOutcome {
    field: DipoleField,
    iterations: usize,
    energy_initial: f64,
    energy_final: f64,
    mean_misalignment: f64,
    converged: bool,
}

fn run_once(sample: &SampleSet, radii: &[f64], cfg: &FitConfig, seed: u64, exec: Execution) -> Result<RunOutcome> {
    let mut field = DipoleField::init(sample.len(), sample.dim(), seed);
    let mut fields = compute_fields(sample, &field, radii, exec)?;
    let energy_initial = energy_of(&field, &fields);
    let mut iterations = 0;
    let mut mis = mean_misalignment(&field, &fields);
    while mis >= cfg.tolerance && iterations < cfg.max_iterations {
        field = sweep(&field, &fields, cfg, seed, iterations, exec);
        fields = compute_fields(sample, &field, radii, exec)?;
        mis = mean_misalignment(&field, &fields);
        iterations += 1;
    }
    Ok(RunOutcome {
        energy_final: energy_of(&field, &fields),
        field,
        iterations,
        energy_initial,
        mean_misalignment: mis,
        converged: mis < cfg.tolerance,
    })
}

/// Fits the dipole field with the default execution strategy.
pub fn fit(index: &NeighborIndex, cfg: &FitConfig) -> Result<(DipoleField, FitReport)> {
    fit_with(index, cfg, Execution::default())
}

/// Fits the dipole field. Restart `r` is seeded with `cfg.seed ^ r`; the run
/// with the lowest final energy is returned (earliest on ties).
pub fn fit_with(index: &NeighborIndex, cfg: &FitConfig, exec: Execution) -> Result<(DipoleField, FitReport)> {
    cfg.validate()?;
    let sample = index.sample();
    let radii = exclusion_radii_sq(index, cfg.n_discr(sample.dim()), exec)?;
    let mut best: Option<RunOutcome> = None;
    let mut restart_energies = Vec::with_capacity(cfg.restarts + 1);
    for restart in 0..=cfg.restarts {
        let run = run_once(sample, &radii, cfg, cfg.seed ^ restart as u64, exec)?;
        restart_energies.push(run.energy_final);
        if best.as_ref().is_none_or(|b| run.energy_final < b.energy_final) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one run");
    let report = FitReport {
        iterations_used: best.iterations,
        energy_initial: best.energy_initial,
        energy_final: best.energy_final,
        mean_misalignment: best.mean_misalignment,
        restart_energies,
        converged: best.converged,
    };
    Ok((best.field, report))
}
