//! Density estimates from a fitted dipole field.
//!
//! The estimate at `x` is the norm of the kernel sum over sample points
//! outside an exclusion sphere around `x`. The sphere holds the
//! `n · n_large_eval` nearest sample points; a sample point coinciding with
//! `x` is always excluded as well.
//!
//! Cutting a sphere out of the kernel sum yields the principal value of the
//! singular integral. The distributional second derivative of the Green's
//! function also carries a point term `δ_μν δ(r) / n`, which the principal
//! value misses, so the raw sum converges to `(1 - 1/n) g`. Estimates are
//! rescaled by `n / (n - 1)` to undo that.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::neighbors::NeighborIndex;
use crate::sample::{distance_sq, Dimension, SampleSet};
use crate::solver::{self, DipoleField, FitConfig, FitReport};
use crate::summation::FieldSummer;

/// Factor restoring the point term dropped by the exclusion sphere.
pub fn principal_value_correction(dim: Dimension) -> f64 {
    let n = dim.get() as f64;
    n / (n - 1.0)
}

/// A fitted, immutable density model.
#[derive(Clone, Debug)]
pub struct DensityModel {
    index: NeighborIndex,
    field: DipoleField,
    summer: FieldSummer,
    fit_config: FitConfig,
    n_large_eval: usize,
    report: FitReport,
}

impl DensityModel {
    /// Fits a model; evaluation uses the same shell size as the fit.
    pub fn fit(sample: SampleSet, cfg: &FitConfig) -> Result<DensityModel> {
        DensityModel::fit_with(sample, cfg, cfg.n_large_fit, Execution::default())
    }

    pub fn fit_with(
        sample: SampleSet,
        cfg: &FitConfig,
        n_large_eval: usize,
        exec: Execution,
    ) -> Result<DensityModel> {
        check_n_large_eval(sample.dim(), sample.len(), n_large_eval)?;
        let index = NeighborIndex::new(sample);
        let (field, report) = solver::fit_with(&index, cfg, exec)?;
        Ok(DensityModel {
            summer: FieldSummer::new(index.sample(), &field),
            index,
            field,
            fit_config: cfg.clone(),
            n_large_eval,
            report,
        })
    }

    /// Assembles a model from stored parts, validating their consistency.
    pub fn from_parts(
        sample: SampleSet,
        field: DipoleField,
        fit_config: FitConfig,
        n_large_eval: usize,
        report: FitReport,
    ) -> Result<DensityModel> {
        if field.dim() != sample.dim() {
            return Err(Error::DimensionMismatch {
                expected: sample.dim().get(),
                found: field.dim().get(),
            });
        }
        if field.len() != sample.len() {
            return Err(Error::Format(format!(
                "{} dipoles for {} sample points",
                field.len(),
                sample.len()
            )));
        }
        fit_config.validate()?;
        check_n_large_eval(sample.dim(), sample.len(), n_large_eval)?;
        Ok(DensityModel {
            summer: FieldSummer::new(&sample, &field),
            index: NeighborIndex::new(sample),
            field,
            fit_config,
            n_large_eval,
            report,
        })
    }

    /// Same fitted field, different evaluation shell size.
    pub fn with_n_large_eval(mut self, n_large_eval: usize) -> Result<DensityModel> {
        check_n_large_eval(self.dim(), self.sample().len(), n_large_eval)?;
        self.n_large_eval = n_large_eval;
        Ok(self)
    }

    pub fn dim(&self) -> Dimension {
        self.index.sample().dim()
    }

    pub fn sample(&self) -> &SampleSet {
        self.index.sample()
    }

    pub fn index(&self) -> &NeighborIndex {
        &self.index
    }

    pub fn field(&self) -> &DipoleField {
        &self.field
    }

    pub fn fit_config(&self) -> &FitConfig {
        &self.fit_config
    }

    pub fn report(&self) -> &FitReport {
        &self.report
    }

    pub fn n_large_eval(&self) -> usize {
        self.n_large_eval
    }

    /// Number of sample points inside the evaluation exclusion sphere.
    pub fn n_discr_eval(&self) -> usize {
        self.dim().get() * self.n_large_eval
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        let n = self.dim().get();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: x.len(),
            });
        }
        if x.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("query point is not finite".into()));
        }
        Ok(())
    }

    /// Exclusion radius `ΔR` at `x`.
    pub fn exclusion_radius(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        self.index
            .kth_distance_sq(x, self.n_discr_eval(), true)
            .map(f64::sqrt)
    }

    /// Kernel sum vector at `x` before taking its norm, including the
    /// principal-value correction.
    pub fn field_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let r2 = self.index.kth_distance_sq(x, self.n_discr_eval(), true)?;
        let corr = principal_value_correction(self.dim());
        let mut v = self.summer.sum(x, r2);
        v.iter_mut().for_each(|c| *c *= corr);
        Ok(v)
    }

    /// Density estimate at `x`; always nonnegative.
    pub fn estimate(&self, x: &[f64]) -> Result<f64> {
        let v = self.field_at(x)?;
        Ok(v.iter().map(|c| c * c).sum::<f64>().sqrt())
    }

    /// Estimates at row-major `points`, in order.
    pub fn estimate_batch(&self, points: &[f64]) -> Result<Vec<f64>> {
        self.estimate_batch_with(points, Execution::default())
    }

    pub fn estimate_batch_with(&self, points: &[f64], exec: Execution) -> Result<Vec<f64>> {
        let n = self.dim().get();
        if points.len() % n != 0 {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: points.len() % n,
            });
        }
        exec.map_indices(points.len() / n, |i| self.estimate(&points[i * n..(i + 1) * n]))
            .into_iter()
            .collect()
    }

    /// Estimates at every sample point.
    pub fn estimate_at_samples(&self, exec: Execution) -> Result<Vec<f64>> {
        self.estimate_batch_with(self.sample().coords(), exec)
    }
}

fn check_n_large_eval(dim: Dimension, len: usize, n_large_eval: usize) -> Result<()> {
    if n_large_eval == 0 {
        return Err(Error::InvalidParameter("n_large_eval must be positive".into()));
    }
    let n_discr = dim.get() * n_large_eval;
    if n_discr + 2 > len {
        return Err(Error::ExclusionTooLarge {
            n_discr,
            n_points: len,
        });
    }
    Ok(())
}

/// One radial bin of a [`RadialProfile`].
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileBin {
    pub r_lo: f64,
    pub r_hi: f64,
    pub count: usize,
    /// Absent for empty bins.
    pub mean: Option<f64>,
    /// Sample standard deviation of the estimates in the bin; zero for a
    /// single entry, absent for empty bins.
    pub spread: Option<f64>,
    /// Analytic density at the bin center, when a truth was supplied.
    pub truth: Option<f64>,
}

/// Binned density estimates against distance from a center.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialProfile {
    pub bins: Vec<ProfileBin>,
}

impl RadialProfile {
    /// Bins `values[i]`, attached to sample point `i`, by distance from
    /// `center` into `n_bins` equal bins over `[0, r_max)`. Points at or
    /// beyond `r_max` are dropped.
    pub fn from_values(
        sample: &SampleSet,
        values: &[f64],
        center: &[f64],
        n_bins: usize,
        r_max: f64,
        truth: Option<&dyn Fn(f64) -> f64>,
    ) -> Result<RadialProfile> {
        if n_bins == 0 {
            return Err(Error::InvalidParameter("profile needs at least one bin".into()));
        }
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(Error::InvalidParameter(format!("r_max {r_max} must be positive")));
        }
        if center.len() != sample.dim().get() {
            return Err(Error::DimensionMismatch {
                expected: sample.dim().get(),
                found: center.len(),
            });
        }
        if values.len() != sample.len() {
            return Err(Error::Format("one value per sample point required".into()));
        }
        let width = r_max / n_bins as f64;
        let mut members: Vec<Vec<f64>> = vec![Vec::new(); n_bins];
        for (p, &v) in sample.points().zip(values) {
            let r = distance_sq(p, center).sqrt();
            if r < r_max {
                let b = ((r / width) as usize).min(n_bins - 1);
                members[b].push(v);
            }
        }
        let bins = members
            .into_iter()
            .enumerate()
            .map(|(b, vals)| {
                let r_lo = b as f64 * width;
                let r_hi = (b + 1) as f64 * width;
                let count = vals.len();
                let (mean, spread) = mean_and_spread(&vals);
                ProfileBin {
                    r_lo,
                    r_hi,
                    count,
                    mean,
                    spread,
                    truth: truth.map(|t| t(0.5 * (r_lo + r_hi))),
                }
            })
            .collect();
        Ok(RadialProfile { bins })
    }

    pub fn total_count(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }
}

fn mean_and_spread(vals: &[f64]) -> (Option<f64>, Option<f64>) {
    match vals.len() {
        0 => (None, None),
        1 => (Some(vals[0]), Some(0.0)),
        len => {
            let mean = vals.iter().sum::<f64>() / len as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (len - 1) as f64;
            (Some(mean), Some(var.sqrt()))
        }
    }
}

/// Profile of the model's own estimates at its sample points.
pub fn radial_profile(
    model: &DensityModel,
    center: &[f64],
    n_bins: usize,
    r_max: f64,
    truth: Option<&dyn Fn(f64) -> f64>,
) -> Result<RadialProfile> {
    let values = model.estimate_at_samples(Execution::default())?;
    RadialProfile::from_values(model.sample(), &values, center, n_bins, r_max, truth)
}
