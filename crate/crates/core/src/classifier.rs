//! Binary likelihood-ratio classification from two independently fitted
//! density models. The response is `(s + ε) / (s + b + 2ε)`.

use crate::error::{Error, Result};
use crate::estimator::DensityModel;
use crate::exec::Execution;
use crate::sample::SampleSet;
use crate::solver::FitConfig;

pub const DEFAULT_EPSILON: f64 = 1e-12;

/// Response for given signal and background densities.
#[inline]
pub fn response_from_densities(signal: f64, background: f64, epsilon: f64) -> f64 {
    (signal + epsilon) / (signal + background + 2.0 * epsilon)
}

#[derive(Clone, Debug)]
pub struct LikelihoodModel {
    signal: DensityModel,
    background: DensityModel,
    epsilon: f64,
}

/// Fits signal and background models. The background fit uses seed
/// `cfg.seed + 1`.
pub fn train(
    signal: SampleSet,
    background: SampleSet,
    cfg: &FitConfig,
    n_large_eval: usize,
) -> Result<LikelihoodModel> {
    train_with(signal, background, cfg, n_large_eval, Execution::default())
}

pub fn train_with(
    signal: SampleSet,
    background: SampleSet,
    cfg: &FitConfig,
    n_large_eval: usize,
    exec: Execution,
) -> Result<LikelihoodModel> {
    if signal.dim() != background.dim() {
        return Err(Error::DimensionMismatch {
            expected: signal.dim().get(),
            found: background.dim().get(),
        });
    }
    let signal = DensityModel::fit_with(signal, cfg, n_large_eval, exec)?;
    let bg_cfg = FitConfig {
        seed: cfg.seed.wrapping_add(1),
        ..cfg.clone()
    };
    let background = DensityModel::fit_with(background, &bg_cfg, n_large_eval, exec)?;
    LikelihoodModel::new(signal, background, DEFAULT_EPSILON)
}

impl LikelihoodModel {
    pub fn new(signal: DensityModel, background: DensityModel, epsilon: f64) -> Result<Self> {
        if signal.dim() != background.dim() {
            return Err(Error::DimensionMismatch {
                expected: signal.dim().get(),
                found: background.dim().get(),
            });
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!("epsilon {epsilon} must be positive")));
        }
        Ok(LikelihoodModel {
            signal,
            background,
            epsilon,
        })
    }

    pub fn signal(&self) -> &DensityModel {
        &self.signal
    }

    pub fn background(&self) -> &DensityModel {
        &self.background
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// The same classifier with the class labels exchanged.
    pub fn swapped(&self) -> LikelihoodModel {
        LikelihoodModel {
            signal: self.background.clone(),
            background: self.signal.clone(),
            epsilon: self.epsilon,
        }
    }

    pub fn response(&self, x: &[f64]) -> Result<f64> {
        let s = self.signal.estimate(x)?;
        let b = self.background.estimate(x)?;
        Ok(response_from_densities(s, b, self.epsilon))
    }

    /// Responses at row-major `points`, in order.
    pub fn responses(&self, points: &[f64], exec: Execution) -> Result<Vec<f64>> {
        let s = self.signal.estimate_batch_with(points, exec)?;
        let b = self.background.estimate_batch_with(points, exec)?;
        Ok(s.iter()
            .zip(&b)
            .map(|(&s, &b)| response_from_densities(s, b, self.epsilon))
            .collect())
    }
}

/// Counts of values in uniform bins over `[0, 1]`; the last bin is closed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Histogram {
    counts: Vec<usize>,
}

impl Histogram {
    pub fn from_values(values: &[f64], n_bins: usize) -> Result<Histogram> {
        if n_bins == 0 {
            return Err(Error::InvalidParameter("histogram needs at least one bin".into()));
        }
        let mut counts = vec![0; n_bins];
        for &v in values {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("value {v} outside [0, 1]")));
            }
            let b = ((v * n_bins as f64) as usize).min(n_bins - 1);
            counts[b] += 1;
        }
        Ok(Histogram { counts })
    }

    pub fn from_counts(counts: Vec<usize>) -> Result<Histogram> {
        if counts.is_empty() {
            return Err(Error::InvalidParameter("histogram needs at least one bin".into()));
        }
        Ok(Histogram { counts })
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// `(lo, hi)` edges of bin `b`.
    pub fn edges(&self, b: usize) -> (f64, f64) {
        let w = 1.0 / self.n_bins() as f64;
        (b as f64 * w, (b + 1) as f64 * w)
    }

    fn cdf(&self) -> Vec<f64> {
        let total = self.total().max(1) as f64;
        let mut acc = 0;
        self.counts
            .iter()
            .map(|c| {
                acc += c;
                acc as f64 / total
            })
            .collect()
    }
}

/// Histogram of responses at the points of `xs`.
pub fn response_histogram(model: &LikelihoodModel, xs: &SampleSet, n_bins: usize) -> Result<Histogram> {
    let r = model.responses(xs.coords(), Execution::default())?;
    Histogram::from_values(&r, n_bins)
}

/// Largest absolute difference between the normalized cumulative counts.
pub fn ks_distance(a: &Histogram, b: &Histogram) -> Result<f64> {
    if a.n_bins() != b.n_bins() {
        return Err(Error::BinningMismatch(a.n_bins(), b.n_bins()));
    }
    Ok(a.cdf()
        .iter()
        .zip(b.cdf())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs())))
}

/// Area under the ROC curve: the probability that a random signal score
/// exceeds a random background score, ties counting one half.
pub fn roc_auc(signal: &[f64], background: &[f64]) -> Result<f64> {
    if signal.is_empty() || background.is_empty() {
        return Err(Error::InvalidParameter("AUC needs scores of both classes".into()));
    }
    let mut all: Vec<(f64, bool)> = signal
        .iter()
        .map(|&s| (s, true))
        .chain(background.iter().map(|&b| (b, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Mann-Whitney with midranks for ties
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        let midrank = (i + j + 1) as f64 / 2.0;
        rank_sum += midrank * all[i..j].iter().filter(|e| e.1).count() as f64;
        i = j;
    }
    let ns = signal.len() as f64;
    let nb = background.len() as f64;
    Ok((rank_sum - ns * (ns + 1.0) / 2.0) / (ns * nb))
}
