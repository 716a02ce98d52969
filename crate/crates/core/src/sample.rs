//! Point samples and their dimension.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of coordinates of the ambient space, at least 2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Dimension(usize);

impl Dimension {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidDimension(n));
        }
        Ok(Dimension(n))
    }

    #[inline]
    pub fn get(self) -> usize {
        self.0
    }
}

impl TryFrom<usize> for Dimension {
    type Error = Error;

    fn try_from(n: usize) -> Result<Self> {
        Dimension::new(n)
    }
}

impl From<Dimension> for usize {
    fn from(d: Dimension) -> usize {
        d.0
    }
}

impl std::fmt::Display for Dimension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// `N` distinct finite points in `n` dimensions, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    dim: Dimension,
    coords: Vec<f64>,
}

impl SampleSet {
    /// Builds a sample from row-major coordinates.
    ///
    /// Rejects fewer than two points, non-finite coordinates and exact
    /// duplicates; the duplicate diagnostic lists every offending pair of rows.
    pub fn new(dim: Dimension, coords: Vec<f64>) -> Result<Self> {
        let n = dim.get();
        if coords.len() % n != 0 {
            return Err(Error::Format(format!(
                "{} coordinates do not form rows of length {n}",
                coords.len()
            )));
        }
        let len = coords.len() / n;
        if len < 2 {
            return Err(Error::TooFewPoints {
                required: 2,
                found: len,
            });
        }
        if let Some(row) = coords.chunks_exact(n).position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::NonFinite { row });
        }
        let s = SampleSet { dim, coords };
        let dups = s.duplicate_pairs();
        if !dups.is_empty() {
            return Err(Error::DuplicatePoints(dups));
        }
        Ok(s)
    }

    pub fn from_rows<R: AsRef<[f64]>>(dim: Dimension, rows: &[R]) -> Result<Self> {
        let mut coords = Vec::with_capacity(rows.len() * dim.get());
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim.get() {
                return Err(Error::DimensionMismatch {
                    expected: dim.get(),
                    found: row.len(),
                });
            }
            coords.extend_from_slice(row);
        }
        SampleSet::new(dim, coords)
    }

    fn duplicate_pairs(&self) -> Vec<(usize, usize)> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        // -0.0 and 0.0 describe the same location
        let key = |i: usize| self.point(i).iter().map(|c| c + 0.0);
        order.sort_by(|&a, &b| {
            key(a)
                .zip(key(b))
                .map(|(x, y)| x.total_cmp(&y))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        });
        let mut pairs = Vec::new();
        for w in order.windows(2) {
            if key(w[0]).eq(key(w[1])) {
                pairs.push((w[0].min(w[1]), w[0].max(w[1])));
            }
        }
        pairs
    }

    #[inline]
    pub fn dim(&self) -> Dimension {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim.get()
    }

    /// Always false for a validated sample; provided for API symmetry.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        let n = self.dim.get();
        &self.coords[i * n..(i + 1) * n]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim.get())
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Applies `f` to every point, revalidating the result.
    pub fn map_points<F>(&self, mut f: F) -> Result<SampleSet>
    where
        F: FnMut(&[f64]) -> Vec<f64>,
    {
        let rows: Vec<Vec<f64>> = self.points().map(&mut f).collect();
        SampleSet::from_rows(self.dim, &rows)
    }
}

/// Squared Euclidean distance, accumulated in coordinate order.
///
/// Every distance comparison in the crate goes through this function so that
/// tree queries and linear scans agree bit for bit.
#[inline]
pub fn distance_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
