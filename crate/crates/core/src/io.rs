//! File formats.
//!
//! Point files are CSV with header `x0,x1,...,x{n-1}`; the dimension comes
//! from the header. Reals are written in shortest round-trip form, so every
//! value reads back bit for bit. Model and classifier files are versioned
//! JSON documents.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::classifier::{Histogram, LikelihoodModel};
use crate::error::{Error, Result};
use crate::estimator::{DensityModel, RadialProfile};
use crate::sample::{Dimension, SampleSet};
use crate::solver::{DipoleField, FitConfig, FitReport};

pub const MODEL_FORMAT: &str = "greenkde-model";
pub const CLASSIFIER_FORMAT: &str = "greenkde-classifier";
pub const FORMAT_VERSION: u32 = 1;

/// Shortest representation that parses back to the same `f64`.
pub fn format_real(v: f64) -> String {
    format!("{v:?}")
}

fn opt_real(v: Option<f64>) -> String {
    v.map(format_real).unwrap_or_default()
}

/// Row-major points read from a CSV file.
#[derive(Clone, Debug, PartialEq)]
pub struct PointTable {
    pub dim: Dimension,
    pub coords: Vec<f64>,
}

impl PointTable {
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim.get()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn into_sample(self) -> Result<SampleSet> {
        SampleSet::new(self.dim, self.coords)
    }
}

fn point_header(dim: Dimension) -> Vec<String> {
    (0..dim.get()).map(|i| format!("x{i}")).collect()
}

pub fn read_points<R: Read>(reader: R) -> Result<PointTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    for (i, name) in header.iter().enumerate() {
        if name.trim() != format!("x{i}") {
            return Err(Error::Format(format!(
                "header column {i} is `{name}`, expected `x{i}`"
            )));
        }
    }
    let dim = Dimension::new(header.len())
        .map_err(|_| Error::Format(format!("header declares {} coordinates", header.len())))?;
    let mut coords = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != dim.get() {
            return Err(Error::DimensionMismatch {
                expected: dim.get(),
                found: record.len(),
            });
        }
        for field in record.iter() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Format(format!("row {}: `{field}` is not a number", row + 1))
            })?;
            coords.push(v);
        }
    }
    Ok(PointTable { dim, coords })
}

pub fn write_points<W: Write>(mut w: W, dim: Dimension, coords: &[f64]) -> Result<()> {
    writeln!(w, "{}", point_header(dim).join(","))?;
    for p in coords.chunks_exact(dim.get()) {
        let row: Vec<String> = p.iter().map(|&c| format_real(c)).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Points with one extra value column, e.g. `density` or `response`.
pub fn write_point_values<W: Write>(
    mut w: W,
    dim: Dimension,
    coords: &[f64],
    column: &str,
    values: &[f64],
) -> Result<()> {
    let mut header = point_header(dim);
    header.push(column.to_string());
    writeln!(w, "{}", header.join(","))?;
    for (p, v) in coords.chunks_exact(dim.get()).zip(values) {
        let mut row: Vec<String> = p.iter().map(|&c| format_real(c)).collect();
        row.push(format_real(*v));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_profile<W: Write>(mut w: W, profile: &RadialProfile) -> Result<()> {
    writeln!(w, "r_lo,r_hi,count,mean,spread,truth")?;
    for b in &profile.bins {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            format_real(b.r_lo),
            format_real(b.r_hi),
            b.count,
            opt_real(b.mean),
            opt_real(b.spread),
            opt_real(b.truth)
        )?;
    }
    Ok(())
}

pub fn write_histogram<W: Write>(mut w: W, hist: &Histogram) -> Result<()> {
    writeln!(w, "bin_lo,bin_hi,count")?;
    for (b, count) in hist.counts().iter().enumerate() {
        let (lo, hi) = hist.edges(b);
        writeln!(w, "{},{},{}", format_real(lo), format_real(hi), count)?;
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format: String,
    version: u32,
    dim: Dimension,
    points: Vec<Vec<f64>>,
    field: Vec<Vec<f64>>,
    fit_config: FitConfig,
    n_large_eval: usize,
    report: FitReport,
}

#[derive(Serialize, Deserialize)]
struct ClassifierDocument {
    format: String,
    version: u32,
    epsilon: f64,
    signal: ModelDocument,
    background: ModelDocument,
}

fn check_header(format: &str, version: u32, expected: &str) -> Result<()> {
    if format != expected {
        return Err(Error::Format(format!("document format `{format}`, expected `{expected}`")));
    }
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported {expected} version {version}")));
    }
    Ok(())
}

impl ModelDocument {
    fn from_model(m: &DensityModel) -> Self {
        ModelDocument {
            format: MODEL_FORMAT.into(),
            version: FORMAT_VERSION,
            dim: m.dim(),
            points: m.sample().points().map(<[f64]>::to_vec).collect(),
            field: m.field().rows().map(<[f64]>::to_vec).collect(),
            fit_config: m.fit_config().clone(),
            n_large_eval: m.n_large_eval(),
            report: m.report().clone(),
        }
    }

    fn into_model(self) -> Result<DensityModel> {
        check_header(&self.format, self.version, MODEL_FORMAT)?;
        let sample = SampleSet::from_rows(self.dim, &self.points)?;
        let mut phi = Vec::with_capacity(self.field.len() * self.dim.get());
        for row in &self.field {
            if row.len() != self.dim.get() {
                return Err(Error::DimensionMismatch {
                    expected: self.dim.get(),
                    found: row.len(),
                });
            }
            phi.extend_from_slice(row);
        }
        let field = DipoleField::from_rows(self.dim, phi)?;
        DensityModel::from_parts(sample, field, self.fit_config, self.n_large_eval, self.report)
    }
}

pub fn write_model<W: Write>(w: W, model: &DensityModel) -> Result<()> {
    serde_json::to_writer_pretty(w, &ModelDocument::from_model(model))?;
    Ok(())
}

pub fn read_model<R: Read>(r: R) -> Result<DensityModel> {
    let doc: ModelDocument = serde_json::from_reader(r)?;
    doc.into_model()
}

pub fn write_classifier<W: Write>(w: W, clf: &LikelihoodModel) -> Result<()> {
    let doc = ClassifierDocument {
        format: CLASSIFIER_FORMAT.into(),
        version: FORMAT_VERSION,
        epsilon: clf.epsilon(),
        signal: ModelDocument::from_model(clf.signal()),
        background: ModelDocument::from_model(clf.background()),
    };
    serde_json::to_writer_pretty(w, &doc)?;
    Ok(())
}

pub fn read_classifier<R: Read>(r: R) -> Result<LikelihoodModel> {
    let doc: ClassifierDocument = serde_json::from_reader(r)?;
    check_header(&doc.format, doc.version, CLASSIFIER_FORMAT)?;
    LikelihoodModel::new(doc.signal.into_model()?, doc.background.into_model()?, doc.epsilon)
}
