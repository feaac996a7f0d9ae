//! Labeled feature files: CSV (`label,f0,…`) and the little-endian `QLEB` binary.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

const MAGIC: &[u8; 4] = b"QLEB";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureFormat {
    Csv,
    F32Bin,
}

impl FeatureFormat {
    /// `.csv` is CSV, everything else is the binary format.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => FeatureFormat::Csv,
            _ => FeatureFormat::F32Bin,
        }
    }
}

/// Samples with dense class labels `0..C`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub name: String,
    /// N×D
    pub features: Matrix,
    pub labels: Vec<usize>,
    /// Original label value for each dense class id.
    pub label_values: Vec<i64>,
}

impl LabeledDataset {
    /// Builds a dataset from raw labels, remapping them to `0..C` in ascending order.
    pub fn new(name: impl Into<String>, features: Matrix, raw_labels: &[i64]) -> Result<Self> {
        if features.nrows() != raw_labels.len() {
            return Err(Error::DimensionMismatch {
                what: "labels",
                expected: features.nrows(),
                found: raw_labels.len(),
            });
        }
        crate::numerics::ensure_finite(&features, "features")?;
        let mut label_values: Vec<i64> = raw_labels.to_vec();
        label_values.sort_unstable();
        label_values.dedup();
        let labels = raw_labels
            .iter()
            .map(|l| label_values.binary_search(l).expect("present"))
            .collect();
        Ok(LabeledDataset {
            name: name.into(),
            features,
            labels,
            label_values,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn class_count(&self) -> usize {
        self.label_values.len()
    }

    /// Labels in their original values.
    pub fn raw_labels(&self) -> Vec<i64> {
        self.labels.iter().map(|&l| self.label_values[l]).collect()
    }
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .to_string()
}

pub fn load_features(path: &Path, format: FeatureFormat) -> Result<LabeledDataset> {
    match format {
        FeatureFormat::Csv => {
            let file = File::open(path)?;
            read_csv(BufReader::new(file), dataset_name(path))
        }
        FeatureFormat::F32Bin => {
            let mut bytes = Vec::new();
            File::open(path)?.read_to_end(&mut bytes)?;
            read_f32bin(&bytes, dataset_name(path))
        }
    }
}

pub fn save_features(ds: &LabeledDataset, path: &Path, format: FeatureFormat) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    match format {
        FeatureFormat::Csv => write_csv(ds, &mut out)?,
        FeatureFormat::F32Bin => out.write_all(&f32bin_bytes(ds)?)?,
    }
    out.flush()?;
    Ok(())
}

/// Parses `label,f0,…,f{D-1}` rows. Line numbers in errors are 1-based file lines.
pub fn read_csv<R: Read>(reader: R, name: String) -> Result<LabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
        .clone();
    if header.is_empty() {
        return Err(Error::Format("no rows".into()));
    }
    if header.get(0).map(str::trim) != Some("label") {
        return Err(Error::Parse {
            line: 1,
            message: "header must start with a 'label' column".into(),
        });
    }
    let dim = header.len() - 1;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let line = r + 2;
        let record = record.map_err(|e| Error::Parse { line, message: e.to_string() })?;
        if record.len() != dim + 1 {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", dim + 1, record.len()),
            });
        }
        let label: i64 = record[0].trim().parse().map_err(|_| Error::Parse {
            line,
            message: format!("bad label '{}'", &record[0]),
        })?;
        labels.push(label);
        for (c, field) in record.iter().skip(1).enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad value '{field}' in column f{c}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("non-finite value in column f{c}"),
                });
            }
            data.push(v);
        }
    }
    if labels.is_empty() {
        return Err(Error::Format("no rows".into()));
    }
    let features = Matrix::from_row_slice(labels.len(), dim, &data);
    LabeledDataset::new(name, features, &labels)
}

/// Writes the CSV format with original label values; floats use the shortest
/// representation that parses back to the same value.
pub fn write_csv<W: Write>(ds: &LabeledDataset, out: W) -> Result<()> {
    write_labeled_csv(&ds.features, &ds.raw_labels(), out)
}

pub(crate) fn write_labeled_csv<W: Write>(features: &Matrix, labels: &[i64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["label".to_string()];
    header.extend((0..features.ncols()).map(|c| format!("f{c}")));
    w.write_record(&header).map_err(csv_io)?;
    for (r, label) in labels.iter().enumerate() {
        let mut rec = vec![label.to_string()];
        rec.extend((0..features.ncols()).map(|c| format!("{:?}", features[(r, c)])));
        w.write_record(&rec).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}

/// Encodes `QLEB`, u32 version, u64 N, u64 D, N·D f32 (row-major), N i32 labels.
pub fn f32bin_bytes(ds: &LabeledDataset) -> Result<Vec<u8>> {
    let (n, dim) = ds.features.shape();
    let mut out = Vec::with_capacity(24 + 4 * n * (dim + 1));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(dim as u64).to_le_bytes());
    for r in 0..n {
        for c in 0..dim {
            out.extend_from_slice(&(ds.features[(r, c)] as f32).to_le_bytes());
        }
    }
    for label in ds.raw_labels() {
        let l = i32::try_from(label)
            .map_err(|_| Error::Format(format!("label {label} does not fit in i32")))?;
        out.extend_from_slice(&l.to_le_bytes());
    }
    Ok(out)
}

pub fn read_f32bin(bytes: &[u8], name: String) -> Result<LabeledDataset> {
    if bytes.len() < 24 || &bytes[..4] != MAGIC {
        return Err(Error::Format("missing QLEB header".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let dim = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes")) as usize;
    let want = n
        .checked_mul(dim)
        .and_then(|nd| nd.checked_add(n))
        .and_then(|v| v.checked_mul(4))
        .and_then(|v| v.checked_add(24))
        .ok_or_else(|| Error::Format("header sizes overflow".into()))?;
    if bytes.len() != want {
        return Err(Error::Format(format!(
            "expected {want} bytes for {n}x{dim}, found {}",
            bytes.len()
        )));
    }
    if n == 0 {
        return Err(Error::Format("no rows".into()));
    }
    let body = &bytes[24..];
    let mut data = Vec::with_capacity(n * dim);
    for (i, chunk) in body[..4 * n * dim].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
        if !v.is_finite() {
            return Err(Error::NonFinite {
                what: "f32bin features",
                row: i / dim.max(1),
                col: i % dim.max(1),
            });
        }
        data.push(v as f64);
    }
    let labels: Vec<i64> = body[4 * n * dim..]
        .chunks_exact(4)
        .map(|c| i32::from_le_bytes(c.try_into().expect("4 bytes")) as i64)
        .collect();
    LabeledDataset::new(name, Matrix::from_row_slice(n, dim, &data), &labels)
}
