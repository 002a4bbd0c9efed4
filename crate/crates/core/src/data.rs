//! Labeled datasets: ingestion, seeded per-class splitting and optional
//! per-band standardization.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Column-oriented labeled samples: `features` is `n × p`, one sample per
/// column, and `labels[j]` (in `1..=c`) belongs to column `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: DMatrix<f64>,
    labels: Vec<usize>,
    class_count: usize,
    /// Original label for each contiguous class id; entry `k - 1` is class `k`.
    label_map: Vec<i64>,
}

impl LabeledDataset {
    /// Builds a dataset whose labels are already contiguous `1..=class_count`.
    pub fn new(features: DMatrix<f64>, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        let label_map = (1..=class_count as i64).collect();
        Self::with_label_map(features, labels, class_count, label_map)
    }

    /// Builds a dataset from arbitrary integer labels, remapping them to
    /// `1..=c` in sorted order of the original values.
    pub fn from_raw_labels(features: DMatrix<f64>, raw: &[i64]) -> Result<Self> {
        let mut distinct: Vec<i64> = raw.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        let labels = raw
            .iter()
            .map(|l| distinct.binary_search(l).map(|k| k + 1).unwrap_or(0))
            .collect();
        let c = distinct.len();
        Self::with_label_map(features, labels, c, distinct)
    }

    fn with_label_map(
        features: DMatrix<f64>,
        labels: Vec<usize>,
        class_count: usize,
        label_map: Vec<i64>,
    ) -> Result<Self> {
        if features.ncols() != labels.len() {
            return Err(Error::mismatch(
                format!("{} labels", features.ncols()),
                format!("{} labels", labels.len()),
            ));
        }
        if features.nrows() == 0 {
            return Err(Error::InvalidData("samples have zero features".into()));
        }
        if let Some(v) = features.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("non-finite feature value {v}")));
        }
        if label_map.len() != class_count {
            return Err(Error::InvalidData("label map does not cover every class".into()));
        }
        let mut counts = vec![0usize; class_count];
        for &l in &labels {
            if l == 0 || l > class_count {
                return Err(Error::InvalidData(format!("label {l} outside 1..={class_count}")));
            }
            counts[l - 1] += 1;
        }
        if let Some(k) = counts.iter().position(|&n| n == 0) {
            return Err(Error::InvalidData(format!("class {} has no samples", k + 1)));
        }
        Ok(Self {
            features,
            labels,
            class_count,
            label_map,
        })
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    /// Number of features per sample (`n`).
    pub fn dim(&self) -> usize {
        self.features.nrows()
    }

    /// Number of samples (`p`).
    pub fn sample_count(&self) -> usize {
        self.features.ncols()
    }

    /// Original label value for each contiguous class id.
    pub fn label_map(&self) -> &[i64] {
        &self.label_map
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.class_count];
        for &l in &self.labels {
            counts[l - 1] += 1;
        }
        counts
    }

    /// Sample indices of each class, ascending.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.class_count];
        for (j, &l) in self.labels.iter().enumerate() {
            out[l - 1].push(j);
        }
        out
    }

    /// Subset of columns, keeping the class numbering and label map.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&j| j >= self.sample_count()) {
            return Err(Error::InvalidArgument(format!("sample index {bad} out of range")));
        }
        let features = self.features.select_columns(indices);
        let labels = indices.iter().map(|&j| self.labels[j]).collect();
        Self::with_label_map(features, labels, self.class_count, self.label_map.clone())
    }

    /// Same labels over a new feature space (e.g. after a projection).
    pub fn with_features(&self, features: DMatrix<f64>) -> Result<Self> {
        Self::with_label_map(
            features,
            self.labels.clone(),
            self.class_count,
            self.label_map.clone(),
        )
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Parses CSV text: each non-empty line is `n` reals followed by one integer label.
pub fn parse_csv(text: &str) -> Result<LabeledDataset> {
    let mut columns: Vec<f64> = Vec::new();
    let mut raw_labels = Vec::new();
    let mut dim: Option<usize> = None;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 2 {
            return Err(Error::Parse {
                line: line_no,
                msg: "expected at least one feature and a label".into(),
            });
        }
        let n = fields.len() - 1;
        match dim {
            None => dim = Some(n),
            Some(d) if d != n => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected {} fields, found {}", d + 1, fields.len()),
                })
            }
            _ => {}
        }
        for f in &fields[..n] {
            let v: f64 = f.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("non-numeric feature {f:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("non-finite feature {f:?}"),
                });
            }
            columns.push(v);
        }
        let label: i64 = fields[n].parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("label {:?} is not an integer", fields[n]),
        })?;
        raw_labels.push(label);
    }
    let dim = dim.ok_or_else(|| Error::Format("empty file".into()))?;
    let features = DMatrix::from_column_slice(dim, raw_labels.len(), &columns);
    let ds = LabeledDataset::from_raw_labels(features, &raw_labels)?;
    if ds.class_count() < 2 {
        return Err(Error::InvalidData("dataset has a single class".into()));
    }
    Ok(ds)
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    let text = String::from_utf8(bytes).map_err(|_| Error::Format("CSV is not valid UTF-8".into()))?;
    parse_csv(&text).map_err(|e| e.context(path.display().to_string()))
}

/// Writes samples one per row with their original label values.
pub fn write_csv(ds: &LabeledDataset, mut out: impl Write) -> std::io::Result<()> {
    for (j, col) in ds.features().column_iter().enumerate() {
        for v in col.iter() {
            write!(out, "{v:?},")?;
        }
        writeln!(out, "{}", ds.label_map()[ds.labels()[j] - 1])?;
    }
    Ok(())
}

pub fn save_csv(ds: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_csv(ds, &mut buf).map_err(|e| Error::io(path, e))?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub const HSB_MAGIC: &[u8; 4] = b"HSB1";
const HSB_HEADER_LEN: usize = 16;

/// A labeled hyperspectral cube as stored in an HSB file.
#[derive(Debug, Clone, PartialEq)]
pub struct HsbCube {
    pub rows: u32,
    pub cols: u32,
    pub bands: u32,
    /// Band-interleaved-by-pixel values, `rows · cols · bands` long.
    pub values: Vec<f64>,
    /// Row-major pixel labels; 0 marks unlabeled background.
    pub labels: Vec<u16>,
}

impl HsbCube {
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != HSB_MAGIC {
            return Err(Error::Format("bad magic, expected \"HSB1\"".into()));
        }
        if bytes.len() < HSB_HEADER_LEN {
            return Err(Error::Format(format!(
                "truncated header: {} bytes, need {HSB_HEADER_LEN}",
                bytes.len()
            )));
        }
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        let (rows, cols, bands) = (word(4), word(8), word(12));
        let pixels = rows as u64 * cols as u64;
        let expected = HSB_HEADER_LEN as u64 + pixels * bands as u64 * 8 + pixels * 2;
        let actual = bytes.len() as u64;
        if actual < expected {
            return Err(Error::Format(format!(
                "truncated payload: {actual} bytes, header {rows}x{cols}x{bands} needs {expected}"
            )));
        }
        if actual > expected {
            return Err(Error::Format(format!(
                "declared dims {rows}x{cols}x{bands} need {expected} bytes, file has {actual}"
            )));
        }
        let n_values = (pixels * bands as u64) as usize;
        let body = &bytes[HSB_HEADER_LEN..];
        let values = body[..n_values * 8]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let labels = body[n_values * 8..]
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self {
            rows,
            cols,
            bands,
            values,
            labels,
        })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HSB_HEADER_LEN + self.values.len() * 8 + self.labels.len() * 2);
        out.extend_from_slice(HSB_MAGIC);
        for w in [self.rows, self.cols, self.bands] {
            out.extend_from_slice(&w.to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for l in &self.labels {
            out.extend_from_slice(&l.to_le_bytes());
        }
        out
    }

    /// Labeled pixels as a dataset; background pixels are dropped and
    /// spatial positions discarded.
    pub fn to_dataset(&self) -> Result<LabeledDataset> {
        let bands = self.bands as usize;
        if bands == 0 {
            return Err(Error::Format("cube has zero bands".into()));
        }
        let mut columns = Vec::new();
        let mut raw = Vec::new();
        for (pix, &label) in self.labels.iter().enumerate() {
            if label == 0 {
                continue;
            }
            columns.extend_from_slice(&self.values[pix * bands..(pix + 1) * bands]);
            raw.push(label as i64);
        }
        if raw.is_empty() {
            return Err(Error::InvalidData("no labeled pixels".into()));
        }
        let features = DMatrix::from_column_slice(bands, raw.len(), &columns);
        let ds = LabeledDataset::from_raw_labels(features, &raw)?;
        if ds.class_count() < 2 {
            return Err(Error::InvalidData("dataset has a single class".into()));
        }
        Ok(ds)
    }

    /// Packs a dataset as a `1 × p` cube, writing original label values.
    pub fn from_dataset(ds: &LabeledDataset) -> Result<Self> {
        let labels = ds
            .labels()
            .iter()
            .map(|&l| {
                let raw = ds.label_map()[l - 1];
                u16::try_from(raw)
                    .ok()
                    .filter(|&v| v != 0)
                    .ok_or_else(|| Error::InvalidData(format!("label {raw} does not fit HSB's 1..=65535")))
            })
            .collect::<Result<Vec<_>>>()?;
        let too_big = |v: usize| u32::try_from(v).map_err(|_| Error::InvalidData("dataset too large for HSB".into()));
        Ok(Self {
            rows: 1,
            cols: too_big(ds.sample_count())?,
            bands: too_big(ds.dim())?,
            values: ds.features().as_slice().to_vec(),
            labels,
        })
    }
}

pub fn load_hsb(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    HsbCube::decode(&bytes)
        .and_then(|cube| cube.to_dataset())
        .map_err(|e| e.context(path.display().to_string()))
}

pub fn save_hsb(ds: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let cube = HsbCube::from_dataset(ds)?;
    fs::write(path, cube.encode()).map_err(|e| Error::io(path, e))
}

/// Per-class random sampling protocol: `train_per_class` samples of every
/// class go to training, the rest to testing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_per_class: usize,
    pub seed: u64,
}

/// Column indices of a split, each list ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn split_indices(ds: &LabeledDataset, spec: &SplitSpec) -> Result<SplitIndices> {
    let k = spec.train_per_class;
    if k == 0 {
        return Err(Error::InvalidArgument("train_per_class must be at least 1".into()));
    }
    let by_class = ds.class_indices();
    if let Some((c, members)) = by_class.iter().enumerate().find(|(_, m)| m.len() <= k) {
        return Err(Error::InvalidData(format!(
            "class {} has {} samples; need at least {} for {} training samples",
            c + 1,
            members.len(),
            k + 1,
            k
        )));
    }
    let mut rng = rng::seeded(spec.seed);
    let mut in_train = vec![false; ds.sample_count()];
    for members in &by_class {
        // partial Fisher-Yates: the first k slots end up a uniform k-subset
        let mut pool = members.clone();
        for i in 0..k {
            let j = rng.random_range(i..pool.len());
            pool.swap(i, j);
            in_train[pool[i]] = true;
        }
    }
    let (train, test): (Vec<usize>, Vec<usize>) = (0..ds.sample_count()).partition(|&j| in_train[j]);
    Ok(SplitIndices { train, test })
}

pub fn split_per_class(ds: &LabeledDataset, spec: &SplitSpec) -> Result<(LabeledDataset, LabeledDataset)> {
    let idx = split_indices(ds, spec)?;
    Ok((ds.select(&idx.train)?, ds.select(&idx.test)?))
}

/// Per-band mean and population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizeStats {
    pub mean: DVector<f64>,
    pub std: DVector<f64>,
}

impl StandardizeStats {
    pub fn compute(features: &DMatrix<f64>) -> Self {
        let p = features.ncols().max(1) as f64;
        let mean = features.column_mean();
        let std = DVector::from_iterator(
            features.nrows(),
            features.row_iter().enumerate().map(|(b, row)| {
                let var = row.iter().map(|v| (v - mean[b]).powi(2)).sum::<f64>() / p;
                var.sqrt()
            }),
        );
        Self { mean, std }
    }

    fn check(&self, features: &DMatrix<f64>) -> Result<()> {
        if self.mean.len() != features.nrows() || self.std.len() != features.nrows() {
            return Err(Error::mismatch(
                format!("{} bands", self.mean.len()),
                format!("{} bands", features.nrows()),
            ));
        }
        Ok(())
    }

    pub fn apply(&self, features: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check(features)?;
        let mut out = features.clone();
        for (b, mut row) in out.row_iter_mut().enumerate() {
            if self.std[b] > 0.0 {
                row.apply(|v| *v = (*v - self.mean[b]) / self.std[b]);
            }
        }
        Ok(out)
    }

    pub fn invert(&self, features: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check(features)?;
        let mut out = features.clone();
        for (b, mut row) in out.row_iter_mut().enumerate() {
            if self.std[b] > 0.0 {
                row.apply(|v| *v = *v * self.std[b] + self.mean[b]);
            }
        }
        Ok(out)
    }
}

/// Z-scores every band with `stats`, or with statistics computed from `ds`
/// when none are supplied. Constant bands pass through unscaled.
pub fn standardize(
    ds: &LabeledDataset,
    stats: Option<&StandardizeStats>,
) -> Result<(LabeledDataset, StandardizeStats)> {
    let stats = match stats {
        Some(s) => s.clone(),
        None => StandardizeStats::compute(ds.features()),
    };
    let features = stats.apply(ds.features())?;
    Ok((ds.with_features(features)?, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds_from(cols: &[&[f64]], labels: &[usize]) -> LabeledDataset {
        let n = cols[0].len();
        let flat: Vec<f64> = cols.iter().flat_map(|c| c.iter().copied()).collect();
        let c = *labels.iter().max().unwrap();
        LabeledDataset::new(DMatrix::from_column_slice(n, cols.len(), &flat), labels.to_vec(), c).unwrap()
    }

    #[test]
    fn csv_basic() {
        let ds = parse_csv("0,0,1\n1,0,1\n0,1,2\n1,1,2\n").unwrap();
        assert_eq!((ds.dim(), ds.sample_count(), ds.class_count()), (2, 4, 2));
        assert_eq!(ds.labels(), &[1, 1, 2, 2]);
        assert_eq!(ds.features()[(1, 2)], 1.0);
    }

    #[test]
    fn csv_malformed_names_line() {
        let err = parse_csv("0,0,1\n1,x,2\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_csv("0,0,1\n1,2\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_csv("0,0,1.5\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn csv_label_remap() {
        let ds = parse_csv("0.5,7\n1.5,3\n2.5,7\n").unwrap();
        assert_eq!(ds.labels(), &[2, 1, 2]);
        assert_eq!(ds.label_map(), &[3, 7]);
    }

    #[test]
    fn csv_empty_and_single_class() {
        assert!(matches!(parse_csv(""), Err(Error::Format(_))));
        assert!(matches!(parse_csv("1,1\n2,1\n"), Err(Error::InvalidData(_))));
    }

    #[test]
    fn csv_round_trip() {
        let ds = parse_csv("0.1,-2,3\n1e-3,4,9\n").unwrap();
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        let back = parse_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, ds);
    }

    fn cube_2x2x3() -> HsbCube {
        HsbCube {
            rows: 2,
            cols: 2,
            bands: 3,
            values: (0..12).map(|v| v as f64).collect(),
            labels: vec![1, 0, 2, 1],
        }
    }

    #[test]
    fn hsb_drops_background() {
        let bytes = cube_2x2x3().encode();
        let ds = HsbCube::decode(&bytes).unwrap().to_dataset().unwrap();
        assert_eq!((ds.sample_count(), ds.dim(), ds.class_count()), (3, 3, 2));
        assert_eq!(ds.features().column(1).as_slice(), &[6.0, 7.0, 8.0]);
        assert_eq!(ds.labels(), &[1, 2, 1]);
    }

    #[test]
    fn hsb_errors() {
        assert!(matches!(HsbCube::decode(b"XSB1aaaaaaaaaaaa"), Err(Error::Format(m)) if m.contains("magic")));
        let mut ten = HSB_MAGIC.to_vec();
        ten.extend_from_slice(&[1, 0, 0, 0, 1, 0]);
        assert!(matches!(HsbCube::decode(&ten), Err(Error::Format(m)) if m.contains("truncated")));
        let mut bytes = cube_2x2x3().encode();
        bytes.pop();
        assert!(matches!(HsbCube::decode(&bytes), Err(Error::Format(m)) if m.contains("truncated")));
        let mut bytes = cube_2x2x3().encode();
        bytes.push(0);
        assert!(HsbCube::decode(&bytes).is_err());
        let mut cube = cube_2x2x3();
        cube.labels = vec![0; 4];
        assert!(matches!(cube.to_dataset(), Err(Error::InvalidData(m)) if m.contains("no labeled pixels")));
    }

    #[test]
    fn split_counts() {
        let mut cols = Vec::new();
        let mut labels = Vec::new();
        for j in 0..60 {
            cols.push(vec![j as f64]);
            labels.push(if j < 30 { 1 } else { 2 });
        }
        let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        let ds = ds_from(&refs, &labels);
        let (train, test) = split_per_class(&ds, &SplitSpec { train_per_class: 10, seed: 3 }).unwrap();
        assert_eq!(train.sample_count(), 20);
        assert_eq!(test.sample_count(), 40);
        assert_eq!(train.class_sizes(), vec![10, 10]);

        assert!(split_indices(&ds, &SplitSpec { train_per_class: 30, seed: 3 }).is_err());

        let a = split_indices(&ds, &SplitSpec { train_per_class: 10, seed: 9 }).unwrap();
        let b = split_indices(&ds, &SplitSpec { train_per_class: 10, seed: 9 }).unwrap();
        assert_eq!(a, b);
        let c = split_indices(&ds, &SplitSpec { train_per_class: 10, seed: 10 }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn standardize_rules() {
        let ds = ds_from(&[&[0.0, 5.0], &[2.0, 5.0], &[1.0, 5.0]], &[1, 2, 1]);
        let (out, stats) = standardize(&ds, None).unwrap();
        assert_eq!(stats.mean[0], 1.0);
        assert!((stats.std[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(stats.std[1], 0.0);
        assert_eq!(out.features().row(1).iter().copied().collect::<Vec<_>>(), vec![5.0; 3]);

        let two = ds_from(&[&[0.0], &[2.0]], &[1, 2]);
        let (z, s) = standardize(&two, None).unwrap();
        assert_eq!((s.mean[0], s.std[0]), (1.0, 1.0));
        assert_eq!(z.features().as_slice(), &[-1.0, 1.0]);

        let back = stats.invert(out.features()).unwrap();
        for (a, b) in back.iter().zip(ds.features().iter()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }

        let wrong = StandardizeStats {
            mean: DVector::zeros(3),
            std: DVector::from_element(3, 1.0),
        };
        assert!(matches!(standardize(&ds, Some(&wrong)), Err(Error::DimensionMismatch { .. })));
    }
}
