use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{indices_checksum, split_indices, Dataset, SplitSpec};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalize {
    None,
    #[default]
    Zscore,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadOptions {
    pub label_column: String,
    /// Columns to ignore even when numeric (e.g. a timestamp).
    #[serde(default)]
    pub drop_columns: Vec<String>,
    #[serde(default)]
    pub normalize: Normalize,
}

impl LoadOptions {
    pub fn new(label_column: impl Into<String>) -> Self {
        LoadOptions {
            label_column: label_column.into(),
            drop_columns: Vec::new(),
            normalize: Normalize::Zscore,
        }
    }
}

/// Per-column standardization statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZScore {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ZScore {
    /// Population mean and standard deviation per column. Constant columns
    /// get std 1 so they are centred but not scaled.
    pub fn fit(data: &Dataset) -> Result<Self> {
        let n = data.n_rows();
        if n == 0 {
            return Err(Error::Data("cannot fit normalization on an empty dataset".into()));
        }
        let d = data.n_features();
        let mut mean = vec![0.0; d];
        for i in 0..n {
            for (m, x) in mean.iter_mut().zip(data.row(i)) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; d];
        for i in 0..n {
            for ((v, x), m) in var.iter_mut().zip(data.row(i)).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let s = (v / n as f64).sqrt();
                if s > 0.0 && s.is_finite() { s } else { 1.0 }
            })
            .collect();
        Ok(ZScore { mean, std })
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        let d = data.n_features();
        if self.mean.len() != d {
            return Err(Error::Data(format!(
                "normalization fitted on {} columns, dataset has {d}",
                self.mean.len()
            )));
        }
        let features = data
            .features()
            .iter()
            .enumerate()
            .map(|(k, x)| (x - self.mean[k % d]) / self.std[k % d])
            .collect();
        let mut out = Dataset::new(features, d, data.labels().to_vec(), data.n_classes())?;
        if let Some(names) = data.feature_names() {
            out = out.with_feature_names(names.to_vec())?;
        }
        if let Some(soft) = data.soft_labels() {
            out = out.with_soft_labels(soft.to_vec())?;
        }
        Ok(out)
    }
}

/// Reads a header-first, comma-delimited table.
///
/// The label column may hold non-negative integers (used as class indices
/// directly) or arbitrary strings (sorted and numbered). A feature column is
/// kept when its first cell parses as a number; other columns are dropped
/// with a warning. After that, any cell that fails to parse is an error.
///
/// With [`Normalize::Zscore`] the statistics are fitted on the whole file;
/// use [`prepare_tabular`] to fit on a training split only.
pub fn load_csv(path: &Path, label_column: &str, normalize: Normalize) -> Result<Dataset> {
    let mut opts = LoadOptions::new(label_column);
    opts.normalize = normalize;
    let data = read_table(path, &opts)?;
    match normalize {
        Normalize::None => Ok(data),
        Normalize::Zscore => ZScore::fit(&data)?.apply(&data),
    }
}

fn read_table(path: &Path, opts: &LoadOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::io(path, std::io::Error::other(e.to_string())),
            _ => Error::Csv(e),
        })?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let label_idx = headers
        .iter()
        .position(|h| h == &opts.label_column)
        .ok_or_else(|| Error::Data(format!("{}: no label column {:?}", path.display(), opts.label_column)))?;

    let records: Vec<csv::StringRecord> = reader.records().collect::<std::result::Result<_, _>>()?;
    if records.is_empty() {
        return Err(Error::Data(format!("{}: no data rows", path.display())));
    }

    let mut keep = Vec::new();
    for (j, name) in headers.iter().enumerate() {
        if j == label_idx || opts.drop_columns.contains(name) {
            continue;
        }
        let first = records[0].get(j).unwrap_or("");
        if first.parse::<f64>().is_ok() {
            keep.push(j);
        } else {
            log::warn!("{}: dropping non-numeric column {name:?}", path.display());
        }
    }
    if keep.is_empty() {
        return Err(Error::Data(format!("{}: no numeric feature columns", path.display())));
    }

    let raw_labels: Vec<&str> = records.iter().map(|r| r.get(label_idx).unwrap_or("")).collect();
    let numeric: Option<Vec<usize>> = raw_labels.iter().map(|s| parse_class_index(s)).collect();
    let (labels, n_classes) = match numeric {
        Some(l) => {
            let n = l.iter().max().map_or(1, |m| m + 1).max(2);
            (l, n)
        }
        None => {
            let names: BTreeSet<&str> = raw_labels.iter().copied().collect();
            let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, &s)| (s, i)).collect();
            log::info!("{}: label mapping {index:?}", path.display());
            (raw_labels.iter().map(|s| index[s]).collect(), names.len().max(2))
        }
    };

    let mut features = Vec::with_capacity(records.len() * keep.len());
    for (row, record) in records.iter().enumerate() {
        for &j in &keep {
            let cell = record.get(j).unwrap_or("");
            let parse_err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                row: row + 1,
                column: headers[j].clone(),
                message,
            };
            let x: f64 = cell
                .parse()
                .map_err(|_| parse_err(format!("cannot parse {cell:?} as a number")))?;
            if !x.is_finite() {
                return Err(parse_err(format!("non-finite value {cell:?}")));
            }
            features.push(x);
        }
    }
    let names = keep.iter().map(|&j| headers[j].clone()).collect();
    Dataset::new(features, keep.len(), labels, n_classes)?.with_feature_names(names)
}

fn parse_class_index(s: &str) -> Option<usize> {
    if let Ok(v) = s.parse::<usize>() {
        return Some(v);
    }
    // "1.0" style labels
    let f: f64 = s.parse().ok()?;
    (f >= 0.0 && f.fract() == 0.0 && f < 1e9).then_some(f as usize)
}

/// Writes features plus a trailing `label` column.
pub fn save_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    let mut header: Vec<String> = match data.feature_names() {
        Some(n) => n.to_vec(),
        None => (0..data.n_features()).map(|j| format!("x{j}")).collect(),
    };
    header.push("label".into());
    w.write_record(&header)?;
    for i in 0..data.n_rows() {
        let mut rec: Vec<String> = data.row(i).iter().map(|x| format!("{x:?}")).collect();
        rec.push(data.labels()[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reproducibility record for a prepared split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub source: PathBuf,
    pub label_column: String,
    pub seed: u64,
    pub train_fraction: f64,
    pub stratified: bool,
    pub normalize: Normalize,
    pub n_rows: usize,
    pub n_features: usize,
    pub n_classes: usize,
    pub class_counts: BTreeMap<usize, usize>,
    pub train_class_counts: BTreeMap<usize, usize>,
    pub test_class_counts: BTreeMap<usize, usize>,
    pub split_checksum: String,
    pub train_checksum: String,
    pub test_checksum: String,
}

#[derive(Clone, Debug)]
pub struct PreparedData {
    pub full: Dataset,
    pub train: Dataset,
    pub test: Dataset,
    pub scaler: Option<ZScore>,
    pub manifest: DatasetManifest,
}

/// Load, split, then normalize with statistics from the training rows only.
pub fn prepare_tabular(path: &Path, opts: &LoadOptions, split: &SplitSpec) -> Result<PreparedData> {
    let full = read_table(path, opts)?;
    let (train_idx, test_idx) = split_indices(&full, split)?;
    let mut train = full.select(&train_idx);
    let mut test = full.select(&test_idx);
    let scaler = match opts.normalize {
        Normalize::None => None,
        Normalize::Zscore => {
            let z = ZScore::fit(&train)?;
            train = z.apply(&train)?;
            test = z.apply(&test)?;
            Some(z)
        }
    };
    let mut all_idx = train_idx.clone();
    all_idx.push(usize::MAX);
    all_idx.extend_from_slice(&test_idx);
    let manifest = DatasetManifest {
        source: path.to_path_buf(),
        label_column: opts.label_column.clone(),
        seed: split.seed,
        train_fraction: split.train_fraction,
        stratified: split.stratified,
        normalize: opts.normalize,
        n_rows: full.n_rows(),
        n_features: full.n_features(),
        n_classes: full.n_classes(),
        class_counts: full.class_counts().clone(),
        train_class_counts: train.class_counts().clone(),
        test_class_counts: test.class_counts().clone(),
        split_checksum: indices_checksum(&all_idx),
        train_checksum: train.checksum(),
        test_checksum: test.checksum(),
    };
    Ok(PreparedData {
        full,
        train,
        test,
        scaler,
        manifest,
    })
}
