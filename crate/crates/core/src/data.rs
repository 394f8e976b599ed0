//! Datasets: CSV input/output, seeded splits, and the synthetic two-variety
//! benchmark.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{check_dim, Error, Result};
use crate::linalg::Columns;

/// Labelled samples. Labels are `0..k`; `label_names[c]` is the original
/// spelling of class `c`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
    pub feature_names: Vec<String>,
    pub label_names: Vec<String>,
}

impl Dataset {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<usize>) -> Result<Self> {
        check_dim(x.len(), y.len())?;
        let n = x.first().map_or(0, Vec::len);
        for row in &x {
            check_dim(n, row.len())?;
        }
        let k = y.iter().max().map_or(0, |&c| c + 1);
        Ok(Dataset {
            x,
            y,
            feature_names: (1..=n).map(|i| format!("x{i}")).collect(),
            label_names: (0..k).map(|c| c.to_string()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn num_classes(&self) -> usize {
        self.label_names.len()
    }

    pub fn columns(&self) -> Result<Columns> {
        Columns::from_rows(&self.x)
    }

    /// The rows at `indices`, in that order, with names carried over.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            x: indices.iter().map(|&i| self.x[i].clone()).collect(),
            y: indices.iter().map(|&i| self.y[i]).collect(),
            feature_names: self.feature_names.clone(),
            label_names: self.label_names.clone(),
        }
    }

    /// Rows of class `c`.
    pub fn class_rows(&self, c: usize) -> Vec<Vec<f64>> {
        self.x
            .iter()
            .zip(&self.y)
            .filter(|(_, &l)| l == c)
            .map(|(r, _)| r.clone())
            .collect()
    }
}

/// Which column of a CSV file holds the label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LabelColumn {
    Last,
    Index(usize),
    Name(String),
}

impl LabelColumn {
    /// A header name if one matches, otherwise a zero-based index.
    pub fn parse(spec: &str) -> Self {
        match spec.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(spec.to_string()),
        }
    }

    fn resolve(&self, headers: &csv::StringRecord, path: &Path) -> Result<usize> {
        let missing = |what: String| Error::Parse {
            path: path.to_path_buf(),
            row: 1,
            column: what,
            message: "label column not found".into(),
        };
        match self {
            LabelColumn::Last if headers.is_empty() => Err(missing("<last>".into())),
            LabelColumn::Last => Ok(headers.len() - 1),
            LabelColumn::Index(i) => {
                // A header literally named like the index wins.
                if let Some(p) = headers.iter().position(|h| h.trim() == i.to_string()) {
                    return Ok(p);
                }
                (*i < headers.len())
                    .then_some(*i)
                    .ok_or_else(|| missing(i.to_string()))
            }
            LabelColumn::Name(name) => headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| missing(name.clone())),
        }
    }
}

fn open_csv(path: &Path) -> Result<(csv::Reader<std::fs::File>, csv::StringRecord)> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let headers = reader.headers()?.clone();
    Ok((reader, headers))
}

/// The `features` columns as numbers and the `label` column as text.
fn read_rows(
    mut reader: csv::Reader<std::fs::File>,
    headers: &csv::StringRecord,
    path: &Path,
    features: &[usize],
    label: Option<usize>,
) -> Result<(Vec<Vec<f64>>, Vec<String>)> {
    let mut x = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in reader.records().enumerate() {
        // Row numbers are 1-based and count the header.
        let row = r + 2;
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row,
                column: format!("{}", record.len()),
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        let mut values = Vec::with_capacity(features.len());
        for &c in features {
            let cell = &record[c];
            match cell.trim().parse::<f64>().ok().filter(|v| v.is_finite()) {
                Some(v) => values.push(v),
                None => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        row,
                        column: headers[c].trim().to_string(),
                        message: format!("'{cell}' is not a finite number"),
                    })
                }
            }
        }
        if let Some(c) = label {
            labels.push(record[c].trim().to_string());
        }
        x.push(values);
    }
    Ok((x, labels))
}

/// Read a header + rows CSV file. Feature cells must be finite numbers;
/// labels are arbitrary strings, numbered by first appearance.
pub fn load_csv(path: impl AsRef<Path>, label: &LabelColumn) -> Result<Dataset> {
    let path = path.as_ref();
    let (reader, headers) = open_csv(path)?;
    let label_col = label.resolve(&headers, path)?;
    let features: Vec<usize> = (0..headers.len()).filter(|&i| i != label_col).collect();
    let feature_names = features
        .iter()
        .map(|&i| headers[i].trim().to_string())
        .collect();
    let (x, raw_labels) = read_rows(reader, &headers, path, &features, Some(label_col))?;

    let mut label_names: Vec<String> = Vec::new();
    let mut label_ids: HashMap<String, usize> = HashMap::new();
    let y = raw_labels
        .into_iter()
        .map(|name| {
            *label_ids.entry(name.clone()).or_insert_with(|| {
                label_names.push(name);
                label_names.len() - 1
            })
        })
        .collect();
    Ok(Dataset {
        x,
        y,
        feature_names,
        label_names,
    })
}

/// Feature rows with their labels, if the file has a label column.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTable {
    pub x: Vec<Vec<f64>>,
    pub labels: Option<Vec<String>>,
}

/// Rows of the named feature columns, in the given order, plus the label
/// column if there is one: `label` when given, otherwise the only column
/// that is not a feature.
pub fn load_features(
    path: impl AsRef<Path>,
    feature_names: &[String],
    label: Option<&LabelColumn>,
) -> Result<FeatureTable> {
    let path = path.as_ref();
    let (reader, headers) = open_csv(path)?;
    let features = feature_names
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    row: 1,
                    column: name.clone(),
                    message: "feature column not found".into(),
                })
        })
        .collect::<Result<Vec<usize>>>()?;
    let label_col = match label {
        Some(spec) => Some(spec.resolve(&headers, path)?),
        None => {
            let rest: Vec<usize> = (0..headers.len())
                .filter(|i| !features.contains(i))
                .collect();
            (rest.len() == 1).then(|| rest[0])
        }
    };
    let (x, labels) = read_rows(reader, &headers, path, &features, label_col)?;
    Ok(FeatureTable {
        x,
        labels: label_col.map(|_| labels),
    })
}

/// Write `ds` as CSV with the label in a trailing `label` column, using the
/// original label spellings.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_csv_to(ds, file)
}

pub fn write_csv_to<W: std::io::Write>(ds: &Dataset, w: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    let mut header = ds.feature_names.clone();
    header.push("label".into());
    writer.write_record(&header)?;
    for (row, &label) in ds.x.iter().zip(&ds.y) {
        let mut record: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        record.push(ds.label_names[label].clone());
        writer.write_record(&record)?;
    }
    writer.flush().map_err(|source| Error::Io {
        path: "<csv output>".into(),
        source,
    })?;
    Ok(())
}

/// Shuffle with `seed` and cut after `floor(fraction * m)` rows.
pub fn split(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Parameter(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = (train_fraction * ds.len() as f64).floor() as usize;
    Ok((ds.subset(&idx[..cut]), ds.subset(&idx[cut..])))
}

/// `m` rows chosen by a seeded shuffle.
pub fn sample(ds: &Dataset, m: usize, seed: u64) -> Result<Dataset> {
    if m > ds.len() {
        return Err(Error::Parameter(format!(
            "cannot sample {m} of {} rows",
            ds.len()
        )));
    }
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(ds.subset(&idx[..m]))
}

/// `k` seeded folds of near-equal size; returns the row indices of each.
pub fn folds(m: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..m).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = vec![Vec::new(); k.max(1)];
    for (pos, i) in idx.into_iter().enumerate() {
        out[pos % k.max(1)].push(i);
    }
    out
}

/// Two noisy varieties in three variables, `m_per_class` points each:
///
/// * class 0: `x1^2 + 0.01 x2 + x3^2 = 1`, sampled as `x1 ~ U[-1, 1]`,
///   `x2 ~ U[0, 1]` (redrawn while `x1^2 + 0.01 x2 > 1`),
///   `x3 = ±sqrt(1 - x1^2 - 0.01 x2)` with a random sign;
/// * class 1: `x1^2 + x3^2 = 1.3`, sampled as `(x1, x3) = sqrt(1.3) (cos t,
///   sin t)` with `t ~ U[0, 2 pi)` and `x2 ~ U[0, 1]`.
///
/// Every coordinate then gets independent `N(0, noise_std^2)` noise. Class 0
/// rows come first.
pub fn generate_synthetic(m_per_class: usize, noise_std: f64, seed: u64) -> Result<Dataset> {
    if m_per_class == 0 {
        return Err(Error::Parameter("need at least one point per class".into()));
    }
    if !(noise_std >= 0.0) || !noise_std.is_finite() {
        return Err(Error::Parameter(format!(
            "noise std must be nonnegative, got {noise_std}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_std).map_err(|e| Error::Parameter(e.to_string()))?;
    let mut x = Vec::with_capacity(2 * m_per_class);
    let mut y = Vec::with_capacity(2 * m_per_class);
    for _ in 0..m_per_class {
        // Redraw the rare (x1, x2) with x1^2 + 0.01 x2 > 1, which have no
        // point on the surface.
        let (x1, x2) = loop {
            let x1: f64 = rng.random_range(-1.0..=1.0);
            let x2: f64 = rng.random_range(0.0..=1.0);
            if x1 * x1 + 0.01 * x2 <= 1.0 {
                break (x1, x2);
            }
        };
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let x3 = sign * (1.0 - x1 * x1 - 0.01 * x2).max(0.0).sqrt();
        x.push(vec![x1, x2, x3]);
        y.push(0);
    }
    let r = 1.3f64.sqrt();
    for _ in 0..m_per_class {
        let t: f64 = rng.random_range(0.0..2.0 * PI);
        let x2: f64 = rng.random_range(0.0..=1.0);
        x.push(vec![r * t.cos(), x2, r * t.sin()]);
        y.push(1);
    }
    if noise_std > 0.0 {
        for row in &mut x {
            for v in row.iter_mut() {
                *v += noise.sample(&mut rng);
            }
        }
    }
    Dataset::new(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_three_rows() {
        let f = write_tmp("a,b,label\n1,2,x\n3,4,y\n5,6,x\n");
        let ds = load_csv(f.path(), &LabelColumn::Last).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.num_features(), 2);
        assert_eq!(ds.y, vec![0, 1, 0]);
        assert_eq!(ds.label_names, vec!["x", "y"]);
    }

    #[test]
    fn remaps_labels_by_first_appearance() {
        let f = write_tmp("class,f\n7,0.1\n3,0.2\n7,0.3\n");
        let ds = load_csv(f.path(), &LabelColumn::Name("class".into())).unwrap();
        assert_eq!(ds.y, vec![0, 1, 0]);
        assert_eq!(ds.label_names, vec!["7", "3"]);
        assert_eq!(ds.feature_names, vec!["f"]);
        let by_index = load_csv(f.path(), &LabelColumn::Index(0)).unwrap();
        assert_eq!(by_index, ds);
    }

    #[test]
    fn bad_cell_names_row_and_column() {
        let f = write_tmp("a,b,label\n1,2,0\n1,abc,1\n");
        let err = load_csv(f.path(), &LabelColumn::Last).unwrap_err();
        match err {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "b");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn ragged_rows_and_missing_label_column_fail() {
        let f = write_tmp("a,b,label\n1,2,0\n1,1\n");
        assert!(matches!(
            load_csv(f.path(), &LabelColumn::Last),
            Err(Error::Parse { row: 3, .. })
        ));
        let f = write_tmp("a,b\n1,2\n");
        assert!(matches!(
            load_csv(f.path(), &LabelColumn::Name("label".into())),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            load_csv(f.path(), &LabelColumn::Index(5)),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_csv("/nonexistent/file.csv", &LabelColumn::Last),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let ds = generate_synthetic(5, 0.05, 3).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_csv(&ds, f.path()).unwrap();
        let back = load_csv(f.path(), &LabelColumn::Name("label".into())).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn split_sizes_floor_the_train_part() {
        let ds = Dataset::new((0..10).map(|i| vec![i as f64]).collect(), vec![0; 10]).unwrap();
        let (tr, te) = split(&ds, 0.6, 1).unwrap();
        assert_eq!((tr.len(), te.len()), (6, 4));
        let five = ds.subset(&[0, 1, 2, 3, 4]);
        let (tr, te) = split(&five, 0.6, 1).unwrap();
        assert_eq!((tr.len(), te.len()), (3, 2));
        assert!(split(&ds, 1.0, 0).is_err());
    }

    #[test]
    fn split_is_seeded_and_preserves_rows() {
        let ds = generate_synthetic(20, 0.1, 9).unwrap();
        let a = split(&ds, 0.6, 42).unwrap();
        let b = split(&ds, 0.6, 42).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<(String, usize)> =
            a.0.x
                .iter()
                .chain(&a.1.x)
                .zip(a.0.y.iter().chain(&a.1.y))
                .map(|(r, &l)| (format!("{r:?}"), l))
                .collect();
        let mut orig: Vec<(String, usize)> =
            ds.x.iter()
                .zip(&ds.y)
                .map(|(r, &l)| (format!("{r:?}"), l))
                .collect();
        all.sort();
        orig.sort();
        assert_eq!(all, orig);
    }

    #[test]
    fn noiseless_points_lie_on_their_varieties() {
        let ds = generate_synthetic(500, 0.0, 11).unwrap();
        for (r, &l) in ds.x.iter().zip(&ds.y) {
            let res = if l == 0 {
                r[0] * r[0] + 0.01 * r[1] + r[2] * r[2] - 1.0
            } else {
                r[0] * r[0] + r[2] * r[2] - 1.3
            };
            assert!(res.abs() <= 1e-12, "class {l} residual {res}");
        }
        assert_eq!(ds.class_rows(0).len(), 500);
        assert_eq!(ds.class_rows(1).len(), 500);
    }

    #[test]
    fn generator_is_deterministic() {
        assert_eq!(
            generate_synthetic(10, 0.05, 5).unwrap(),
            generate_synthetic(10, 0.05, 5).unwrap()
        );
        assert_ne!(
            generate_synthetic(10, 0.05, 5).unwrap(),
            generate_synthetic(10, 0.05, 6).unwrap()
        );
    }

    #[test]
    fn folds_partition_rows() {
        let f = folds(10, 3, 1);
        let mut all: Vec<usize> = f.concat();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(f.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 3, 3]);
    }

    #[test]
    fn load_features_picks_columns_by_name() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "b,class,a\n1,x,2\n3,y,4\n").unwrap();
        let names = vec!["a".to_string(), "b".to_string()];
        let t = load_features(&path, &names, None).unwrap();
        assert_eq!(t.x, vec![vec![2.0, 1.0], vec![4.0, 3.0]]);
        assert_eq!(t.labels.unwrap(), vec!["x", "y"]);
        assert!(load_features(&path, &names[..1], None)
            .unwrap()
            .labels
            .is_none());
        let t = load_features(&path, &names[..1], Some(&LabelColumn::parse("class"))).unwrap();
        assert_eq!(t.labels.unwrap(), vec!["x", "y"]);
        let missing = load_features(&path, &["c".to_string()], None).unwrap_err();
        assert!(matches!(missing, Error::Parse { row: 1, ref column, .. } if column == "c"));
    }
}
