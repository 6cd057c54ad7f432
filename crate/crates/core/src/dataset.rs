//! Tabular data loading, encoding, and reproducible train/validation splits.
//!
//! The sensitive attribute is carried as per-row metadata and excluded from
//! the feature matrix unless explicitly re-included. Categorical features are
//! one-hot encoded with lexicographically sorted levels so that two loads of
//! the same file produce byte-identical matrices.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Cell values treated as missing in numeric columns.
const MISSING_TOKENS: [&str; 4] = ["", "?", "NA", "NaN"];
/// Category assigned to missing values in categorical columns.
const MISSING_CATEGORY: &str = "__missing__";

/// An encoded binary-classification dataset with group metadata.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: Matrix,
    pub feature_names: Vec<String>,
    /// Labels in {0,1}.
    pub labels: Vec<u8>,
    /// Group id per row, in [0, group_count).
    pub sensitive: Vec<usize>,
    /// Original category name per group id.
    pub group_names: Vec<String>,
}

impl Dataset {
    pub fn rows(&self) -> usize {
        self.labels.len()
    }

    pub fn group_count(&self) -> usize {
        self.group_names.len()
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.group_count()];
        for &g in &self.sensitive {
            sizes[g] += 1;
        }
        sizes
    }

    /// Checks the structural invariants; used by constructors and tests.
    pub fn validate(&self) -> Result<()> {
        let n = self.rows();
        if self.features.rows() != n || self.sensitive.len() != n {
            return Err(Error::LengthMismatch(
                "features, labels, sensitive must have equal row counts".into(),
            ));
        }
        if self.labels.iter().any(|&y| y > 1) {
            return Err(Error::NonBinaryLabel {
                col: "<labels>".into(),
                values: vec![],
            });
        }
        for (g, &size) in self.group_sizes().iter().enumerate() {
            if size == 0 {
                return Err(Error::EmptyGroup { group: g });
            }
        }
        Ok(())
    }

    fn take_rows(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(idx),
            feature_names: self.feature_names.clone(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            sensitive: idx.iter().map(|&i| self.sensitive[i]).collect(),
            group_names: self.group_names.clone(),
        }
    }
}

/// A stratified train/validation partition of a source dataset.
#[derive(Debug, Clone)]
pub struct SplitDataset {
    pub train: Dataset,
    pub val: Dataset,
    pub seed: u64,
    pub val_fraction: f64,
}

/// Options controlling CSV ingestion.
#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    pub label_col: String,
    pub sensitive_col: String,
    pub categorical_cols: Vec<String>,
    /// Raw label value mapped to 1; when unset the label column must already
    /// hold numeric 0/1 values.
    pub positive_label: Option<String>,
    /// Re-include the sensitive column (one-hot) in the feature matrix.
    pub include_sensitive: bool,
}

fn is_missing(cell: &str) -> bool {
    MISSING_TOKENS.iter().any(|t| t.eq_ignore_ascii_case(cell)) || cell.trim().is_empty()
}

/// Load a CSV with a header row into an encoded [`Dataset`].
///
/// Categorical columns are one-hot encoded (`col=value` feature names);
/// every other non-label, non-sensitive column must parse as a real number.
/// Missing numeric cells become NaN placeholders and are imputed by
/// [`split`] from training-column means.
pub fn load_csv(path: &Path, opts: &CsvOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.to_string()).collect();
    let col_index = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let label_idx = col_index(&opts.label_col)?;
    let sensitive_idx = col_index(&opts.sensitive_col)?;
    for c in &opts.categorical_cols {
        col_index(c)?;
    }

    let mut records: Vec<Vec<String>> = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        records.push(rec.iter().map(|c| c.to_string()).collect());
    }
    if records.is_empty() {
        return Err(Error::LengthMismatch("no data rows in csv".into()));
    }

    // Sensitive column: group ids from sorted distinct raw values.
    let mut group_names: Vec<String> = records
        .iter()
        .map(|r| {
            let v = r[sensitive_idx].as_str();
            if is_missing(v) {
                MISSING_CATEGORY.to_string()
            } else {
                v.to_string()
            }
        })
        .collect();
    group_names.sort();
    group_names.dedup();
    if group_names.len() < 2 {
        return Err(Error::TooFewGroups {
            col: opts.sensitive_col.clone(),
        });
    }
    let group_id = |raw: &str| -> usize {
        let key = if is_missing(raw) { MISSING_CATEGORY } else { raw };
        group_names.iter().position(|g| g == key).unwrap()
    };
    let sensitive: Vec<usize> = records.iter().map(|r| group_id(&r[sensitive_idx])).collect();

    // Labels.
    let mut distinct_labels: Vec<String> = records.iter().map(|r| r[label_idx].clone()).collect();
    distinct_labels.sort();
    distinct_labels.dedup();
    let labels: Vec<u8> = match &opts.positive_label {
        Some(pos) => {
            if distinct_labels.len() > 2 || !distinct_labels.iter().any(|v| v == pos) {
                return Err(Error::NonBinaryLabel {
                    col: opts.label_col.clone(),
                    values: distinct_labels,
                });
            }
            records
                .iter()
                .map(|r| u8::from(&r[label_idx] == pos))
                .collect()
        }
        None => {
            let mut out = Vec::with_capacity(records.len());
            for r in &records {
                match r[label_idx].trim() {
                    "0" => out.push(0),
                    "1" => out.push(1),
                    _ => {
                        return Err(Error::NonBinaryLabel {
                            col: opts.label_col.clone(),
                            values: distinct_labels,
                        })
                    }
                }
            }
            out
        }
    };
    if labels.iter().all(|&y| y == 0) || labels.iter().all(|&y| y == 1) {
        return Err(Error::NonBinaryLabel {
            col: opts.label_col.clone(),
            values: distinct_labels,
        });
    }

    // Feature columns, in header order.
    let mut feature_names: Vec<String> = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for (ci, name) in headers.iter().enumerate() {
        if ci == label_idx {
            continue;
        }
        if ci == sensitive_idx && !opts.include_sensitive {
            continue;
        }
        let categorical =
            opts.categorical_cols.iter().any(|c| c == name) || ci == sensitive_idx;
        if categorical {
            let mut levels: Vec<String> = records
                .iter()
                .map(|r| {
                    let v = r[ci].as_str();
                    if is_missing(v) {
                        MISSING_CATEGORY.to_string()
                    } else {
                        v.to_string()
                    }
                })
                .collect();
            levels.sort();
            levels.dedup();
            for level in &levels {
                feature_names.push(format!("{name}={level}"));
                columns.push(
                    records
                        .iter()
                        .map(|r| {
                            let v = r[ci].as_str();
                            let key = if is_missing(v) { MISSING_CATEGORY } else { v };
                            f64::from(key == level)
                        })
                        .collect(),
                );
            }
        } else {
            feature_names.push(name.clone());
            let mut col = Vec::with_capacity(records.len());
            for (ri, r) in records.iter().enumerate() {
                let cell = r[ci].as_str();
                if is_missing(cell) {
                    col.push(f64::NAN);
                } else {
                    let v: f64 = cell.trim().parse().map_err(|_| Error::BadNumericCell {
                        row: ri + 1,
                        col: name.clone(),
                        value: cell.to_string(),
                    })?;
                    col.push(v);
                }
            }
            columns.push(col);
        }
    }

    let rows: Vec<Vec<f64>> = (0..records.len())
        .map(|r| columns.iter().map(|c| c[r]).collect())
        .collect();
    let d = Dataset {
        features: Matrix::from_rows(&rows),
        feature_names,
        labels,
        sensitive,
        group_names,
    };
    d.validate()?;
    Ok(d)
}

/// Deterministic stratified split by (label, group) cells.
///
/// The validation side receives `round(val_fraction * rows)` rows, allocated
/// across cells by largest remainder; both sides are guaranteed to contain
/// every sensitive group. Missing numeric values (NaN) are imputed with the
/// training-split column mean in both splits.
pub fn split(d: &Dataset, val_fraction: f64, seed: u64) -> Result<SplitDataset> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::BadValFraction(val_fraction));
    }
    let n = d.rows();
    if n < 2 * d.group_count() || d.group_sizes().iter().any(|&s| s < 2) {
        return Err(Error::SplitTooSmall);
    }

    // Cells keyed (label, group) in sorted order for determinism.
    let mut cells: BTreeMap<(u8, usize), Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        cells.entry((d.labels[i], d.sensitive[i])).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for idx in cells.values_mut() {
        idx.shuffle(&mut rng);
    }

    let target_val = ((val_fraction * n as f64).round() as usize).clamp(1, n - 1);
    // Largest-remainder allocation of the validation quota over cells.
    let mut quotas: Vec<((u8, usize), usize, f64)> = cells
        .iter()
        .map(|(&key, idx)| {
            let exact = val_fraction * idx.len() as f64;
            (key, exact.floor() as usize, exact - exact.floor())
        })
        .collect();
    let mut assigned: usize = quotas.iter().map(|q| q.1).sum();
    let mut by_rem = quotas.clone();
    by_rem.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then(a.0.cmp(&b.0)));
    let mut k = 0;
    while assigned < target_val && k < by_rem.len() {
        let key = by_rem[k].0;
        let q = quotas.iter_mut().find(|q| q.0 == key).unwrap();
        if q.1 < cells[&key].len() {
            q.1 += 1;
            assigned += 1;
        }
        k += 1;
        if k == by_rem.len() && assigned < target_val {
            k = 0; // cells saturated; sweep again (rare, tiny datasets)
        }
    }
    while assigned > target_val {
        // Over-allocation can only come from the clamp; trim deterministically.
        let q = quotas.iter_mut().rev().find(|q| q.1 > 0).unwrap();
        q.1 -= 1;
        assigned -= 1;
    }

    let mut val_idx: Vec<usize> = Vec::new();
    let mut train_idx: Vec<usize> = Vec::new();
    for (key, nv, _) in &quotas {
        let idx = &cells[key];
        val_idx.extend_from_slice(&idx[..*nv]);
        train_idx.extend_from_slice(&idx[*nv..]);
    }

    // Enforce the all-groups invariant on both sides.
    for g in 0..d.group_count() {
        let in_val = val_idx.iter().any(|&i| d.sensitive[i] == g);
        let in_train = train_idx.iter().any(|&i| d.sensitive[i] == g);
        if !in_val {
            let pos = train_idx
                .iter()
                .position(|&i| d.sensitive[i] == g)
                .ok_or(Error::SplitTooSmall)?;
            val_idx.push(train_idx.remove(pos));
        } else if !in_train {
            let pos = val_idx
                .iter()
                .position(|&i| d.sensitive[i] == g)
                .ok_or(Error::SplitTooSmall)?;
            train_idx.push(val_idx.remove(pos));
        }
        if train_idx.is_empty() || val_idx.is_empty() {
            return Err(Error::SplitTooSmall);
        }
    }
    train_idx.sort_unstable();
    val_idx.sort_unstable();

    let mut train = d.take_rows(&train_idx);
    let mut val = d.take_rows(&val_idx);
    // Impute missing numerics from training-column means only.
    for c in 0..train.features.cols() {
        let mean = train.features.column_mean_ignoring_nan(c);
        for part in [&mut train, &mut val] {
            for r in 0..part.features.rows() {
                if part.features.get(r, c).is_nan() {
                    part.features.set(r, c, mean);
                }
            }
        }
    }
    train.validate()?;
    val.validate()?;
    Ok(SplitDataset {
        train,
        val,
        seed,
        val_fraction,
    })
}

/// Two-group synthetic fixture whose label base rates differ by `bias`.
///
/// Features are informative of the label and independent of the group given
/// the label, so an accurate unconstrained classifier exhibits a
/// demographic-parity difference near `bias * (tpr - fpr)`.
pub fn make_synthetic_biased(n: usize, bias: f64, seed: u64) -> Result<Dataset> {
    if n < 100 {
        return Err(Error::SyntheticTooSmall(n));
    }
    if !(0.0..=1.0).contains(&bias) {
        return Err(Error::BadBias(bias));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut sensitive = Vec::with_capacity(n);
    for i in 0..n {
        // First four rows pin two members per group so splits always work.
        let g = if i < 4 { i % 2 } else { usize::from(rng.gen_bool(0.5)) };
        let base_rate = if g == 0 { 0.5 + bias / 2.0 } else { 0.5 - bias / 2.0 };
        let y = u8::from(rng.gen_bool(base_rate));
        let center = f64::from(y) * 2.0 - 1.0;
        let e1: f64 = rng.sample(StandardNormal);
        let e2: f64 = rng.sample(StandardNormal);
        let e3: f64 = rng.sample(StandardNormal);
        rows.push(vec![center + e1, center + e2, e3]);
        labels.push(y);
        sensitive.push(g);
    }
    let d = Dataset {
        features: Matrix::from_rows(&rows),
        feature_names: vec!["x1".into(), "x2".into(), "x3".into()],
        labels,
        sensitive,
        group_names: vec!["a".into(), "b".into()],
    };
    d.validate()?;
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn opts(label: &str, sensitive: &str, cats: &[&str]) -> CsvOptions {
        CsvOptions {
            label_col: label.into(),
            sensitive_col: sensitive.into(),
            categorical_cols: cats.iter().map(|s| s.to_string()).collect(),
            positive_label: None,
            include_sensitive: false,
        }
    }

    #[test]
    fn one_hot_dimensions() {
        // One categorical feature with values {a,b,c} and one numeric: 3 + 1 columns.
        let f = write_csv("cat,num,y,s\na,1.0,0,m\nb,2.0,1,f\nc,3.0,0,m\na,4.0,1,f\n");
        let d = load_csv(f.path(), &opts("y", "s", &["cat"])).unwrap();
        assert_eq!(d.features.rows(), 4);
        assert_eq!(d.features.cols(), 4);
        assert_eq!(
            d.feature_names,
            vec!["cat=a", "cat=b", "cat=c", "num"]
        );
        // One-hot block sums to 1 per row.
        for r in 0..4 {
            let s: f64 = (0..3).map(|c| d.features.get(r, c)).sum();
            assert_eq!(s, 1.0);
        }
    }

    #[test]
    fn single_group_is_rejected() {
        let f = write_csv("num,y,s\n1.0,0,m\n2.0,1,m\n");
        let err = load_csv(f.path(), &opts("y", "s", &[])).unwrap_err();
        assert!(matches!(err, Error::TooFewGroups { .. }));
    }

    #[test]
    fn positive_label_mapping() {
        let f = write_csv("num,y,s\n1.0,yes,m\n2.0,no,f\n3.0,yes,m\n");
        let mut o = opts("y", "s", &[]);
        o.positive_label = Some("yes".into());
        let d = load_csv(f.path(), &o).unwrap();
        assert_eq!(d.labels, vec![1, 0, 1]);
    }

    #[test]
    fn bad_numeric_cell_reports_position() {
        let f = write_csv("num,y,s\n1.0,0,m\nabc,1,f\n");
        let err = load_csv(f.path(), &opts("y", "s", &[])).unwrap_err();
        match err {
            Error::BadNumericCell { row, col, value } => {
                assert_eq!(row, 2);
                assert_eq!(col, "num");
                assert_eq!(value, "abc");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn missing_column_name() {
        let f = write_csv("num,y,s\n1.0,0,m\n2.0,1,f\n");
        let err = load_csv(f.path(), &opts("target", "s", &[])).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(c) if c == "target"));
    }

    #[test]
    fn loads_are_deterministic() {
        let f = write_csv("cat,num,y,s\na,1.0,0,m\nb,2.5,1,f\nc,3.0,0,m\na,4.0,1,f\n");
        let d1 = load_csv(f.path(), &opts("y", "s", &["cat"])).unwrap();
        let d2 = load_csv(f.path(), &opts("y", "s", &["cat"])).unwrap();
        assert_eq!(d1.features.raw(), d2.features.raw());
        assert_eq!(d1.group_names, d2.group_names);
    }

    #[test]
    fn include_sensitive_adds_columns() {
        let f = write_csv("num,y,s\n1.0,0,m\n2.0,1,f\n3.0,0,m\n4.0,1,f\n");
        let mut o = opts("y", "s", &[]);
        o.include_sensitive = true;
        let d = load_csv(f.path(), &o).unwrap();
        assert_eq!(d.feature_names, vec!["num", "s=f", "s=m"]);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let d = make_synthetic_biased(100, 0.0, 9).unwrap();
        let s1 = split(&d, 0.3, 7).unwrap();
        let s2 = split(&d, 0.3, 7).unwrap();
        assert_eq!(s1.val.rows(), 30);
        assert_eq!(s1.train.rows(), 70);
        assert_eq!(s1.val.labels, s2.val.labels);
        assert_eq!(s1.val.features.raw(), s2.val.features.raw());
        // Both splits contain both groups.
        for part in [&s1.train, &s1.val] {
            assert!(part.group_sizes().iter().all(|&n| n > 0));
        }
    }

    #[test]
    fn split_partitions_rows_exactly() {
        let d = make_synthetic_biased(157, 0.2, 3).unwrap();
        let s = split(&d, 0.25, 11).unwrap();
        assert_eq!(s.train.rows() + s.val.rows(), d.rows());
        // Label counts per side must add back to the source counts.
        let ones = |v: &[u8]| v.iter().filter(|&&y| y == 1).count();
        assert_eq!(ones(&s.train.labels) + ones(&s.val.labels), ones(&d.labels));
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let d = make_synthetic_biased(100, 0.0, 1).unwrap();
        assert!(matches!(split(&d, 0.0, 1), Err(Error::BadValFraction(_))));
        assert!(matches!(split(&d, 1.0, 1), Err(Error::BadValFraction(_))));
    }

    #[test]
    fn split_imputes_from_train_means() {
        let f = write_csv(
            "num,y,s\n1.0,0,m\n,1,f\n3.0,0,m\n5.0,1,f\n2.0,0,m\n4.0,1,f\n1.5,0,m\n3.5,1,f\n",
        );
        let d = load_csv(f.path(), &opts("y", "s", &[])).unwrap();
        assert!(d.features.has_nan());
        let s = split(&d, 0.25, 5).unwrap();
        assert!(!s.train.features.has_nan());
        assert!(!s.val.features.has_nan());
    }

    #[test]
    fn synthetic_too_small() {
        assert!(matches!(
            make_synthetic_biased(50, 0.3, 1),
            Err(Error::SyntheticTooSmall(50))
        ));
    }

    #[test]
    fn synthetic_has_biased_base_rates() {
        let d = make_synthetic_biased(2000, 0.3, 42).unwrap();
        let mut pos = [0.0f64; 2];
        let mut cnt = [0.0f64; 2];
        for i in 0..d.rows() {
            cnt[d.sensitive[i]] += 1.0;
            pos[d.sensitive[i]] += f64::from(d.labels[i]);
        }
        let gap = (pos[0] / cnt[0] - pos[1] / cnt[1]).abs();
        assert!((gap - 0.3).abs() < 0.06, "base-rate gap {gap}");
    }
}
