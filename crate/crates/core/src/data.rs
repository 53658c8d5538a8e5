//! Tabular input: CSV ingestion, binary item expansion, numeric
//! discretization and cross-validation folds.
//!
//! Every feature ends up as one or more binary [`Item`] columns stored as
//! bitsets over observations. Labels are stored 0-based (`0..L`), in order of
//! first appearance in the input; `label_names[l]` recovers the original text.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bitset::Bitset;
use crate::error::{Error, Result};

/// A single binary condition on one source column.
#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    /// Categorical match; binary 0/1 columns use `Equals("1")`.
    Equals(String),
    /// `lo < x <= hi`. Bounds may be infinite for open-ended quantile bins.
    InRange { lo: f64, hi: f64 },
    /// `x >= threshold`
    AtLeast(f64),
    /// `x < threshold`
    LessThan(f64),
}

/// A named condition; the unit from which antecedents are built.
///
/// Renders as `sex=male`, `age>=50`, `age<50` or `age in (1, 2]`, and parses
/// back from the same text.
#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    feature: String,
    condition: Condition,
}

const RANGE_MARKER: &str = " in (";

fn valid_feature_name(name: &str) -> bool {
    !name.is_empty() && !name.contains(['=', '<', '>', '\n'])
}

impl Item {
    pub fn new(feature: impl Into<String>, condition: Condition) -> Result<Self> {
        let feature = feature.into();
        if !valid_feature_name(&feature) {
            return Err(Error::InvalidArgument(format!(
                "feature name `{feature}` must be nonempty and free of `=`, `<`, `>`"
            )));
        }
        match &condition {
            Condition::InRange { lo, hi } if lo.is_nan() || hi.is_nan() || lo >= hi => {
                return Err(Error::InvalidArgument(format!(
                    "range ({lo}, {hi}] for `{feature}` is empty"
                )));
            }
            Condition::AtLeast(t) | Condition::LessThan(t) if !t.is_finite() => {
                return Err(Error::InvalidArgument(format!(
                    "threshold {t} for `{feature}` is not finite"
                )));
            }
            Condition::Equals(v) if v.contains('\n') => {
                return Err(Error::InvalidArgument("category contains a newline".into()));
            }
            _ => {}
        }
        Ok(Item { feature, condition })
    }

    pub fn feature(&self) -> &str {
        &self.feature
    }

    pub fn condition(&self) -> &Condition {
        &self.condition
    }

    /// Evaluates the condition on a raw cell value; `None` when a numeric
    /// condition meets a non-numeric value.
    pub fn matches(&self, raw: &str) -> Option<bool> {
        let numeric = || raw.trim().parse::<f64>().ok();
        Some(match &self.condition {
            Condition::Equals(v) => raw == v,
            Condition::InRange { lo, hi } => {
                let x = numeric()?;
                *lo < x && x <= *hi
            }
            Condition::AtLeast(t) => numeric()? >= *t,
            Condition::LessThan(t) => numeric()? < *t,
        })
    }
}

impl fmt::Display for Item {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = &self.feature;
        match &self.condition {
            Condition::Equals(v) => write!(f, "{name}={v}"),
            Condition::InRange { lo, hi } => write!(f, "{name}{RANGE_MARKER}{lo}, {hi}]"),
            Condition::AtLeast(t) => write!(f, "{name}>={t}"),
            Condition::LessThan(t) => write!(f, "{name}<{t}"),
        }
    }
}

impl FromStr for Item {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let err = || Error::ItemParse(s.to_string());
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| err());
        if let Some(pos) = s.find(['=', '<', '>']) {
            let (name, rest) = s.split_at(pos);
            let condition = if let Some(t) = rest.strip_prefix(">=") {
                Condition::AtLeast(num(t)?)
            } else if let Some(t) = rest.strip_prefix('<') {
                Condition::LessThan(num(t)?)
            } else if let Some(v) = rest.strip_prefix('=') {
                Condition::Equals(v.to_string())
            } else {
                return Err(err());
            };
            return Item::new(name, condition).map_err(|_| err());
        }
        let pos = s.rfind(RANGE_MARKER).ok_or_else(err)?;
        let name = &s[..pos];
        let body = s[pos + RANGE_MARKER.len()..]
            .strip_suffix(']')
            .ok_or_else(err)?;
        let (lo, hi) = body.split_once(',').ok_or_else(err)?;
        Item::new(
            name,
            Condition::InRange {
                lo: num(lo)?,
                hi: num(hi)?,
            },
        )
        .map_err(|_| err())
    }
}

impl Serialize for Item {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Item {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Binary-featurized observations with labels in `0..L`.
#[derive(Debug, Clone)]
pub struct Dataset {
    items: Vec<Item>,
    columns: Vec<Bitset>,
    labels: Vec<usize>,
    label_names: Vec<String>,
    label_masks: Vec<Bitset>,
}

impl Dataset {
    pub fn from_columns(
        items: Vec<Item>,
        columns: Vec<Bitset>,
        labels: Vec<usize>,
        label_names: Vec<String>,
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::EmptyData);
        }
        if items.is_empty() {
            return Err(Error::InvalidArgument("dataset has no item columns".into()));
        }
        if items.len() != columns.len() {
            return Err(Error::SizeMismatch {
                expected: items.len(),
                found: columns.len(),
            });
        }
        if let Some(c) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::SizeMismatch {
                expected: n,
                found: c.len(),
            });
        }
        let n_labels = label_names.len();
        if n_labels < 2 {
            return Err(Error::DegenerateLabels);
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= n_labels) {
            return Err(Error::UnknownLabel(bad.to_string()));
        }
        let label_masks = (0..n_labels)
            .map(|l| Bitset::from_bools(labels.iter().map(|&y| y == l)))
            .collect();
        Ok(Dataset {
            items,
            columns,
            labels,
            label_names,
            label_masks,
        })
    }

    pub fn from_rows(
        items: Vec<Item>,
        rows: &[Vec<bool>],
        labels: Vec<usize>,
        label_names: Vec<String>,
    ) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::SizeMismatch {
                expected: labels.len(),
                found: rows.len(),
            });
        }
        if let Some(r) = rows.iter().find(|r| r.len() != items.len()) {
            return Err(Error::SizeMismatch {
                expected: items.len(),
                found: r.len(),
            });
        }
        let columns = (0..items.len())
            .map(|j| Bitset::from_bools(rows.iter().map(|r| r[j])))
            .collect();
        Self::from_columns(items, columns, labels, label_names)
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn n_labels(&self) -> usize {
        self.label_names.len()
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn column(&self, item: usize) -> &Bitset {
        &self.columns[item]
    }

    pub fn value(&self, row: usize, item: usize) -> bool {
        self.columns[item].get(row)
    }

    pub fn row(&self, row: usize) -> Vec<bool> {
        self.columns.iter().map(|c| c.get(row)).collect()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    /// Observations carrying label `l`.
    pub fn label_mask(&self, l: usize) -> &Bitset {
        &self.label_masks[l]
    }

    pub fn label_histogram(&self) -> Vec<u32> {
        self.label_masks.iter().map(|m| m.count_ones() as u32).collect()
    }

    /// Restriction to the given observations, keeping every item and label.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let columns = self.columns.iter().map(|c| c.select(indices)).collect();
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Dataset::from_columns(
            self.items.clone(),
            columns,
            labels,
            self.label_names.clone(),
        )
    }
}

/// How numeric columns become items.
#[derive(Debug, Clone, PartialEq)]
pub enum Discretization {
    /// Paired `>=t` / `<t` indicators per threshold.
    Thresholds(Vec<f64>),
    /// `k` nearest-rank quantile bins.
    Quantiles(usize),
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub label_column: String,
    pub thresholds: BTreeMap<String, Vec<f64>>,
    pub quantiles: BTreeMap<String, usize>,
    /// Columns that must contain only `0`/`1`.
    pub binary: BTreeSet<String>,
}

impl LoadOptions {
    pub fn new(label_column: impl Into<String>) -> Self {
        LoadOptions {
            label_column: label_column.into(),
            ..Default::default()
        }
    }
}

/// One derived binary column.
#[derive(Debug, Clone)]
pub struct ItemColumn {
    pub item: Item,
    pub bits: Bitset,
}

struct RawTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl RawTable {
    fn read<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers()?.iter().map(str::to_string).collect();
        let rows = rdr
            .records()
            .map(|r| r.map(|rec| rec.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
        Ok(RawTable { header, rows })
    }

    fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    fn column(&self, idx: usize) -> Result<Vec<&str>> {
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| match row.get(idx).map(String::as_str) {
                Some(v) if !v.is_empty() => Ok(v),
                _ => Err(Error::MissingValue {
                    column: self.header[idx].clone(),
                    row: r + 1,
                }),
            })
            .collect()
    }
}

fn parse_numeric(column: &str, values: &[&str]) -> Result<Vec<f64>> {
    values
        .iter()
        .enumerate()
        .map(|(r, v)| {
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::NonNumeric {
                    column: column.to_string(),
                    row: r + 1,
                    value: v.to_string(),
                })
        })
        .collect()
}

fn first_appearance<'a>(values: &[&'a str]) -> Vec<&'a str> {
    let mut seen = BTreeSet::new();
    values
        .iter()
        .copied()
        .filter(|v| seen.insert(*v))
        .collect()
}

pub fn load_csv(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    load_csv_from_reader(file, opts)
}

pub fn load_csv_from_reader<R: Read>(reader: R, opts: &LoadOptions) -> Result<Dataset> {
    let table = RawTable::read(reader)?;
    let label_idx = table
        .column_index(&opts.label_column)
        .ok_or_else(|| Error::MissingLabelColumn(opts.label_column.clone()))?;
    if table.rows.is_empty() {
        return Err(Error::EmptyData);
    }
    let raw_labels = table.column(label_idx)?;
    let label_names: Vec<String> = first_appearance(&raw_labels)
        .into_iter()
        .map(str::to_string)
        .collect();
    if label_names.len() < 2 {
        return Err(Error::DegenerateLabels);
    }
    let labels = raw_labels
        .iter()
        .map(|v| label_names.iter().position(|l| l == v).expect("label seen"))
        .collect();

    let mut items = Vec::new();
    let mut columns = Vec::new();
    for (idx, name) in table.header.iter().enumerate() {
        if idx == label_idx {
            continue;
        }
        let values = table.column(idx)?;
        let spec = if let Some(ts) = opts.thresholds.get(name) {
            Some(Discretization::Thresholds(ts.clone()))
        } else {
            opts.quantiles.get(name).map(|&q| Discretization::Quantiles(q))
        };
        if let Some(spec) = spec {
            let numeric = parse_numeric(name, &values)?;
            for col in discretize_numeric(name, &numeric, &spec)? {
                items.push(col.item);
                columns.push(col.bits);
            }
            continue;
        }

        let declared_binary = opts.binary.contains(name);
        if declared_binary {
            if let Some((r, v)) = values
                .iter()
                .enumerate()
                .find(|(_, v)| !matches!(**v, "0" | "1"))
            {
                return Err(Error::NotBinary {
                    column: name.clone(),
                    row: r + 1,
                    value: v.to_string(),
                });
            }
        }
        let distinct = first_appearance(&values);
        if distinct.len() < 2 {
            log::warn!("dropping column `{name}`: single distinct value");
            continue;
        }
        if declared_binary || distinct.iter().all(|v| matches!(*v, "0" | "1")) {
            items.push(Item::new(name.as_str(), Condition::Equals("1".into()))?);
            columns.push(Bitset::from_bools(values.iter().map(|v| *v == "1")));
        } else {
            for cat in distinct {
                items.push(Item::new(name.as_str(), Condition::Equals(cat.to_string()))?);
                columns.push(Bitset::from_bools(values.iter().map(|v| *v == cat)));
            }
        }
    }
    Dataset::from_columns(items, columns, labels, label_names)
}

/// Rows of a CSV encoded against a fixed item vocabulary, e.g. new data
/// scored by a stored model.
#[derive(Debug, Clone)]
pub struct EncodedRows {
    pub rows: Vec<Vec<bool>>,
    /// Present when the label column exists in the file.
    pub labels: Option<Vec<usize>>,
}

pub fn encode_csv<R: Read>(
    reader: R,
    items: &[Item],
    label_column: Option<&str>,
    label_names: &[String],
) -> Result<EncodedRows> {
    let table = RawTable::read(reader)?;
    if table.rows.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut item_columns = Vec::with_capacity(items.len());
    for item in items {
        let idx = table.column_index(item.feature()).ok_or_else(|| {
            Error::InvalidArgument(format!("column `{}` not found in header", item.feature()))
        })?;
        let values = table.column(idx)?;
        let bits = values
            .iter()
            .enumerate()
            .map(|(r, v)| {
                item.matches(v).ok_or_else(|| Error::NonNumeric {
                    column: item.feature().to_string(),
                    row: r + 1,
                    value: v.to_string(),
                })
            })
            .collect::<Result<Vec<bool>>>()?;
        item_columns.push(bits);
    }
    let rows = (0..table.rows.len())
        .map(|r| item_columns.iter().map(|c| c[r]).collect())
        .collect();
    let labels = match label_column.and_then(|l| table.column_index(l)) {
        Some(idx) => Some(
            table
                .column(idx)?
                .iter()
                .map(|v| {
                    label_names
                        .iter()
                        .position(|l| l == v)
                        .ok_or_else(|| Error::UnknownLabel(v.to_string()))
                })
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };
    Ok(EncodedRows { rows, labels })
}

/// Nearest-rank empirical quantile cut points for `k` bins, duplicates and
/// cuts at the column maximum removed.
fn quantile_cuts(values: &[f64], k: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let max = sorted[n - 1];
    let mut cuts: Vec<f64> = (1..k)
        .map(|i| {
            let rank = (i * n).div_ceil(k).max(1);
            sorted[rank - 1]
        })
        .filter(|&c| c < max)
        .collect();
    cuts.dedup();
    cuts
}

/// Turns a numeric column into binary item columns.
///
/// Thresholds produce `name>=t` and `name<t` for each `t`, in that order.
/// Quantiles produce `name in (lo, hi]` bins between consecutive cut points,
/// with open-ended first and last bins.
pub fn discretize_numeric(
    name: &str,
    values: &[f64],
    spec: &Discretization,
) -> Result<Vec<ItemColumn>> {
    let column = |condition: Condition| -> Result<ItemColumn> {
        let item = Item::new(name, condition)?;
        let bits = Bitset::from_bools(values.iter().map(|v| {
            item.matches(&v.to_string())
                .expect("numeric conditions on numeric input")
        }));
        Ok(ItemColumn { item, bits })
    };
    match spec {
        Discretization::Thresholds(ts) => {
            if ts.is_empty() {
                return Err(Error::InvalidArgument("empty threshold list".into()));
            }
            if ts.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::ThresholdsNotIncreasing);
            }
            let mut out = Vec::with_capacity(2 * ts.len());
            for &t in ts {
                out.push(column(Condition::AtLeast(t))?);
                out.push(column(Condition::LessThan(t))?);
            }
            Ok(out)
        }
        Discretization::Quantiles(k) => {
            if *k < 2 {
                return Err(Error::InvalidArgument(format!(
                    "quantile count must be at least 2, got {k}"
                )));
            }
            if values.is_empty() {
                return Err(Error::EmptyData);
            }
            let cuts = quantile_cuts(values, *k);
            if cuts.is_empty() {
                return Err(Error::NoCutPoints(name.to_string()));
            }
            let mut bounds = Vec::with_capacity(cuts.len() + 2);
            bounds.push(f64::NEG_INFINITY);
            bounds.extend_from_slice(&cuts);
            bounds.push(f64::INFINITY);
            bounds
                .windows(2)
                .map(|w| column(Condition::InRange { lo: w[0], hi: w[1] }))
                .collect()
        }
    }
}

/// Fold membership for k-fold cross-validation. Folds are numbered `0..k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub fold_of: Vec<usize>,
    pub k: usize,
    pub seed: u64,
}

impl FoldAssignment {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Random near-equal k-fold split. With `stratified`, each label's
/// observations are dealt across folds in turn so per-fold label counts
/// differ by at most one.
pub fn split_folds(
    dataset: &Dataset,
    k: usize,
    seed: u64,
    stratified: bool,
) -> Result<FoldAssignment> {
    let n = dataset.n();
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "fold count must be at least 2, got {k}"
        )));
    }
    if k > n {
        return Err(Error::TooManyFolds { k, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order: Vec<usize> = if stratified {
        let mut order = Vec::with_capacity(n);
        for l in 0..dataset.n_labels() {
            let mut members: Vec<usize> = dataset.label_mask(l).iter_ones().collect();
            members.shuffle(&mut rng);
            order.extend(members);
        }
        order
    } else {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        order
    };
    let mut fold_of = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % k;
    }
    Ok(FoldAssignment { fold_of, k, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn load(text: &str, opts: &LoadOptions) -> Result<Dataset> {
        load_csv_from_reader(text.as_bytes(), opts)
    }

    #[test]
    fn categorical_expansion() {
        let ds = load(
            "sex,label\nmale,yes\nfemale,no\nmale,no\n",
            &LoadOptions::new("label"),
        )
        .unwrap();
        assert_eq!(ds.n(), 3);
        assert_eq!(ds.n_labels(), 2);
        let names: Vec<String> = ds.items().iter().map(Item::to_string).collect();
        assert_eq!(names, vec!["sex=male", "sex=female"]);
        assert_eq!(ds.label_names(), &["yes".to_string(), "no".to_string()]);
        assert_eq!(ds.labels(), &[0, 1, 1]);
    }

    #[test]
    fn binary_columns_become_single_items() {
        let ds = load("a,b,y\n1,0,p\n0,0,q\n1,1,p\n", &LoadOptions::new("y")).unwrap();
        let names: Vec<String> = ds.items().iter().map(Item::to_string).collect();
        assert_eq!(names, vec!["a=1", "b=1"]);
        assert!(ds.value(0, 0) && !ds.value(1, 0) && ds.value(2, 1));
    }

    #[test]
    fn constant_column_dropped() {
        let ds = load("a,b,y\n1,x,p\n0,x,q\n", &LoadOptions::new("y")).unwrap();
        assert_eq!(ds.n_items(), 1);
    }

    #[test]
    fn load_errors() {
        let opts = LoadOptions::new("y");
        assert!(matches!(
            load("a,b\n1,0\n", &opts),
            Err(Error::MissingLabelColumn(_))
        ));
        assert!(matches!(load("a,y\n", &opts), Err(Error::EmptyData)));
        let err = load("a,y\n1,p\n0,p\n", &opts).unwrap_err();
        assert!(matches!(err, Error::DegenerateLabels));
        assert!(err.to_string().contains("degenerate labels"));
        assert!(matches!(
            load("a,y\n1,p\n,q\n", &opts),
            Err(Error::MissingValue { row: 2, .. })
        ));

        let mut declared = LoadOptions::new("y");
        declared.binary.insert("a".into());
        assert!(matches!(
            load("a,y\n1,p\nyes,q\n", &declared),
            Err(Error::NotBinary { row: 2, .. })
        ));
        assert!(matches!(
            load_csv("/nonexistent/file.csv", &opts),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn thresholds_pairs() {
        let cols = discretize_numeric(
            "age",
            &[45.0, 62.0, 71.0, 83.0],
            &Discretization::Thresholds(vec![50.0, 60.0, 70.0, 80.0]),
        )
        .unwrap();
        assert_eq!(cols.len(), 8);
        assert_eq!(cols[0].item.to_string(), "age>=50");
        assert_eq!(cols[1].item.to_string(), "age<50");
        assert!(!cols[0].bits.get(0));
        assert!(cols[1].bits.get(0));
        // 83 is >= 80
        assert!(cols[6].bits.get(3) && !cols[7].bits.get(3));
    }

    #[test]
    fn thresholds_must_increase() {
        let err = discretize_numeric(
            "age",
            &[1.0],
            &Discretization::Thresholds(vec![60.0, 50.0]),
        )
        .unwrap_err();
        assert_eq!(err.to_string(), "thresholds not increasing");
    }

    #[test]
    fn quartiles_of_four_values() {
        let cols = discretize_numeric(
            "v",
            &[1.0, 2.0, 3.0, 4.0],
            &Discretization::Quantiles(4),
        )
        .unwrap();
        assert_eq!(cols.len(), 4);
        for (j, col) in cols.iter().enumerate() {
            assert_eq!(col.bits.iter_ones().collect::<Vec<_>>(), vec![j]);
        }
        assert_eq!(cols[0].item.to_string(), "v in (-inf, 1]");
        assert_eq!(cols[3].item.to_string(), "v in (3, inf]");
    }

    #[test]
    fn quantiles_collapse_ties_and_reject_constants() {
        // nearest-rank quartiles of [1,1,1,2] are 1,1,1 -> a single cut
        let cols =
            discretize_numeric("v", &[1.0, 1.0, 1.0, 2.0], &Discretization::Quantiles(4)).unwrap();
        assert_eq!(cols.len(), 2);
        assert!(matches!(
            discretize_numeric("v", &[3.0; 5], &Discretization::Quantiles(4)),
            Err(Error::NoCutPoints(_))
        ));
    }

    #[test]
    fn numeric_columns_via_options() {
        let mut opts = LoadOptions::new("y");
        opts.thresholds.insert("age".into(), vec![50.0]);
        let ds = load("age,y\n45,a\n62,b\n", &opts).unwrap();
        assert_eq!(ds.n_items(), 2);
        let err = load("age,y\n45,a\nold,b\n", &opts).unwrap_err();
        assert!(matches!(err, Error::NonNumeric { .. }));
    }

    #[test]
    fn fold_sizes() {
        let rows = vec![vec![true]; 11];
        let items = vec![Item::new("a", Condition::Equals("1".into())).unwrap()];
        let labels: Vec<usize> = (0..11).map(|i| i % 2).collect();
        let ds = Dataset::from_rows(items, &rows, labels, vec!["a".into(), "b".into()]).unwrap();
        let f = split_folds(&ds, 5, 1, false).unwrap();
        let mut sizes = f.fold_sizes();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        assert_eq!(sizes, vec![3, 2, 2, 2, 2]);

        let ten = ds.subset(&(0..10).collect::<Vec<_>>()).unwrap();
        assert_eq!(split_folds(&ten, 5, 1, true).unwrap().fold_sizes(), vec![2; 5]);

        assert_eq!(split_folds(&ds, 5, 9, true).unwrap(), split_folds(&ds, 5, 9, true).unwrap());
        assert!(matches!(
            split_folds(&ds, 12, 0, false),
            Err(Error::TooManyFolds { k: 12, n: 11 })
        ));
    }

    #[test]
    fn encode_against_vocabulary() {
        let items: Vec<Item> = ["sex=male", "age>=50"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        let enc = encode_csv(
            "age,sex,y\n40,male,a\n70,female,b\n".as_bytes(),
            &items,
            Some("y"),
            &["a".into(), "b".into()],
        )
        .unwrap();
        assert_eq!(enc.rows, vec![vec![true, false], vec![false, true]]);
        assert_eq!(enc.labels, Some(vec![0, 1]));
    }

    fn arb_item() -> impl Strategy<Value = Item> {
        let name = "[a-z][a-z_ .-]{0,8}";
        let cond = prop_oneof![
            "[^\n]{0,10}".prop_map(Condition::Equals),
            (-1e6f64..1e6, 1e-3f64..1e3).prop_map(|(lo, w)| Condition::InRange { lo, hi: lo + w }),
            (-1e6f64..1e6).prop_map(Condition::AtLeast),
            (-1e6f64..1e6).prop_map(Condition::LessThan),
            Just(Condition::InRange { lo: f64::NEG_INFINITY, hi: 2.5 }),
        ];
        (name, cond).prop_map(|(n, c)| Item::new(n, c).unwrap())
    }

    proptest! {
        #[test]
        fn item_text_roundtrip(item in arb_item()) {
            let text = item.to_string();
            let back: Item = text.parse().unwrap();
            prop_assert_eq!(back, item);
        }

        #[test]
        fn paired_thresholds_partition(
            values in proptest::collection::vec(-100f64..100.0, 1..50),
            mut ts in proptest::collection::btree_set(-100i32..100, 1..5),
        ) {
            let ts: Vec<f64> = std::mem::take(&mut ts).into_iter().map(f64::from).collect();
            let cols = discretize_numeric("x", &values, &Discretization::Thresholds(ts)).unwrap();
            for pair in cols.chunks(2) {
                for i in 0..values.len() {
                    prop_assert!(pair[0].bits.get(i) != pair[1].bits.get(i));
                }
            }
        }

        #[test]
        fn quantile_bins_partition(values in proptest::collection::vec(0u8..20, 2..60), k in 2usize..6) {
            let values: Vec<f64> = values.into_iter().map(f64::from).collect();
            if let Ok(cols) = discretize_numeric("x", &values, &Discretization::Quantiles(k)) {
                for i in 0..values.len() {
                    prop_assert_eq!(cols.iter().filter(|c| c.bits.get(i)).count(), 1);
                }
                for c in &cols {
                    prop_assert!(c.bits.count_ones() > 0);
                }
            }
        }

        #[test]
        fn one_hot_expansion(cats in proptest::collection::vec(0u8..4, 2..40)) {
            let mut text = String::from("c,y\n");
            for (i, c) in cats.iter().enumerate() {
                text.push_str(&format!("k{c},{}\n", i % 2));
            }
            let distinct = cats.iter().collect::<BTreeSet<_>>().len();
            prop_assume!(distinct >= 2);
            let ds = load(&text, &LoadOptions::new("y")).unwrap_or_else(|e| panic!("{e}"));
            prop_assert_eq!(ds.n_items(), distinct);
            for i in 0..ds.n() {
                prop_assert_eq!(ds.row(i).iter().filter(|b| **b).count(), 1);
            }
        }

        #[test]
        fn stratified_folds_balanced(labels in proptest::collection::vec(0usize..3, 6..80), k in 2usize..6, seed in any::<u64>()) {
            let n = labels.len();
            prop_assume!(k <= n);
            let items = vec![Item::new("a", Condition::Equals("1".into())).unwrap()];
            let rows = vec![vec![true]; n];
            let ds = Dataset::from_rows(items, &rows, labels.clone(), vec!["a".into(), "b".into(), "c".into()]).unwrap();
            let f = split_folds(&ds, k, seed, true).unwrap();
            let sizes = f.fold_sizes();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            for l in 0..3 {
                let per: Vec<usize> = (0..k).map(|fold| (0..n).filter(|&i| f.fold_of[i] == fold && labels[i] == l).count()).collect();
                prop_assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
            }
        }
    }
}
