//! Tabular data model: CSV ingestion, quantile summaries, fold plans and a
//! synthetic generator with planted rules.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ensemble::SplitTest;
use crate::error::{Error, Result};
use crate::scalar::{cmp, Scalar};

/// Feature family, used for color coding in rule graphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureGroup {
    Kinetic,
    Morphologic,
    TextureT1w,
    T2w,
    Dispersion,
    SingleTimePoint,
    Derived,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 7] = [
        FeatureGroup::Kinetic,
        FeatureGroup::Morphologic,
        FeatureGroup::TextureT1w,
        FeatureGroup::T2w,
        FeatureGroup::Dispersion,
        FeatureGroup::SingleTimePoint,
        FeatureGroup::Derived,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureGroup::Kinetic => "kinetic",
            FeatureGroup::Morphologic => "morphologic",
            FeatureGroup::TextureT1w => "texture_t1w",
            FeatureGroup::T2w => "t2w",
            FeatureGroup::Dispersion => "dispersion",
            FeatureGroup::SingleTimePoint => "single_time_point",
            FeatureGroup::Derived => "derived",
        }
    }
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureGroup::ALL
            .iter()
            .copied()
            .find(|g| g.as_str() == s.trim())
            .ok_or_else(|| Error::InvalidData(format!("unknown feature group `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub name: String,
    pub group: FeatureGroup,
    pub index: usize,
}

/// Response column. Binary labels use 1 for the positive class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", rename_all = "snake_case")]
pub enum Target<T: Scalar> {
    Binary(Vec<u8>),
    Category {
        levels: Vec<String>,
        codes: Vec<usize>,
    },
    Real(Vec<T>),
}

impl<T: Scalar> Target<T> {
    pub fn len(&self) -> usize {
        match self {
            Target::Binary(v) => v.len(),
            Target::Category { codes, .. } => codes.len(),
            Target::Real(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, rows: &[usize]) -> Self {
        match self {
            Target::Binary(v) => Target::Binary(rows.iter().map(|&r| v[r]).collect()),
            Target::Category { levels, codes } => Target::Category {
                levels: levels.clone(),
                codes: rows.iter().map(|&r| codes[r]).collect(),
            },
            Target::Real(v) => Target::Real(rows.iter().map(|&r| v[r]).collect()),
        }
    }

    /// Class code per row for stratification; `None` for real targets.
    fn strata(&self) -> Option<Vec<usize>> {
        match self {
            Target::Binary(v) => Some(v.iter().map(|&b| b as usize).collect()),
            Target::Category { codes, .. } => Some(codes.clone()),
            Target::Real(_) => None,
        }
    }

    fn cell(&self, row: usize) -> String {
        match self {
            Target::Binary(v) => v[row].to_string(),
            Target::Category { levels, codes } => levels[codes[row]].clone(),
            Target::Real(v) => v[row].to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// `{0,1}` → binary, all numeric → real, otherwise categorical.
    #[default]
    Auto,
    Binary,
    Category,
    Real,
}

impl FromStr for TargetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(TargetKind::Auto),
            "binary" => Ok(TargetKind::Binary),
            "category" => Ok(TargetKind::Category),
            "real" => Ok(TargetKind::Real),
            _ => Err(Error::InvalidParam(format!("unknown target kind `{s}`"))),
        }
    }
}

/// Immutable feature matrix (row-major) with metadata and a target column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Dataset<T: Scalar> {
    n_rows: usize,
    n_features: usize,
    features: Vec<T>,
    meta: Vec<FeatureMeta>,
    target_name: String,
    target: Target<T>,
    row_ids: Vec<String>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(
        features: Vec<Vec<T>>,
        meta: Vec<FeatureMeta>,
        target_name: impl Into<String>,
        target: Target<T>,
        row_ids: Option<Vec<String>>,
    ) -> Result<Self> {
        let n_rows = features.len();
        if n_rows == 0 {
            return Err(Error::EmptyDataset);
        }
        let n_features = meta.len();
        let mut names = BTreeSet::new();
        for (i, m) in meta.iter().enumerate() {
            if m.index != i {
                return Err(Error::InvalidData(format!(
                    "feature `{}` has index {} at position {i}",
                    m.name, m.index
                )));
            }
            if !names.insert(m.name.as_str()) {
                return Err(Error::DuplicateColumn(m.name.clone()));
            }
        }
        let mut flat = Vec::with_capacity(n_rows * n_features);
        for (r, row) in features.into_iter().enumerate() {
            if row.len() != n_features {
                return Err(Error::InvalidData(format!(
                    "row {r} has {} values, expected {n_features}",
                    row.len()
                )));
            }
            for (c, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        row: r,
                        column: meta[c].name.clone(),
                    });
                }
            }
            flat.extend(row);
        }
        if target.len() != n_rows {
            return Err(Error::InvalidData(format!(
                "target has {} values for {n_rows} rows",
                target.len()
            )));
        }
        match &target {
            Target::Binary(v) if v.iter().any(|&b| b > 1) => {
                return Err(Error::InvalidData(
                    "binary target values must be 0 or 1".into(),
                ))
            }
            Target::Category { levels, codes } if codes.iter().any(|&c| c >= levels.len()) => {
                return Err(Error::InvalidData("category code out of range".into()))
            }
            Target::Real(v) if v.iter().any(|x| !x.is_finite()) => {
                return Err(Error::InvalidData("non-finite target value".into()))
            }
            _ => {}
        }
        let row_ids = match row_ids {
            Some(ids) if ids.len() != n_rows => {
                return Err(Error::InvalidData(format!(
                    "{} row ids for {n_rows} rows",
                    ids.len()
                )))
            }
            Some(ids) => ids,
            None => (0..n_rows).map(|i| i.to_string()).collect(),
        };
        Ok(Dataset {
            n_rows,
            n_features,
            features: flat,
            meta,
            target_name: target_name.into(),
            target,
            row_ids,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    #[inline]
    pub fn value(&self, row: usize, feature: usize) -> T {
        self.features[row * self.n_features + feature]
    }

    pub fn column(&self, feature: usize) -> Vec<T> {
        (0..self.n_rows).map(|r| self.value(r, feature)).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> + '_ {
        self.features
            .chunks_exact(self.n_features.max(1))
            .take(self.n_rows)
    }

    pub fn meta(&self) -> &[FeatureMeta] {
        &self.meta
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.meta.iter().map(|m| m.name.clone()).collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.meta.iter().position(|m| m.name == name)
    }

    pub fn target(&self) -> &Target<T> {
        &self.target
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn row_position(&self, id: &str) -> Option<usize> {
        self.row_ids.iter().position(|r| r == id)
    }

    pub fn labels(&self) -> Option<&[u8]> {
        match &self.target {
            Target::Binary(v) => Some(v),
            _ => None,
        }
    }

    pub fn real_target(&self) -> Option<&[T]> {
        match &self.target {
            Target::Real(v) => Some(v),
            _ => None,
        }
    }

    pub fn require_labels(&self) -> Result<&[u8]> {
        self.labels().ok_or_else(|| {
            Error::InvalidData(format!("target `{}` is not binary", self.target_name))
        })
    }

    pub fn positive_count(&self) -> Option<usize> {
        self.labels().map(|l| l.iter().filter(|&&b| b == 1).count())
    }

    pub fn positive_fraction(&self) -> Option<f64> {
        self.positive_count().map(|p| p as f64 / self.n_rows as f64)
    }

    /// New dataset holding `rows` (in order, duplicates allowed).
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut features = Vec::with_capacity(rows.len() * self.n_features);
        for &r in rows {
            features.extend_from_slice(self.row(r));
        }
        Ok(Dataset {
            n_rows: rows.len(),
            n_features: self.n_features,
            features,
            meta: self.meta.clone(),
            target_name: self.target_name.clone(),
            target: self.target.select(rows),
            row_ids: rows.iter().map(|&r| self.row_ids[r].clone()).collect(),
        })
    }

    /// Same features and ids with a replacement target.
    pub fn with_target(&self, name: impl Into<String>, target: Target<T>) -> Result<Self> {
        if target.len() != self.n_rows {
            return Err(Error::InvalidData(format!(
                "target has {} values for {} rows",
                target.len(),
                self.n_rows
            )));
        }
        Ok(Dataset {
            target_name: name.into(),
            target,
            ..self.clone()
        })
    }

    pub fn with_meta(mut self, meta: Vec<FeatureMeta>) -> Result<Self> {
        if meta.len() != self.n_features || meta.iter().enumerate().any(|(i, m)| m.index != i) {
            return Err(Error::InvalidData(
                "feature metadata does not match columns".into(),
            ));
        }
        self.meta = meta;
        Ok(self)
    }

    /// Writes `row_id,<features...>,<target>` as CSV.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["row_id".to_string()];
        header.extend(self.meta.iter().map(|m| m.name.clone()));
        header.push(self.target_name.clone());
        w.write_record(&header)?;
        for r in 0..self.n_rows {
            let mut rec = Vec::with_capacity(self.n_features + 2);
            rec.push(self.row_ids[r].clone());
            rec.extend(self.row(r).iter().map(|v| v.to_string()));
            rec.push(self.target.cell(r));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    /// `feature,group` CSV matching [`read_groups`].
    pub fn write_groups<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["feature", "group"])?;
        for m in &self.meta {
            w.write_record([m.name.as_str(), m.group.as_str()])?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// How to read a CSV file into a [`Dataset`].
#[derive(Debug, Clone, Default)]
pub struct CsvSchema {
    pub target: String,
    pub target_kind: TargetKind,
    /// Feature-group metadata (`feature,group`); missing features default to `derived`.
    pub groups: Option<PathBuf>,
    /// Case identifier column; `row_id` is used when present and this is unset.
    pub id_column: Option<String>,
}

impl CsvSchema {
    pub fn new(target: impl Into<String>) -> Self {
        CsvSchema {
            target: target.into(),
            ..Default::default()
        }
    }
}

pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let groups = match &schema.groups {
        Some(g) => {
            let f = std::fs::File::open(g).map_err(|e| Error::io(g.display().to_string(), e))?;
            Some(read_groups(f)?)
        }
        None => None,
    };
    read_csv(file, schema, groups.as_ref())
}

/// Parses a `feature,group` metadata file.
pub fn read_groups<R: Read>(reader: R) -> Result<HashMap<String, FeatureGroup>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let fi = headers
        .iter()
        .position(|h| h == "feature")
        .ok_or_else(|| Error::MissingColumn("feature".into()))?;
    let gi = headers
        .iter()
        .position(|h| h == "group")
        .ok_or_else(|| Error::MissingColumn("group".into()))?;
    let mut out = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let name = rec.get(fi).unwrap_or_default().to_string();
        let group: FeatureGroup = rec.get(gi).unwrap_or_default().parse()?;
        if out.insert(name.clone(), group).is_some() {
            return Err(Error::DuplicateColumn(name));
        }
    }
    Ok(out)
}

pub fn read_csv<T: Scalar, R: Read>(
    reader: R,
    schema: &CsvSchema,
    groups: Option<&HashMap<String, FeatureGroup>>,
) -> Result<Dataset<T>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.to_string()).collect();
    let mut seen = BTreeSet::new();
    for h in &headers {
        if !seen.insert(h.as_str()) {
            return Err(Error::DuplicateColumn(h.clone()));
        }
    }
    let target_col = headers
        .iter()
        .position(|h| *h == schema.target)
        .ok_or_else(|| Error::MissingColumn(schema.target.clone()))?;
    let id_col = match &schema.id_column {
        Some(id) => Some(
            headers
                .iter()
                .position(|h| h == id)
                .ok_or_else(|| Error::MissingColumn(id.clone()))?,
        ),
        None => headers.iter().position(|h| h == "row_id"),
    };
    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|&c| c != target_col && Some(c) != id_col)
        .collect();
    if let Some(g) = groups {
        for name in g.keys() {
            if !feature_cols.iter().any(|&c| headers[c] == *name) {
                return Err(Error::MissingColumn(name.clone()));
            }
        }
    }
    let meta: Vec<FeatureMeta> = feature_cols
        .iter()
        .enumerate()
        .map(|(index, &c)| FeatureMeta {
            name: headers[c].clone(),
            group: groups
                .and_then(|g| g.get(&headers[c]).copied())
                .unwrap_or(FeatureGroup::Derived),
            index,
        })
        .collect();

    let mut rows = Vec::new();
    let mut raw_target = Vec::new();
    let mut ids = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut row = Vec::with_capacity(feature_cols.len());
        for &c in &feature_cols {
            let cell = rec.get(c).unwrap_or_default().trim();
            let v: T = cell.parse().map_err(|_| Error::Unparseable {
                row: r,
                column: headers[c].clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: r,
                    column: headers[c].clone(),
                });
            }
            row.push(v);
        }
        rows.push(row);
        raw_target.push(rec.get(target_col).unwrap_or_default().trim().to_string());
        if let Some(ic) = id_col {
            ids.push(rec.get(ic).unwrap_or_default().to_string());
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let target = parse_target::<T>(&raw_target, &schema.target, schema.target_kind)?;
    Dataset::new(
        rows,
        meta,
        schema.target.clone(),
        target,
        id_col.map(|_| ids),
    )
}

/// Feature rows read against a fixed column list, for scoring new cases.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable<T: Scalar> {
    pub names: Vec<String>,
    pub rows: Vec<Vec<T>>,
    pub row_ids: Vec<String>,
}

impl<T: Scalar> FeatureTable<T> {
    pub fn row_position(&self, id: &str) -> Option<usize> {
        self.row_ids.iter().position(|r| r == id)
    }
}

/// Reads the columns named in `expected`, in that order. The id column
/// (`row_id` unless given) and any `ignore`d column may also be present;
/// anything else, or any absent expected column, is a [`Error::ColumnMismatch`].
pub fn read_features<T: Scalar, R: Read>(
    reader: R,
    expected: &[String],
    id_column: Option<&str>,
    ignore: &[&str],
) -> Result<FeatureTable<T>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.to_string()).collect();
    let mut seen = BTreeSet::new();
    for h in &headers {
        if !seen.insert(h.as_str()) {
            return Err(Error::DuplicateColumn(h.clone()));
        }
    }
    let id_name = id_column.unwrap_or("row_id");
    let id_col = headers.iter().position(|h| h == id_name);
    if id_column.is_some() && id_col.is_none() {
        return Err(Error::MissingColumn(id_name.to_string()));
    }
    let missing: Vec<String> = expected
        .iter()
        .filter(|e| !headers.contains(e))
        .cloned()
        .collect();
    let extra: Vec<String> = headers
        .iter()
        .filter(|h| !expected.contains(h) && h.as_str() != id_name && !ignore.contains(&h.as_str()))
        .cloned()
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(Error::ColumnMismatch { missing, extra });
    }
    let cols: Vec<usize> = expected
        .iter()
        .map(|e| headers.iter().position(|h| h == e).expect("checked above"))
        .collect();
    let mut rows = Vec::new();
    let mut row_ids = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut row = Vec::with_capacity(cols.len());
        for &c in &cols {
            let cell = rec.get(c).unwrap_or_default().trim();
            let v: T = cell.parse().map_err(|_| Error::Unparseable {
                row: r,
                column: headers[c].clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: r,
                    column: headers[c].clone(),
                });
            }
            row.push(v);
        }
        rows.push(row);
        row_ids.push(match id_col {
            Some(ic) => rec.get(ic).unwrap_or_default().to_string(),
            None => r.to_string(),
        });
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(FeatureTable {
        names: expected.to_vec(),
        rows,
        row_ids,
    })
}

pub fn load_features<T: Scalar>(
    path: impl AsRef<Path>,
    expected: &[String],
    id_column: Option<&str>,
    ignore: &[&str],
) -> Result<FeatureTable<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    read_features(file, expected, id_column, ignore)
}

fn parse_target<T: Scalar>(raw: &[String], column: &str, kind: TargetKind) -> Result<Target<T>> {
    let as_binary = || -> Result<Vec<u8>> {
        raw.iter()
            .enumerate()
            .map(|(r, s)| match s.parse::<f64>() {
                Ok(v) if v == 0.0 => Ok(0),
                Ok(v) if v == 1.0 => Ok(1),
                _ => Err(Error::Unparseable {
                    row: r,
                    column: column.to_string(),
                    value: s.clone(),
                }),
            })
            .collect()
    };
    let as_real = || -> Result<Vec<T>> {
        raw.iter()
            .enumerate()
            .map(|(r, s)| {
                let v: T = s.parse().map_err(|_| Error::Unparseable {
                    row: r,
                    column: column.to_string(),
                    value: s.clone(),
                })?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFinite {
                        row: r,
                        column: column.to_string(),
                    })
                }
            })
            .collect()
    };
    let as_category = || {
        let levels: Vec<String> = raw
            .iter()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let codes = raw
            .iter()
            .map(|s| levels.binary_search(s).expect("level present"))
            .collect();
        Target::Category { levels, codes }
    };
    match kind {
        TargetKind::Binary => Ok(Target::Binary(as_binary()?)),
        TargetKind::Real => Ok(Target::Real(as_real()?)),
        TargetKind::Category => Ok(as_category()),
        TargetKind::Auto => {
            if let Ok(b) = as_binary() {
                Ok(Target::Binary(b))
            } else if let Ok(v) = as_real() {
                Ok(Target::Real(v))
            } else {
                Ok(as_category())
            }
        }
    }
}

/// Empirical quantiles at 0, 0.25, 0.5, 0.75 and 1 of one feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct QuantileSummary<T: Scalar> {
    pub feature_index: usize,
    pub q0_min: T,
    pub q1: T,
    pub q2_median: T,
    pub q3: T,
    pub q4_max: T,
}

impl<T: Scalar> QuantileSummary<T> {
    pub fn points(&self) -> [T; 5] {
        [self.q0_min, self.q1, self.q2_median, self.q3, self.q4_max]
    }
}

/// Type-7 quantile (linear interpolation between order statistics) of sorted data.
pub fn quantile_sorted<T: Scalar>(sorted: &[T], p: f64) -> T {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = T::of(h - lo as f64);
    if frac == T::zero() || lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

pub fn compute_quantiles<T: Scalar>(d: &Dataset<T>, feature: usize) -> QuantileSummary<T> {
    assert!(
        feature < d.n_features(),
        "feature index {feature} out of range"
    );
    let mut col = d.column(feature);
    col.sort_by(cmp);
    QuantileSummary {
        feature_index: feature,
        q0_min: col[0],
        q1: quantile_sorted(&col, 0.25),
        q2_median: quantile_sorted(&col, 0.5),
        q3: quantile_sorted(&col, 0.75),
        q4_max: col[col.len() - 1],
    }
}

pub fn all_quantiles<T: Scalar>(d: &Dataset<T>) -> Vec<QuantileSummary<T>> {
    (0..d.n_features())
        .map(|f| compute_quantiles(d, f))
        .collect()
}

/// Assignment of every row to one of `k` test folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &f)| f == fold)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &f)| f != fold)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

/// K-fold split, stratified by class for binary and categorical targets.
///
/// Rows of each class are shuffled and dealt round-robin, continuing the
/// fold counter across classes so fold sizes differ by at most one.
pub fn stratified_kfold<T: Scalar>(d: &Dataset<T>, k: usize, seed: u64) -> Result<FoldPlan> {
    let n = d.n_rows();
    if k < 2 || k > n {
        return Err(Error::InvalidParam(format!(
            "fold count {k} must be in [2, {n}]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order: Vec<usize> = match d.target().strata() {
        Some(strata) => {
            let n_classes = strata.iter().copied().max().unwrap_or(0) + 1;
            let mut by_class = vec![Vec::new(); n_classes];
            for (i, &c) in strata.iter().enumerate() {
                by_class[c].push(i);
            }
            by_class
                .into_iter()
                .flat_map(|mut rows| {
                    rows.shuffle(&mut rng);
                    rows
                })
                .collect()
        }
        None => {
            let mut rows: Vec<usize> = (0..n).collect();
            rows.shuffle(&mut rng);
            rows
        }
    };
    let mut assignments = vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        assignments[row] = pos % k;
    }
    Ok(FoldPlan {
        k,
        assignments,
        seed,
    })
}

/// A generative rule: rows satisfying every condition get label 1 with `probability`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedRule {
    pub conditions: Vec<SplitTest<f64>>,
    pub probability: f64,
}

impl PlantedRule {
    pub fn matches(&self, x: &[f64]) -> bool {
        self.conditions.iter().all(|c| c.matches(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthTarget {
    /// Label from the first matching planted rule, else `base_rate`; then flipped with `noise_rate`.
    Binary {
        planted_rules: Vec<PlantedRule>,
        base_rate: f64,
        noise_rate: f64,
    },
    /// Four signal-intensity categories from a cascade of `feature > midpoint` tests.
    Birads {
        stage_features: [usize; 3],
        noise_rate: f64,
    },
    /// `intercept + Σ coef·x[f]` plus Gaussian noise.
    Linear {
        coefficients: Vec<(usize, f64)>,
        intercept: f64,
        noise_sd: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_rows: usize,
    pub n_features: usize,
    /// Features are drawn uniformly on `[low, high)`.
    pub feature_range: (f64, f64),
    pub target: SynthTarget,
}

impl Default for SynthSpec {
    /// 627 rows × 144 features, positive rate ≈ 0.39 from one planted 2-condition rule.
    fn default() -> Self {
        SynthSpec {
            n_rows: 627,
            n_features: 144,
            feature_range: (0.0, 1.0),
            target: SynthTarget::Binary {
                planted_rules: vec![PlantedRule {
                    conditions: vec![SplitTest::gt(0, 0.5), SplitTest::gt(1, 0.5)],
                    probability: 0.9,
                }],
                base_rate: 0.22,
                noise_rate: 0.0,
            },
        }
    }
}

/// Group tags in the imaging layout: 34 kinetic, 19 morphologic, 46 T1w texture, 45 T2w, rest derived.
pub fn imaging_feature_groups(n_features: usize) -> Vec<FeatureGroup> {
    let blocks = [
        (34, FeatureGroup::Kinetic),
        (19, FeatureGroup::Morphologic),
        (46, FeatureGroup::TextureT1w),
        (45, FeatureGroup::T2w),
    ];
    let mut out = Vec::with_capacity(n_features);
    for (count, g) in blocks {
        out.extend(std::iter::repeat_n(g, count));
    }
    out.resize(n_features.max(out.len()), FeatureGroup::Derived);
    out.truncate(n_features);
    out
}

pub const BIRADS_LEVELS: [&str; 4] = [
    "None",
    "Hypointense",
    "SlightlyHyperintense",
    "Hyperintense",
];

pub fn synthesize<T: Scalar>(spec: &SynthSpec, seed: u64) -> Result<Dataset<T>> {
    if spec.n_rows == 0 || spec.n_features == 0 {
        return Err(Error::InvalidParam(
            "synthetic dataset needs rows and features".into(),
        ));
    }
    let (lo, hi) = spec.feature_range;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidParam(
            "feature range must be finite with low < high".into(),
        ));
    }
    let prob_ok = |p: f64| (0.0..=1.0).contains(&p);
    let feature_ok = |f: usize| f < spec.n_features;
    match &spec.target {
        SynthTarget::Binary {
            planted_rules,
            base_rate,
            noise_rate,
        } => {
            if !prob_ok(*base_rate) || !prob_ok(*noise_rate) {
                return Err(Error::InvalidParam(
                    "base and noise rates must lie in [0, 1]".into(),
                ));
            }
            for r in planted_rules {
                if !prob_ok(r.probability)
                    || r.conditions.iter().any(|c| !feature_ok(c.feature_index))
                {
                    return Err(Error::InvalidParam("planted rule out of range".into()));
                }
            }
        }
        SynthTarget::Birads {
            stage_features,
            noise_rate,
        } => {
            if !prob_ok(*noise_rate) || stage_features.iter().any(|&f| !feature_ok(f)) {
                return Err(Error::InvalidParam(
                    "invalid categorical synthesis spec".into(),
                ));
            }
        }
        SynthTarget::Linear {
            coefficients,
            noise_sd,
            ..
        } => {
            if !(*noise_sd >= 0.0) || coefficients.iter().any(|&(f, _)| !feature_ok(f)) {
                return Err(Error::InvalidParam("invalid linear synthesis spec".into()));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw = Vec::with_capacity(spec.n_rows);
    for _ in 0..spec.n_rows {
        let row: Vec<f64> = (0..spec.n_features)
            .map(|_| lo + (hi - lo) * rng.random::<f64>())
            .collect();
        raw.push(row);
    }
    let mid = 0.5 * (lo + hi);
    let (target_name, target) = match &spec.target {
        SynthTarget::Binary {
            planted_rules,
            base_rate,
            noise_rate,
        } => {
            let labels = raw
                .iter()
                .map(|x| {
                    let p = planted_rules
                        .iter()
                        .find(|r| r.matches(x))
                        .map_or(*base_rate, |r| r.probability);
                    let mut y = rng.random::<f64>() < p;
                    if rng.random::<f64>() < *noise_rate {
                        y = !y;
                    }
                    y as u8
                })
                .collect();
            ("label", Target::Binary(labels))
        }
        SynthTarget::Birads {
            stage_features,
            noise_rate,
        } => {
            let codes: Vec<usize> = raw
                .iter()
                .map(|x| {
                    let code = if x[stage_features[0]] <= mid {
                        0
                    } else if x[stage_features[1]] <= mid {
                        1
                    } else if x[stage_features[2]] <= mid {
                        2
                    } else {
                        3
                    };
                    if rng.random::<f64>() < *noise_rate {
                        rng.random_range(0..4)
                    } else {
                        code
                    }
                })
                .collect();
            // Levels are kept in lexicographic order, like CSV ingestion produces.
            let mut levels: Vec<String> = BIRADS_LEVELS.iter().map(|s| s.to_string()).collect();
            levels.sort();
            let remap: Vec<usize> = BIRADS_LEVELS
                .iter()
                .map(|l| levels.iter().position(|x| x == l).expect("level"))
                .collect();
            let codes = codes.into_iter().map(|c: usize| remap[c]).collect();
            ("birads", Target::Category { levels, codes })
        }
        SynthTarget::Linear {
            coefficients,
            intercept,
            noise_sd,
        } => {
            let noise =
                Normal::new(0.0, *noise_sd).map_err(|e| Error::InvalidParam(e.to_string()))?;
            let values = raw
                .iter()
                .map(|x| {
                    let mean = intercept + coefficients.iter().map(|&(f, c)| c * x[f]).sum::<f64>();
                    T::of(mean + noise.sample(&mut rng))
                })
                .collect();
            ("lmsir", Target::Real(values))
        }
    };
    let groups = imaging_feature_groups(spec.n_features);
    let meta = (0..spec.n_features)
        .map(|i| FeatureMeta {
            name: format!("f{i}"),
            group: groups[i],
            index: i,
        })
        .collect();
    let rows = raw
        .into_iter()
        .map(|r| r.into_iter().map(T::of).collect())
        .collect();
    Dataset::new(rows, meta, target_name, target, None)
}
