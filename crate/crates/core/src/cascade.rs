//! Signal-intensity category cascade and the lesion-to-muscle ratio regressor.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Target};
use crate::ensemble::{boost_fit, BoostParams, BoostedEnsemble, Loss};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// T2w signal-intensity category, ordered from no signal to fully hyperintense.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BiradsCategory {
    None,
    Hypointense,
    SlightlyHyperintense,
    Hyperintense,
}

impl BiradsCategory {
    pub const ALL: [BiradsCategory; 4] = [
        BiradsCategory::None,
        BiradsCategory::Hypointense,
        BiradsCategory::SlightlyHyperintense,
        BiradsCategory::Hyperintense,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            BiradsCategory::None => "None",
            BiradsCategory::Hypointense => "Hypointense",
            BiradsCategory::SlightlyHyperintense => "SlightlyHyperintense",
            BiradsCategory::Hyperintense => "Hyperintense",
        }
    }

    /// Whether a row of this category takes part in stage `k` (0-based) and,
    /// if so, whether it is that stage's positive class.
    fn stage_label(self, k: usize) -> Option<u8> {
        use BiradsCategory::*;
        match (k, self) {
            (0, None) => Some(0),
            (0, _) => Some(1),
            (1, Hypointense) => Some(0),
            (1, SlightlyHyperintense | Hyperintense) => Some(1),
            (2, SlightlyHyperintense) => Some(0),
            (2, Hyperintense) => Some(1),
            _ => Option::None,
        }
    }
}

impl fmt::Display for BiradsCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BiradsCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BiradsCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::InvalidData(format!("unknown signal-intensity category {s:?}")))
    }
}

/// Per-row categories of a categorical target.
pub fn categories<T: Scalar>(d: &Dataset<T>) -> Result<Vec<BiradsCategory>> {
    match d.target() {
        Target::Category { levels, codes } => {
            let parsed = levels
                .iter()
                .map(|l| l.parse())
                .collect::<Result<Vec<BiradsCategory>>>()?;
            Ok(codes.iter().map(|&c| parsed[c]).collect())
        }
        _ => Err(Error::InvalidData(format!(
            "target {:?} is not categorical",
            d.target_name()
        ))),
    }
}

/// Lesion mean signal intensity over muscle mean signal intensity.
pub fn measure_lmsir<T: Scalar>(lesion_mean_si: T, muscle_mean_si: T) -> Result<T> {
    if !lesion_mean_si.is_finite() || !muscle_mean_si.is_finite() {
        return Err(Error::InvalidData(
            "signal intensities must be finite".into(),
        ));
    }
    if muscle_mean_si <= T::zero() {
        return Err(Error::InvalidData(format!(
            "muscle signal intensity {muscle_mean_si} is not positive"
        )));
    }
    if lesion_mean_si < T::zero() {
        return Err(Error::InvalidData(format!(
            "lesion signal intensity {lesion_mean_si} is negative"
        )));
    }
    Ok(lesion_mean_si / muscle_mean_si)
}

pub const ROUTING: &str =
    "stage positive = category continuing deeper (signal present, hyper side, fully hyper)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CascadeParams {
    pub boost: BoostParams,
    /// Feature subset per stage; `None` falls back to `boost.features`.
    pub stage_features: [Option<Vec<usize>>; 3],
    pub thresholds: [f64; 3],
}

impl Default for CascadeParams {
    fn default() -> Self {
        CascadeParams {
            boost: BoostParams::default(),
            stage_features: [None, None, None],
            thresholds: [0.5; 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CascadeModel<T: Scalar> {
    pub stage1: BoostedEnsemble<T>,
    pub stage2: BoostedEnsemble<T>,
    pub stage3: BoostedEnsemble<T>,
    pub stage_thresholds: [T; 3],
    /// Training rows seen by each stage.
    pub stage_rows: [usize; 3],
    pub routing: String,
}

impl<T: Scalar> CascadeModel<T> {
    pub fn stages(&self) -> [&BoostedEnsemble<T>; 3] {
        [&self.stage1, &self.stage2, &self.stage3]
    }

    pub fn stage_probabilities(&self, x: &[T]) -> [T; 3] {
        [
            self.stage1.predict(x),
            self.stage2.predict(x),
            self.stage3.predict(x),
        ]
    }

    pub fn predict(&self, x: &[T]) -> (BiradsCategory, [T; 3]) {
        let p = self.stage_probabilities(x);
        (route(p, self.stage_thresholds), p)
    }
}

/// Stops at the first stage whose probability falls below its threshold.
pub fn route<T: Scalar>(p: [T; 3], thresholds: [T; 3]) -> BiradsCategory {
    if p[0] < thresholds[0] {
        BiradsCategory::None
    } else if p[1] < thresholds[1] {
        BiradsCategory::Hypointense
    } else if p[2] < thresholds[2] {
        BiradsCategory::SlightlyHyperintense
    } else {
        BiradsCategory::Hyperintense
    }
}

/// Rows taking part in stage `k` and their binary labels.
pub fn stage_population(cats: &[BiradsCategory], k: usize) -> (Vec<usize>, Vec<u8>) {
    cats.iter()
        .enumerate()
        .filter_map(|(i, c)| c.stage_label(k).map(|y| (i, y)))
        .unzip()
}

pub fn cascade_fit<T: Scalar>(
    d: &Dataset<T>,
    params: &CascadeParams,
    seed: u64,
) -> Result<CascadeModel<T>> {
    if params.thresholds.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
        return Err(Error::InvalidParam(
            "cascade thresholds must lie in (0, 1)".into(),
        ));
    }
    let cats = categories(d)?;
    for c in BiradsCategory::ALL {
        if !cats.contains(&c) {
            return Err(Error::Fit(format!(
                "category {c} is absent from the training data"
            )));
        }
    }
    let mut fitted = Vec::with_capacity(3);
    let mut stage_rows = [0; 3];
    for k in 0..3 {
        let (rows, labels) = stage_population(&cats, k);
        stage_rows[k] = rows.len();
        let sub = d
            .select_rows(&rows)?
            .with_target(format!("stage{}", k + 1), Target::Binary(labels))?;
        let mut boost = params.boost.clone();
        if let Some(f) = &params.stage_features[k] {
            boost.features = Some(f.clone());
        }
        fitted.push(boost_fit(
            &sub,
            Loss::Logistic,
            &boost,
            seed.wrapping_add(k as u64),
        )?);
    }
    let mut it = fitted.into_iter();
    let (stage1, stage2, stage3) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
    Ok(CascadeModel {
        stage1,
        stage2,
        stage3,
        stage_thresholds: params.thresholds.map(T::of),
        stage_rows,
        routing: ROUTING.to_string(),
    })
}

pub fn cascade_predict<T: Scalar>(m: &CascadeModel<T>, x: &[T]) -> (BiradsCategory, [T; 3]) {
    m.predict(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LmsirModel<T: Scalar> {
    pub regressor: BoostedEnsemble<T>,
    /// Observed training target range; predictions are clamped into it.
    pub range: (T, T),
}

impl<T: Scalar> LmsirModel<T> {
    pub fn predict(&self, x: &[T]) -> T {
        let raw = self.regressor.predict(x);
        raw.max(self.range.0).min(self.range.1)
    }
}

pub fn lmsir_fit<T: Scalar>(
    d: &Dataset<T>,
    params: &BoostParams,
    seed: u64,
) -> Result<LmsirModel<T>> {
    let y = d.real_target().ok_or_else(|| {
        Error::InvalidData(format!("target {:?} is not numeric", d.target_name()))
    })?;
    if let Some(i) = y.iter().position(|v| *v <= T::zero()) {
        return Err(Error::InvalidData(format!(
            "ratio target must be positive; row {} has {}",
            i + 1,
            y[i]
        )));
    }
    let lo = y.iter().copied().fold(T::infinity(), T::min);
    let hi = y.iter().copied().fold(T::neg_infinity(), T::max);
    let regressor = boost_fit(d, Loss::Squared, params, seed)?;
    Ok(LmsirModel {
        regressor,
        range: (lo, hi),
    })
}

pub fn lmsir_predict<T: Scalar>(m: &LmsirModel<T>, x: &[T]) -> T {
    m.predict(x)
}
