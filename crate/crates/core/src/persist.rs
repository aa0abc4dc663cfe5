//! Versioned JSON model files.
//!
//! ```json
//! { "schema_version": 1, "kind": "harvest", "scalar": "f64", "seed": 7, "params": {..}, "model": {..} }
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cascade::{CascadeModel, LmsirModel};
use crate::error::{Error, Result};
use crate::nodeharvest::HarvestModel;
use crate::scalar::Scalar;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Harvest,
    Cascade,
    Lmsir,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Harvest => "harvest",
            ModelKind::Cascade => "cascade",
            ModelKind::Lmsir => "lmsir",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(Value::String(s.to_string()))
            .map_err(|_| Error::InvalidParam(format!("unknown model kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel<T: Scalar> {
    Harvest(HarvestModel<T>),
    Cascade(CascadeModel<T>),
    Lmsir(LmsirModel<T>),
}

impl<T: Scalar> AnyModel<T> {
    pub fn kind(&self) -> ModelKind {
        match self {
            AnyModel::Harvest(_) => ModelKind::Harvest,
            AnyModel::Cascade(_) => ModelKind::Cascade,
            AnyModel::Lmsir(_) => ModelKind::Lmsir,
        }
    }

    /// Feature names the model expects, in column order.
    pub fn feature_names(&self) -> Option<Vec<String>> {
        match self {
            AnyModel::Harvest(m) => Some(m.features.iter().map(|f| f.name.clone()).collect()),
            _ => None,
        }
    }
}

/// A model with the settings it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel<T: Scalar> {
    pub seed: u64,
    /// Training configuration, stored verbatim.
    pub params: Value,
    /// Feature column names in training order.
    pub features: Vec<String>,
    pub model: AnyModel<T>,
}

#[derive(Serialize)]
struct EnvelopeOut<'a> {
    schema_version: u32,
    kind: ModelKind,
    scalar: &'static str,
    seed: u64,
    params: &'a Value,
    features: &'a [String],
    model: Value,
}

#[derive(Deserialize)]
struct EnvelopeIn {
    schema_version: u32,
    kind: ModelKind,
    scalar: String,
    seed: u64,
    #[serde(default)]
    params: Value,
    #[serde(default)]
    features: Vec<String>,
    model: Value,
}

impl<T: Scalar> SavedModel<T> {
    pub fn to_json(&self) -> Result<String> {
        let model = match &self.model {
            AnyModel::Harvest(m) => serde_json::to_value(m)?,
            AnyModel::Cascade(m) => serde_json::to_value(m)?,
            AnyModel::Lmsir(m) => serde_json::to_value(m)?,
        };
        let env = EnvelopeOut {
            schema_version: SCHEMA_VERSION,
            kind: self.model.kind(),
            scalar: T::NAME,
            seed: self.seed,
            params: &self.params,
            features: &self.features,
            model,
        };
        Ok(serde_json::to_string_pretty(&env)? + "\n")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let env: EnvelopeIn = serde_json::from_str(s)
            .map_err(|e| Error::UnsupportedModel(format!("not a model file: {e}")))?;
        if env.schema_version != SCHEMA_VERSION {
            return Err(Error::UnsupportedModel(format!(
                "schema version {} (this build reads {SCHEMA_VERSION})",
                env.schema_version
            )));
        }
        if env.scalar != T::NAME {
            return Err(Error::UnsupportedModel(format!(
                "model stores {} values, expected {}",
                env.scalar,
                T::NAME
            )));
        }
        let model = match env.kind {
            ModelKind::Harvest => AnyModel::Harvest(serde_json::from_value(env.model)?),
            ModelKind::Cascade => AnyModel::Cascade(serde_json::from_value(env.model)?),
            ModelKind::Lmsir => AnyModel::Lmsir(serde_json::from_value(env.model)?),
        };
        Ok(SavedModel {
            seed: env.seed,
            params: env.params,
            features: env.features,
            model,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synthesize, SynthSpec};
    use crate::ensemble::ForestParams;
    use crate::nodeharvest::{fit_harvest, HarvestConfig};

    fn saved<T: Scalar>() -> (SavedModel<T>, crate::dataset::Dataset<T>) {
        let d = synthesize(
            &SynthSpec {
                n_rows: 200,
                n_features: 5,
                ..Default::default()
            },
            3,
        )
        .unwrap();
        let config = HarvestConfig {
            forest: ForestParams {
                n_trees: 20,
                ..Default::default()
            },
            ..Default::default()
        };
        let m = fit_harvest(&d, &config, 1).unwrap();
        let s = SavedModel {
            seed: 1,
            params: serde_json::to_value(&config).unwrap(),
            features: d.feature_names(),
            model: AnyModel::Harvest(m),
        };
        (s, d)
    }

    fn round_trip<T: Scalar>() {
        let (s, d) = saved::<T>();
        let text = s.to_json().unwrap();
        let back = SavedModel::<T>::from_json(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_json().unwrap(), text);
        let (AnyModel::Harvest(a), AnyModel::Harvest(b)) = (&s.model, &back.model) else {
            panic!()
        };
        for x in d.rows() {
            assert_eq!(
                a.predict(x).to_f64().unwrap().to_bits(),
                b.predict(x).to_f64().unwrap().to_bits()
            );
        }
    }

    #[test]
    fn round_trip_is_exact() {
        round_trip::<f64>();
        round_trip::<f32>();
    }

    #[test]
    fn rejects_foreign_files() {
        let (s, _) = saved::<f64>();
        let text = s.to_json().unwrap();
        assert!(matches!(
            SavedModel::<f32>::from_json(&text),
            Err(Error::UnsupportedModel(_))
        ));
        let bumped = text.replace("\"schema_version\": 1", "\"schema_version\": 99");
        assert!(matches!(
            SavedModel::<f64>::from_json(&bumped),
            Err(Error::UnsupportedModel(_))
        ));
        assert!(SavedModel::<f64>::from_json("{\"hello\": 1}").is_err());
    }
}
