//! Run settings: built-in defaults, overlaid by a TOML file, then by
//! `--set key=value` pairs, then by dedicated flags.

use std::path::{Path, PathBuf};

use harvest_core::cascade::CascadeParams;
use harvest_core::dataset::{CsvSchema, SynthSpec, TargetKind};
use harvest_core::ensemble::BoostParams;
use harvest_core::eval::{BootstrapParams, Task};
use harvest_core::nodeharvest::HarvestConfig;
use harvest_core::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSettings {
    /// Target column; `label`, `birads` or `lmsir` by task when unset.
    pub target: Option<String>,
    pub target_kind: TargetKind,
    /// `feature,group` CSV.
    pub groups: Option<PathBuf>,
    /// Case id column; `row_id` when present.
    pub id_column: Option<String>,
}

impl DataSettings {
    pub fn target_for(&self, task: Task) -> String {
        self.target
            .clone()
            .unwrap_or_else(|| default_target(task).into())
    }

    pub fn schema(&self, task: Task) -> CsvSchema {
        CsvSchema {
            target: self.target_for(task),
            target_kind: self.target_kind,
            groups: self.groups.clone(),
            id_column: self.id_column.clone(),
        }
    }
}

pub fn default_target(task: Task) -> &'static str {
    match task {
        Task::Harvest | Task::Constant => "label",
        Task::Cascade => "birads",
        Task::Lmsir => "lmsir",
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub folds: usize,
    pub bootstrap: BootstrapParams,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            folds: 10,
            bootstrap: BootstrapParams::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    pub precision: Precision,
    pub data: DataSettings,
    pub harvest: HarvestConfig,
    pub cascade: CascadeParams,
    pub lmsir: BoostParams,
    pub eval: EvalSettings,
    pub synth: SynthSpec,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            seed: DEFAULT_SEED,
            threads: 0,
            precision: Precision::F64,
            data: DataSettings::default(),
            harvest: HarvestConfig::default(),
            cascade: CascadeParams::default(),
            lmsir: BoostParams::default(),
            eval: EvalSettings::default(),
            synth: SynthSpec::default(),
        }
    }
}

impl Settings {
    /// Defaults, then the config file, then each `key=value` override in order.
    pub fn layered(config: Option<&Path>, overrides: &[String]) -> Result<Settings> {
        let mut merged = serde_json::to_value(Settings::default())?;
        let mut given = Vec::new();
        if let Some(path) = config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::io(path.display().to_string(), e))?;
            let table: toml::Table = toml::from_str(&text).map_err(|e| {
                Error::InvalidParam(format!("config {}: {}", path.display(), e.message()))
            })?;
            let overlay = serde_json::to_value(table)?;
            merge(&mut merged, overlay.clone());
            given.push(overlay);
        }
        for kv in overrides {
            let overlay = dotted(kv)?;
            merge(&mut merged, overlay.clone());
            given.push(overlay);
        }
        let settings: Settings = serde_json::from_value(merged)
            .map_err(|e| Error::InvalidParam(format!("settings: {e}")))?;
        // Nested parameter structs accept unknown keys; catch typos here.
        let effective = serde_json::to_value(&settings)?;
        for overlay in &given {
            let mut path = Vec::new();
            check_known(overlay, &effective, &mut path)?;
        }
        Ok(settings)
    }
}

/// `a.b.c=v` as `{"a": {"b": {"c": v}}}`; `v` is read as a TOML value, or
/// taken as a bare string when it does not parse.
fn dotted(kv: &str) -> Result<Value> {
    let (key, raw) = kv
        .split_once('=')
        .ok_or_else(|| Error::InvalidParam(format!("--set expects key=value, got `{kv}`")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::InvalidParam(format!("bad setting key `{key}`")));
    }
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => serde_json::to_value(t.remove("v").expect("parsed key"))?,
        Err(_) => Value::String(raw.to_string()),
    };
    Ok(key.rsplit('.').fold(value, |v, k| {
        Value::Object(Map::from_iter([(k.to_string(), v)]))
    }))
}

/// Deep merge. A single-key object in `base` is an externally tagged enum,
/// so an overlay naming a different variant replaces it outright.
fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            let variant_switch =
                b.len() == 1 && o.len() == 1 && !o.keys().all(|k| b.contains_key(k));
            if variant_switch {
                *b = o;
                return;
            }
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn check_known(given: &Value, effective: &Value, path: &mut Vec<String>) -> Result<()> {
    let Value::Object(g) = given else {
        return Ok(());
    };
    let Value::Object(e) = effective else {
        return Ok(());
    };
    for (k, v) in g {
        path.push(k.clone());
        match e.get(k) {
            Some(ev) => check_known(v, ev, path)?,
            None => {
                return Err(Error::InvalidParam(format!(
                    "unknown setting `{}`",
                    path.join(".")
                )))
            }
        }
        path.pop();
    }
    Ok(())
}
