//! TOML experiment configuration with `key=value` overrides.
//!
//! ```toml
//! name = "temperature-sas-1.2"
//! observed_count = 130
//! train_prefix = 24
//! band_size = 120
//! repetitions = 100
//! base_seed = 1
//!
//! [dataset]
//! signals = "data/temperature.csv"
//! coords = "data/stations.csv"
//! k = 7
//!
//! [noise]
//! family = "sas"
//! alpha = 1.2
//! scale = 0.1
//!
//! [[methods]]
//! method = "lmp-gnn"
//! p = 1.2
//! mu = 0.5
//! ```
//!
//! Overrides use dotted paths; array elements are addressed by index, e.g.
//! `noise.alpha=1.4` or `methods.0.mu=0.2`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::dataset::{load_dataset, Dataset, GraphSource};
use super::experiment::{ExperimentSpec, MethodKind, MethodSpec};
use super::synthetic::SyntheticSpec;
use crate::adaptive::FilterMethod;
use crate::error::{Error, Result};
use crate::gnn::{Activation, LossTarget};
use crate::noise::NoiseSpec;

fn default_repetitions() -> usize {
    100
}

fn default_k() -> usize {
    7
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub dataset: DatasetConfig,
    pub noise: NoiseSpec,
    pub observed_count: usize,
    pub train_prefix: usize,
    pub band_size: usize,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub trace_node: usize,
    pub methods: Vec<MethodConfig>,
}

/// Either `synthetic`, or `signals` plus one of `edges` / `coords`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signals: Option<PathBuf>,
    #[serde(default)]
    pub header: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<PathBuf>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    /// glms, gnlms, glmp, gnlmp, gsign, lmp-gnn, sign-gnn or lms-gnn.
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub mu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm_floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forgetting: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activation: Option<Activation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pretrain_epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_grad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_gradient: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<LossTarget>,
}

fn config_err(key: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        message: message.into(),
    }
}

impl MethodConfig {
    fn resolve(&self, index: usize) -> Result<MethodSpec> {
        let key = |k: &str| format!("methods.{index}.{k}");
        let gnn_fixed_p = match self.method.as_str() {
            "lmp-gnn" => Some(None),
            "sign-gnn" => Some(Some(1.0)),
            "lms-gnn" => Some(Some(2.0)),
            _ => None,
        };
        let mut spec = match gnn_fixed_p {
            Some(fixed) => {
                let p = match (fixed, self.p) {
                    (None, Some(p)) => p,
                    (None, None) => return Err(config_err(key("p"), "lmp-gnn requires p (float in [1, 2])")),
                    (Some(f), Some(p)) if p != f => {
                        return Err(config_err(key("p"), format!("{} fixes p = {f}", self.method)))
                    }
                    (Some(f), _) => f,
                };
                for (name, set) in [
                    ("norm_floor", self.norm_floor.is_some()),
                    ("forgetting", self.forgetting.is_some()),
                ] {
                    if set {
                        return Err(config_err(key(name), "only applies to gnlms/gnlmp"));
                    }
                }
                let mut s = MethodSpec::gnn(&self.method, p, self.mu);
                if let Some(v) = self.layers {
                    s.layers = v;
                }
                if let Some(v) = self.eta {
                    s.eta = v;
                }
                if let Some(v) = self.activation {
                    s.activation = v;
                }
                if let Some(v) = self.pretrain_epochs {
                    s.pretrain_epochs = v;
                }
                if let Some(v) = self.delta_grad {
                    s.delta_grad = v;
                }
                if let Some(v) = self.stop_gradient {
                    s.stop_gradient = v;
                }
                if let Some(v) = self.loss {
                    s.loss_target = v;
                }
                s
            }
            None => {
                let fm: FilterMethod = self.method.parse().map_err(|_| {
                    config_err(
                        key("method"),
                        format!(
                        "unknown method `{}` (expected glms, gnlms, glmp, gnlmp, gsign, lmp-gnn, sign-gnn or lms-gnn)",
                        self.method
                    ),
                    )
                })?;
                for (name, set) in [
                    ("layers", self.layers.is_some()),
                    ("eta", self.eta.is_some()),
                    ("activation", self.activation.is_some()),
                    ("pretrain_epochs", self.pretrain_epochs.is_some()),
                    ("delta_grad", self.delta_grad.is_some()),
                    ("stop_gradient", self.stop_gradient.is_some()),
                    ("loss", self.loss.is_some()),
                ] {
                    if set {
                        return Err(config_err(key(name), "only applies to GNN methods"));
                    }
                }
                let mut s = MethodSpec::filter(fm, self.mu);
                match (fm.uses_p(), self.p) {
                    (true, Some(p)) => s.p = p,
                    (true, None) => return Err(config_err(key("p"), format!("{fm} requires p (float in [1, 2])"))),
                    (false, Some(_)) => return Err(config_err(key("p"), format!("{fm} does not take p"))),
                    (false, None) => {}
                }
                if !fm.is_normalized() && (self.norm_floor.is_some() || self.forgetting.is_some()) {
                    let name = if self.norm_floor.is_some() {
                        "norm_floor"
                    } else {
                        "forgetting"
                    };
                    return Err(config_err(key(name), "only applies to gnlms/gnlmp"));
                }
                if let Some(v) = self.norm_floor {
                    s.norm_floor = v;
                }
                if let Some(v) = self.forgetting {
                    s.forgetting = v;
                }
                s
            }
        };
        if let Some(label) = &self.label {
            spec.label = label.clone();
        }
        if spec.label.is_empty() || spec.label.contains(['/', '\\', ',']) || spec.label.chars().any(char::is_whitespace)
        {
            return Err(config_err(
                key("label"),
                format!("`{}` is not usable as a directory name", spec.label),
            ));
        }
        if !(1.0..=2.0).contains(&spec.p) {
            return Err(config_err(
                key("p"),
                format!("expected float in [1, 2], got {}", spec.p),
            ));
        }
        if !(spec.mu > 0.0 && spec.mu.is_finite()) {
            return Err(config_err(
                key("mu"),
                format!("expected positive float, got {}", spec.mu),
            ));
        }
        if spec.kind == MethodKind::Gnn {
            if spec.layers == 0 {
                return Err(config_err(key("layers"), "expected integer >= 1"));
            }
            if !(spec.eta >= 0.0 && spec.eta.is_finite()) {
                return Err(config_err(key("eta"), "expected nonnegative float"));
            }
            if !(spec.delta_grad > 0.0) {
                return Err(config_err(key("delta_grad"), "expected positive float"));
            }
        }
        Ok(spec)
    }
}

/// Byte offset -> dotted key of the assignment on that line, including its table path.
fn key_at_offset(text: &str, offset: usize) -> Option<String> {
    let mut section = String::new();
    let mut array_counts: Vec<(String, usize)> = Vec::new();
    let mut pos = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        if let Some(name) = trimmed.strip_prefix("[[").and_then(|r| r.strip_suffix("]]")) {
            let name = name.trim().to_owned();
            let idx = match array_counts.iter_mut().find(|(n, _)| *n == name) {
                Some((_, c)) => {
                    *c += 1;
                    *c
                }
                None => {
                    array_counts.push((name.clone(), 0));
                    0
                }
            };
            section = format!("{name}.{idx}");
        } else if let Some(name) = trimmed.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            let name = name.trim();
            // Sub-tables of an array element, e.g. [methods.extra], are not used here.
            section = name.to_owned();
        }
        if offset < pos + line.len() {
            let key = trimmed
                .split('=')
                .next()
                .map(str::trim)
                .filter(|k| !k.is_empty() && !k.starts_with('['));
            return Some(match (section.is_empty(), key) {
                (_, None) => section,
                (true, Some(k)) => k.to_owned(),
                (false, Some(k)) => format!("{section}.{k}"),
            });
        }
        pos += line.len();
    }
    None
}

fn parse_override_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_owned())),
        Err(_) => toml::Value::String(raw.to_owned()),
    }
}

/// Sets `key` (dotted path) to `raw` inside `root`. Missing tables are created.
pub fn apply_override(root: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(config_err(key, "malformed override key"));
    }
    let value = parse_override_value(raw);
    let mut cursor: &mut toml::Value = {
        let first = parts[0];
        if parts.len() == 1 {
            root.insert(first.to_owned(), value);
            return Ok(());
        }
        root.entry(first.to_owned())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
    };
    for (depth, part) in parts.iter().enumerate().skip(1) {
        let last = depth == parts.len() - 1;
        cursor = match cursor {
            toml::Value::Table(t) => {
                if last {
                    t.insert((*part).to_owned(), value);
                    return Ok(());
                }
                t.entry((*part).to_owned())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            }
            toml::Value::Array(a) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| config_err(key, format!("`{part}` is not an array index")))?;
                let len = a.len();
                let slot = a
                    .get_mut(idx)
                    .ok_or_else(|| config_err(key, format!("index {idx} out of range (array has {len} entries)")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => {
                let prefix = parts[..depth].join(".");
                return Err(config_err(key, format!("`{prefix}` is not a table")));
            }
        };
    }
    Ok(())
}

/// Splits `key=value`.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| config_err(s, "override must look like key=value"))?;
    Ok((k.trim().to_owned(), v.trim().to_owned()))
}

impl ExperimentConfig {
    /// Parses TOML text, applies overrides, and validates field names and types.
    pub fn from_toml(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            let key = e
                .span()
                .and_then(|s| key_at_offset(text, s.start))
                .unwrap_or_else(|| "<config>".into());
            config_err(key, e.message().to_owned())
        })?;
        for (k, v) in overrides {
            apply_override(&mut table, k, v)?;
        }
        let normalized = toml::to_string(&table).map_err(|e| config_err("<config>", e.to_string()))?;
        let config: ExperimentConfig = toml::from_str(&normalized).map_err(|e| {
            let key = e
                .span()
                .and_then(|s| key_at_offset(&normalized, s.start))
                .filter(|k| !k.is_empty())
                .unwrap_or_else(|| "<config>".into());
            config_err(key, e.message().trim().to_owned())
        })?;
        config.check()?;
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, overrides)
    }

    fn check(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(config_err("name", "expected a non-empty name without path separators"));
        }
        self.noise.validate().map_err(|e| config_err("noise", e.to_string()))?;
        if self.repetitions == 0 {
            return Err(config_err("repetitions", "expected integer >= 1"));
        }
        if self.band_size == 0 {
            return Err(config_err("band_size", "expected integer >= 1"));
        }
        if self.methods.is_empty() {
            return Err(config_err("methods", "expected at least one [[methods]] entry"));
        }
        let d = &self.dataset;
        match (&d.synthetic, &d.signals, &d.edges, &d.coords) {
            (Some(_), None, None, None) => {}
            (Some(_), _, _, _) => {
                return Err(config_err(
                    "dataset.synthetic",
                    "cannot be combined with signals/edges/coords",
                ))
            }
            (None, None, _, _) => {
                return Err(config_err(
                    "dataset.signals",
                    "missing signals path (or use [dataset.synthetic])",
                ))
            }
            (None, Some(_), Some(_), Some(_)) => {
                return Err(config_err("dataset.edges", "give either edges or coords, not both"))
            }
            (None, Some(_), None, None) => {
                return Err(config_err("dataset.edges", "missing graph source: edges or coords"))
            }
            _ => {}
        }
        let mut labels = Vec::new();
        for (i, m) in self.methods.iter().enumerate() {
            let spec = m.resolve(i)?;
            if labels.contains(&spec.label) {
                return Err(config_err(
                    format!("methods.{i}.label"),
                    format!("duplicate label `{}`", spec.label),
                ));
            }
            labels.push(spec.label);
        }
        Ok(())
    }

    pub fn method_specs(&self) -> Result<Vec<MethodSpec>> {
        self.methods.iter().enumerate().map(|(i, m)| m.resolve(i)).collect()
    }

    /// Loads the dataset. Relative paths resolve against `base_dir`.
    pub fn load_dataset(&self, base_dir: &Path) -> Result<Dataset> {
        let d = &self.dataset;
        let resolve = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base_dir.join(p) };
        if let Some(syn) = &d.synthetic {
            let mut data = syn.generate()?;
            if let Some(name) = &d.name {
                data.name = name.clone();
            }
            return Ok(data);
        }
        let signals = resolve(d.signals.as_ref().expect("checked"));
        let source = match (&d.edges, &d.coords) {
            (Some(e), None) => GraphSource::EdgeList(resolve(e)),
            (None, Some(c)) => GraphSource::Coordinates {
                path: resolve(c),
                k: d.k,
                bandwidth: d.bandwidth,
            },
            _ => unreachable!("checked"),
        };
        let name = d.name.clone().unwrap_or_else(|| self.name.clone());
        load_dataset(name, &signals, d.header, &source)
    }

    pub fn to_spec(&self, dataset: Arc<Dataset>) -> Result<ExperimentSpec> {
        let spec = ExperimentSpec {
            name: self.name.clone(),
            dataset,
            noise: self.noise,
            observed_count: self.observed_count,
            train_prefix: self.train_prefix,
            band_size: self.band_size,
            methods: self.method_specs()?,
            repetitions: self.repetitions,
            base_seed: self.base_seed,
            trace_node: self.trace_node,
        };
        spec.validate().map_err(|e| config_err("<experiment>", e.to_string()))?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }
}
