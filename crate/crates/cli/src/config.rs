use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

use crate::exit::{CliError, CliResult, Classify};
use reward_forge::clients::ClientSpec;
use reward_forge::curation::CurationConfig;
use reward_forge::model::ModelConfig;
use reward_forge::numeric::derive_seed;
use reward_forge::training::{StageConfig, TrainOptions};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Root that image references resolve against. Falls back to the
    /// directory of the input file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub features: Option<PathBuf>,
    pub checkpoint_dir: PathBuf,
    pub report_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self { features: None, checkpoint_dir: "checkpoints".into(), report_dir: "reports".into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    /// When set, a benchmark must contain exactly these categories.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalConfig {
    /// Every component seed not set explicitly is derived from this one.
    pub seed: u64,
    pub paths: Paths,
    pub curation: CurationConfig,
    pub model: ModelConfig,
    pub stages: Vec<StageConfig>,
    pub training: TrainOptions,
    pub clients: Vec<ClientSpec>,
    /// Client that rewrites weak chosen responses during curation.
    pub regenerator: String,
    pub eval: EvalSettings,
}

impl Default for GlobalConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            paths: Paths::default(),
            curation: CurationConfig::default(),
            model: ModelConfig::default(),
            stages: vec![StageConfig::stage1(), StageConfig::stage2()],
            training: TrainOptions::default(),
            clients: vec![ClientSpec::mock("regenerator")],
            regenerator: "regenerator".into(),
            eval: EvalSettings::default(),
        }
    }
}

/// Parses a `--set` value as a TOML literal, or as a bare string when that
/// fails (`--set paths.report_dir=out`).
fn parse_value(raw: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn set_path(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!("malformed key {key:?}");
    }
    let mut cur = root;
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        cur = match cur {
            Value::Table(t) => {
                if last {
                    t.insert(part.to_string(), value);
                    return Ok(());
                }
                t.entry(part.to_string()).or_insert_with(|| Value::Table(Table::new()))
            }
            Value::Array(a) => {
                let idx: usize = part.parse().map_err(|_| anyhow!("{key}: {part:?} is not an array index"))?;
                let len = a.len();
                let slot = a.get_mut(idx).ok_or_else(|| anyhow!("{key}: index {idx} out of range ({len} entries)"))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => bail!("{key}: {part:?} is not inside a table"),
        };
    }
    unreachable!()
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Table(b), Value::Table(o)) => {
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

fn has_path(root: &Value, path: &[&str]) -> bool {
    let mut cur = root;
    for p in path {
        cur = match cur {
            Value::Table(t) => match t.get(*p) {
                Some(v) => v,
                None => return false,
            },
            Value::Array(a) => match p.parse::<usize>().ok().and_then(|i| a.get(i)) {
                Some(v) => v,
                None => return false,
            },
            _ => return false,
        };
    }
    true
}

/// Defaults, then the config file, then `--set` overrides. Component seeds
/// that neither the file nor an override sets are derived from `seed`.
pub fn load(path: Option<&Path>, sets: &[String]) -> CliResult<GlobalConfig> {
    let mut tree = Value::try_from(GlobalConfig::default()).expect("default config serializes");
    let mut explicit = Value::Table(Table::new());
    if let Some(path) = path {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))
            .env()?;
        let file: Table = toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))
            .invalid()?;
        explicit = Value::Table(file.clone());
        merge(&mut tree, Value::Table(file));
    }
    let mut set_keys = Vec::new();
    for s in sets {
        let (key, raw) = s
            .split_once('=')
            .ok_or_else(|| CliError::invalid(anyhow!("--set expects key=value, got {s:?}")))?;
        let key = key.trim();
        set_path(&mut tree, key, parse_value(raw.trim())).invalid()?;
        set_keys.push(key.to_string());
    }
    let mut config: GlobalConfig = tree.try_into().context("invalid config").invalid()?;

    let is_explicit = |path: &[&str]| has_path(&explicit, path) || set_keys.iter().any(|k| *k == path.join("."));
    if !is_explicit(&["curation", "rng_seed"]) {
        config.curation.rng_seed = derive_seed(config.seed, "curation");
    }
    if !is_explicit(&["model", "rng_seed"]) {
        config.model.rng_seed = derive_seed(config.seed, "model");
    }
    for (i, stage) in config.stages.iter_mut().enumerate() {
        if !is_explicit(&["stages", &i.to_string(), "rng_seed"]) {
            stage.rng_seed = derive_seed(config.seed, &format!("stage{}", stage.stage_id));
        }
    }
    Ok(config)
}
