use std::path::Path;

use toml::{Table, Value};

use crate::beeloop::{BeeConfig, Consistency, ReplayStrategy};
use crate::error::{Error, Result};

use super::args::SwitchArgs;

/// Flatten nested TOML tables into dotted keys, so `[car]\nxi = 30` and
/// `car.xi = 30` mean the same thing.
pub fn flatten(table: &Table) -> Vec<(String, Value)> {
    fn walk(prefix: &str, t: &Table, out: &mut Vec<(String, Value)>) {
        for (k, v) in t {
            let key = if prefix.is_empty() {
                k.clone()
            } else {
                format!("{prefix}.{k}")
            };
            match v {
                Value::Table(inner) => walk(&key, inner, out),
                _ => out.push((key, v.clone())),
            }
        }
    }
    let mut out = Vec::new();
    walk("", table, &mut out);
    out
}

pub fn parse_config(text: &str) -> Result<BeeConfig> {
    let table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(vec![e.to_string()]))?;
    let pairs = flatten(&table);
    BeeConfig::from_pairs(pairs.iter().map(|(k, v)| (k.as_str(), v)))
}

pub fn load_config(path: Option<&Path>) -> Result<BeeConfig> {
    match path {
        Some(p) => parse_config(&std::fs::read_to_string(p)?),
        None => Ok(BeeConfig::default()),
    }
}

/// The config as flat `key = value` text that [`parse_config`] reads back.
pub fn render_config(cfg: &BeeConfig) -> String {
    cfg.to_pairs().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

/// Apply run flags on top of a file config: the preset first, then the
/// individual switches.
pub fn apply_switches(cfg: &mut BeeConfig, sw: &SwitchArgs) -> Result<()> {
    if let Some(p) = sw.preset {
        cfg.apply_preset(p);
    }
    if sw.no_car {
        cfg.car.strategy = ReplayStrategy::Off;
    }
    if sw.no_queue {
        cfg.adapt.use_queue = false;
    }
    if let Some(blocks) = &sw.mcr_blocks {
        cfg.mcr.blocks = blocks.iter().copied().collect();
        if blocks.is_empty() && cfg.mcr.kind == Consistency::Mcr {
            cfg.mcr.kind = Consistency::None;
        } else if !blocks.is_empty() && cfg.mcr.kind == Consistency::None {
            cfg.mcr.kind = Consistency::Mcr;
        }
    }
    if let Some(s) = sw.car_strategy {
        cfg.car.strategy = s;
    }
    cfg.validate()
}
