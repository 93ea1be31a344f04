//! Built-in scenario names and scenario files.

use std::path::Path;

use anyhow::{bail, Context, Result};
use cellprice::netmodel::{generate_ieee57, random_small_instance, toy_2bus, toy_3cell, Mode};
use cellprice::Scenario;

pub const BUILTIN: &str = "ieee57-I..IV, toy-2bus, toy-3cell[-I..IV], random-small";

/// Resolves a built-in name, or reads a scenario JSON file when `source` is a path.
pub fn load(source: &str, seed: u64) -> Result<Scenario> {
    let path = Path::new(source);
    if path.is_file() {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {source}"))?;
        let sc: Scenario = serde_json::from_str(&text).with_context(|| format!("parsing {source}"))?;
        return Ok(sc);
    }
    builtin(source, seed)
}

fn builtin(name: &str, seed: u64) -> Result<Scenario> {
    let lower = name.to_ascii_lowercase();
    let mode_of = |rest: &str| -> Result<Mode> { Ok(rest.parse::<Mode>()?) };
    let sc = if let Some(rest) = lower.strip_prefix("ieee57-") {
        generate_ieee57::<f64>(seed).scenario(mode_of(rest)?)?
    } else if lower == "toy-2bus" {
        toy_2bus()
    } else if lower == "toy-3cell" {
        toy_3cell::<f64>(seed).scenario(Mode::III)?
    } else if let Some(rest) = lower.strip_prefix("toy-3cell-") {
        toy_3cell::<f64>(seed).scenario(mode_of(rest)?)?
    } else if lower == "random-small" {
        random_small_instance(seed)
    } else {
        bail!("unknown scenario '{name}' (built-in: {BUILTIN}; or a scenario file)");
    };
    Ok(sc)
}
