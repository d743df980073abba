//! Pipeline entry point. Subcommands share one flag set: --config loads a
//! JSON job description, --set overrides single fields by dotted path,
//! --out names the artifact directory, --seed replaces the job's seed.

mod commands;
mod jobs;

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

#[derive(Parser)]
#[command(
    name = "rangegait",
    version,
    about = "Point-cloud gait pipeline: synthesize walkers, project range views, \
             sweep sphere placements, analyze projections, check the network"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled walker sequence
    Synth(Common),
    /// Rasterize a sequence directory into a normalized PNG stack
    Project(Common),
    /// Grid-search reference-sphere placements and report a CSV
    Sweep(Common),
    /// Report limb fraction and dynamic score for one projection
    Analyze(Common),
    /// Forward the network over PNG stacks and verify its invariants
    NetCheck(Common),
}

#[derive(Args)]
struct Common {
    /// JSON job config; missing fields fall back to built-in defaults
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Dotted-path field override, repeatable: --set projection.mode=planar
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory for artifacts and the resolved config
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Replaces the job's seed
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Synth(c) => commands::synth(resolve_job(&c)?, &c.out),
        Command::Project(c) => commands::project(resolve_job(&c)?, &c.out),
        Command::Sweep(c) => commands::sweep(resolve_job(&c)?, &c.out),
        Command::Analyze(c) => commands::analyze(resolve_job(&c)?, &c.out),
        Command::NetCheck(c) => commands::net_check(resolve_job(&c)?, &c.out),
    }
}

/// Defaults, overlaid by the config file, overlaid by --set entries, with
/// --seed applied last. Unknown fields fail deserialization, so typos in a
/// file or a --set key are caught before anything runs.
fn resolve_job<T: Default + Serialize + DeserializeOwned>(common: &Common) -> Result<T> {
    let mut value = serde_json::to_value(T::default()).context("serializing defaults")?;
    if let Some(path) = &common.config {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let overlay: Value = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        merge(&mut value, overlay);
    }
    for entry in &common.set {
        apply_override(&mut value, entry)?;
    }
    if let Some(seed) = common.seed {
        if let Value::Object(map) = &mut value {
            map.insert("seed".into(), seed.into());
        }
    }
    serde_json::from_value(value).context("invalid configuration")
}

/// Deep merge: objects merge key-wise, anything else replaces.
fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (key, v) in o {
                match b.get_mut(&key) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(key, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// `key.path=value`; the value is parsed as JSON when possible, else taken
/// as a string, so `--set walker.n_frames=8` and `--set input=runs/seq`
/// both do the obvious thing.
fn apply_override(root: &mut Value, entry: &str) -> Result<()> {
    let Some((key, raw)) = entry.split_once('=') else {
        bail!("--set {entry}: expected KEY=VALUE");
    };
    let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    let mut slot = root;
    for (i, part) in parts.iter().enumerate() {
        let map = match slot {
            Value::Object(map) => map,
            _ => bail!("--set {key}: `{}` does not address an object field", parts[..i].join(".")),
        };
        let entry = map.entry(*part).or_insert(Value::Null);
        // missing intermediate segments become objects; a typo still fails
        // later, when the full job is deserialized
        if i + 1 < parts.len() && entry.is_null() {
            *entry = Value::Object(serde_json::Map::new());
        }
        slot = entry;
    }
    *slot = parsed;
    Ok(())
}
