//! Cross-product sweeps described by a TOML file:
//!
//! ```toml
//! command = "fixation"
//! seed = 11            # optional, overrides --seed
//!
//! [fixed]              # flags shared by every cell
//! rule = "m1"
//! grid-y = "0:1:0.1"
//!
//! [vary]               # one list per flag; cells are the cross product
//! kappa = ["0.4", "0.95"]
//! alpha = [0.3, 1.5]
//! ```
//!
//! Keys are subcommand flags without the leading `--`. Boolean `true`
//! passes a bare flag. Cells are numbered in the order of the sorted `vary`
//! keys, last key fastest. Each cell gets a seed derived from the master
//! seed and its index, so a cell rerun on its own with that seed gives the
//! same bytes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser};
use serde::Deserialize;
use wfe_core::csv_out::{sha256_hex, CsvSink, RunStamp};
use wfe_core::rng::derive_seed;

use crate::{execute, write_output, Cli, Failure};

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    /// Sweep description (TOML).
    pub config: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    command: String,
    seed: Option<u64>,
    #[serde(default)]
    fixed: BTreeMap<String, toml::Value>,
    #[serde(default)]
    vary: BTreeMap<String, Vec<toml::Value>>,
}

fn flag_value(key: &str, v: &toml::Value) -> Result<Option<String>, Failure> {
    Ok(Some(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(true) => return Ok(None),
        toml::Value::Array(items) => items
            .iter()
            .map(|i| flag_value(key, i).map(|v| v.unwrap_or_default()))
            .collect::<Result<Vec<_>, _>>()?
            .join(","),
        _ => return Err(Failure::Invalid(format!("{key}: unsupported value {v}"))),
    }))
}

fn push_flag(argv: &mut Vec<String>, key: &str, v: &toml::Value) -> Result<(), Failure> {
    if matches!(v, toml::Value::Boolean(false)) {
        return Ok(());
    }
    argv.push(format!("--{key}"));
    if let Some(s) = flag_value(key, v)? {
        argv.push(s);
    }
    Ok(())
}

/// Every combination of the `vary` lists, as (key, value) pairs.
fn cells(vary: &BTreeMap<String, Vec<toml::Value>>) -> Vec<Vec<(&str, &toml::Value)>> {
    let mut out: Vec<Vec<(&str, &toml::Value)>> = vec![Vec::new()];
    for (k, values) in vary {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |v| {
                    let mut cell = prefix.clone();
                    cell.push((k.as_str(), v));
                    cell
                })
            })
            .collect();
    }
    out
}

struct CellResult {
    status: String,
    hash: String,
    file: String,
}

fn run_cell(command: &str, argv_tail: &[String], seed: u64, out: &Path) -> CellResult {
    let mut argv = vec!["wfe".to_string(), command.to_string()];
    argv.extend_from_slice(argv_tail);
    let failed = |status: String| CellResult {
        status,
        hash: String::new(),
        file: String::new(),
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => return failed(format!("invalid: {}", e.to_string().lines().next().unwrap_or(""))),
    };
    let result = execute(&cli.command, seed, out).and_then(|o| Ok((write_output(&o)?, o)));
    match result {
        Ok((written, output)) => CellResult {
            status: if output.partial { "partial".into() } else { "ok".into() },
            hash: sha256_hex(&output.files[0].1),
            file: written[0].file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(),
        },
        Err(Failure::Invalid(m)) => failed(format!("invalid: {m}")),
        Err(Failure::Runtime(m)) => failed(format!("failed: {m}")),
    }
}

/// Runs every cell, continuing past failures; `Ok(false)` when any cell
/// did not complete.
pub fn run_sweep(args: &SweepArgs, cli_seed: u64, out_dir: &Path) -> Result<bool, Failure> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Failure::Invalid(format!("{}: {e}", args.config.display())))?;
    let file: SweepFile = toml::from_str(&text).map_err(|e| Failure::Invalid(format!("{}: {e}", args.config.display())))?;
    if file.command == "sweep" {
        return Err(Failure::Invalid("command: sweeps cannot be nested".into()));
    }
    if file.vary.values().any(|v| v.is_empty()) {
        return Err(Failure::Invalid("vary: every list needs at least one value".into()));
    }
    let master = file.seed.unwrap_or(cli_seed);
    let mut shared = Vec::new();
    for (k, v) in &file.fixed {
        if file.vary.contains_key(k) {
            return Err(Failure::Invalid(format!("{k}: set in both fixed and vary")));
        }
        push_flag(&mut shared, k, v)?;
    }
    std::fs::create_dir_all(out_dir)?;

    let mut manifest = Vec::new();
    let stamp = RunStamp::new(&text, master);
    let mut sink = CsvSink::new(&mut manifest, &stamp, &["cell", "params", "seed", "status", "file", "sha256"])?;
    let mut complete = true;
    let all = cells(&file.vary);
    for (i, cell) in all.iter().enumerate() {
        let name = format!("cell{i:03}");
        let seed = derive_seed(master, &name);
        let mut argv = shared.clone();
        let mut params = Vec::new();
        for (k, v) in cell {
            push_flag(&mut argv, k, v)?;
            params.push(format!("{k}={}", flag_value(k, v)?.unwrap_or_else(|| "true".into())));
        }
        let r = run_cell(&file.command, &argv, seed, &out_dir.join(format!("{name}.csv")));
        complete &= r.status == "ok";
        sink.row([name, params.join(";"), seed.to_string(), r.status, r.file, r.hash])?;
    }
    sink.finish()?;
    let manifest_path = out_dir.join("manifest.csv");
    std::fs::write(&manifest_path, &manifest)?;
    println!("sweep: {} cells of {} -> {}", all.len(), file.command, manifest_path.display());
    Ok(complete)
}
