//! Flat `key = value` config files. Entries become `--key value` arguments
//! placed before the user's own flags, so explicit flags win.

use std::fs;

use anyhow::{bail, Context, Result};

/// Flags that take a value and may appear before the subcommand.
const GLOBAL_VALUED: [&str; 3] = ["--config", "--workers", "--manifest"];

/// Subcommands with a second-level verb.
const NESTED: [&str; 1] = ["series"];

pub fn parse_config(text: &str) -> Result<Vec<String>> {
    let mut args = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected key = value, got {raw:?}", i + 1);
        };
        let key = key.trim().trim_start_matches("--");
        let value = value.trim();
        if key.is_empty() {
            bail!("config line {}: empty key", i + 1);
        }
        match value {
            "true" => args.push(format!("--{key}")),
            "false" => {}
            _ => {
                args.push(format!("--{key}"));
                args.push(value.to_string());
            }
        }
    }
    Ok(args)
}

fn config_path(argv: &[String]) -> Option<(usize, String)> {
    for (i, a) in argv.iter().enumerate() {
        if a == "--config" {
            return argv.get(i + 1).map(|p| (i, p.clone()));
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some((i, p.to_string()));
        }
    }
    None
}

/// Index just past the subcommand (and its verb, for nested commands).
fn insertion_point(argv: &[String]) -> usize {
    let mut i = 1;
    while i < argv.len() {
        let a = &argv[i];
        if GLOBAL_VALUED.contains(&a.as_str()) {
            i += 2;
            continue;
        }
        if a.starts_with('-') {
            i += 1;
            continue;
        }
        let nested = NESTED.contains(&a.as_str());
        i += 1;
        if nested && i < argv.len() && !argv[i].starts_with('-') {
            i += 1;
        }
        return i;
    }
    argv.len()
}

/// `argv` with the config file's entries spliced in.
pub fn expand(argv: Vec<String>) -> Result<Vec<String>> {
    let Some((_, path)) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = fs::read_to_string(&path).with_context(|| format!("reading config file {path}"))?;
    let extra = parse_config(&text)?;
    let at = insertion_point(&argv);
    let mut out = argv[..at].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[at..]);
    Ok(out)
}
