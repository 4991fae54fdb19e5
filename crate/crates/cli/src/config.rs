//! `--config FILE`: a JSON object whose keys are long flag names of the
//! selected subcommand (`_` and `-` are interchangeable). The file is
//! expanded into `--key=value` arguments placed before the explicit ones, and
//! since every argument overrides itself, explicit flags win.

use std::collections::BTreeSet;

use serde_json::Value;

use crate::error::CliError;

pub fn expand(argv: Vec<String>, cmd: &clap::Command) -> Result<Vec<String>, CliError> {
    let mut path = None;
    let mut rest = Vec::with_capacity(argv.len());
    let mut it = argv.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            path = Some(
                it.next()
                    .ok_or_else(|| CliError::Usage("--config needs a file".into()))?,
            );
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Usage(format!("cannot read config {path}: {e}")))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("config {path} is not valid JSON: {e}")))?;
    let Value::Object(map) = value else {
        return Err(CliError::Usage(format!("config {path} must be a JSON object")));
    };

    let (at, leaf) = subcommand_path(&rest, cmd);
    let known = long_names(cmd, &leaf);
    let mut flags = Vec::new();
    for (key, v) in map {
        let name = key.replace('_', "-");
        if name == "config" || !known.contains(&name) {
            return Err(CliError::Usage(format!("unknown config key `{key}`")));
        }
        let flag = format!("--{name}");
        match v {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => flags.push(flag),
            Value::Array(items) => {
                let parts = items
                    .iter()
                    .map(scalar)
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| CliError::Usage(format!("config key `{key}`: arrays must hold scalars")))?;
                flags.push(format!("{flag}={}", parts.join(",")));
            }
            Value::Object(_) => flags.push(format!("{flag}={v}")),
            other => flags.push(format!("{flag}={}", scalar(&other).expect("scalar"))),
        }
    }
    rest.splice(at..at, flags);
    Ok(rest)
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

/// Index after the leading subcommand names (skipping global flags) and
/// the names themselves.
fn subcommand_path(argv: &[String], cmd: &clap::Command) -> (usize, Vec<String>) {
    let mut names = Vec::new();
    let mut current = cmd;
    let mut i = 1;
    while i < argv.len() {
        let a = &argv[i];
        if a == "--workers" {
            i += 2;
            continue;
        }
        if a.starts_with("--workers=") {
            i += 1;
            continue;
        }
        match current.find_subcommand(a) {
            Some(sub) if !a.starts_with('-') => {
                names.push(a.clone());
                current = sub;
                i += 1;
            }
            _ => break,
        }
    }
    (i.min(argv.len()), names)
}

fn long_names(cmd: &clap::Command, path: &[String]) -> BTreeSet<String> {
    let mut set: BTreeSet<String> = cmd
        .get_arguments()
        .filter_map(|a| a.get_long().map(str::to_string))
        .collect();
    let mut current = cmd;
    for name in path {
        current = current.find_subcommand(name).expect("path was resolved");
    }
    if !path.is_empty() {
        set.extend(
            current
                .get_arguments()
                .filter_map(|a| a.get_long().map(str::to_string)),
        );
    }
    set
}
