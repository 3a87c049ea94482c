//! Configuration files.
//!
//! A configuration file is a JSON object whose keys are long flag names.
//! Top-level entries apply to every subcommand that accepts them; an object
//! under a subcommand name (`"frc"`, `"model gen"`) applies to that
//! subcommand only. Entries are appended to the command line unless the flag
//! is already present there, so flags > config file > defaults.

use std::ffi::OsString;
use std::path::Path;

use clap::{ArgAction, Command, CommandFactory};
use serde_json::{Map, Value};

use crate::args::Cli;

/// Path given with `--config`, found without a full parse.
pub fn config_path(argv: &[OsString]) -> Option<OsString> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            return None;
        }
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(v.into());
        }
    }
    None
}

/// `argv` with the entries of the configuration file merged in.
pub fn merge_config(argv: Vec<OsString>, path: &Path) -> Result<Vec<OsString>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| format!("config {}: {e}", path.display()))?;
    let obj = doc.as_object().ok_or_else(|| format!("config {} must be a JSON object", path.display()))?;
    let root = Cli::command();
    let (chain, leaf) = subcommand_path(&root, &argv);
    let Some(leaf) = leaf else {
        return Ok(argv);
    };
    let section_names = all_subcommand_paths(&root);
    let mut entries: Vec<(String, Value)> = Vec::new();
    for (k, v) in obj {
        if section_names.contains(k) && v.is_object() {
            continue;
        }
        if !accepts_anywhere(&root, k) {
            return Err(format!("unknown configuration key '{k}'"));
        }
        if accepts(&root, leaf, k) {
            entries.push((k.clone(), v.clone()));
        }
    }
    if let Some(section) = obj.get(&chain.join(" ")) {
        let section = section.as_object().ok_or_else(|| format!("config section '{}' must be an object", chain.join(" ")))?;
        for (k, v) in section {
            if !accepts(&root, leaf, k) {
                return Err(format!("'{}' does not accept configuration key '{k}'", chain.join(" ")));
            }
            entries.retain(|(e, _)| e != k);
            entries.push((k.clone(), v.clone()));
        }
    }
    let mut out = argv.clone();
    for (k, v) in entries {
        if present(&argv, &root, leaf, &k) {
            continue;
        }
        let flag = format!("--{k}");
        match v {
            Value::Bool(true) => out.push(flag.into()),
            Value::Bool(false) | Value::Null => {}
            Value::Array(items) => {
                let parts: Vec<String> = items.iter().map(scalar).collect();
                out.push(flag.into());
                out.push(parts.join(",").into());
            }
            other => {
                out.push(flag.into());
                out.push(scalar(&other).into());
            }
        }
    }
    Ok(out)
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn subcommand_path<'a>(root: &'a Command, argv: &[OsString]) -> (Vec<String>, Option<&'a Command>) {
    let idx = Some(root).into_iter().flat_map(|c| c.get_arguments()).filter(|a| takes_value(a.get_action()));
    let valued: Vec<String> = idx.filter_map(|a| a.get_long().map(|l| format!("--{l}"))).collect();
    let mut cmd = root;
    let mut chain = Vec::new();
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s.starts_with('-') {
            if valued.iter().any(|v| *v == s) {
                it.next();
            }
            continue;
        }
        match cmd.find_subcommand(s.as_ref()) {
            Some(sub) => {
                chain.push(sub.get_name().to_string());
                cmd = sub;
                if !cmd.has_subcommands() {
                    return (chain, Some(cmd));
                }
            }
            None => break,
        }
    }
    (chain, None)
}

fn takes_value(action: &ArgAction) -> bool {
    matches!(action, ArgAction::Set | ArgAction::Append)
}

fn all_subcommand_paths(root: &Command) -> Vec<String> {
    fn walk(cmd: &Command, prefix: &mut Vec<String>, out: &mut Vec<String>) {
        for sub in cmd.get_subcommands() {
            prefix.push(sub.get_name().to_string());
            out.push(prefix.join(" "));
            walk(sub, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    walk(root, &mut Vec::new(), &mut out);
    out
}

fn longs(cmd: &Command) -> Vec<String> {
    cmd.get_arguments().filter_map(|a| a.get_long().map(str::to_string)).collect()
}

fn accepts(root: &Command, leaf: &Command, key: &str) -> bool {
    key != "config" && (longs(leaf).iter().any(|l| l == key) || longs(root).iter().any(|l| l == key))
}

fn accepts_anywhere(root: &Command, key: &str) -> bool {
    fn walk(cmd: &Command, key: &str) -> bool {
        longs(cmd).iter().any(|l| l == key) || cmd.get_subcommands().any(|s| walk(s, key))
    }
    key != "config" && walk(root, key)
}

fn present(argv: &[OsString], root: &Command, leaf: &Command, key: &str) -> bool {
    let short = leaf
        .get_arguments()
        .chain(root.get_arguments())
        .find(|a| a.get_long() == Some(key))
        .and_then(|a| a.get_short())
        .map(|c| format!("-{c}"));
    let long = format!("--{key}");
    let long_eq = format!("--{key}=");
    argv.iter().any(|a| {
        let s = a.to_string_lossy();
        s == long || s.starts_with(&long_eq) || short.as_deref() == Some(s.as_ref())
    })
}

/// Object form of `key=value` pairs; values parse as JSON when possible.
pub fn parse_pairs(pairs: &[String], base: Option<&str>) -> Result<Map<String, Value>, String> {
    let mut map = match base {
        Some(text) => match serde_json::from_str::<Value>(text) {
            Ok(Value::Object(m)) => m,
            Ok(_) => return Err("parameters must be a JSON object".into()),
            Err(e) => return Err(format!("parameters: {e}")),
        },
        None => Map::new(),
    };
    for p in pairs {
        let (k, v) = p.split_once('=').ok_or_else(|| format!("parameter '{p}' is not KEY=VALUE"))?;
        let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
        map.insert(k.to_string(), value);
    }
    Ok(map)
}
