//! Config files: TOML key = value pairs merged under the command-line flags.
//!
//! Top-level keys apply to every subcommand, `[name]` tables to one subcommand and `[global.action]`
//! tables to one `global` action. Each key is turned into its `--key value` flag and inserted before
//! the user's own flags, so anything given on the command line wins.

use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::CliError;

const SUBCOMMANDS: [&str; 7] = ["local", "h-table", "arch", "fetch", "global", "mvalue", "certify"];

/// Removes `--config PATH` from the arguments and returns its path.
fn take_config(args: &mut Vec<String>) -> Result<Option<PathBuf>, CliError> {
    let mut found = None;
    let mut i = 0;
    while i < args.len() {
        if args[i] == "--config" {
            let path = args.get(i + 1).cloned().ok_or_else(|| CliError::Config("--config needs a path".into()))?;
            args.drain(i..i + 2);
            found = Some(PathBuf::from(path));
        } else if let Some(p) = args[i].strip_prefix("--config=") {
            found = Some(PathBuf::from(p));
            args.remove(i);
        } else {
            i += 1;
        }
    }
    Ok(found)
}

fn flag_value(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Integer(i) => Some(i.to_string()),
        Value::Float(f) => Some(format!("{f:?}")),
        Value::Boolean(_) => None,
        Value::Array(items) => Some(items.iter().filter_map(flag_value).collect::<Vec<_>>().join(",")),
        Value::Datetime(d) => Some(d.to_string()),
        Value::Table(_) => None,
    }
}

fn push_flags(table: &Table, out: &mut Vec<String>) {
    for (k, v) in table {
        if v.is_table() {
            continue;
        }
        let flag = format!("--{}", k.replace('_', "-"));
        match v {
            Value::Boolean(true) => out.push(flag),
            Value::Boolean(false) => {}
            _ => {
                if let Some(s) = flag_value(v) {
                    out.push(flag);
                    out.push(s);
                }
            }
        }
    }
}

pub fn parse_file(path: &Path) -> Result<Table, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
    text.parse::<Table>().map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Flags contributed by the config for the subcommand path `path` (e.g. ["global", "scan"]).
pub fn flags_for(table: &Table, path: &[&str]) -> Vec<String> {
    let mut out = Vec::new();
    push_flags(table, &mut out);
    let mut current = table;
    for name in path {
        match current.get(*name).and_then(Value::as_table) {
            Some(t) => {
                push_flags(t, &mut out);
                current = t;
            }
            None => break,
        }
    }
    out
}

/// The process arguments with config-derived flags spliced in after the subcommand path.
pub fn merged_args(mut args: Vec<String>) -> Result<Vec<String>, CliError> {
    let Some(path) = take_config(&mut args)? else {
        return Ok(args);
    };
    let table = parse_file(&path)?;
    let Some(at) = args.iter().position(|a| SUBCOMMANDS.contains(&a.as_str())) else {
        return Ok(args);
    };
    let mut sub = vec![args[at].as_str()];
    let mut insert = at + 1;
    if args[at] == "global" {
        if let Some(action) = args.get(at + 1).filter(|a| !a.starts_with('-')) {
            sub.push(action.as_str());
            insert = at + 2;
        }
    }
    let flags = flags_for(&table, &sub);
    args.splice(insert..insert, flags);
    Ok(args)
}
