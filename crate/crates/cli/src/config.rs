//! `key = value` config files, spliced into argv ahead of the command-line flags.

use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};

/// Parses a flat config file into `--key value` pairs. Blank lines and lines
/// starting with `#` are skipped; `key = true` becomes a bare `--key`.
pub fn file_args(path: &Path) -> Result<Vec<(String, Option<String>)>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse_args(&text).with_context(|| format!("in config {}", path.display()))
}

pub fn parse_args(text: &str) -> Result<Vec<(String, Option<String>)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("line {}: expected `key = value`", lineno + 1);
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim().trim_matches('"');
        if key.is_empty() || key == "config" {
            bail!("line {}: bad key", lineno + 1);
        }
        match value {
            "true" => out.push((format!("--{key}"), None)),
            "false" => {}
            v => out.push((format!("--{key}"), Some(v.to_string()))),
        }
    }
    Ok(out)
}

const SUBCOMMANDS: [&str; 6] = ["simulate", "sweep", "thresholds", "events", "structures", "oracle-check"];

/// Removes `--config PATH` / `--config=PATH` from argv and inserts the file's
/// arguments right after the subcommand, minus any key also given as a flag.
pub fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut config = None;
    let mut it = argv.into_iter();
    while let Some(arg) = it.next() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            let path = it.next().context("--config needs a path")?;
            config = Some(path);
        } else if let Some(path) = s.strip_prefix("--config=") {
            config = Some(OsString::from(path));
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = config else {
        return Ok(rest);
    };
    let given: Vec<String> = rest
        .iter()
        .filter_map(|a| a.to_str())
        .filter(|a| a.starts_with("--"))
        .map(|a| a.split('=').next().unwrap_or(a).to_string())
        .collect();
    let extra: Vec<OsString> = file_args(Path::new(&path))?
        .into_iter()
        .filter(|(k, _)| !given.contains(k))
        .flat_map(|(k, v)| std::iter::once(k).chain(v))
        .map(OsString::from)
        .collect();
    let at =
        rest.iter().position(|a| a.to_str().is_some_and(|s| SUBCOMMANDS.contains(&s))).map_or(rest.len(), |p| p + 1);
    rest.splice(at..at, extra);
    Ok(rest)
}
