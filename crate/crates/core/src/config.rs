//! Flat `key=value` configuration text.
//!
//! One pair per line; blank lines and lines starting with `#` are ignored.
//! Every key has a default and unknown keys are rejected by the consumers.

use std::path::Path;

use crate::error::{GcaError, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

pub fn parse_pairs(text: &str) -> Result<Vec<Entry>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            GcaError::Config(format!("line {}: expected key=value, got {line:?}", n + 1))
        })?;
        out.push(Entry {
            key: key.trim().to_string(),
            value: value.trim().to_string(),
            line: n + 1,
        });
    }
    Ok(out)
}

pub fn read_pairs(path: impl AsRef<Path>) -> Result<Vec<Entry>> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| GcaError::io(&path, e))?;
    parse_pairs(&text)
}

/// Parses a `key=value` override given on the command line.
pub fn parse_override(s: &str) -> Result<Entry> {
    let (key, value) = s
        .split_once('=')
        .ok_or_else(|| GcaError::Config(format!("override {s:?} is not key=value")))?;
    Ok(Entry {
        key: key.trim().to_string(),
        value: value.trim().to_string(),
        line: 0,
    })
}

fn bad(entry: &Entry, what: &str) -> GcaError {
    let at = if entry.line > 0 {
        format!("line {}: ", entry.line)
    } else {
        String::new()
    };
    GcaError::Config(format!(
        "{at}{} = {:?} is not {what}",
        entry.key, entry.value
    ))
}

pub fn usize_value(e: &Entry) -> Result<usize> {
    e.value.parse().map_err(|_| bad(e, "a non-negative integer"))
}

pub fn u64_value(e: &Entry) -> Result<u64> {
    e.value.parse().map_err(|_| bad(e, "a non-negative integer"))
}

pub fn f64_value(e: &Entry) -> Result<f64> {
    e.value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| bad(e, "a finite number"))
}

pub fn bool_value(e: &Entry) -> Result<bool> {
    match e.value.as_str() {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad(e, "true or false")),
    }
}

pub fn list_value(e: &Entry) -> Result<Vec<usize>> {
    if e.value.is_empty() {
        return Ok(Vec::new());
    }
    e.value
        .split(',')
        .map(|s| s.trim().parse().map_err(|_| bad(e, "a comma-separated integer list")))
        .collect()
}

pub fn enum_value<T>(e: &Entry, parse: fn(&str) -> Option<T>, choices: &str) -> Result<T> {
    parse(&e.value).ok_or_else(|| bad(e, &format!("one of {choices}")))
}

pub fn unknown_key(e: &Entry) -> GcaError {
    let at = if e.line > 0 {
        format!("line {}: ", e.line)
    } else {
        String::new()
    };
    GcaError::Config(format!("{at}unknown key {:?}", e.key))
}

pub fn join_list(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}
