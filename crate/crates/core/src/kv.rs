//! `key = value` text with `#` comments, shared by metric specs, run
//! configurations and parameter files.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

pub fn parse(text: &str, src: &str) -> Result<Vec<Entry>> {
    let mut out: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(src, i + 1, format!("expected `key = value`, found `{line}`")))?;
        let key = k.trim().to_string();
        if key.is_empty() {
            return Err(Error::parse(src, i + 1, "empty key"));
        }
        if let Some(prev) = out.iter().find(|e| e.key == key) {
            return Err(Error::parse(
                src,
                i + 1,
                format!("duplicate key `{key}` (first set on line {})", prev.line),
            ));
        }
        out.push(Entry {
            key,
            value: v.trim().to_string(),
            line: i + 1,
        });
    }
    Ok(out)
}

/// Splits `name(a, b, c)` into the name and its comma-separated arguments.
pub fn call(value: &str) -> Option<(&str, Vec<&str>)> {
    let open = value.find('(')?;
    let inner = value[open + 1..].strip_suffix(')')?;
    let args = if inner.trim().is_empty() {
        Vec::new()
    } else {
        inner.split(',').map(str::trim).collect()
    };
    Some((value[..open].trim(), args))
}
