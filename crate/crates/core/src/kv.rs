//! Flat `key = value` text, one pair per line, `#` starts a comment.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub type KvMap = BTreeMap<String, String>;

pub fn parse(text: &str) -> Result<KvMap> {
    let mut map = KvMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got `{raw}`", lineno + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

pub fn render(pairs: &[(String, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

pub fn get_parsed<T: std::str::FromStr>(map: &KvMap, key: &str) -> Result<Option<T>> {
    match map.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse::<T>()
            .map(Some)
            .map_err(|_| Error::Config(format!("bad value `{v}` for `{key}`"))),
    }
}

pub fn get_list<T: std::str::FromStr>(map: &KvMap, key: &str) -> Result<Option<Vec<T>>> {
    match map.get(key) {
        None => Ok(None),
        Some(v) => v
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<T>()
                    .map_err(|_| Error::Config(format!("bad list entry `{s}` for `{key}`")))
            })
            .collect::<Result<Vec<T>>>()
            .map(Some),
    }
}

pub fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}
