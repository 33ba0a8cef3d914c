//! File formats and stream ingestion.
//!
//! Every artifact carries a format version; loaders reject versions they do
//! not know.

pub mod config;
pub mod dataset;
pub mod events;
pub mod lattice;
pub mod live;
pub mod wav;

use std::path::Path;

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

pub(crate) fn check_version(path: &Path, kind: &'static str, found: u32) -> Result<()> {
    if found != FORMAT_VERSION {
        return Err(Error::Version {
            path: path.to_owned(),
            kind,
            found,
            expected: FORMAT_VERSION,
        });
    }
    Ok(())
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parses TOML, checking the top-level `version` key before the schema so a
/// newer file reports a version error rather than a field error.
pub(crate) fn parse_toml<T: serde::de::DeserializeOwned>(
    path: &Path,
    kind: &'static str,
    text: &str,
) -> Result<T> {
    let table: toml::Table = toml::from_str(text).map_err(|e| Error::schema(path, e))?;
    let version = match table.get("version") {
        Some(toml::Value::Integer(v)) => u32::try_from(*v).unwrap_or(u32::MAX),
        Some(_) => return Err(Error::schema(path, "`version` must be an integer")),
        None => return Err(Error::schema(path, "missing `version`")),
    };
    check_version(path, kind, version)?;
    toml::from_str(text).map_err(|e| Error::schema(path, e))
}

/// Same as [`parse_toml`] for JSON documents.
pub(crate) fn parse_json<T: serde::de::DeserializeOwned>(
    path: &Path,
    kind: &'static str,
    text: &str,
) -> Result<T> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::schema(path, e))?;
    let version = value
        .get("version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::schema(path, "missing integer `version`"))?;
    check_version(path, kind, u32::try_from(version).unwrap_or(u32::MAX))?;
    serde_json::from_value(value).map_err(|e| Error::schema(path, e))
}
