//! Labeled field datasets (CSV).
//!
//! ```text
//! # tridoa field dataset v1
//! theta,phi,r12,r13,r23,distance
//! 0.0,0.0,0.0998,-0.00005,-0.0998,0.6
//! ```
//!
//! Angles in radians, TDOAs and distance in meters. `distance` may be empty.

use std::path::Path;

use serde::{Deserialize, Serialize};
use tridoa_core::geometry::{Direction, TdoaTriple};
use tridoa_core::lattice::{FieldDataset, FieldRecord};

use super::{check_version, read_text, write_text};
use crate::error::{Error, Result};

const MAGIC: &str = "# tridoa field dataset v";

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    theta: f64,
    phi: f64,
    r12: f64,
    r13: f64,
    r23: f64,
    distance: Option<f64>,
}

pub fn parse_dataset(path: &Path, text: &str) -> Result<FieldDataset> {
    let (first, body) = text.split_once('\n').unwrap_or((text, ""));
    let version = first
        .trim_end()
        .strip_prefix(MAGIC)
        .and_then(|v| v.parse::<u32>().ok())
        .ok_or_else(|| Error::schema(path, format!("first line must be `{MAGIC}1`")))?;
    check_version(path, "field dataset", version)?;

    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let mut records = Vec::new();
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| Error::schema(path, e))?;
        let line = i + 3;
        let finite = [row.theta, row.phi, row.r12, row.r13, row.r23]
            .iter()
            .all(|v| v.is_finite());
        if !finite || row.distance.is_some_and(|d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::schema(path, format!("line {line}: non-finite or invalid value")));
        }
        let direction = Direction::new(row.theta, row.phi)
            .map_err(|e| Error::schema(path, format!("line {line}: {e}")))?;
        records.push(FieldRecord {
            direction,
            tdoa: TdoaTriple::new(row.r12, row.r13, row.r23),
            distance: row.distance,
        });
    }
    Ok(FieldDataset::new(records))
}

pub fn load_dataset(path: &Path) -> Result<FieldDataset> {
    parse_dataset(path, &read_text(path)?)
}

pub fn dataset_to_string(ds: &FieldDataset) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &ds.records {
        w.serialize(Row {
            theta: r.direction.theta,
            phi: r.direction.phi,
            r12: r.tdoa.r12,
            r13: r.tdoa.r13,
            r23: r.tdoa.r23,
            distance: r.distance,
        })
        .expect("in-memory CSV write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV is UTF-8");
    let body = if ds.records.is_empty() {
        "theta,phi,r12,r13,r23,distance\n".to_owned()
    } else {
        body
    };
    format!("{MAGIC}1\n{body}")
}

pub fn save_dataset(path: &Path, ds: &FieldDataset) -> Result<()> {
    write_text(path, &dataset_to_string(ds))
}
