//! Mapping lattices and direction sets (JSON).
//!
//! Angles are stored in radians. Floats are written in shortest round-trip
//! form, so a save/load cycle reproduces every entry bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};
use tridoa_core::geometry::{ArrayGeometry, Direction, TdoaTriple};
use tridoa_core::lattice::MappingLattice;

use super::config::GeometryFile;
use super::{parse_json, read_text, write_text, FORMAT_VERSION};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeFile {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometryFile>,
    /// Source distance used to synthesize the entries, when synthetic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub far_field_r: Option<f64>,
    /// `[theta, phi, r12, r13, r23]` per entry.
    pub entries: Vec<[f64; 5]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectionsFile {
    pub version: u32,
    /// `[theta, phi]` per direction.
    pub directions: Vec<[f64; 2]>,
}

fn direction(path: &Path, theta: f64, phi: f64) -> Result<Direction> {
    Direction::new(theta, phi).map_err(|e| Error::schema(path, e))
}

pub fn lattice_to_string(lat: &MappingLattice, far_field_r: Option<f64>) -> String {
    let f = LatticeFile {
        version: FORMAT_VERSION,
        geometry: lat.geometry().map(|g| GeometryFile::from(*g)),
        far_field_r,
        entries: lat
            .directions()
            .iter()
            .zip(lat.tdoas())
            .map(|(d, q)| [d.theta, d.phi, q.r12, q.r13, q.r23])
            .collect(),
    };
    serde_json::to_string(&f).expect("lattice serializes")
}

pub fn parse_lattice(path: &Path, text: &str) -> Result<MappingLattice> {
    let f: LatticeFile = parse_json(path, "lattice", text)?;
    let mut dirs = Vec::with_capacity(f.entries.len());
    let mut tdoas = Vec::with_capacity(f.entries.len());
    for e in &f.entries {
        if !e.iter().all(|v| v.is_finite()) {
            return Err(Error::schema(path, "non-finite lattice entry"));
        }
        dirs.push(direction(path, e[0], e[1])?);
        tdoas.push(TdoaTriple::new(e[2], e[3], e[4]));
    }
    let mut lat = MappingLattice::from_entries(dirs, tdoas)?;
    if let Some(g) = f.geometry {
        lat = lat.with_geometry(ArrayGeometry::new(g.b, g.c_x, g.c_y)?);
    }
    Ok(lat)
}

pub fn load_lattice(path: &Path) -> Result<MappingLattice> {
    parse_lattice(path, &read_text(path)?)
}

pub fn save_lattice(path: &Path, lat: &MappingLattice, far_field_r: Option<f64>) -> Result<()> {
    write_text(path, &lattice_to_string(lat, far_field_r))
}

pub fn directions_to_string(dirs: &[Direction]) -> String {
    let f = DirectionsFile {
        version: FORMAT_VERSION,
        directions: dirs.iter().map(|d| [d.theta, d.phi]).collect(),
    };
    serde_json::to_string(&f).expect("directions serialize")
}

pub fn parse_directions(path: &Path, text: &str) -> Result<Vec<Direction>> {
    let f: DirectionsFile = parse_json(path, "direction set", text)?;
    f.directions
        .iter()
        .map(|d| direction(path, d[0], d[1]))
        .collect()
}

pub fn load_directions(path: &Path) -> Result<Vec<Direction>> {
    parse_directions(path, &read_text(path)?)
}

pub fn save_directions(path: &Path, dirs: &[Direction]) -> Result<()> {
    write_text(path, &directions_to_string(dirs))
}
