//! Search-space lattices on the upper hemisphere and TDOA mapping tables.
//!
//! A [`MappingLattice`] pairs every lattice direction with the TDOA triple it
//! produces, either synthesized from an array model or interpolated from a
//! field dataset. Inference is the exact nearest neighbor of a measured triple
//! among the stored triples.

mod interp;
pub mod kdtree;

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use crate::geometry::{tdoa_for_direction, ArrayGeometry, Direction, FarFieldRadius, TdoaTriple};
use crate::math::{acos, wrap_pi};

pub use interp::{
    interpolate_field_dataset, DensityReport, FieldDataset, FieldInterpolator, FieldRecord,
    MIN_RINGS, MIN_THETAS_PER_RING,
};
pub use kdtree::KdTree;

/// Golden ratio.
pub const GOLDEN_RATIO: f64 = 1.618_033_988_749_895;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LatticeError {
    #[error("latitude-longitude lattice needs an even u >= 2, got {0}")]
    InvalidLatLongU(usize),
    #[error("mapping lattice needs at least one entry")]
    Empty,
    #[error("{directions} directions but {tdoas} TDOA triples")]
    LengthMismatch { directions: usize, tdoas: usize },
    #[error("field dataset too sparse for interpolation: {0}")]
    SparseDataset(DensityReport),
    #[error("field dataset contains a non-finite value in record {0}")]
    NonFiniteRecord(usize),
}

/// Spherical Fibonacci lattice of `n` directions on the upper hemisphere.
///
/// Entry `k` (one-based `n = k + 1`) has azimuth `2 pi (n - 1) / GOLDEN_RATIO`
/// wrapped into `[-pi, pi)` and elevation `pi/2 - acos(1 - (2n - 1) / (2N))`.
pub fn fibonacci_lattice(n: usize) -> Vec<Direction> {
    let total = n as f64;
    (1..=n)
        .map(|i| {
            let k = (i - 1) as f64;
            // reduce before multiplying out to keep large indices accurate
            let turns = k / GOLDEN_RATIO;
            let frac = turns - crate::math::floor(turns);
            let theta = wrap_pi(2.0 * PI * frac);
            let phi = FRAC_PI_2 - acos(1.0 - (2.0 * i as f64 - 1.0) / (2.0 * total));
            Direction { theta, phi }
        })
        .collect()
}

/// Latitude-longitude lattice with angular spacing `pi / u`: `2u` meridians
/// starting at `-pi`, `u / 2` parallels at `phi = j pi / u` for
/// `j = 0..u/2`, plus the pole. Holds `u^2 + 1` directions.
pub fn latlong_lattice(u: usize) -> Result<Vec<Direction>, LatticeError> {
    if u < 2 || u % 2 != 0 {
        return Err(LatticeError::InvalidLatLongU(u));
    }
    let delta = PI / u as f64;
    let mut out = Vec::with_capacity(u * u + 1);
    for j in 0..u / 2 {
        let phi = delta * j as f64;
        for k in 0..2 * u {
            out.push(Direction {
                theta: -PI + delta * k as f64,
                phi,
            });
        }
    }
    out.push(Direction {
        theta: 0.0,
        phi: FRAC_PI_2,
    });
    Ok(out)
}

/// Result of a nearest-neighbor lookup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NnsMatch {
    pub index: usize,
    pub direction: Direction,
    /// Squared distance between the stored and the queried triple, in m².
    pub squared_error: f64,
}

/// Direction ↔ TDOA mapping table with a k-d index over the TDOA coordinates.
#[derive(Debug, Clone)]
pub struct MappingLattice {
    directions: Vec<Direction>,
    tdoas: Vec<TdoaTriple>,
    geometry: Option<ArrayGeometry>,
    index: KdTree,
}

impl MappingLattice {
    pub fn from_entries(
        directions: Vec<Direction>,
        tdoas: Vec<TdoaTriple>,
    ) -> Result<Self, LatticeError> {
        if directions.len() != tdoas.len() {
            return Err(LatticeError::LengthMismatch {
                directions: directions.len(),
                tdoas: tdoas.len(),
            });
        }
        if directions.is_empty() {
            return Err(LatticeError::Empty);
        }
        let index = KdTree::build(tdoas.iter().map(TdoaTriple::as_array).collect());
        Ok(Self {
            directions,
            tdoas,
            geometry: None,
            index,
        })
    }

    /// Fills the table from the array model: `q_n` is the TDOA triple of a
    /// source at distance `r` in direction `directions[n]`.
    pub fn synthesize(
        directions: Vec<Direction>,
        g: &ArrayGeometry,
        r: FarFieldRadius,
    ) -> Result<Self, LatticeError> {
        let tdoas = directions
            .iter()
            .map(|&d| tdoa_for_direction(g, d, r.get()))
            .collect();
        Ok(Self::from_entries(directions, tdoas)?.with_geometry(*g))
    }

    /// Records the array geometry the table was built for.
    pub fn with_geometry(mut self, g: ArrayGeometry) -> Self {
        self.geometry = Some(g);
        self
    }

    pub fn geometry(&self) -> Option<&ArrayGeometry> {
        self.geometry.as_ref()
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn tdoas(&self) -> &[TdoaTriple] {
        &self.tdoas
    }

    pub fn entry(&self, n: usize) -> Option<(Direction, TdoaTriple)> {
        Some((*self.directions.get(n)?, *self.tdoas.get(n)?))
    }

    /// Nearest stored triple to `q`; ties resolve to the lowest entry index.
    ///
    /// A query with non-finite components falls back to entry 0 with an
    /// infinite error so it can never pass a coherence check.
    pub fn nearest(&self, q: &TdoaTriple) -> NnsMatch {
        match self.index.nearest(&q.as_array()) {
            Some((index, squared_error)) => NnsMatch {
                index,
                direction: self.directions[index],
                squared_error,
            },
            None => NnsMatch {
                index: 0,
                direction: self.directions[0],
                squared_error: f64::INFINITY,
            },
        }
    }
}

pub fn synthesize_mappings(
    directions: Vec<Direction>,
    g: &ArrayGeometry,
    r: FarFieldRadius,
) -> Result<MappingLattice, LatticeError> {
    MappingLattice::synthesize(directions, g, r)
}

pub fn nns_lookup(lattice: &MappingLattice, q: &TdoaTriple) -> NnsMatch {
    lattice.nearest(q)
}
