//! Resampling field-collected TDOAs onto an arbitrary target lattice.
//!
//! Field data comes in rings of constant elevation (the turntable sweeps
//! azimuth at a handful of speaker elevations). Each ring is interpolated in
//! azimuth with a periodic cubic Lagrange stencil; the ring values are then
//! combined with a cubic stencil in elevation. Rings are mirrored through the
//! zenith (`phi -> pi - phi`, `theta -> theta + pi` is the same physical
//! point), so targets near the pole get a centered stencil as well.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};
use core::fmt;

use super::{LatticeError, MappingLattice};
use crate::geometry::{Direction, TdoaTriple};
use crate::math::rem_euclid;

/// Minimum number of non-zenith elevation rings a dataset must contain.
pub const MIN_RINGS: usize = 3;
/// Minimum number of distinct azimuths on every non-zenith ring.
pub const MIN_THETAS_PER_RING: usize = 8;

const RING_TOL: f64 = 1e-9;
const EXACT_HIT_CHORD: f64 = 1e-9;
const TAU: f64 = 2.0 * PI;

/// One labeled field measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FieldRecord {
    pub direction: Direction,
    pub tdoa: TdoaTriple,
    /// Source distance in meters during collection, when known.
    pub distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FieldDataset {
    pub records: Vec<FieldRecord>,
}

impl FieldDataset {
    pub fn new(records: Vec<FieldRecord>) -> Self {
        Self { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn density_report(&self) -> DensityReport {
        let (rings, zenith) = group_rings(&self.records);
        DensityReport {
            rings: rings.iter().map(|r| (r.phi, r.thetas.len())).collect(),
            zenith_samples: zenith.len(),
        }
    }
}

/// Elevation rings found in a dataset and their azimuth counts.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityReport {
    /// `(phi, distinct azimuths)` per non-zenith ring, ascending in `phi`.
    pub rings: Vec<(f64, usize)>,
    pub zenith_samples: usize,
}

impl DensityReport {
    pub fn is_sufficient(&self) -> bool {
        self.rings.len() >= MIN_RINGS && self.rings.iter().all(|&(_, n)| n >= MIN_THETAS_PER_RING)
    }
}

impl fmt::Display for DensityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} elevation rings (need {MIN_RINGS}), {} zenith samples; azimuths per ring (need {MIN_THETAS_PER_RING}):",
            self.rings.len(),
            self.zenith_samples
        )?;
        for (phi, n) in &self.rings {
            write!(f, " {:.2}deg:{n}", phi.to_degrees())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Ring {
    phi: f64,
    /// Ascending, distinct, within `[-pi, pi)`.
    thetas: Vec<f64>,
    values: Vec<TdoaTriple>,
}

impl Ring {
    fn eval(&self, theta: f64) -> TdoaTriple {
        let n = self.thetas.len();
        let base = self.thetas[0];
        let t = base + rem_euclid(theta - base, TAU);
        let i = self.thetas.partition_point(|&x| x <= t).max(1) - 1;
        let mut xs = [0.0; 4];
        let mut ys = [TdoaTriple::default(); 4];
        for (slot, offset) in (-1isize..=2).enumerate() {
            let k = i as isize + offset;
            let wraps = k.div_euclid(n as isize);
            let idx = k.rem_euclid(n as isize) as usize;
            xs[slot] = self.thetas[idx] + TAU * wraps as f64;
            ys[slot] = self.values[idx];
        }
        lagrange4(&xs, &ys, t)
    }

    /// Stored sample nearest in azimuth, for the exact-hit rule.
    fn nearest_sample(&self, theta: f64) -> (f64, TdoaTriple) {
        let base = self.thetas[0];
        let t = base + rem_euclid(theta - base, TAU);
        let i = self.thetas.partition_point(|&x| x <= t).max(1) - 1;
        let j = (i + 1) % self.thetas.len();
        let di = t - self.thetas[i];
        let dj = rem_euclid(self.thetas[j] - t, TAU);
        if di <= dj {
            (self.thetas[i], self.values[i])
        } else {
            (self.thetas[j], self.values[j])
        }
    }
}

fn lagrange4(xs: &[f64; 4], ys: &[TdoaTriple; 4], x: f64) -> TdoaTriple {
    let mut out = [0.0; 3];
    for i in 0..4 {
        let mut w = 1.0;
        for j in 0..4 {
            if i != j {
                w *= (x - xs[j]) / (xs[i] - xs[j]);
            }
        }
        let y = ys[i].as_array();
        for c in 0..3 {
            out[c] += w * y[c];
        }
    }
    TdoaTriple::from_array(out)
}

fn mean(values: &[TdoaTriple]) -> TdoaTriple {
    let n = values.len() as f64;
    let mut s = [0.0; 3];
    for v in values {
        let a = v.as_array();
        for c in 0..3 {
            s[c] += a[c];
        }
    }
    TdoaTriple::new(s[0] / n, s[1] / n, s[2] / n)
}

/// Groups records into non-zenith rings (duplicate azimuths averaged) and the
/// zenith samples.
fn group_rings(records: &[FieldRecord]) -> (Vec<Ring>, Vec<TdoaTriple>) {
    let mut zenith = Vec::new();
    let mut rest: Vec<(f64, f64, TdoaTriple)> = Vec::new();
    for r in records {
        if r.direction.phi >= FRAC_PI_2 - RING_TOL {
            zenith.push(r.tdoa);
        } else {
            rest.push((r.direction.phi, r.direction.theta, r.tdoa));
        }
    }
    rest.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let mut rings = Vec::new();
    let mut start = 0;
    while start < rest.len() {
        let phi0 = rest[start].0;
        let mut end = start;
        while end < rest.len() && rest[end].0 - phi0 <= RING_TOL {
            end += 1;
        }
        let mut members: Vec<(f64, TdoaTriple)> =
            rest[start..end].iter().map(|&(_, t, q)| (t, q)).collect();
        members.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut thetas = Vec::new();
        let mut values = Vec::new();
        let mut k = 0;
        while k < members.len() {
            let mut m = k;
            while m < members.len() && members[m].0 - members[k].0 <= 1e-12 {
                m += 1;
            }
            let group: Vec<TdoaTriple> = members[k..m].iter().map(|x| x.1).collect();
            thetas.push(members[k].0);
            values.push(mean(&group));
            k = m;
        }
        // theta = pi and theta = -pi are the same meridian
        if thetas.len() > 1 && thetas[0] + TAU - thetas[thetas.len() - 1] <= 1e-12 {
            let last = values.pop().unwrap();
            thetas.pop();
            values[0] = mean(&[values[0], last]);
        }
        rings.push(Ring {
            phi: phi0,
            thetas,
            values,
        });
        start = end;
    }
    (rings, zenith)
}

/// Cubic ring-wise interpolator over a field dataset.
#[derive(Debug, Clone)]
pub struct FieldInterpolator {
    rings: Vec<Ring>,
    zenith: Option<TdoaTriple>,
}

impl FieldInterpolator {
    pub fn new(ds: &FieldDataset) -> Result<Self, LatticeError> {
        for (i, r) in ds.records.iter().enumerate() {
            let finite = r.direction.theta.is_finite()
                && r.direction.phi.is_finite()
                && r.tdoa.as_array().iter().all(|v| v.is_finite());
            if !finite {
                return Err(LatticeError::NonFiniteRecord(i));
            }
        }
        let report = ds.density_report();
        if !report.is_sufficient() {
            return Err(LatticeError::SparseDataset(report));
        }
        let (rings, zenith) = group_rings(&ds.records);
        Ok(Self {
            rings,
            zenith: (!zenith.is_empty()).then(|| mean(&zenith)),
        })
    }

    fn node_count(&self) -> usize {
        2 * self.rings.len() + usize::from(self.zenith.is_some())
    }

    /// Elevation of virtual node `k` and its value at azimuth `theta`.
    fn node(&self, k: usize, theta: f64) -> (f64, TdoaTriple) {
        let m = self.rings.len();
        if k < m {
            return (self.rings[k].phi, self.rings[k].eval(theta));
        }
        let mut k = k - m;
        if let Some(z) = self.zenith {
            if k == 0 {
                return (FRAC_PI_2, z);
            }
            k -= 1;
        }
        let ring = &self.rings[m - 1 - k];
        (PI - ring.phi, ring.eval(theta + PI))
    }

    fn node_phi(&self, k: usize) -> f64 {
        let m = self.rings.len();
        if k < m {
            return self.rings[k].phi;
        }
        let mut k = k - m;
        if self.zenith.is_some() {
            if k == 0 {
                return FRAC_PI_2;
            }
            k -= 1;
        }
        PI - self.rings[m - 1 - k].phi
    }

    fn exact_hit(&self, d: Direction) -> Option<TdoaTriple> {
        let p = d.to_point();
        if let Some(z) = self.zenith {
            let pole = Direction {
                theta: 0.0,
                phi: FRAC_PI_2,
            };
            if p.chord(&pole.to_point()) < EXACT_HIT_CHORD {
                return Some(z);
            }
        }
        let k = self
            .rings
            .partition_point(|r| r.phi < d.phi - EXACT_HIT_CHORD);
        for ring in self.rings.iter().skip(k).take_while(|r| r.phi <= d.phi + EXACT_HIT_CHORD) {
            let (theta, q) = ring.nearest_sample(d.theta);
            let s = Direction {
                theta,
                phi: ring.phi,
            };
            if p.chord(&s.to_point()) < EXACT_HIT_CHORD {
                return Some(q);
            }
        }
        None
    }

    pub fn interpolate(&self, d: Direction) -> TdoaTriple {
        if let Some(q) = self.exact_hit(d) {
            return q;
        }
        let total = self.node_count();
        let j = (0..total)
            .take_while(|&k| self.node_phi(k) <= d.phi)
            .last()
            .unwrap_or(0);
        let start = j.saturating_sub(1).min(total - 4);
        let mut xs = [0.0; 4];
        let mut ys = [TdoaTriple::default(); 4];
        for s in 0..4 {
            let (x, y) = self.node(start + s, d.theta);
            xs[s] = x;
            ys[s] = y;
        }
        lagrange4(&xs, &ys, d.phi)
    }
}

/// Builds a mapping lattice on `targets` from field-collected TDOAs.
pub fn interpolate_field_dataset(
    ds: &FieldDataset,
    targets: Vec<Direction>,
) -> Result<MappingLattice, LatticeError> {
    let interp = FieldInterpolator::new(ds)?;
    let tdoas = targets.iter().map(|&d| interp.interpolate(d)).collect();
    MappingLattice::from_entries(targets, tdoas)
}
