//! Recency- and frequency-aware exponential-filter clustering.
//!
//! A fixed bank of clusters follows the accepted frame directions. A
//! measurement within `d_min` (chord distance) of an active centroid pulls the
//! most confident such centroid toward itself and raises its confidence by
//! `1 / N_s`; otherwise it replaces the least confident cluster. Every other
//! cluster loses `dt / T_win` confidence per step and is forgotten at zero.
//! A cluster is reported as a source once its confidence reaches 1 and for as
//! long as it stays above `T_a`.

use alloc::vec::Vec;

use crate::geometry::{Direction, HemispherePoint};
use crate::math::sqrt;

const SNAP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum TrackerError {
    #[error("invalid tracker parameter {name} = {value}")]
    InvalidParam { name: &'static str, value: f64 },
    #[error("measurement ({0}, {1}, {2}) is not a unit vector on the upper hemisphere")]
    InvalidMeasurement(f64, f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrackerParams {
    /// Number of clusters.
    pub n_c: usize,
    /// Time between steps, seconds.
    pub dt: f64,
    /// Association radius as a chord on the unit sphere.
    pub d_min: f64,
    /// Updates needed to go from empty to fully confident.
    pub n_s: usize,
    /// Exponential filter memory.
    pub alpha: f64,
    /// Time for a full-confidence cluster to fade out, seconds.
    pub t_win: f64,
    /// Confidence below which a detected source is dropped.
    pub t_a: f64,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self {
            n_c: 10,
            dt: 1024.0 / (2.0 * 48_000.0),
            d_min: 0.25,
            n_s: 5,
            alpha: 0.75,
            t_win: 5.0,
            t_a: 0.5,
        }
    }
}

impl TrackerParams {
    /// Defaults with the hop duration of the given frame length and rate.
    pub fn for_stream(frame_len: usize, fs: f64) -> Self {
        Self {
            dt: frame_len as f64 / (2.0 * fs),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), TrackerError> {
        let bad = |name, value| Err(TrackerError::InvalidParam { name, value });
        if self.n_c == 0 {
            return bad("n_c", 0.0);
        }
        if self.n_s == 0 {
            return bad("n_s", 0.0);
        }
        if !(self.dt > 0.0 && self.dt < self.t_win) {
            return bad("dt", self.dt);
        }
        if !(self.t_win.is_finite()) {
            return bad("t_win", self.t_win);
        }
        if !(self.d_min > 0.0 && self.d_min.is_finite()) {
            return bad("d_min", self.d_min);
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha", self.alpha);
        }
        if !(self.t_a > 0.0 && self.t_a < 1.0) {
            return bad("t_a", self.t_a);
        }
        Ok(())
    }

    /// Confidence lost per idle step.
    pub fn decay(&self) -> f64 {
        self.dt / self.t_win
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Cluster {
    pub id: usize,
    pub centroid: Option<HemispherePoint>,
    pub rho: f64,
    pub detected: bool,
}

impl Cluster {
    fn empty(id: usize) -> Self {
        Self {
            id,
            centroid: None,
            rho: 0.0,
            detected: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TrackerEventKind {
    SourceAppeared,
    SourceLost,
    ClusterForgotten,
}

impl TrackerEventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TrackerEventKind::SourceAppeared => "source_appeared",
            TrackerEventKind::SourceLost => "source_lost",
            TrackerEventKind::ClusterForgotten => "cluster_forgotten",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrackerEvent {
    pub kind: TrackerEventKind,
    pub cluster: usize,
    pub time: f64,
}

#[derive(Debug, Clone)]
pub struct Tracker {
    params: TrackerParams,
    clusters: Vec<Cluster>,
    frame_count: u64,
}

impl Tracker {
    pub fn new(params: TrackerParams) -> Result<Self, TrackerError> {
        params.validate()?;
        Ok(Self {
            params,
            clusters: (0..params.n_c).map(Cluster::empty).collect(),
            frame_count: 0,
        })
    }

    /// Starts from explicit cluster contents; missing clusters are empty and
    /// extra ones are dropped. Ids are reassigned by position.
    pub fn with_clusters(
        params: TrackerParams,
        clusters: impl IntoIterator<Item = Cluster>,
    ) -> Result<Self, TrackerError> {
        let mut t = Self::new(params)?;
        for (slot, mut c) in t.clusters.iter_mut().zip(clusters) {
            c.id = slot.id;
            c.rho = c.rho.clamp(0.0, 1.0);
            if c.rho == 0.0 {
                c.centroid = None;
                c.detected = false;
            }
            *slot = c;
        }
        Ok(t)
    }

    pub fn params(&self) -> &TrackerParams {
        &self.params
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn frame_count(&self) -> u64 {
        self.frame_count
    }

    /// Advances one hop. Events are stamped with the time of this hop,
    /// `frame_count * dt` before the increment.
    pub fn step(
        &mut self,
        measurement: Option<HemispherePoint>,
    ) -> Result<Vec<TrackerEvent>, TrackerError> {
        let mut events = Vec::new();
        self.step_into(measurement, &mut events)?;
        Ok(events)
    }

    /// Like [`Tracker::step`] but appends events to `events`.
    pub fn step_into(
        &mut self,
        measurement: Option<HemispherePoint>,
        events: &mut Vec<TrackerEvent>,
    ) -> Result<(), TrackerError> {
        if let Some(m) = measurement {
            validate_measurement(&m)?;
        }
        let p = self.params;
        let time = self.frame_count as f64 * p.dt;
        let emit = |events: &mut Vec<TrackerEvent>, kind, cluster| {
            events.push(TrackerEvent { kind, cluster, time })
        };

        let updated = measurement.map(|m| {
            match self.best_match(&m) {
                Some(i) => {
                    let c = &mut self.clusters[i];
                    let s = c.centroid.expect("active cluster has a centroid");
                    c.centroid = Some(blend(&s, &m, p.alpha));
                    c.rho = (c.rho + 1.0 / p.n_s as f64).min(1.0);
                    i
                }
                None => {
                    let i = self.weakest();
                    let c = &mut self.clusters[i];
                    if c.detected {
                        c.detected = false;
                        emit(events, TrackerEventKind::SourceLost, i);
                    }
                    c.centroid = Some(m);
                    c.rho = (1.0 / p.n_s as f64).min(1.0);
                    i
                }
            }
        });

        let decay = p.decay();
        for c in &mut self.clusters {
            if Some(c.id) == updated {
                if c.rho >= 1.0 - SNAP {
                    c.rho = 1.0;
                    if !c.detected {
                        c.detected = true;
                        emit(events, TrackerEventKind::SourceAppeared, c.id);
                    }
                }
                continue;
            }
            if c.centroid.is_none() {
                continue;
            }
            c.rho = (c.rho - decay).max(0.0);
            if c.rho < SNAP {
                c.rho = 0.0;
            }
            if c.detected && c.rho <= p.t_a {
                c.detected = false;
                emit(events, TrackerEventKind::SourceLost, c.id);
            }
            if c.rho == 0.0 {
                c.centroid = None;
                emit(events, TrackerEventKind::ClusterForgotten, c.id);
            }
        }
        self.frame_count += 1;
        Ok(())
    }

    /// Most confident active cluster within `d_min` of `m`, lowest id on ties.
    fn best_match(&self, m: &HemispherePoint) -> Option<usize> {
        let mut best: Option<usize> = None;
        for c in &self.clusters {
            let Some(s) = c.centroid else { continue };
            if s.chord(m) < self.params.d_min && best.is_none_or(|b| c.rho > self.clusters[b].rho) {
                best = Some(c.id);
            }
        }
        best
    }

    /// Least confident cluster, lowest id on ties.
    fn weakest(&self) -> usize {
        let mut best = 0;
        for c in &self.clusters[1..] {
            if c.rho < self.clusters[best].rho {
                best = c.id;
            }
        }
        best
    }

    /// Currently detected sources as `(id, direction, rho)`.
    pub fn active_sources(&self) -> Vec<(usize, Direction, f64)> {
        self.clusters
            .iter()
            .filter(|c| c.detected)
            .filter_map(|c| c.centroid.map(|s| (c.id, s.to_direction(), c.rho)))
            .collect()
    }
}

fn validate_measurement(m: &HemispherePoint) -> Result<(), TrackerError> {
    let n2 = m.x * m.x + m.y * m.y + m.z * m.z;
    if !n2.is_finite() || (n2 - 1.0).abs() > 1e-6 || m.z < -1e-9 {
        return Err(TrackerError::InvalidMeasurement(m.x, m.y, m.z));
    }
    Ok(())
}

/// `normalize(alpha * s + (1 - alpha) * m)`.
fn blend(s: &HemispherePoint, m: &HemispherePoint, alpha: f64) -> HemispherePoint {
    let beta = 1.0 - alpha;
    let x = alpha * s.x + beta * m.x;
    let y = alpha * s.y + beta * m.y;
    let z = alpha * s.z + beta * m.z;
    let n = sqrt(x * x + y * y + z * z);
    if n > 1e-12 {
        HemispherePoint {
            x: x / n,
            y: y / n,
            z: (z / n).max(0.0),
        }
    } else {
        *m
    }
}
