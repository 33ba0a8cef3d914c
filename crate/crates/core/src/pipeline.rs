//! Frame-by-frame driver: measure, gate, map, track.

use alloc::vec::Vec;

use crate::correlator::{
    segment_stream, AnalysisWindow, CorrelatorError, EstimatorConfig, TdoaEstimator, Weighting,
    DEFAULT_SPEED_OF_SOUND,
};
use crate::gate::{apply_gate, FilterThresholds, FilterVerdict, InvalidThresholds};
use crate::geometry::{direction_to_point, ArrayGeometry, Direction, FarFieldRadius, TdoaTriple};
use crate::lattice::MappingLattice;
use crate::tracker::{Cluster, Tracker, TrackerError, TrackerEvent, TrackerParams};

/// Allowed difference between the pipeline geometry and the geometry a
/// lattice was synthesized from, meters.
const GEOMETRY_MATCH_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Correlator(#[from] CorrelatorError),
    #[error(transparent)]
    Thresholds(#[from] InvalidThresholds),
    #[error(transparent)]
    Tracker(#[from] TrackerError),
    #[error("lattice was built for a different array geometry")]
    LatticeGeometryMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub fs: f64,
    /// Frame length in samples; frames overlap by half.
    pub frame_len: usize,
    pub speed_of_sound: f64,
    pub weighting: Weighting,
    pub window: AnalysisWindow,
    pub thresholds: FilterThresholds,
    pub tracker: TrackerParams,
    pub far_field_r: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            fs: 48_000.0,
            frame_len: 1024,
            speed_of_sound: DEFAULT_SPEED_OF_SOUND,
            weighting: Weighting::default(),
            window: AnalysisWindow::Hann,
            thresholds: FilterThresholds::default(),
            tracker: TrackerParams::default(),
            far_field_r: FarFieldRadius::DEFAULT_METERS,
        }
    }
}

impl PipelineConfig {
    pub fn hop(&self) -> usize {
        self.frame_len / 2
    }

    /// Seconds between frames.
    pub fn hop_seconds(&self) -> f64 {
        self.hop() as f64 / self.fs
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.frame_len < 4 || !self.frame_len.is_power_of_two() {
            return Err(PipelineError::Config("frame length must be a power of two >= 4"));
        }
        if !(self.fs > 0.0 && self.fs.is_finite()) {
            return Err(PipelineError::Config("sample rate must be positive"));
        }
        if !(self.speed_of_sound > 0.0 && self.speed_of_sound.is_finite()) {
            return Err(PipelineError::Config("speed of sound must be positive"));
        }
        if !(self.far_field_r > 0.0 && self.far_field_r.is_finite()) {
            return Err(PipelineError::Config("far-field radius must be positive"));
        }
        let dt = self.hop_seconds();
        if (self.tracker.dt - dt).abs() > 1e-9 * dt {
            return Err(PipelineError::Config(
                "tracker dt must equal the hop duration frame_len / (2 fs)",
            ));
        }
        self.weighting.validate()?;
        self.thresholds.validate()?;
        self.tracker.validate()?;
        Ok(())
    }
}

/// Per-pair summary carried in the event log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSummary {
    /// Refined peak lag, samples.
    pub lag: f64,
    pub peak: f64,
    pub beta: f64,
}

/// Everything that happened in one hop.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameEvent {
    pub k: usize,
    pub time: f64,
    pub pairs: [PairSummary; 3],
    pub tdoa: TdoaTriple,
    pub verdict: FilterVerdict,
    /// Accepted raw direction of this frame.
    pub direction: Option<Direction>,
    pub clusters: Vec<Cluster>,
    pub events: Vec<TrackerEvent>,
}

#[derive(Debug, Clone)]
pub struct Pipeline {
    cfg: PipelineConfig,
    estimator: TdoaEstimator,
    lattice: MappingLattice,
    tracker: Tracker,
    k: usize,
}

impl Pipeline {
    pub fn new(
        cfg: PipelineConfig,
        geometry: ArrayGeometry,
        lattice: MappingLattice,
    ) -> Result<Self, PipelineError> {
        cfg.validate()?;
        if let Some(lg) = lattice.geometry() {
            let close = (lg.b() - geometry.b()).abs() <= GEOMETRY_MATCH_TOL
                && (lg.c_x() - geometry.c_x()).abs() <= GEOMETRY_MATCH_TOL
                && (lg.c_y() - geometry.c_y()).abs() <= GEOMETRY_MATCH_TOL;
            if !close {
                return Err(PipelineError::LatticeGeometryMismatch);
            }
        }
        let est_cfg = EstimatorConfig {
            frame_len: cfg.frame_len,
            sample_rate: cfg.fs,
            speed_of_sound: cfg.speed_of_sound,
            weighting: cfg.weighting,
            window: cfg.window,
        };
        Ok(Self {
            estimator: TdoaEstimator::new(&est_cfg, geometry)?,
            tracker: Tracker::new(cfg.tracker)?,
            cfg,
            lattice,
            k: 0,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn lattice(&self) -> &MappingLattice {
        &self.lattice
    }

    pub fn tracker(&self) -> &Tracker {
        &self.tracker
    }

    /// Index of the next frame.
    pub fn frame_index(&self) -> usize {
        self.k
    }

    /// Runs one frame (three channel slices of `frame_len` samples).
    pub fn process_frame(&mut self, frames: [&[f64]; 3]) -> Result<FrameEvent, PipelineError> {
        let k = self.k;
        let m = self.estimator.measure(k, frames)?;
        let verdict = apply_gate(&m, &self.lattice, &self.cfg.thresholds);
        let point = verdict.direction.map(direction_to_point);
        let mut events = Vec::new();
        self.tracker.step_into(point, &mut events)?;
        self.k += 1;
        let pairs = [0, 1, 2].map(|i| PairSummary {
            lag: m.pairs[i].refined_lag,
            peak: m.pairs[i].peak_value,
            beta: verdict.betas[i],
        });
        Ok(FrameEvent {
            k,
            time: k as f64 * self.cfg.hop_seconds(),
            pairs,
            tdoa: m.q,
            direction: verdict.direction,
            verdict,
            clusters: self.tracker.clusters().to_vec(),
            events,
        })
    }

    /// Segments whole channels and processes every complete frame.
    pub fn process_channels(
        &mut self,
        channels: [&[f64]; 3],
    ) -> Result<Vec<FrameEvent>, PipelineError> {
        let frames = segment_stream(channels, self.cfg.frame_len)?;
        let mut out = Vec::with_capacity(frames.len());
        for f in frames {
            out.push(self.process_frame(f.channels)?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::fibonacci_lattice;
    use alloc::vec;

    fn setup() -> (ArrayGeometry, MappingLattice) {
        let g = ArrayGeometry::new(0.1, 0.05, 0.12).unwrap();
        let lat = MappingLattice::synthesize(fibonacci_lattice(2000), &g, FarFieldRadius::default())
            .unwrap();
        (g, lat)
    }

    #[test]
    fn silent_second_gives_92_quiet_frames() {
        let (g, lat) = setup();
        let mut p = Pipeline::new(PipelineConfig::default(), g, lat).unwrap();
        let z = vec![0.0; 48_000];
        let ev = p.process_channels([&z, &z, &z]).unwrap();
        assert_eq!(ev.len(), 92);
        assert!(ev.iter().all(|e| !e.verdict.accepted() && e.events.is_empty()));
        assert!(ev.windows(2).all(|w| w[1].time > w[0].time && w[1].k == w[0].k + 1));
    }

    #[test]
    fn config_validation() {
        let mut cfg = PipelineConfig {
            frame_len: 1000,
            ..PipelineConfig::default()
        };
        assert!(cfg.validate().is_err());
        cfg.frame_len = 2048;
        // tracker dt still matches 1024-sample frames
        assert!(cfg.validate().is_err());
        cfg.tracker = TrackerParams::for_stream(2048, cfg.fs);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn lattice_geometry_must_match() {
        let (_, lat) = setup();
        let other = ArrayGeometry::new(0.1, 0.06, 0.12).unwrap();
        assert!(matches!(
            Pipeline::new(PipelineConfig::default(), other, lat),
            Err(PipelineError::LatticeGeometryMismatch)
        ));
    }
}
