//! Fixed scenes and helpers for the two-source tracking experiments.

use tridoa_core::correlator::EstimatorConfig;
use tridoa_core::geometry::{ArrayGeometry, Direction};
use tridoa_core::lattice::{fibonacci_lattice, interpolate_field_dataset, latlong_lattice, FieldDataset, MappingLattice};
use tridoa_core::pipeline::{Pipeline, PipelineConfig};

use super::field::{synthesize_field_dataset, FieldMode, FieldSpec};
use super::scene::{render_scene, Rotation, SceneSpec, SourceKind, SourceSpec};
use super::SimError;
use crate::error::Result;
use crate::io::events::{EventRecord, TruthLog};

/// Source distance used by the experiment scenes, meters.
pub const SCENE_DISTANCE: f64 = 2.0;
/// Lattice size of the experiment mapping tables.
pub const LATTICE_SIZE: usize = 10_000;
/// Lat-long grid resolution of the simulated field collection.
pub const FIELD_GRID_U: usize = 36;

pub fn default_geometry() -> ArrayGeometry {
    ArrayGeometry::new(0.1, 0.05, 0.12).expect("valid geometry")
}

fn music(direction: Direction, active: (f64, f64)) -> SourceSpec {
    SourceSpec {
        direction,
        distance: SCENE_DISTANCE,
        kind: SourceKind::WhiteNoise,
        active: vec![active],
        gain: 1.0,
    }
}

fn speech(direction: Direction, active: (f64, f64)) -> SourceSpec {
    SourceSpec {
        direction,
        distance: SCENE_DISTANCE,
        kind: SourceKind::AmNoiseBursts {
            period_ms: 500.0,
            duty: 0.5,
        },
        active: vec![active],
        gain: 4.0,
    }
}

/// Steady noise at (55, 0) deg plus intermittent bursts at (145, 40) deg,
/// 15 s at 20 dB SNR.
pub fn exp2_scene(seed: u64) -> SceneSpec {
    let mut s = SceneSpec::new(default_geometry(), 15.0);
    s.snr_db = 20.0;
    s.seed = seed;
    s.sources = vec![
        music(Direction::from_degrees(55.0, 0.0).unwrap(), (4.0, 14.0)),
        speech(Direction::from_degrees(145.0, 40.0).unwrap(), (6.0, 15.0)),
    ];
    s
}

/// The two experiment-2 sources, both rotating once every 20 s.
pub fn exp3_scene(seed: u64) -> SceneSpec {
    let mut s = SceneSpec::new(default_geometry(), 20.0);
    s.snr_db = 20.0;
    s.seed = seed;
    s.rotation = Some(Rotation { period: 20.0 });
    s.sources = vec![
        music(Direction::from_degrees(55.0, 0.0).unwrap(), (1.0, 20.0)),
        speech(Direction::from_degrees(145.0, 40.0).unwrap(), (3.0, 20.0)),
    ];
    s
}

/// Field dataset measured from rendered white noise on a lat-long grid.
pub fn measured_field_dataset(g: &ArrayGeometry, distance: f64, u: usize, seed: u64) -> Result<FieldDataset, SimError> {
    synthesize_field_dataset(&FieldSpec {
        geometry: *g,
        directions: latlong_lattice(u)?,
        distance,
        mode: FieldMode::Measured {
            snr_db: 30.0,
            frames: 8,
            estimator: EstimatorConfig::default(),
        },
        seed,
    })
}

/// Fibonacci mapping table interpolated from a simulated field collection
/// at the scene distance.
pub fn field_lattice(g: &ArrayGeometry, seed: u64) -> Result<MappingLattice, SimError> {
    let ds = measured_field_dataset(g, SCENE_DISTANCE, FIELD_GRID_U, seed)?;
    Ok(interpolate_field_dataset(&ds, fibonacci_lattice(LATTICE_SIZE))?.with_geometry(*g))
}

/// Renders `scene` and runs the default pipeline over it.
pub fn run_scene(scene: &SceneSpec, lattice: MappingLattice) -> Result<(Vec<EventRecord>, TruthLog)> {
    let (audio, truth) = render_scene(scene)?;
    let cfg = PipelineConfig {
        fs: scene.fs as f64,
        frame_len: scene.frame_len,
        speed_of_sound: scene.speed_of_sound,
        tracker: tridoa_core::tracker::TrackerParams::for_stream(scene.frame_len, scene.fs as f64),
        ..PipelineConfig::default()
    };
    let mut p = Pipeline::new(cfg, scene.geometry, lattice)?;
    let events = p.process_channels(audio.as_slices())?;
    Ok((events.iter().map(EventRecord::from).collect(), truth))
}
