//! Synthetic stand-ins for field-collected TDOA datasets.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use tridoa_core::correlator::{segment_stream, EstimatorConfig, TdoaEstimator};
use tridoa_core::geometry::{tdoa_for_direction, ArrayGeometry, Direction, TdoaTriple};
use tridoa_core::lattice::{FieldDataset, FieldRecord};

use super::scene::{render_scene, SceneSpec, SourceKind, SourceSpec};
use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldMode {
    /// Array-model TDOAs plus Gaussian noise of this standard deviation (m).
    Model { sigma: f64 },
    /// TDOAs measured from a rendered white-noise recording per direction,
    /// taking the per-pair median over `frames` frames.
    Measured {
        snr_db: f64,
        frames: usize,
        estimator: EstimatorConfig,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSpec {
    pub geometry: ArrayGeometry,
    pub directions: Vec<Direction>,
    /// Source distance, meters.
    pub distance: f64,
    pub mode: FieldMode,
    pub seed: u64,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn measure_direction(
    spec: &FieldSpec,
    index: usize,
    snr_db: f64,
    frames: usize,
    cfg: &EstimatorConfig,
) -> Result<TdoaTriple, SimError> {
    let hop = cfg.frame_len / 2;
    let samples = (frames + 1) * hop;
    let fs = cfg.sample_rate.round() as u32;
    let mut scene = SceneSpec::new(spec.geometry, samples as f64 / fs as f64);
    scene.fs = fs;
    scene.snr_db = snr_db;
    scene.speed_of_sound = cfg.speed_of_sound;
    scene.frame_len = cfg.frame_len;
    scene.seed = spec.seed.wrapping_add(index as u64);
    scene.sources.push(SourceSpec {
        direction: spec.directions[index],
        distance: spec.distance,
        kind: SourceKind::WhiteNoise,
        active: vec![(0.0, scene.duration + 1.0)],
        gain: 1.0,
    });
    let (audio, _) = render_scene(&scene)?;
    let mut est = TdoaEstimator::new(cfg, spec.geometry)?;
    let mut per_pair: [Vec<f64>; 3] = Default::default();
    for f in segment_stream(audio.as_slices(), cfg.frame_len)? {
        let m = est.measure(f.k, f.channels)?;
        for (v, x) in per_pair.iter_mut().zip(m.q.as_array()) {
            v.push(x);
        }
    }
    if per_pair[0].is_empty() {
        return Err(SimError::InvalidScene("recording shorter than one frame".into()));
    }
    Ok(TdoaTriple::from_array(per_pair.map(|mut v| median(&mut v))))
}

pub fn synthesize_field_dataset(spec: &FieldSpec) -> Result<FieldDataset, SimError> {
    let tdoas: Vec<TdoaTriple> = match spec.mode {
        FieldMode::Model { sigma } => {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(SimError::InvalidScene(format!("noise sigma must be >= 0, got {sigma}")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let noise = Normal::new(0.0, sigma).expect("sigma checked");
            spec.directions
                .iter()
                .map(|&d| {
                    let q = tdoa_for_direction(&spec.geometry, d, spec.distance).as_array();
                    TdoaTriple::from_array(q.map(|x| x + noise.sample(&mut rng)))
                })
                .collect()
        }
        FieldMode::Measured {
            snr_db,
            frames,
            ref estimator,
        } => {
            if frames == 0 {
                return Err(SimError::InvalidScene("need at least one frame per direction".into()));
            }
            let n = spec.directions.len();
            let workers = std::thread::available_parallelism().map_or(1, |p| p.get()).min(n.max(1));
            let mut out: Vec<Option<Result<TdoaTriple, SimError>>> = (0..n).map(|_| None).collect();
            std::thread::scope(|s| {
                for (w, chunk) in out.chunks_mut(n.div_ceil(workers).max(1)).enumerate() {
                    let base = w * n.div_ceil(workers).max(1);
                    s.spawn(move || {
                        for (i, slot) in chunk.iter_mut().enumerate() {
                            *slot = Some(measure_direction(spec, base + i, snr_db, frames, estimator));
                        }
                    });
                }
            });
            out.into_iter()
                .map(|r| r.expect("every slot filled"))
                .collect::<Result<_, _>>()?
        }
    };
    Ok(FieldDataset::new(
        spec.directions
            .iter()
            .zip(tdoas)
            .map(|(&direction, tdoa)| FieldRecord {
                direction,
                tdoa,
                distance: Some(spec.distance),
            })
            .collect(),
    ))
}
