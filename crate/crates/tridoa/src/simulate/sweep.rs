//! Monte-Carlo comparison of the NNS and closed-form mappings under TDOA noise.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use tridoa_core::calibrate::{calibrate_geometry, LmSettings};
use tridoa_core::geometry::{cf_map, direction_to_point, tdoa_for_direction, ArrayGeometry, Direction, FarFieldRadius, HemispherePoint, TdoaTriple};
use tridoa_core::lattice::{FieldDataset, FieldRecord, MappingLattice};
use tridoa_core::metrics::rmse_loc;

use super::SimError;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Noise standard deviations, meters.
    pub sigmas: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub far_field_r: FarFieldRadius,
    /// Offset added to `(b, c_x, c_y)` for the miscalibrated CF run, meters.
    pub miscalibration: [f64; 3],
    pub lm: LmSettings,
}

impl SweepConfig {
    pub fn new(sigmas: Vec<f64>, trials: usize) -> Self {
        Self {
            sigmas,
            trials,
            seed: 0,
            far_field_r: FarFieldRadius::default(),
            miscalibration: [0.002, -0.002, 0.002],
            lm: LmSettings::default(),
        }
    }
}

/// Localization RMSE of each method at one noise level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub sigma: f64,
    pub nns: f64,
    pub cf: f64,
    pub cf_miscal: f64,
    pub cf_cal: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub miscalibrated: ArrayGeometry,
    /// Geometry recovered by LM from the lattice entries, starting from
    /// the miscalibrated one.
    pub calibrated: ArrayGeometry,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).expect("in-memory CSV write");
        }
        String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV is UTF-8")
    }
}

fn trial_direction(seed: u64, trial: usize) -> Direction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    let theta = rng.random_range(-PI..PI);
    let phi = rng.random_range(0.0..=PI / 2.0);
    Direction::new(theta, phi).expect("sampled inside the hemisphere")
}

fn noise_rng(seed: u64, sigma_index: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1 + sigma_index as u64));
    rng.set_stream(trial as u64);
    rng
}

struct Estimates {
    truth: Vec<HemispherePoint>,
    nns: Vec<HemispherePoint>,
    cf: Vec<HemispherePoint>,
    cf_miscal: Vec<HemispherePoint>,
    cf_cal: Vec<HemispherePoint>,
}

impl Estimates {
    fn with_capacity(n: usize) -> Self {
        Self {
            truth: Vec::with_capacity(n),
            nns: Vec::with_capacity(n),
            cf: Vec::with_capacity(n),
            cf_miscal: Vec::with_capacity(n),
            cf_cal: Vec::with_capacity(n),
        }
    }

    fn append(&mut self, mut o: Estimates) {
        self.truth.append(&mut o.truth);
        self.nns.append(&mut o.nns);
        self.cf.append(&mut o.cf);
        self.cf_miscal.append(&mut o.cf_miscal);
        self.cf_cal.append(&mut o.cf_cal);
    }
}

/// Runs `cfg.trials` noisy queries per noise level. Directions are drawn
/// once and shared by every level; trials run in parallel with per-trial
/// random streams, so the result does not depend on the thread count.
pub fn run_noise_sweep(
    g: &ArrayGeometry,
    lat: &MappingLattice,
    cfg: &SweepConfig,
) -> Result<SweepReport, SimError> {
    if cfg.trials == 0 {
        return Err(SimError::InvalidSweep("need at least one trial".into()));
    }
    if let Some(s) = cfg.sigmas.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return Err(SimError::InvalidSweep(format!("sigma must be positive, got {s}")));
    }
    let [db, dx, dy] = cfg.miscalibration;
    let miscalibrated = ArrayGeometry::new(g.b() + db, g.c_x() + dx, g.c_y() + dy)
        .map_err(|e| SimError::InvalidSweep(e.to_string()))?;
    let r = cfg.far_field_r;

    let ds = FieldDataset::new(
        (0..lat.len())
            .map(|n| {
                let (direction, tdoa) = lat.entry(n).expect("index in range");
                FieldRecord {
                    direction,
                    tdoa,
                    distance: None,
                }
            })
            .collect(),
    );
    let calibrated = calibrate_geometry(&ds, &miscalibrated, r, &cfg.lm)?.geometry;

    let run = |si: usize, sigma: f64, trials: std::ops::Range<usize>| {
        let noise = Normal::new(0.0, sigma).expect("sigma checked");
        let mut e = Estimates::with_capacity(trials.len());
        for t in trials {
            let d = trial_direction(cfg.seed, t);
            let q = tdoa_for_direction(g, d, r.get()).as_array();
            let mut rng = noise_rng(cfg.seed, si, t);
            let q = TdoaTriple::from_array(q.map(|x| x + noise.sample(&mut rng)));
            e.truth.push(direction_to_point(d));
            e.nns.push(direction_to_point(lat.nearest(&q).direction));
            e.cf.push(cf_map(q.r12, q.r13, g, r).point);
            e.cf_miscal.push(cf_map(q.r12, q.r13, &miscalibrated, r).point);
            e.cf_cal.push(cf_map(q.r12, q.r13, &calibrated, r).point);
        }
        e
    };

    let workers = std::thread::available_parallelism().map_or(1, |p| p.get());
    let chunk = cfg.trials.div_ceil(workers);
    let mut rows = Vec::with_capacity(cfg.sigmas.len());
    for (si, &sigma) in cfg.sigmas.iter().enumerate() {
        let parts: Vec<Estimates> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..cfg.trials)
                .step_by(chunk)
                .map(|start| {
                    let run = &run;
                    s.spawn(move || run(si, sigma, start..(start + chunk).min(cfg.trials)))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("sweep worker")).collect()
        });
        let mut all = Estimates::with_capacity(cfg.trials);
        for p in parts {
            all.append(p);
        }
        let rmse = |est: &[HemispherePoint]| rmse_loc(&all.truth, est).expect("equal, non-empty lists");
        rows.push(SweepRow {
            sigma,
            nns: rmse(&all.nns),
            cf: rmse(&all.cf),
            cf_miscal: rmse(&all.cf_miscal),
            cf_cal: rmse(&all.cf_cal),
        });
    }
    Ok(SweepReport {
        rows,
        miscalibrated,
        calibrated,
    })
}
