//! Direct-path scene rendering with incoherent sensor noise.

use std::f64::consts::PI;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use tridoa_core::correlator::{frame_count, DEFAULT_SPEED_OF_SOUND};
use tridoa_core::geometry::{ArrayGeometry, Direction};

use super::fracdelay::FracDelayTable;
use super::SimError;
use crate::error::{Error, Result};
use crate::io::events::{TruthLog, TruthRecord, TruthSource};
use crate::io::{parse_toml, read_text, write_text, FORMAT_VERSION};

/// Longest propagation delay the renderer accepts, seconds.
pub const MAX_DELAY_S: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceKind {
    WhiteNoise,
    /// Gaussian noise gated on for `duty` of every `period_ms`.
    AmNoiseBursts { period_ms: f64, duty: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpec {
    pub direction: Direction,
    /// Meters from the array origin.
    pub distance: f64,
    pub kind: SourceKind,
    /// `(start, end)` in seconds.
    pub active: Vec<(f64, f64)>,
    /// Amplitude factor on top of the `1 / distance` spreading.
    pub gain: f64,
}

impl SourceSpec {
    pub fn active_at(&self, t: f64) -> bool {
        self.active.iter().any(|&(a, b)| t >= a && t < b)
    }

    fn envelope(&self, t: f64) -> f64 {
        if !self.active_at(t) {
            return 0.0;
        }
        match self.kind {
            SourceKind::WhiteNoise => 1.0,
            SourceKind::AmNoiseBursts { period_ms, duty } => {
                let period = period_ms * 1e-3;
                let phase = (t / period).rem_euclid(1.0);
                if phase < duty {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    /// Seconds per full revolution of every source azimuth.
    pub period: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub geometry: ArrayGeometry,
    pub fs: u32,
    /// Seconds.
    pub duration: f64,
    pub sources: Vec<SourceSpec>,
    /// Per-channel SNR against the summed source power, measured over the
    /// samples where any source signal is present.
    pub snr_db: f64,
    pub rotation: Option<Rotation>,
    pub seed: u64,
    pub speed_of_sound: f64,
    /// Frame length used to lay out the truth log.
    pub frame_len: usize,
}

impl SceneSpec {
    pub fn new(geometry: ArrayGeometry, duration: f64) -> Self {
        Self {
            geometry,
            fs: 48_000,
            duration,
            sources: Vec::new(),
            snr_db: 30.0,
            rotation: None,
            seed: 0,
            speed_of_sound: DEFAULT_SPEED_OF_SOUND,
            frame_len: 1024,
        }
    }

    pub fn samples(&self) -> usize {
        (self.duration * self.fs as f64).round() as usize
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidScene(m));
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if self.fs == 0 {
            return bad("sample rate must be positive".into());
        }
        if !self.snr_db.is_finite() {
            return bad("snr_db must be finite".into());
        }
        if !(self.speed_of_sound > 0.0 && self.speed_of_sound.is_finite()) {
            return bad("speed of sound must be positive".into());
        }
        if self.frame_len < 4 || !self.frame_len.is_power_of_two() {
            return bad(format!("frame_len must be a power of two, got {}", self.frame_len));
        }
        if let Some(r) = self.rotation {
            if !(r.period > 0.0 && r.period.is_finite()) {
                return bad("rotation period must be positive".into());
            }
        }
        let min_distance = 10.0 * self.geometry.max_spacing();
        for (i, s) in self.sources.iter().enumerate() {
            if !(s.distance > min_distance) {
                return bad(format!(
                    "source {i}: distance {} m must exceed 10x the microphone spacing ({min_distance:.3} m)",
                    s.distance
                ));
            }
            if !(s.gain > 0.0 && s.gain.is_finite()) {
                return bad(format!("source {i}: gain must be positive"));
            }
            if s.active.iter().any(|&(a, b)| !(a < b)) {
                return bad(format!("source {i}: active intervals need start < end"));
            }
            if let SourceKind::AmNoiseBursts { period_ms, duty } = s.kind {
                if !(period_ms > 0.0 && duty > 0.0 && duty <= 1.0) {
                    return bad(format!("source {i}: bursts need period_ms > 0 and duty in (0, 1]"));
                }
            }
            let delay = (s.distance + self.geometry.max_spacing()) / self.speed_of_sound;
            if delay > MAX_DELAY_S {
                return Err(SimError::DelayOutOfRange {
                    index: i,
                    delay_s: delay,
                    max_s: MAX_DELAY_S,
                });
            }
        }
        Ok(())
    }

    /// Direction of source `i` at time `t`, including rotation.
    pub fn direction_at(&self, i: usize, t: f64) -> Direction {
        let d = self.sources[i].direction;
        match self.rotation {
            Some(r) => Direction::new(d.theta + 2.0 * PI * t / r.period, d.phi)
                .expect("rotated direction stays valid"),
            None => d,
        }
    }
}

/// Clean and noise parts of a rendering, kept apart for measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct Components {
    pub clean: [Vec<f64>; 3],
    pub noise: [Vec<f64>; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub fs: u32,
    pub channels: [Vec<f64>; 3],
}

impl Rendered {
    pub fn as_slices(&self) -> [&[f64]; 3] {
        [&self.channels[0], &self.channels[1], &self.channels[2]]
    }
}

fn source_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn render_components(spec: &SceneSpec) -> Result<Components, SimError> {
    spec.validate()?;
    let fs = spec.fs as f64;
    let n = spec.samples();
    let table = FracDelayTable::new();
    let mics = spec.geometry.mics();
    let mut clean: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; n]);

    for (si, src) in spec.sources.iter().enumerate() {
        let max_delay = (src.distance + spec.geometry.max_spacing()) / spec.speed_of_sound * fs;
        let history = FracDelayTable::history(max_delay);
        let len = history + n + super::fracdelay::TAPS;
        let mut rng = source_rng(spec.seed, si as u64);
        let signal: Vec<f64> = (0..len)
            .map(|i| {
                let t = (i as f64 - history as f64) / fs;
                let v: f64 = StandardNormal.sample(&mut rng);
                v * src.envelope(t) * src.gain
            })
            .collect();

        for k in 0..n {
            let t = k as f64 / fs;
            let p = spec.direction_at(si, t).to_point();
            let pos = [p.x * src.distance, p.y * src.distance, p.z * src.distance];
            for (ch, m) in clean.iter_mut().zip(&mics) {
                let d = ((pos[0] - m[0]).powi(2) + (pos[1] - m[1]).powi(2) + (pos[2] - m[2]).powi(2)).sqrt();
                let delay = d / spec.speed_of_sound * fs;
                ch[k] += table.sample(&signal, history, k, delay) / d;
            }
        }
    }

    let mut noise: [Vec<f64>; 3] = std::array::from_fn(|_| Vec::with_capacity(n));
    for (ci, (ch, out)) in clean.iter().zip(noise.iter_mut()).enumerate() {
        let (sum, count) = ch
            .iter()
            .filter(|v| **v != 0.0)
            .fold((0.0, 0usize), |(s, c), v| (s + v * v, c + 1));
        let power = if count > 0 { sum / count as f64 } else { 1.0 };
        let sigma = (power / 10f64.powf(spec.snr_db / 10.0)).sqrt();
        let mut rng = source_rng(spec.seed, 1000 + ci as u64);
        out.extend((0..n).map(|_| {
            let v: f64 = StandardNormal.sample(&mut rng);
            v * sigma
        }));
    }
    Ok(Components { clean, noise })
}

/// Ground truth per hop, evaluated at each frame's center.
pub fn truth_log(spec: &SceneSpec) -> TruthLog {
    let fs = spec.fs as f64;
    let hop = spec.frame_len / 2;
    let frames = frame_count(spec.samples(), spec.frame_len);
    let records = (0..frames)
        .map(|k| {
            let t0 = (k * hop) as f64 / fs;
            let tc = t0 + spec.frame_len as f64 / (2.0 * fs);
            TruthRecord {
                v: FORMAT_VERSION,
                t: t0,
                k,
                sources: spec
                    .sources
                    .iter()
                    .enumerate()
                    .map(|(i, s)| {
                        let d = spec.direction_at(i, tc);
                        TruthSource {
                            id: i,
                            theta: d.theta,
                            phi: d.phi,
                            active: s.active_at(tc),
                        }
                    })
                    .collect(),
            }
        })
        .collect();
    TruthLog {
        hop_seconds: hop as f64 / fs,
        records,
    }
}

pub fn render_scene(spec: &SceneSpec) -> Result<(Rendered, TruthLog), SimError> {
    let Components { mut clean, noise } = render_components(spec)?;
    for (c, v) in clean.iter_mut().zip(&noise) {
        for (a, b) in c.iter_mut().zip(v) {
            *a += b;
        }
    }
    Ok((
        Rendered {
            fs: spec.fs,
            channels: clean,
        },
        truth_log(spec),
    ))
}

// ---- scene files -------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindName {
    WhiteNoise,
    AmNoiseBursts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceEntry {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub distance: f64,
    #[serde(default = "one")]
    pub gain: f64,
    pub kind: KindName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duty: Option<f64>,
    pub active: Vec<[f64; 2]>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayEntry {
    pub b: f64,
    pub c_x: f64,
    pub c_y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotationEntry {
    pub period: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub version: u32,
    pub fs: u32,
    pub duration: f64,
    pub snr_db: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_c")]
    pub speed_of_sound: f64,
    #[serde(default = "default_frame_len")]
    pub frame_len: usize,
    pub geometry: ArrayEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<RotationEntry>,
    #[serde(default)]
    pub sources: Vec<SourceEntry>,
}

fn default_c() -> f64 {
    DEFAULT_SPEED_OF_SOUND
}

fn default_frame_len() -> usize {
    1024
}

impl SceneFile {
    pub fn to_spec(&self) -> Result<SceneSpec, String> {
        let g = &self.geometry;
        let geometry = ArrayGeometry::new(g.b, g.c_x, g.c_y).map_err(|e| e.to_string())?;
        let sources = self
            .sources
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let direction = Direction::from_degrees(s.azimuth_deg, s.elevation_deg)
                    .map_err(|e| format!("source {i}: {e}"))?;
                let kind = match s.kind {
                    KindName::WhiteNoise => SourceKind::WhiteNoise,
                    KindName::AmNoiseBursts => SourceKind::AmNoiseBursts {
                        period_ms: s.period_ms.ok_or(format!("source {i}: missing period_ms"))?,
                        duty: s.duty.ok_or(format!("source {i}: missing duty"))?,
                    },
                };
                Ok(SourceSpec {
                    direction,
                    distance: s.distance,
                    kind,
                    active: s.active.iter().map(|a| (a[0], a[1])).collect(),
                    gain: s.gain,
                })
            })
            .collect::<Result<Vec<_>, String>>()?;
        let spec = SceneSpec {
            geometry,
            fs: self.fs,
            duration: self.duration,
            sources,
            snr_db: self.snr_db,
            rotation: self.rotation.map(|r| Rotation { period: r.period }),
            seed: self.seed,
            speed_of_sound: self.speed_of_sound,
            frame_len: self.frame_len,
        };
        spec.validate().map_err(|e| e.to_string())?;
        Ok(spec)
    }
}

impl From<&SceneSpec> for SceneFile {
    fn from(s: &SceneSpec) -> Self {
        Self {
            version: FORMAT_VERSION,
            fs: s.fs,
            duration: s.duration,
            snr_db: s.snr_db,
            seed: s.seed,
            speed_of_sound: s.speed_of_sound,
            frame_len: s.frame_len,
            geometry: ArrayEntry {
                b: s.geometry.b(),
                c_x: s.geometry.c_x(),
                c_y: s.geometry.c_y(),
            },
            rotation: s.rotation.map(|r| RotationEntry { period: r.period }),
            sources: s
                .sources
                .iter()
                .map(|src| {
                    let (kind, period_ms, duty) = match src.kind {
                        SourceKind::WhiteNoise => (KindName::WhiteNoise, None, None),
                        SourceKind::AmNoiseBursts { period_ms, duty } => {
                            (KindName::AmNoiseBursts, Some(period_ms), Some(duty))
                        }
                    };
                    SourceEntry {
                        azimuth_deg: src.direction.theta.to_degrees(),
                        elevation_deg: src.direction.phi.to_degrees(),
                        distance: src.distance,
                        gain: src.gain,
                        kind,
                        period_ms,
                        duty,
                        active: src.active.iter().map(|&(a, b)| [a, b]).collect(),
                    }
                })
                .collect(),
        }
    }
}

pub fn parse_scene(path: &Path, text: &str) -> Result<SceneSpec> {
    let f: SceneFile = parse_toml(path, "scene", text)?;
    f.to_spec().map_err(|m| Error::schema(path, m))
}

pub fn load_scene(path: &Path) -> Result<SceneSpec> {
    parse_scene(path, &read_text(path)?)
}

pub fn scene_to_string(spec: &SceneSpec) -> String {
    toml::to_string(&SceneFile::from(spec)).expect("scene serializes")
}

pub fn save_scene(path: &Path, spec: &SceneSpec) -> Result<()> {
    write_text(path, &scene_to_string(spec))
}
