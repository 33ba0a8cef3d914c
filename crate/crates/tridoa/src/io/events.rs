//! Per-hop event logs and ground-truth logs (JSON lines).
//!
//! Both logs hold one JSON object per hop, each tagged with `"v": 1`.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use tridoa_core::pipeline::FrameEvent;
use tridoa_core::tracker::TrackerEvent;

use super::{check_version, FORMAT_VERSION};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    /// Refined peak lag, samples.
    pub lag: f64,
    pub peak: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterRecord {
    pub id: usize,
    pub theta: f64,
    pub phi: f64,
    pub rho: f64,
    pub detected: bool,
}

/// One hop of the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub v: u32,
    /// Frame start time, seconds.
    pub t: f64,
    pub k: usize,
    pub pairs: [PairRecord; 3],
    pub tdoa: [f64; 3],
    /// `accepted` or the stage that rejected the frame.
    pub verdict: String,
    pub nns_error: Option<f64>,
    /// Accepted raw direction `[theta, phi]`, radians.
    pub dir: Option<[f64; 2]>,
    /// Non-empty clusters after this hop.
    pub clusters: Vec<ClusterRecord>,
    pub events: Vec<TrackerEvent>,
}

impl EventRecord {
    pub fn accepted(&self) -> bool {
        self.verdict == "accepted"
    }

    pub fn detected(&self) -> impl Iterator<Item = &ClusterRecord> {
        self.clusters.iter().filter(|c| c.detected)
    }
}

impl From<&FrameEvent> for EventRecord {
    fn from(e: &FrameEvent) -> Self {
        Self {
            v: FORMAT_VERSION,
            t: e.time,
            k: e.k,
            pairs: e.pairs.map(|p| PairRecord {
                lag: p.lag,
                peak: p.peak,
                beta: p.beta,
            }),
            tdoa: e.tdoa.as_array(),
            verdict: if e.verdict.accepted() {
                "accepted".to_owned()
            } else {
                e.verdict.failed_stage.as_str().to_owned()
            },
            nns_error: e.verdict.nns_error,
            dir: e.direction.map(|d| [d.theta, d.phi]),
            clusters: e
                .clusters
                .iter()
                .filter_map(|c| {
                    c.centroid.map(|s| {
                        let d = s.to_direction();
                        ClusterRecord {
                            id: c.id,
                            theta: d.theta,
                            phi: d.phi,
                            rho: c.rho,
                            detected: c.detected,
                        }
                    })
                })
                .collect(),
            events: e.events.clone(),
        }
    }
}

/// One source in a truth record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthSource {
    pub id: usize,
    pub theta: f64,
    pub phi: f64,
    pub active: bool,
}

/// Ground truth for one hop, evaluated at the frame center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub v: u32,
    /// Frame start time, seconds (matches the event log).
    pub t: f64,
    pub k: usize,
    pub sources: Vec<TruthSource>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TruthLog {
    pub hop_seconds: f64,
    pub records: Vec<TruthRecord>,
}

/// Writes one JSON object per line.
pub fn write_jsonl<W: Write, T: Serialize>(mut w: W, items: impl IntoIterator<Item = T>) -> std::io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, &item)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Parses a JSON-lines file whose records carry a `v` version field.
pub fn read_jsonl<R: BufRead, T: serde::de::DeserializeOwned>(
    path: &Path,
    kind: &'static str,
    r: R,
) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line)
            .map_err(|e| Error::schema(path, format!("line {}: {e}", i + 1)))?;
        let v = value
            .get("v")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::schema(path, format!("line {}: missing `v`", i + 1)))?;
        check_version(path, kind, u32::try_from(v).unwrap_or(u32::MAX))?;
        out.push(
            serde_json::from_value(value)
                .map_err(|e| Error::schema(path, format!("line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}

fn open(path: &Path) -> Result<std::io::BufReader<std::fs::File>> {
    Ok(std::io::BufReader::new(
        std::fs::File::open(path).map_err(|e| Error::io(path, e))?,
    ))
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

pub fn load_events(path: &Path) -> Result<Vec<EventRecord>> {
    read_jsonl(path, "event log", open(path)?)
}

pub fn save_events(path: &Path, events: &[EventRecord]) -> Result<()> {
    write_jsonl(create(path)?, events).map_err(|e| Error::io(path, e))
}

pub fn load_truth(path: &Path) -> Result<TruthLog> {
    let records: Vec<TruthRecord> = read_jsonl(path, "truth log", open(path)?)?;
    let hop_seconds = match records.as_slice() {
        [a, b, ..] => b.t - a.t,
        _ => 0.0,
    };
    if records.windows(2).any(|w| !(w[1].t > w[0].t)) {
        return Err(Error::schema(path, "truth times must be strictly increasing"));
    }
    Ok(TruthLog {
        hop_seconds,
        records,
    })
}

pub fn save_truth(path: &Path, truth: &TruthLog) -> Result<()> {
    write_jsonl(create(path)?, &truth.records).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tridoa_core::tracker::TrackerEventKind;

    fn record(k: usize) -> EventRecord {
        EventRecord {
            v: 1,
            t: k as f64 * 0.01,
            k,
            pairs: [PairRecord {
                lag: 1.25,
                peak: 0.5,
                beta: 0.75,
            }; 3],
            tdoa: [0.01, 0.02, 0.01],
            verdict: "accepted".into(),
            nns_error: Some(1e-7),
            dir: Some([0.5, 0.25]),
            clusters: vec![ClusterRecord {
                id: 3,
                theta: 0.5,
                phi: 0.25,
                rho: 0.2,
                detected: false,
            }],
            events: vec![TrackerEvent {
                kind: TrackerEventKind::SourceAppeared,
                cluster: 3,
                time: 0.04,
            }],
        }
    }

    #[test]
    fn event_log_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ev.jsonl");
        let events: Vec<EventRecord> = (0..5).map(record).collect();
        save_events(&path, &events).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.contains(r#""kind":"source_appeared""#));
        assert_eq!(load_events(&path).unwrap(), events);
    }

    #[test]
    fn rejects_unknown_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ev.jsonl");
        let mut r = record(0);
        r.v = 2;
        save_events(&path, &[r]).unwrap();
        assert!(matches!(load_events(&path), Err(Error::Version { found: 2, .. })));
    }

    #[test]
    fn truth_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("truth.jsonl");
        let truth = TruthLog {
            hop_seconds: 0.5,
            records: (0..3)
                .map(|k| TruthRecord {
                    v: 1,
                    t: k as f64 * 0.5,
                    k,
                    sources: vec![TruthSource {
                        id: 0,
                        theta: 1.0,
                        phi: 0.0,
                        active: k > 0,
                    }],
                })
                .collect(),
        };
        save_truth(&path, &truth).unwrap();
        assert_eq!(load_truth(&path).unwrap(), truth);
    }
}
