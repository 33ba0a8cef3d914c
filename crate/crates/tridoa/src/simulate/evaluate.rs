//! Scoring an event log against ground truth.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;
use tridoa_core::geometry::Direction;

use crate::io::events::{EventRecord, TruthLog};
use tridoa_core::tracker::TrackerEventKind;

/// Default time a truth source stays matchable after its activity ends:
/// a fully confident cluster decays from 1 to `T_a` in `T_win (1 - T_a)`.
pub const DEFAULT_HOLD_S: f64 = 2.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceReport {
    pub id: usize,
    /// Hops in which a detected cluster was matched to this source.
    pub matched_frames: usize,
    /// Distinct cluster ids matched to this source.
    pub clusters: Vec<usize>,
    pub mean_error_deg: f64,
    pub max_error_deg: f64,
    /// Share of matched hops within tolerance, great-circle.
    pub fraction_within_tol: f64,
    /// Share of matched hops whose azimuth error is within tolerance.
    pub azimuth_fraction_within_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackingReport {
    /// Clusters that ever emitted `source_appeared`.
    pub detected_count: usize,
    pub sources: Vec<SourceReport>,
    /// Over all matched hops and sources.
    pub fraction_within_tol: f64,
    pub ghost_time_s: f64,
    pub duration_s: f64,
    pub tol_deg: f64,
}

fn azimuth_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * std::f64::consts::PI);
    d.min(2.0 * std::f64::consts::PI - d)
}

#[derive(Default)]
struct Acc {
    errors: Vec<f64>,
    az_errors: Vec<f64>,
    clusters: BTreeSet<usize>,
}

/// Matches detected clusters to truth sources hop by hop.
///
/// Per hop, (cluster, source) pairs are taken greedily in order of angular
/// distance. A source is a candidate while active and for `hold_s` seconds
/// afterwards. Hops with a detected cluster left unmatched count as ghost
/// time. Event records without a truth record of the same index are
/// ignored.
pub fn evaluate_tracking(
    events: &[EventRecord],
    truth: &TruthLog,
    tol_deg: f64,
    hold_s: f64,
) -> TrackingReport {
    let hop = match (truth.hop_seconds > 0.0, events) {
        (true, _) => truth.hop_seconds,
        (false, [a, b, ..]) => b.t - a.t,
        _ => 0.0,
    };
    let tol = tol_deg.to_radians();
    let by_k: HashMap<usize, usize> = truth.records.iter().enumerate().map(|(i, r)| (r.k, i)).collect();

    // last time each source was seen active, up to and including each record
    let mut last_active: Vec<HashMap<usize, f64>> = Vec::with_capacity(truth.records.len());
    let mut running: HashMap<usize, f64> = HashMap::new();
    for r in &truth.records {
        for s in r.sources.iter().filter(|s| s.active) {
            running.insert(s.id, r.t);
        }
        last_active.push(running.clone());
    }

    let detected_count = events
        .iter()
        .flat_map(|e| &e.events)
        .filter(|e| e.kind == TrackerEventKind::SourceAppeared)
        .map(|e| e.cluster)
        .collect::<BTreeSet<_>>()
        .len();

    let mut acc: BTreeMap<usize, Acc> = BTreeMap::new();
    for r in &truth.records {
        for s in &r.sources {
            acc.entry(s.id).or_default();
        }
    }
    let mut ghost_hops = 0usize;

    for ev in events {
        let detected: Vec<_> = ev.detected().collect();
        if detected.is_empty() {
            continue;
        }
        let candidates: Vec<_> = match by_k.get(&ev.k) {
            Some(&i) => {
                let rec = &truth.records[i];
                rec.sources
                    .iter()
                    .filter(|s| s.active || last_active[i].get(&s.id).is_some_and(|&t| rec.t - t <= hold_s))
                    .collect()
            }
            None => continue,
        };
        let mut pairs = Vec::new();
        for (ci, c) in detected.iter().enumerate() {
            let cd = Direction { theta: c.theta, phi: c.phi };
            for (si, s) in candidates.iter().enumerate() {
                let sd = Direction { theta: s.theta, phi: s.phi };
                pairs.push((cd.angle_to(sd), ci, si));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut used_c = vec![false; detected.len()];
        let mut used_s = vec![false; candidates.len()];
        for (err, ci, si) in pairs {
            if used_c[ci] || used_s[si] {
                continue;
            }
            used_c[ci] = true;
            used_s[si] = true;
            let s = candidates[si];
            let a = acc.entry(s.id).or_default();
            a.errors.push(err);
            a.az_errors.push(azimuth_gap(detected[ci].theta, s.theta));
            a.clusters.insert(detected[ci].id);
        }
        if used_c.iter().any(|u| !u) {
            ghost_hops += 1;
        }
    }

    let frac = |v: &[f64]| {
        if v.is_empty() {
            0.0
        } else {
            v.iter().filter(|e| **e <= tol).count() as f64 / v.len() as f64
        }
    };
    let sources: Vec<SourceReport> = acc
        .into_iter()
        .map(|(id, a)| SourceReport {
            id,
            matched_frames: a.errors.len(),
            clusters: a.clusters.into_iter().collect(),
            mean_error_deg: if a.errors.is_empty() {
                0.0
            } else {
                a.errors.iter().sum::<f64>() / a.errors.len() as f64
            }
            .to_degrees(),
            max_error_deg: a.errors.iter().copied().fold(0.0, f64::max).to_degrees(),
            fraction_within_tol: frac(&a.errors),
            azimuth_fraction_within_tol: frac(&a.az_errors),
        })
        .collect();
    let matched: usize = sources.iter().map(|s| s.matched_frames).sum();
    let within: f64 = sources
        .iter()
        .map(|s| s.fraction_within_tol * s.matched_frames as f64)
        .sum();
    TrackingReport {
        detected_count,
        fraction_within_tol: if matched == 0 { 0.0 } else { within / matched as f64 },
        sources,
        ghost_time_s: ghost_hops as f64 * hop,
        duration_s: events.len() as f64 * hop,
        tol_deg,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::events::{ClusterRecord, PairRecord, TruthRecord, TruthSource};
    use tridoa_core::tracker::TrackerEvent;

    const HOP: f64 = 512.0 / 48_000.0;

    fn event(k: usize, clusters: Vec<ClusterRecord>, appeared: Option<usize>) -> EventRecord {
        EventRecord {
            v: 1,
            t: k as f64 * HOP,
            k,
            pairs: [PairRecord { lag: 0.0, peak: 0.0, beta: 0.0 }; 3],
            tdoa: [0.0; 3],
            verdict: "activity".into(),
            nns_error: None,
            dir: None,
            clusters,
            events: appeared
                .map(|c| TrackerEvent {
                    kind: TrackerEventKind::SourceAppeared,
                    cluster: c,
                    time: k as f64 * HOP,
                })
                .into_iter()
                .collect(),
        }
    }

    fn cluster(id: usize, theta: f64, phi: f64) -> ClusterRecord {
        ClusterRecord { id, theta, phi, rho: 1.0, detected: true }
    }

    fn truth(n: usize, sources: Vec<TruthSource>) -> TruthLog {
        TruthLog {
            hop_seconds: HOP,
            records: (0..n)
                .map(|k| TruthRecord { v: 1, t: k as f64 * HOP, k, sources: sources.clone() })
                .collect(),
        }
    }

    #[test]
    fn perfect_single_source() {
        let src = TruthSource { id: 0, theta: 0.5, phi: 0.2, active: true };
        let events: Vec<_> = (0..50)
            .map(|k| event(k, vec![cluster(3, 0.5, 0.2)], (k == 0).then_some(3)))
            .collect();
        let rep = evaluate_tracking(&events, &truth(50, vec![src]), 10.0, DEFAULT_HOLD_S);
        assert_eq!(rep.detected_count, 1);
        assert_eq!(rep.fraction_within_tol, 1.0);
        assert_eq!(rep.ghost_time_s, 0.0);
        assert_eq!(rep.sources[0].matched_frames, 50);
        assert_eq!(rep.sources[0].clusters, vec![3]);
    }

    #[test]
    fn detection_without_truth_is_all_ghost() {
        let events: Vec<_> = (0..40)
            .map(|k| event(k, vec![cluster(0, 1.0, 0.0)], (k == 0).then_some(0)))
            .collect();
        let rep = evaluate_tracking(&events, &truth(40, vec![]), 10.0, DEFAULT_HOLD_S);
        assert!((rep.ghost_time_s - rep.duration_s).abs() < 1e-12);
        assert!((rep.duration_s - 40.0 * HOP).abs() < 1e-12);
    }

    #[test]
    fn hold_window_covers_decay_after_source_stops() {
        let n = 100;
        let mut t = truth(n, vec![TruthSource { id: 0, theta: 0.0, phi: 0.0, active: true }]);
        for r in t.records.iter_mut().skip(50) {
            r.sources[0].active = false;
        }
        let events: Vec<_> = (0..n).map(|k| event(k, vec![cluster(0, 0.01, 0.0)], None)).collect();
        assert_eq!(evaluate_tracking(&events, &t, 10.0, 2.5).ghost_time_s, 0.0);
        let rep = evaluate_tracking(&events, &t, 10.0, 0.1);
        assert!(rep.ghost_time_s > 0.0);
    }

    #[test]
    fn greedy_matching_prefers_the_closest_pair() {
        let a = TruthSource { id: 0, theta: 0.0, phi: 0.0, active: true };
        let b = TruthSource { id: 1, theta: 1.5, phi: 0.0, active: true };
        let events = vec![event(0, vec![cluster(7, 1.45, 0.0), cluster(8, 0.1, 0.0)], None)];
        let rep = evaluate_tracking(&events, &truth(1, vec![a, b]), 10.0, 0.0);
        assert_eq!(rep.sources[0].clusters, vec![8]);
        assert_eq!(rep.sources[1].clusters, vec![7]);
        assert_eq!(rep.ghost_time_s, 0.0);
    }
}
