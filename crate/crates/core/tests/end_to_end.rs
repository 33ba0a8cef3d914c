use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tridoa_core::geometry::{cf_map, tdoa_for_direction, ArrayGeometry, Direction, FarFieldRadius};
use tridoa_core::lattice::{fibonacci_lattice, MappingLattice};
use tridoa_core::pipeline::{Pipeline, PipelineConfig};
use tridoa_core::tracker::TrackerEventKind;

fn geometry() -> ArrayGeometry {
    ArrayGeometry::new(0.1, 0.05, 0.12).unwrap()
}

/// Integer-sample delayed copies of one noise signal, no added noise.
fn delayed_noise(d: Direction, seconds: f64, seed: u64) -> [Vec<f64>; 3] {
    let g = geometry();
    let fs = 48_000.0;
    let n = (seconds * fs) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: Vec<f64> = (0..n + 64).map(|_| rng.random_range(-1.0..1.0)).collect();
    let p = d.to_point();
    let src = [p.x * 50.0, p.y * 50.0, p.z * 50.0];
    let dist = g.mics().map(|m| ((src[0] - m[0]).powi(2) + (src[1] - m[1]).powi(2) + (src[2] - m[2]).powi(2)).sqrt());
    let near = dist.iter().cloned().fold(f64::INFINITY, f64::min);
    dist.map(|r| {
        let lag = ((r - near) / 343.0 * fs).round() as usize;
        (0..n).map(|i| base[i + 32 - lag.min(32)]).collect()
    })
}

#[test]
fn closed_form_inverts_the_far_field_model() {
    let g = geometry();
    let r = FarFieldRadius::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..500 {
        let d = Direction::new(rng.random_range(-3.1..3.1), rng.random_range(0.0..1.5)).unwrap();
        let q = tdoa_for_direction(&g, d, r.get()).as_array();
        let sol = cf_map(q[0], q[1], &g, r);
        assert!(sol.point.to_direction().angle_to(d) < 1e-6);
    }
}

#[test]
fn pipeline_reports_a_steady_source() {
    let g = geometry();
    let lat = MappingLattice::synthesize(fibonacci_lattice(5000), &g, FarFieldRadius::default()).unwrap();
    let mut p = Pipeline::new(PipelineConfig::default(), g, lat).unwrap();
    let truth = Direction::from_degrees(-60.0, 15.0).unwrap();
    let ch = delayed_noise(truth, 1.0, 8);
    let events = p.process_channels([&ch[0], &ch[1], &ch[2]]).unwrap();
    assert_eq!(events.len(), (48_000 - 1024) / 512 + 1);
    let accepted: Vec<_> = events.iter().filter_map(|e| e.verdict.direction).collect();
    assert!(accepted.len() * 10 >= events.len() * 9, "{} of {}", accepted.len(), events.len());
    // integer-lag rendering limits accuracy to a few degrees
    assert!(accepted.iter().all(|d| d.angle_to(truth).to_degrees() < 6.0));
    let appeared = events
        .iter()
        .flat_map(|e| &e.events)
        .filter(|e| e.kind == TrackerEventKind::SourceAppeared)
        .count();
    assert_eq!(appeared, 1);
}
