use num_complex::Complex64;
use tridoa::simulate::experiments::default_geometry;
use tridoa::simulate::scene::{
    parse_scene, render_components, render_scene, scene_to_string, Rotation, SceneSpec, SourceKind, SourceSpec,
};
use tridoa::simulate::sweep::{run_noise_sweep, SweepConfig};
use tridoa::simulate::SimError;
use tridoa_core::correlator::{segment_stream, EstimatorConfig, TdoaEstimator};
use tridoa_core::fft::Fft;
use tridoa_core::geometry::{tdoa_for_direction, Direction, FarFieldRadius};
use tridoa_core::lattice::{fibonacci_lattice, MappingLattice};

fn one_source(direction: Direction, duration: f64, snr_db: f64, seed: u64) -> SceneSpec {
    let mut s = SceneSpec::new(default_geometry(), duration);
    s.snr_db = snr_db;
    s.seed = seed;
    s.sources.push(SourceSpec {
        direction,
        distance: 2.0,
        kind: SourceKind::WhiteNoise,
        active: vec![(0.0, duration + 1.0)],
        gain: 1.0,
    });
    s
}

/// Lag of `b` relative to `a` in samples, from the cross-correlation
/// interpolated 8x by zero-padding the cross spectrum.
fn oversampled_lag(a: &[f64], b: &[f64]) -> f64 {
    const UP: usize = 8;
    let n = (2 * a.len()).next_power_of_two();
    let fft = Fft::new(n).unwrap();
    let spectrum = |x: &[f64]| {
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (c, v) in buf.iter_mut().zip(x) {
            c.re = *v;
        }
        fft.forward(&mut buf);
        buf
    };
    let (sa, sb) = (spectrum(a), spectrum(b));
    let mut up = vec![Complex64::new(0.0, 0.0); n * UP];
    for k in 0..n {
        let c = sa[k].conj() * sb[k];
        if k < n / 2 {
            up[k] = c;
        } else if k == n / 2 {
            up[k] = c * 0.5;
            up[n * UP - n / 2] = c * 0.5;
        } else {
            up[n * UP - (n - k)] = c;
        }
    }
    Fft::new(n * UP).unwrap().inverse_unscaled(&mut up);
    let len = up.len() as i64;
    let at = |l: i64| up[l.rem_euclid(len) as usize].re;
    let search = (64 * UP) as i64;
    let peak = (-search..=search).max_by(|x, y| at(*x).total_cmp(&at(*y))).unwrap();
    let (ym, y0, yp) = (at(peak - 1), at(peak), at(peak + 1));
    let delta = 0.5 * (ym - yp) / (ym - 2.0 * y0 + yp);
    (peak as f64 + delta) / UP as f64
}

#[test]
fn fractional_delays_match_the_geometry() {
    let g = default_geometry();
    let mics = g.mics();
    for (i, &(az, el)) in [(30.0, 0.0), (-100.0, 20.0), (170.0, 65.0)].iter().enumerate() {
        let d = Direction::from_degrees(az, el).unwrap();
        let (audio, _) = render_scene(&one_source(d, 0.25, 80.0, i as u64)).unwrap();
        let p = d.to_point();
        let src = [p.x * 2.0, p.y * 2.0, p.z * 2.0];
        let dist: Vec<f64> = mics
            .iter()
            .map(|m| ((src[0] - m[0]).powi(2) + (src[1] - m[1]).powi(2) + (src[2] - m[2]).powi(2)).sqrt())
            .collect();
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            let want = (dist[b] - dist[a]) / 343.0 * 48_000.0;
            let got = oversampled_lag(&audio.channels[a], &audio.channels[b]);
            assert!((got - want).abs() < 0.02, "{az}/{el} pair {a}{b}: {got} vs {want}");
        }
    }
}

#[test]
fn frame_tdoas_match_the_model_at_30_db() {
    let d = Direction::from_degrees(0.0, 0.0).unwrap();
    let (audio, _) = render_scene(&one_source(d, 0.2, 30.0, 9)).unwrap();
    let mut est = TdoaEstimator::new(&EstimatorConfig::default(), default_geometry()).unwrap();
    let want = tdoa_for_direction(&default_geometry(), d, 2.0).as_array();
    let sample = 343.0 / 48_000.0;
    let mut frames = 0;
    for f in segment_stream(audio.as_slices(), 1024).unwrap() {
        let q = est.measure(f.k, f.channels).unwrap().q.as_array();
        for (a, b) in q.iter().zip(want) {
            assert!((a - b).abs() < 0.1 * sample, "frame {}: {a} vs {b}", f.k);
        }
        frames += 1;
    }
    assert_eq!(frames, 17);
}

#[test]
fn realized_snr_is_within_half_a_db() {
    for (seed, snr) in [(1, 20.0), (2, 0.0), (3, 35.0)] {
        let spec = one_source(Direction::from_degrees(60.0, 30.0).unwrap(), 1.0, snr, seed);
        let c = render_components(&spec).unwrap();
        for ch in 0..3 {
            let p = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
            let realized = 10.0 * (p(&c.clean[ch]) / p(&c.noise[ch])).log10();
            assert!((realized - snr).abs() < 0.5, "channel {ch}: {realized} dB vs {snr}");
        }
    }
}

#[test]
fn noise_only_channels_are_incoherent() {
    let mut spec = SceneSpec::new(default_geometry(), 1.0);
    spec.seed = 4;
    let (audio, _) = render_scene(&spec).unwrap();
    let mut est = TdoaEstimator::new(&EstimatorConfig::default(), default_geometry()).unwrap();
    for f in segment_stream(audio.as_slices(), 1024).unwrap() {
        for p in est.measure(f.k, f.channels).unwrap().pairs {
            assert!(p.peak_value < 0.2, "frame {} peak {}", f.k, p.peak_value);
        }
    }
}

#[test]
fn rendering_is_bit_reproducible() {
    let mut spec = one_source(Direction::from_degrees(10.0, 10.0).unwrap(), 0.3, 20.0, 77);
    spec.rotation = Some(Rotation { period: 5.0 });
    let a = render_scene(&spec).unwrap();
    let b = render_scene(&spec).unwrap();
    assert_eq!(a, b);
    spec.seed = 78;
    assert_ne!(render_scene(&spec).unwrap().0, a.0);
}

#[test]
fn truth_follows_rotation_and_activity() {
    let mut spec = one_source(Direction::from_degrees(0.0, 20.0).unwrap(), 2.0, 20.0, 1);
    spec.sources[0].active = vec![(0.5, 1.5)];
    spec.rotation = Some(Rotation { period: 4.0 });
    let (_, truth) = render_scene(&spec).unwrap();
    assert_eq!(truth.records.len(), (96_000 - 1024) / 512 + 1);
    assert!(truth.records.windows(2).all(|w| w[1].t > w[0].t));
    let hop = 512.0 / 48_000.0;
    for r in &truth.records {
        let tc = r.t + 512.0 / 48_000.0;
        assert_eq!(r.sources[0].active, (0.5..1.5).contains(&tc));
        let want = Direction::new(std::f64::consts::PI * tc / 2.0, 0.0).unwrap().theta;
        assert!((r.sources[0].theta - want).abs() < 1e-9, "k {}", r.k);
        assert!((r.t - r.k as f64 * hop).abs() < 1e-12);
    }
}

#[test]
fn invalid_scenes_are_rejected() {
    let d = Direction::from_degrees(0.0, 0.0).unwrap();
    let mut near = one_source(d, 1.0, 20.0, 0);
    near.sources[0].distance = 1.0;
    assert!(matches!(render_scene(&near), Err(SimError::InvalidScene(_))));

    let mut far = one_source(d, 1.0, 20.0, 0);
    far.sources[0].distance = 200.0;
    assert!(matches!(render_scene(&far), Err(SimError::DelayOutOfRange { .. })));

    let mut empty = one_source(d, 1.0, 20.0, 0);
    empty.duration = 0.0;
    assert!(render_scene(&empty).is_err());
}

#[test]
fn scene_file_round_trip() {
    let mut spec = tridoa::simulate::experiments::exp3_scene(5);
    spec.sources[1].active.push((18.0, 19.0));
    let text = scene_to_string(&spec);
    let back = parse_scene(std::path::Path::new("scene.toml"), &text).unwrap();
    assert_eq!(back.sources.len(), 2);
    assert_eq!(back.rotation, spec.rotation);
    assert_eq!(back.sources[1].kind, spec.sources[1].kind);
    for (a, b) in back.sources.iter().zip(&spec.sources) {
        assert!((a.direction.theta - b.direction.theta).abs() < 1e-12);
        assert!((a.direction.phi - b.direction.phi).abs() < 1e-12);
        assert_eq!(a.active, b.active);
    }
}

#[test]
fn sweep_limits_and_monotonicity() {
    let g = default_geometry();
    let lat = MappingLattice::synthesize(fibonacci_lattice(10_000), &g, FarFieldRadius::default()).unwrap();
    let rep = run_noise_sweep(&g, &lat, &SweepConfig::new(vec![1e-12], 2000)).unwrap();
    assert!(rep.rows[0].nns <= 0.05, "{:?}", rep.rows[0]);
    assert!(rep.rows[0].cf < 1e-6, "{:?}", rep.rows[0]);

    let rep = run_noise_sweep(&g, &lat, &SweepConfig::new(vec![1e-4, 1e-3, 1e-2, 1e-1], 10_000)).unwrap();
    for w in rep.rows.windows(2) {
        assert!(w[1].nns >= 0.95 * w[0].nns, "{:?}", rep.rows);
    }
}
