use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use tridoa::simulate::experiments::exp2_scene;
use tridoa::simulate::scene::scene_to_string;

fn tridoa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tridoa")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = tridoa(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn code(args: &[&str]) -> i32 {
    tridoa(args).status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, text: &str) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    fn geometry(&self) -> PathBuf {
        self.write("geometry.toml", "version = 1\nb = 0.1\nc_x = 0.05\nc_y = 0.12\n")
    }

    fn mappings(&self) -> PathBuf {
        let g = self.geometry();
        let out = self.path("map.json");
        ok(&["mappings", "synth", "--geometry", s(&g), "--n", "2000", "--out", s(&out)]);
        out
    }

    /// Two seconds of the two-source scene, rendered as 16-bit PCM.
    fn recording(&self) -> (PathBuf, PathBuf) {
        let mut scene = exp2_scene(1);
        scene.duration = 2.0;
        for src in &mut scene.sources {
            src.active = vec![(0.0, 2.0)];
        }
        let spec = self.write("scene.toml", &scene_to_string(&scene));
        let (wav, truth) = (self.path("scene.wav"), self.path("truth.jsonl"));
        ok(&[
            "simulate", "--scene", s(&spec), "--out-wav", s(&wav), "--out-truth", s(&truth), "--format", "s16",
        ]);
        (wav, truth)
    }
}

#[test]
fn simulate_process_eval_round_trip() {
    let w = Workspace::new();
    let map = w.mappings();
    let (wav, truth) = w.recording();
    let events = w.path("events.jsonl");
    ok(&["process", "--wav", s(&wav), "--mappings", s(&map), "--out", s(&events)]);

    let lines = std::fs::read_to_string(&events).unwrap();
    let truth_lines = std::fs::read_to_string(&truth).unwrap();
    // one event line per hop, same framing as the truth log
    assert_eq!(lines.lines().count(), (96_000 - 1024) / 512 + 1);
    assert_eq!(lines.lines().count(), truth_lines.lines().count());

    let rep = ok(&["eval", "--events", s(&events), "--truth", s(&truth)]);
    let v: serde_json::Value = serde_json::from_slice(&rep.stdout).unwrap();
    assert_eq!(v["sources"].as_array().unwrap().len(), 2);
    assert!(v["detected_count"].as_u64().unwrap() >= 1);
}

#[test]
fn processing_is_deterministic() {
    let w = Workspace::new();
    let map = w.mappings();
    let (wav, _) = w.recording();
    let a = ok(&["process", "--wav", s(&wav), "--mappings", s(&map)]).stdout;
    let b = ok(&["process", "--wav", s(&wav), "--mappings", s(&map)]).stdout;
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn live_stream_matches_file_processing() {
    let w = Workspace::new();
    let map = w.mappings();
    let (wav, _) = w.recording();
    let file = ok(&["process", "--wav", s(&wav), "--mappings", s(&map)]).stdout;

    let bytes = std::fs::read(&wav).unwrap();
    let at = bytes.windows(4).position(|c| c == b"data").unwrap();
    let len = u32::from_le_bytes(bytes[at + 4..at + 8].try_into().unwrap()) as usize;
    let pcm = bytes[at + 8..at + 8 + len].to_vec();

    let mut child = Command::new(env!("CARGO_BIN_EXE_tridoa"))
        .args(["process", "--raw", "--fs", "48000", "--format", "s16", "--mappings", s(&map)])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stdin = child.stdin.take().unwrap();
    let feeder = std::thread::spawn(move || {
        // uneven chunks, split inside sample frames
        for chunk in pcm.chunks(1237) {
            stdin.write_all(chunk).unwrap();
        }
    });
    let live = child.wait_with_output().unwrap();
    feeder.join().unwrap();
    assert!(live.status.success(), "{}", String::from_utf8_lossy(&live.stderr));
    assert_eq!(live.stdout, file);
}

#[test]
fn config_and_lattice_commands_write_files() {
    let w = Workspace::new();
    let cfg = w.path("config.toml");
    ok(&["config", "--out", s(&cfg)]);
    assert!(std::fs::read_to_string(&cfg).unwrap().contains("frame_len"));
    let dirs = w.path("dirs.json");
    ok(&["lattice", "gen", "--n", "50", "--out", s(&dirs)]);
    let map = w.path("map.json");
    ok(&["mappings", "synth", "--geometry", s(&w.geometry()), "--directions", s(&dirs), "--out", s(&map)]);
}

#[test]
fn dataset_synth_then_calibrate_recovers_geometry() {
    let w = Workspace::new();
    let g = w.geometry();
    let ds = w.path("field.json");
    ok(&["dataset", "synth", "--geometry", s(&g), "--u", "12", "--distance", "2", "--out", s(&ds)]);
    let init = w.write("init.toml", "version = 1\nb = 0.102\nc_x = 0.048\nc_y = 0.122\n");
    let out = ok(&["calibrate", "--dataset", s(&ds), "--init", s(&init)]);
    let text = String::from_utf8(out.stdout).unwrap();
    let fitted: toml::Table = text.parse().unwrap();
    for (key, want) in [("b", 0.1), ("c_x", 0.05), ("c_y", 0.12)] {
        let got = fitted[key].as_float().unwrap();
        assert!((got - want).abs() < 1e-4, "{key}: {got}");
    }
}

#[test]
fn exit_codes_follow_error_categories() {
    let w = Workspace::new();
    let map = w.mappings();
    let missing = w.path("nope.json");

    assert_eq!(code(&["process", "--wav", s(&missing), "--mappings", s(&map)]), 3);

    let bad_version = w.write("bad.toml", "version = 7\nb = 0.1\nc_x = 0.05\nc_y = 0.12\n");
    assert_eq!(code(&["mappings", "synth", "--geometry", s(&bad_version), "--out", s(&w.path("x.json"))]), 4);
    let bad_frame = w.write("cfg.toml", "version = 1\nframe_len = 1000\n");
    assert_eq!(code(&["bench", "--seconds", "1", "--config", s(&bad_frame)]), 4);

    let stereo = w.path("stereo.wav");
    let spec = hound::WavSpec {
        channels: 2,
        sample_rate: 48_000,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut wr = hound::WavWriter::create(&stereo, spec).unwrap();
    for _ in 0..2048 {
        wr.write_sample(0i16).unwrap();
    }
    wr.finalize().unwrap();
    assert_eq!(code(&["process", "--wav", s(&stereo), "--mappings", s(&map)]), 5);

    assert_eq!(code(&["lattice", "gen", "--n", "0", "--out", s(&w.path("d.json"))]), 6);
    assert_eq!(code(&["lattice", "gen"]), 2);
    let err = tridoa(&["process", "--wav", s(&missing), "--mappings", s(&map)]).stderr;
    assert!(String::from_utf8_lossy(&err).starts_with("error [io]:"));
}
