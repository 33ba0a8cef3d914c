use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use tridoa::error::{Error, Result};
use tridoa::io::config::{load_config, load_geometry, save_config, save_geometry};
use tridoa::io::dataset::{load_dataset, save_dataset};
use tridoa::io::events::{load_events, load_truth, save_truth, write_jsonl, EventRecord};
use tridoa::io::lattice::{load_directions, load_lattice, save_directions, save_lattice};
use tridoa::io::live::{process_raw, DEFAULT_QUEUE_DEPTH};
use tridoa::io::wav::{read_audio, write_audio, PcmFormat};
use tridoa::simulate::evaluate::{evaluate_tracking, DEFAULT_HOLD_S};
use tridoa::simulate::experiments::default_geometry;
use tridoa::simulate::field::{synthesize_field_dataset, FieldMode, FieldSpec};
use tridoa::simulate::scene::{load_scene, render_scene, SceneSpec, SourceKind, SourceSpec};
use tridoa::simulate::sweep::{run_noise_sweep, SweepConfig};
use tridoa_core::calibrate::{calibrate_geometry, LmSettings};
use tridoa_core::correlator::EstimatorConfig;
use tridoa_core::geometry::{ArrayGeometry, Direction, FarFieldRadius};
use tridoa_core::lattice::{fibonacci_lattice, interpolate_field_dataset, latlong_lattice, MappingLattice};
use tridoa_core::pipeline::{Pipeline, PipelineConfig};
use tridoa_core::tracker::TrackerParams;

/// Two-dimensional direction-of-arrival estimation with three microphones.
#[derive(Parser)]
#[command(name = "tridoa", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate direction sets.
    #[command(subcommand)]
    Lattice(LatticeCmd),
    /// Build TDOA mapping tables.
    #[command(subcommand)]
    Mappings(MappingsCmd),
    /// Fit the array geometry to a field dataset.
    Calibrate(CalibrateArgs),
    /// Run the localization pipeline over a recording or a raw stream.
    Process(ProcessArgs),
    /// Render a scene file to a WAV recording and a truth log.
    Simulate(SimulateArgs),
    /// Compare NNS and closed-form mapping under TDOA noise.
    Sweep(SweepArgs),
    /// Score an event log against a truth log.
    Eval(EvalArgs),
    /// Measure the per-hop processing cost.
    Bench(BenchArgs),
    /// Synthesize field datasets.
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Write a configuration file with default values.
    Config {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum LatticeCmd {
    /// Spherical Fibonacci lattice over the upper hemisphere.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Latitude-longitude grid with u*u points plus the zenith.
    Latlong {
        #[arg(long)]
        u: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct TargetArgs {
    /// Direction set to fill; defaults to a Fibonacci lattice of --n points.
    #[arg(long, conflicts_with = "n")]
    directions: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    n: usize,
}

impl TargetArgs {
    fn load(&self) -> Result<Vec<Direction>> {
        match &self.directions {
            Some(p) => load_directions(p),
            None if self.n == 0 => Err(Error::Invalid("--n must be positive".into())),
            None => Ok(fibonacci_lattice(self.n)),
        }
    }
}

#[derive(Subcommand)]
enum MappingsCmd {
    /// Fill a table from the array model.
    Synth {
        #[arg(long)]
        geometry: PathBuf,
        /// Source distance, meters.
        #[arg(long, default_value_t = FarFieldRadius::DEFAULT_METERS)]
        r: f64,
        #[command(flatten)]
        targets: TargetArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Interpolate a table from a field dataset.
    Interp {
        #[arg(long)]
        dataset: PathBuf,
        /// Geometry recorded in the table, checked against the pipeline's.
        #[arg(long)]
        geometry: Option<PathBuf>,
        #[command(flatten)]
        targets: TargetArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Starting geometry.
    #[arg(long)]
    init: PathBuf,
    /// Distance for records without one, meters.
    #[arg(long, default_value_t = FarFieldRadius::DEFAULT_METERS)]
    r: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProcessArgs {
    #[arg(long, required_unless_present = "raw", conflicts_with = "raw")]
    wav: Option<PathBuf>,
    /// Read raw interleaved 3-channel PCM from standard input.
    #[arg(long)]
    raw: bool,
    /// Sample rate of the raw stream.
    #[arg(long, requires = "raw")]
    fs: Option<f64>,
    #[arg(long, value_enum, default_value_t = PcmFormat::S16)]
    format: PcmFormat,
    #[arg(long)]
    mappings: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Array geometry; defaults to the one stored in the mapping table.
    #[arg(long)]
    geometry: Option<PathBuf>,
    /// Event log path, `-` for standard output.
    #[arg(long, default_value = "-")]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_QUEUE_DEPTH)]
    queue_depth: usize,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    out_wav: PathBuf,
    #[arg(long)]
    out_truth: PathBuf,
    #[arg(long, value_enum, default_value_t = PcmFormat::F32)]
    format: PcmFormat,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    geometry: PathBuf,
    #[arg(long)]
    mappings: PathBuf,
    /// Noise standard deviations, meters.
    #[arg(long, value_delimiter = ',', default_values_t = [1e-4, 1e-3, 1e-2, 1e-1])]
    sigmas: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = FarFieldRadius::DEFAULT_METERS)]
    r: f64,
    /// Offsets applied to (b, c_x, c_y) for the miscalibrated run, meters.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.002, -0.002, 0.002])]
    miscalibration: Vec<f64>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    events: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value_t = 10.0)]
    tol_deg: f64,
    /// Seconds a source stays matchable after it stops.
    #[arg(long, default_value_t = DEFAULT_HOLD_S)]
    hold: f64,
}

#[derive(Args)]
struct BenchArgs {
    /// Audio duration, seconds.
    #[arg(long, default_value_t = 60.0)]
    seconds: f64,
    /// Mapping table; defaults to a synthetic 10^4-entry table.
    #[arg(long)]
    mappings: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum DatasetCmd {
    /// Simulate a field collection on a direction grid.
    Synth {
        #[arg(long)]
        geometry: PathBuf,
        /// Source distance, meters.
        #[arg(long, default_value_t = 2.0)]
        distance: f64,
        /// Lat-long grid resolution, used unless --directions is given.
        #[arg(long, default_value_t = 36)]
        u: usize,
        #[arg(long)]
        directions: Option<PathBuf>,
        /// Measure TDOAs from rendered noise instead of the array model.
        #[arg(long)]
        measured: bool,
        /// Model-mode TDOA noise, meters.
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value_t = 30.0)]
        snr_db: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn far_field(r: f64, g: &ArrayGeometry) -> Result<FarFieldRadius> {
    Ok(FarFieldRadius::new(r, g)?)
}

/// Opens `path` for writing, `-` meaning standard output.
fn sink(path: &Path) -> Result<Box<dyn Write>> {
    if path == Path::new("-") {
        Ok(Box::new(BufWriter::new(std::io::stdout().lock())))
    } else {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(Box::new(BufWriter::new(f)))
    }
}

fn write_record(w: &mut dyn Write, path: &Path, rec: &EventRecord) -> Result<()> {
    write_jsonl(&mut *w, [rec]).map_err(|e| Error::io(path, e))
}

fn lattice_geometry(lat: &MappingLattice, explicit: Option<&Path>) -> Result<ArrayGeometry> {
    match explicit {
        Some(p) => load_geometry(p),
        None => lat.geometry().copied().ok_or_else(|| {
            Error::Invalid("the mapping table has no geometry; pass --geometry".into())
        }),
    }
}

fn config_for(path: Option<&Path>, fs: f64) -> Result<PipelineConfig> {
    match path {
        Some(p) => {
            let cfg = load_config(p)?;
            if cfg.fs != fs {
                return Err(Error::Invalid(format!(
                    "input sample rate {fs} Hz differs from the configured {} Hz",
                    cfg.fs
                )));
            }
            Ok(cfg)
        }
        None => {
            let d = PipelineConfig::default();
            Ok(PipelineConfig {
                fs,
                tracker: TrackerParams::for_stream(d.frame_len, fs),
                ..d
            })
        }
    }
}

fn process(a: ProcessArgs) -> Result<()> {
    let lattice = load_lattice(&a.mappings)?;
    let geometry = lattice_geometry(&lattice, a.geometry.as_deref())?;
    let mut out = sink(&a.out)?;
    let n = if let Some(wav) = &a.wav {
        let audio = read_audio(wav)?;
        let cfg = config_for(a.config.as_deref(), audio.fs as f64)?;
        let mut p = Pipeline::new(cfg, geometry, lattice)?;
        let events = p.process_channels(audio.as_slices())?;
        for e in &events {
            write_record(&mut *out, &a.out, &EventRecord::from(e))?;
        }
        events.len()
    } else {
        let fs = match (a.fs, &a.config) {
            (Some(fs), _) => fs,
            (None, Some(p)) => load_config(p)?.fs,
            (None, None) => PipelineConfig::default().fs,
        };
        let cfg = config_for(a.config.as_deref(), fs)?;
        let mut p = Pipeline::new(cfg, geometry, lattice)?;
        process_raw(std::io::stdin(), a.format, &mut p, a.queue_depth, |e| {
            write_record(&mut *out, &a.out, &EventRecord::from(&e))
        })?
    };
    out.flush().map_err(|e| Error::io(&a.out, e))?;
    eprintln!("processed {n} frames");
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let spec = load_scene(&a.scene)?;
    let (mut audio, truth) = render_scene(&spec)?;
    let peak = audio
        .channels
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    // one gain for all channels keeps delays and SNR intact
    if peak > 0.99 {
        let gain = 0.99 / peak;
        audio.channels.iter_mut().flatten().for_each(|v| *v *= gain);
        eprintln!("scaled by {gain:.4} to avoid clipping");
    }
    write_audio(&a.out_wav, audio.as_slices(), audio.fs, a.format)?;
    save_truth(&a.out_truth, &truth)?;
    eprintln!(
        "rendered {:.2} s, {} truth records",
        spec.duration,
        truth.records.len()
    );
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let g = load_geometry(&a.geometry)?;
    let lat = load_lattice(&a.mappings)?;
    let mut cfg = SweepConfig::new(a.sigmas, a.trials);
    cfg.seed = a.seed;
    cfg.far_field_r = far_field(a.r, &g)?;
    cfg.miscalibration = [a.miscalibration[0], a.miscalibration[1], a.miscalibration[2]];
    let rep = run_noise_sweep(&g, &lat, &cfg)?;
    print!("{}", rep.to_csv());
    let c = rep.calibrated;
    eprintln!(
        "recalibrated geometry: b={:.6} c_x={:.6} c_y={:.6}",
        c.b(),
        c.c_x(),
        c.c_y()
    );
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let events = load_events(&a.events)?;
    let truth = load_truth(&a.truth)?;
    let rep = evaluate_tracking(&events, &truth, a.tol_deg, a.hold);
    println!(
        "{}",
        serde_json::to_string_pretty(&rep).expect("report serializes")
    );
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    if a.seconds.is_nan() || a.seconds <= 0.0 {
        return Err(Error::Invalid("--seconds must be positive".into()));
    }
    let cfg = config_for(a.config.as_deref(), PipelineConfig::default().fs)?;
    let (lattice, g) = match &a.mappings {
        Some(p) => {
            let lat = load_lattice(p)?;
            let g = lattice_geometry(&lat, None)?;
            (lat, g)
        }
        None => {
            let g = default_geometry();
            let r = far_field(cfg.far_field_r, &g)?;
            (MappingLattice::synthesize(fibonacci_lattice(10_000), &g, r)?, g)
        }
    };
    let mut scene = SceneSpec::new(g, a.seconds);
    scene.fs = cfg.fs.round() as u32;
    scene.frame_len = cfg.frame_len;
    scene.snr_db = 20.0;
    scene.sources.push(SourceSpec {
        direction: Direction::from_degrees(-40.0, 25.0)?,
        distance: 2.0,
        kind: SourceKind::AmNoiseBursts {
            period_ms: 500.0,
            duty: 0.5,
        },
        active: vec![(0.0, a.seconds)],
        gain: 1.0,
    });
    let (audio, _) = render_scene(&scene)?;
    let mut p = Pipeline::new(cfg, g, lattice)?;
    let start = Instant::now();
    let events = p.process_channels(audio.as_slices())?;
    let secs = start.elapsed().as_secs_f64();
    let hops = events.len().max(1);
    println!("audio_seconds {:.3}", a.seconds);
    println!("hops {}", events.len());
    println!("wall_seconds {secs:.4}");
    println!("ms_per_hop {:.4}", secs * 1e3 / hops as f64);
    println!("budget_ms_per_hop {:.4}", cfg.hop_seconds() * 1e3 / 10.0);
    println!("real_time_factor {:.4}", secs / a.seconds);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Lattice(LatticeCmd::Gen { n, out }) => {
            if n == 0 {
                return Err(Error::Invalid("--n must be positive".into()));
            }
            save_directions(&out, &fibonacci_lattice(n))
        }
        Command::Lattice(LatticeCmd::Latlong { u, out }) => save_directions(&out, &latlong_lattice(u)?),
        Command::Mappings(MappingsCmd::Synth {
            geometry,
            r,
            targets,
            out,
        }) => {
            let g = load_geometry(&geometry)?;
            let lat = MappingLattice::synthesize(targets.load()?, &g, far_field(r, &g)?)?;
            save_lattice(&out, &lat, Some(r))
        }
        Command::Mappings(MappingsCmd::Interp {
            dataset,
            geometry,
            targets,
            out,
        }) => {
            let ds = load_dataset(&dataset)?;
            let report = ds.density_report();
            if !report.is_sufficient() {
                return Err(Error::Invalid(format!("dataset too sparse: {report}")));
            }
            let mut lat = interpolate_field_dataset(&ds, targets.load()?)?;
            if let Some(p) = geometry {
                lat = lat.with_geometry(load_geometry(&p)?);
            }
            save_lattice(&out, &lat, None)
        }
        Command::Calibrate(a) => {
            let ds = load_dataset(&a.dataset)?;
            let init = load_geometry(&a.init)?;
            let res = calibrate_geometry(&ds, &init, far_field(a.r, &init)?, &LmSettings::default())?;
            let g = res.geometry;
            eprintln!(
                "rms residual {:.3e} m (initial {:.3e}), {} iterations, converged: {}",
                res.rms_residual, res.initial_rms, res.iterations, res.converged
            );
            match a.out {
                Some(p) => save_geometry(&p, &g),
                None => {
                    print!("{}", tridoa::io::config::geometry_to_string(&g));
                    Ok(())
                }
            }
        }
        Command::Process(a) => process(a),
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a),
        Command::Dataset(DatasetCmd::Synth {
            geometry,
            distance,
            u,
            directions,
            measured,
            sigma,
            snr_db,
            seed,
            out,
        }) => {
            let g = load_geometry(&geometry)?;
            let directions = match directions {
                Some(p) => load_directions(&p)?,
                None => latlong_lattice(u)?,
            };
            let mode = if measured {
                FieldMode::Measured {
                    snr_db,
                    frames: 8,
                    estimator: EstimatorConfig::default(),
                }
            } else {
                FieldMode::Model { sigma }
            };
            let ds = synthesize_field_dataset(&FieldSpec {
                geometry: g,
                directions,
                distance,
                mode,
                seed,
            })?;
            save_dataset(&out, &ds)
        }
        Command::Config { out } => save_config(&out, &PipelineConfig::default()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let cat = e.category();
            eprintln!("error [{}]: {e}", cat.as_str());
            ExitCode::from(cat.exit_code() as u8)
        }
    }
}
