use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aurastage_core::analytics::{analyze, session_stats, AnalyticsReport};
use aurastage_core::render::{render, wav::write_wav, RenderConfig};
use aurastage_core::scene::load_scene;
use aurastage_core::tracking::{playback, Tracker};
use aurastage_core::{
    compute_mix, ClassifierThresholds, ListenerPose, MixState, Scene, SessionStats, SessionTrace,
    TrackerConfig,
};
use aurastage_service::{ServiceConfig, DEFAULT_TICK_HZ};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

const EXIT_IO: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_USAGE: u8 = 64;

/// Object-anchored audio AR soundscape engine.
#[derive(Debug, Parser)]
#[command(name = "aurastage", version)]
struct Cli {
    /// Seed for simulated tracking noise and synthetic static.
    #[arg(long, global = true, env = "AURASTAGE_SEED", default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the per-tick gain timeline of a trace as CSV.
    Sim(SimArgs),
    /// Render the stereo mix heard along a trace to a 16-bit WAV.
    Render(RenderArgs),
    /// Segment traces into phases and report dwell, coverage and duration.
    Analyze(AnalyzeArgs),
    /// Check a scene file; exits 2 when it is invalid.
    Validate(ValidateArgs),
    /// Run the live preview service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct SceneTrace {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    trace: PathBuf,
}

#[derive(Debug, Args)]
struct SimArgs {
    #[command(flatten)]
    input: SceneTrace,
    /// Tick rate in Hz.
    #[arg(long, default_value_t = 10.0)]
    rate: f64,
    #[arg(long)]
    out: PathBuf,
    /// Mix from simulated tracker estimates instead of the true poses.
    #[arg(long)]
    tracking: bool,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[command(flatten)]
    input: SceneTrace,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 44_100)]
    sr: u32,
    #[arg(long = "block-ms", default_value_t = 10.0)]
    block_ms: f64,
    /// Directory relative media paths resolve against; defaults to the
    /// scene file's directory.
    #[arg(long)]
    media_root: Option<PathBuf>,
    /// Fail on clips without media instead of synthesizing test tones.
    #[arg(long)]
    no_synth: bool,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long = "trace", required = true, num_args = 1..)]
    traces: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Also write segment and dwell rows as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// JSON file overriding classifier thresholds.
    #[arg(long)]
    thresholds: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    scene: PathBuf,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    bind: std::net::IpAddr,
    #[arg(long = "tick-hz", default_value_t = DEFAULT_TICK_HZ)]
    tick_hz: f64,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_IO,
            message: format!("{}: {e}", path.display()),
        }
    }

    fn invalid(path: &Path, e: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_INVALID,
            message: format!("{}: {e}", path.display()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Outcome {
    std::fs::write(path, bytes).map_err(|e| Failure::io(path, e))
}

fn scene_from(path: &Path) -> Result<Scene, Failure> {
    load_scene(&read(path)?).map_err(|e| Failure::invalid(path, e))
}

fn trace_from(path: &Path) -> Result<SessionTrace, Failure> {
    SessionTrace::from_jsonl(&read(path)?).map_err(|e| Failure::invalid(path, e))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Sim(a) => sim(a, cli.seed),
        Command::Render(a) => render_cmd(a, cli.seed),
        Command::Analyze(a) => analyze_cmd(a),
        Command::Validate(a) => validate(a),
        Command::Serve(a) => serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("aurastage: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// Mix heard when the device cannot place the listener: nothing.
fn silent(mut mix: MixState) -> MixState {
    for s in &mut mix.sources {
        s.content_weight = 0.0;
        s.distance_gain = 0.0;
        s.effective_gain = 0.0;
        s.audible = false;
    }
    mix.static_bed.distance_gain = 0.0;
    mix.static_bed.gain = 0.0;
    mix.focused = None;
    mix.active_inner_zone = None;
    mix
}

fn sim(a: &SimArgs, seed: u64) -> Outcome {
    let scene = scene_from(&a.input.scene)?;
    let trace = trace_from(&a.input.trace)?;
    let stream = playback(&trace, a.rate).map_err(|e| Failure::invalid(&a.input.trace, e))?;
    let mut tracker = if a.tracking {
        let cfg = TrackerConfig {
            seed,
            ..Default::default()
        };
        Some(Tracker::new(cfg, scene.anchor.position).expect("default tracker config is valid"))
    } else {
        None
    };
    let dt = 1.0 / a.rate;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "t",
        "source_id",
        "content_weight",
        "distance_gain",
        "effective_gain",
        "azimuth_deg",
        "static_gain",
    ])
    .expect("in-memory write");
    for truth in stream.until_end() {
        let mix = match tracker.as_mut() {
            None => compute_mix(&scene, &truth, truth.t),
            Some(tr) => match tr.step(&truth, dt).0 {
                Some(est) => compute_mix(&scene, &ListenerPose { t: truth.t, ..est }, truth.t),
                None => silent(compute_mix(&scene, &truth, truth.t)),
            },
        };
        let t = format!("{:.3}", mix.t);
        let st = &mix.static_bed;
        let static_gain = format!("{:.6}", st.gain);
        for s in &mix.sources {
            w.write_record([
                t.as_str(),
                &s.source_id,
                &format!("{:.6}", s.content_weight),
                &format!("{:.6}", s.distance_gain),
                &format!("{:.6}", s.effective_gain),
                &format!("{:.3}", s.azimuth_deg),
                &static_gain,
            ])
            .expect("in-memory write");
        }
        w.write_record([
            t.as_str(),
            "static",
            &format!("{:.6}", st.weight),
            &format!("{:.6}", st.distance_gain),
            &static_gain,
            &format!("{:.3}", st.azimuth_deg),
            &static_gain,
        ])
        .expect("in-memory write");
    }
    write(&a.out, &w.into_inner().expect("flush"))
}

fn render_cmd(a: &RenderArgs, seed: u64) -> Outcome {
    let scene = scene_from(&a.input.scene)?;
    let trace = trace_from(&a.input.trace)?;
    let cfg = RenderConfig {
        block_s: a.block_ms / 1000.0,
        sample_rate_hz: a.sr,
        synth_fallback: !a.no_synth,
        seed,
        media_root: a
            .media_root
            .clone()
            .or_else(|| a.input.scene.parent().map(Path::to_path_buf)),
    };
    let pcm = render(&scene, &trace, &cfg).map_err(|e| Failure::invalid(&a.input.scene, e))?;
    write_wav(&pcm, &a.out).map_err(|e| Failure::io(&a.out, e))
}

#[derive(Serialize)]
struct TraceReport<'a> {
    trace: &'a Path,
    #[serde(flatten)]
    report: &'a AnalyticsReport,
}

#[derive(Serialize)]
struct AnalyzeOutput<'a> {
    reports: Vec<TraceReport<'a>>,
    stats: SessionStats,
}

fn analyze_cmd(a: &AnalyzeArgs) -> Outcome {
    let scene = scene_from(&a.scene)?;
    let th = match &a.thresholds {
        Some(p) => serde_json::from_str::<ClassifierThresholds>(&read(p)?)
            .map_err(|e| Failure::invalid(p, e))?,
        None => ClassifierThresholds::default(),
    };
    let traces = a
        .traces
        .par_iter()
        .map(|p| trace_from(p))
        .collect::<Result<Vec<_>, _>>()?;
    let reports = traces
        .par_iter()
        .zip(a.traces.par_iter())
        .map(|(t, p)| analyze(&scene, t, &th).map_err(|e| Failure::invalid(p, e)))
        .collect::<Result<Vec<_>, _>>()?;
    let stats = session_stats(&scene, &traces).expect("at least one trace");

    let out = AnalyzeOutput {
        reports: reports
            .iter()
            .zip(&a.traces)
            .map(|(report, trace)| TraceReport { trace, report })
            .collect(),
        stats,
    };
    let mut json = serde_json::to_vec_pretty(&out).expect("report serializes");
    json.push(b'\n');
    write(&a.out, &json)?;

    if let Some(path) = &a.csv {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["trace", "record", "label", "t_start", "t_end", "seconds"])
            .expect("in-memory write");
        for (report, trace) in reports.iter().zip(&a.traces) {
            let name = trace.display().to_string();
            for s in &report.segments {
                w.write_record([
                    name.as_str(),
                    "segment",
                    s.phase.name(),
                    &format!("{:.3}", s.t_start),
                    &format!("{:.3}", s.t_end),
                    &format!("{:.3}", s.t_end - s.t_start),
                ])
                .expect("in-memory write");
            }
            for (zone, secs) in &report.dwell_per_zone {
                w.write_record([name.as_str(), "dwell", zone, "", "", &format!("{secs:.3}")])
                    .expect("in-memory write");
            }
        }
        write(path, &w.into_inner().expect("flush"))?;
    }
    Ok(())
}

fn validate(a: &ValidateArgs) -> Outcome {
    let scene = scene_from(&a.scene)?;
    println!(
        "{}: ok ({} sources, {:.0} s of broadcast content)",
        a.scene.display(),
        scene.sources.len(),
        scene.broadcast_content_s()
    );
    Ok(())
}

fn serve(a: &ServeArgs) -> Outcome {
    let scene = scene_from(&a.scene)?;
    let cfg = ServiceConfig {
        bind: (a.bind, a.port).into(),
        tick_hz: a.tick_hz,
    };
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure {
        code: EXIT_IO,
        message: e.to_string(),
    })?;
    rt.block_on(async {
        let handle = aurastage_service::start(scene, cfg)
            .await
            .map_err(|e| Failure {
                code: EXIT_IO,
                message: e.to_string(),
            })?;
        println!("listening on http://{}", handle.local_addr());
        let _ = std::io::stdout().flush();
        let _ = tokio::signal::ctrl_c().await;
        handle.shutdown().await.map_err(|e| Failure {
            code: EXIT_IO,
            message: e.to_string(),
        })
    })
}
