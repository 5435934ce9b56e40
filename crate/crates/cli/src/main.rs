use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, Command, ExitCode, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use simrender_core::bench::{run_bench, BenchConfig, BENCH_CSV_HEADER};
use simrender_core::interchange::{
    attach_table, create_table, physics_stub_step, region_path, tick_for_generation, CreateMode, TableReader,
};
use simrender_core::pipeline::{
    run_frame_loop, write_image, FrameLoop, FrameOutput, ImageFormat, PoseSource, PoseUpdate, RenderConfig, TIMING_CSV_HEADER,
};
use simrender_core::scene::{load_gltf, presets, Scene};

#[derive(Parser)]
#[command(name = "simrender", version, about = "Headless renderer for simulation scenes")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Render a scene to numbered image files.
    Render(RenderArgs),
    /// Time the frame stages while doubling the scene's instances.
    Bench(BenchArgs),
    /// Render poses streamed from a physics process over shared memory.
    InterchangeDemo(DemoArgs),
    #[command(hide = true)]
    PhysicsStub(StubArgs),
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum OnOff {
    On,
    Off,
}

impl OnOff {
    fn on(self) -> bool {
        self == OnOff::On
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Ppm,
    Png,
}

impl From<Format> for ImageFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Ppm => ImageFormat::Ppm,
            Format::Png => ImageFormat::Png,
        }
    }
}

fn parse_msaa(s: &str) -> Result<u32, String> {
    match s {
        "1" | "2" | "4" | "8" => Ok(s.parse().unwrap()),
        _ => Err("must be one of 1, 2, 4, 8".into()),
    }
}

#[derive(Args, Clone)]
struct ViewArgs {
    #[arg(long, default_value_t = 256, value_parser = clap::value_parser!(u32).range(1..=16384))]
    width: u32,
    #[arg(long, default_value_t = 256, value_parser = clap::value_parser!(u32).range(1..=16384))]
    height: u32,
    #[arg(long, default_value_t = 4, value_parser = parse_msaa)]
    msaa: u32,
    #[arg(long, value_enum, default_value_t = OnOff::On)]
    fxaa: OnOff,
    #[arg(long, value_enum, default_value_t = OnOff::On)]
    shadows: OnOff,
    /// Camera node name; the first camera when omitted.
    #[arg(long)]
    camera: Option<String>,
    /// Worker threads for the main pass.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=1024))]
    threads: Option<u32>,
}

impl ViewArgs {
    fn config(&self, overlay: OnOff) -> RenderConfig {
        RenderConfig {
            width: self.width,
            height: self.height,
            msaa: self.msaa,
            fxaa: self.fxaa.on(),
            shadows: self.shadows.on(),
            overlay: overlay.on(),
            camera: self.camera.clone(),
            threads: self.threads.map(|t| t as usize),
            ..RenderConfig::default()
        }
    }
}

#[derive(Args)]
struct RenderArgs {
    /// glTF file, or builtin:triangle|shadow|bench|demo.
    #[arg(long)]
    scene: String,
    /// Output prefix; frames are written to PREFIX-frame-NNNN.ppm.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[command(flatten)]
    view: ViewArgs,
    #[arg(long, value_enum, default_value_t = OnOff::Off)]
    overlay: OnOff,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    frames: u64,
    #[arg(long, value_enum, default_value_t = Format::Ppm)]
    format: Format,
    /// Append per-frame stage timings to this CSV file.
    #[arg(long)]
    timings: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    scene: String,
    /// Rows are produced for 0..=K doublings.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..=12))]
    doublings: u32,
    /// Measured frames per row.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(5..))]
    frames: u64,
    #[arg(long, default_value_t = 3)]
    warmup: u64,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    view: ViewArgs,
    #[arg(long, value_enum, default_value_t = OnOff::On)]
    overlay: OnOff,
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long, default_value = "builtin:demo")]
    scene: String,
    /// Shared-memory region name.
    #[arg(long, default_value = "simrender-demo")]
    shm: String,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    frames: u64,
    /// Physics tick rate.
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(1..=10000))]
    tick_hz: u32,
    /// Render frame rate.
    #[arg(long, default_value_t = 5.0)]
    fps: f64,
    #[arg(long, default_value = "demo")]
    out: PathBuf,
    #[arg(long, default_value_t = 128, value_parser = clap::value_parser!(u32).range(1..=16384))]
    width: u32,
    #[arg(long, default_value_t = 128, value_parser = clap::value_parser!(u32).range(1..=16384))]
    height: u32,
    #[arg(long, default_value_t = 4, value_parser = parse_msaa)]
    msaa: u32,
    #[arg(long, hide = true)]
    kill_stub_after_frame: Option<u64>,
}

#[derive(Args)]
struct StubArgs {
    #[arg(long)]
    shm: String,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=10000))]
    tick_hz: u32,
    #[arg(long = "node", required = true)]
    nodes: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Render(a) => cmd_render(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::InterchangeDemo(a) => cmd_interchange_demo(a),
        Cmd::PhysicsStub(a) => cmd_physics_stub(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load_scene(spec: &str) -> Result<Scene> {
    let scene = match spec.strip_prefix("builtin:") {
        Some("triangle") => presets::triangle_scene(),
        Some("shadow") => presets::shadow_test_scene(),
        Some("bench") => presets::bench_scene(),
        Some("demo") => presets::interchange_demo_scene(),
        Some(other) => bail!("unknown builtin scene {other:?}"),
        None => load_gltf(Path::new(spec))?,
    };
    Ok(scene)
}

fn frame_path(prefix: &Path, frame: u64, format: ImageFormat) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(format!("-frame-{frame:04}.{}", format.extension()));
    PathBuf::from(s)
}

fn cmd_render(a: RenderArgs) -> Result<()> {
    let scene = load_scene(&a.scene)?;
    let config = a.view.config(a.overlay);
    let format: ImageFormat = a.format.into();
    let report = run_frame_loop(scene, config, a.frames, None, |out: &FrameOutput| {
        write_image(&out.image, &frame_path(&a.out, out.frame, format), format)
    })?;
    if let Some(path) = a.timings {
        let mut text = format!("{TIMING_CSV_HEADER}\n");
        for t in &report.timings {
            text.push_str(&t.csv_row());
            text.push('\n');
        }
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let scene = load_scene(&a.scene)?;
    let cfg =
        BenchConfig { doublings: a.doublings, frames: a.frames as usize, warmup: a.warmup as usize, render: a.view.config(a.overlay) };
    let mut sink: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(std::io::stdout()),
    };
    writeln!(sink, "{BENCH_CSV_HEADER}")?;
    let mut write_err = None;
    run_bench(&scene, &cfg, |r| {
        if let Err(e) = writeln!(sink, "{}", r.csv_row()).and_then(|_| sink.flush()) {
            write_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = write_err {
        return Err(e.into());
    }
    Ok(())
}

struct Stub {
    child: Child,
    stdin: Option<ChildStdin>,
    alive: bool,
}

impl Stub {
    fn spawn(shm: &str, tick_hz: u32, roster: &[String]) -> Result<Stub> {
        let exe = std::env::current_exe().context("locating own executable")?;
        let mut cmd = Command::new(exe);
        cmd.args(["physics-stub", "--shm", shm, "--tick-hz", &tick_hz.to_string()]);
        for n in roster {
            cmd.args(["--node", n]);
        }
        let mut child =
            cmd.stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::inherit()).spawn().context("spawning physics stub")?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().context("stub stdout")?;
        let mut line = String::new();
        BufReader::new(stdout).read_line(&mut line).context("waiting for physics stub")?;
        if line.trim() != "ready" {
            let status = child.wait().ok();
            bail!("physics stub failed to start (status {status:?})");
        }
        Ok(Stub { child, stdin, alive: true })
    }

    /// Notices an exit that we did not ask for.
    fn check(&mut self) -> bool {
        if self.alive {
            if let Ok(Some(_)) = self.child.try_wait() {
                self.alive = false;
            }
        }
        self.alive
    }

    fn kill(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
        self.alive = false;
    }

    /// Closes the stub's stdin and waits for it to exit.
    fn stop(mut self) -> Result<()> {
        drop(self.stdin.take());
        let deadline = Instant::now() + Duration::from_secs(5);
        loop {
            match self.child.try_wait()? {
                Some(status) if status.success() => return Ok(()),
                Some(status) => bail!("physics stub exited with {status}"),
                None if Instant::now() > deadline => {
                    self.kill();
                    bail!("physics stub did not stop; killed");
                }
                None => std::thread::sleep(Duration::from_millis(5)),
            }
        }
    }
}

/// Waits briefly for a generation newer than `last`, then snapshots.
fn poll_poses(reader: &mut TableReader, last: Option<u64>, tick: Duration) -> PoseUpdate {
    let deadline = Instant::now() + tick * 3;
    while last.is_some_and(|g| reader.generation() <= g) && Instant::now() < deadline {
        std::thread::sleep(Duration::from_micros(500));
    }
    reader.poll()
}

fn cmd_interchange_demo(a: DemoArgs) -> Result<()> {
    let scene = load_scene(&a.scene)?;
    if !(a.fps > 0.0 && a.fps.is_finite()) {
        bail!("--fps must be positive");
    }
    let roster: Vec<String> = scene.mesh_nodes().map(|(_, n, _)| n.name.clone()).collect();
    if roster.is_empty() {
        bail!("scene has no mesh nodes to animate");
    }
    let mut stub = Stub::spawn(&a.shm, a.tick_hz, &roster)?;
    let result = demo_loop(&a, scene, &mut stub);
    let stub_ok = stub.check();
    let stop = if stub_ok { stub.stop() } else { Ok(()) };
    let _ = std::fs::remove_file(region_path(&a.shm));
    let warnings = result?;
    stop?;
    if !stub_ok || warnings > 0 {
        bail!("physics stub stopped during the run; remaining frames used frozen poses ({warnings} pose warnings)");
    }
    Ok(())
}

fn demo_loop(a: &DemoArgs, scene: Scene, stub: &mut Stub) -> Result<usize> {
    let mut reader = attach_table(&a.shm)?;
    let config = RenderConfig { width: a.width, height: a.height, msaa: a.msaa, target_fps: Some(a.fps), ..RenderConfig::default() };
    let period = Duration::from_secs_f64(1.0 / a.fps);
    let tick = Duration::from_secs_f64(1.0 / a.tick_hz as f64);
    let mut lp = FrameLoop::new(scene, config)?;
    let mut last_gen = None;
    let mut stdout = std::io::stdout().lock();
    for frame in 0..a.frames {
        let start = Instant::now();
        let update = if stub.check() {
            poll_poses(&mut reader, last_gen, tick)
        } else {
            PoseUpdate::Unavailable("physics stub is not running".into())
        };
        if let PoseUpdate::Unavailable(msg) = &update {
            eprintln!("warning: frame {frame}: {msg}");
        }
        let out = lp.render_frame(update)?;
        last_gen = out.pose_generation;
        let path = frame_path(&a.out, out.frame, ImageFormat::Ppm);
        write_image(&out.image, &path, ImageFormat::Ppm)?;
        let gen = out.pose_generation.unwrap_or(0);
        let tick_text = tick_for_generation(gen).map_or("-".to_string(), |t| t.to_string());
        writeln!(stdout, "frame {frame} generation {gen} tick {tick_text}")?;
        stdout.flush()?;
        if a.kill_stub_after_frame == Some(frame) {
            stub.kill();
        }
        if let Some(rest) = period.checked_sub(start.elapsed()) {
            std::thread::sleep(rest);
        }
    }
    let warnings = lp.pose_warnings();
    writeln!(stdout, "pose warnings {warnings}")?;
    let report = lp.shutdown();
    debug_assert_eq!(report.registered, report.ran);
    Ok(warnings)
}

fn cmd_physics_stub(a: StubArgs) -> Result<()> {
    let mut writer = create_table(&a.shm, &a.nodes, CreateMode::Exclusive)?;
    let stop = Arc::new(AtomicBool::new(false));
    {
        let stop = stop.clone();
        std::thread::spawn(move || {
            let mut sink = Vec::new();
            let _ = std::io::stdin().read_to_end(&mut sink);
            stop.store(true, Ordering::Release);
        });
    }
    let period = Duration::from_secs_f64(1.0 / a.tick_hz as f64);
    let start = Instant::now();
    let mut t: u64 = 0;
    while !stop.load(Ordering::Acquire) {
        writer.write_frame(&physics_stub_step(t, &a.nodes))?;
        if t == 0 {
            println!("ready");
            std::io::stdout().flush()?;
        }
        t += 1;
        let due = start + period.mul_f64(t as f64);
        if let Some(rest) = due.checked_duration_since(Instant::now()) {
            std::thread::sleep(rest);
        }
    }
    Ok(())
}
