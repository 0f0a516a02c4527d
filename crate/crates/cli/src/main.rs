use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use vxct_core::engine::{benchmark, write_ppm, EngineError, RenderJob, RenderMode, Renderer};
use vxct_core::mipvolume::VoxelGrid;
use vxct_core::voxelizer::{voxelize_scene, VoxelizeOptions};
use vxct_core::{Scene, SceneError};
use vxct_service::{Session, SessionConfig};

/// Voxel cone traced global illumination, rendered on the CPU.
#[derive(Debug, Parser)]
#[command(name = "vxct", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render one frame to a PPM file.
    Render(RenderArgs),
    /// Average frame time per grid resolution.
    Bench(BenchArgs),
    /// Voxelize a scene and dump the level-0 grid.
    Voxelize(VoxelizeArgs),
    /// Serve the HTTP control interface.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 256)]
    width: u32,
    #[arg(long, default_value_t = 256)]
    height: u32,
    #[arg(long, default_value_t = 64)]
    grid: usize,
    /// One of phong, vxct, occlusion_only, indirect_diffuse_only,
    /// indirect_specular_only, voxels.
    #[arg(long, default_value = "vxct")]
    mode: String,
    /// Pyramid level drawn by the voxels mode.
    #[arg(long, default_value_t = 0)]
    lod: usize,
    /// Revoxelize after this many frames; 0 revoxelizes every frame.
    #[arg(long)]
    vox_freq: Option<u32>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Encode output with 1/gamma; linear when absent.
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long, default_value_t = 100)]
    frames: usize,
    /// Comma-separated grid resolutions.
    #[arg(long, value_delimiter = ',', default_value = "64")]
    grid: Vec<usize>,
    /// Revoxelize on every frame.
    #[arg(long)]
    revoxelize: bool,
    #[arg(long, default_value_t = 256)]
    width: u32,
    #[arg(long, default_value_t = 256)]
    height: u32,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Debug, Args)]
struct VoxelizeArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long, default_value_t = 64)]
    grid: usize,
    #[arg(long)]
    dump: PathBuf,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    #[arg(long, default_value_t = 32)]
    grid: usize,
    #[arg(long)]
    vox_freq: Option<u32>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

/// Scene problems exit with status 2, everything else with 1.
enum Failure {
    Scene(SceneError),
    Other(anyhow::Error),
}

impl From<SceneError> for Failure {
    fn from(e: SceneError) -> Self {
        Failure::Scene(e)
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Scene(s) => Failure::Scene(s),
            other => Failure::Other(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

fn load_scene(path: &Path) -> Result<Arc<Scene>, Failure> {
    Ok(Arc::new(Scene::load(path)?))
}

fn render(args: RenderArgs) -> Result<(), Failure> {
    let mode = RenderMode::parse(&args.mode, args.lod).ok_or_else(|| {
        anyhow::anyhow!(
            "unknown mode '{}', expected one of {:?}",
            args.mode,
            RenderMode::NAMES
        )
    })?;
    let scene = load_scene(&args.scene)?;
    let mut job = RenderJob::new(scene, args.width, args.height, mode, args.grid)?;
    job.vox_freq = args.vox_freq;
    job.threads = args.threads;
    job.gamma = args.gamma;
    job.validate()?;
    let mut renderer = Renderer::new();
    let image = renderer.render(&job)?;
    let stats = renderer.last_stats();
    let file =
        File::create(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    let mut out = BufWriter::new(file);
    write_ppm(&image, &mut out)
        .and_then(|_| out.flush())
        .with_context(|| format!("cannot write {}", args.out.display()))?;
    log::info!(
        "{}x{} {} frame in {:.3} s ({:.3} s voxelizing, {} fragments, {} cone marches)",
        args.width,
        args.height,
        mode,
        stats.frame_seconds,
        stats.voxelize_seconds,
        stats.fragments,
        stats.cone_marches
    );
    Ok(())
}

fn bench(args: BenchArgs) -> Result<(), Failure> {
    if args.frames == 0 {
        return Err(anyhow::anyhow!("--frames must be at least 1").into());
    }
    let scene = load_scene(&args.scene)?;
    let column = if args.revoxelize {
        "with revoxelization (s)"
    } else {
        "without revoxelization (s)"
    };
    println!("{:>6}  {column}", "grid");
    for &grid in &args.grid {
        let mut job = RenderJob::new(
            scene.clone(),
            args.width,
            args.height,
            RenderMode::Vxct,
            grid,
        )?;
        job.threads = args.threads;
        job.vox_freq = args.revoxelize.then_some(0);
        let mean = benchmark(&job, args.frames)?;
        println!("{:>6}  {mean:.5}", format!("{grid}^3"));
    }
    Ok(())
}

fn voxelize(args: VoxelizeArgs) -> Result<(), Failure> {
    let scene = load_scene(&args.scene)?;
    let settings = scene.cone_settings(args.grid)?;
    let mut grid = VoxelGrid::new(args.grid, scene.bounds).map_err(EngineError::from)?;
    let stats = voxelize_scene(
        &scene,
        &mut grid,
        VoxelizeOptions {
            include_ambient: settings.voxelize_ambient,
        },
    )
    .map_err(EngineError::from)?;
    let file = File::create(&args.dump)
        .with_context(|| format!("cannot create {}", args.dump.display()))?;
    let mut out = BufWriter::new(file);
    grid.dump(&mut out)
        .and_then(|_| out.flush())
        .with_context(|| format!("cannot write {}", args.dump.display()))?;
    println!(
        "{} triangles, {} fragments, {} voxels written",
        stats.triangles, stats.fragments, stats.voxels_written
    );
    Ok(())
}

fn serve(args: ServeArgs) -> Result<(), Failure> {
    let scene = Scene::load(&args.scene)?;
    scene.cone_settings(args.grid)?;
    let config = SessionConfig {
        grid: args.grid,
        vox_freq: args.vox_freq,
        threads: args.threads,
        base_dir: args
            .scene
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default(),
    };
    let session = Session::new(scene, config).map_err(|e| anyhow::anyhow!("{e}"))?;
    let runtime = tokio::runtime::Runtime::new().context("cannot start async runtime")?;
    runtime.block_on(async {
        let listener = vxct_service::bind(args.addr)
            .await
            .with_context(|| format!("cannot bind {}", args.addr))?;
        vxct_service::serve(listener, session)
            .await
            .context("server failed")
    })?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Render(a) => render(a),
        Command::Bench(a) => bench(a),
        Command::Voxelize(a) => voxelize(a),
        Command::Serve(a) => serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Scene(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
