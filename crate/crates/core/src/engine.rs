//! Frame orchestration: voxelization schedule, the screen pass, render modes,
//! image output and frame timing.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use glam::{DMat4, DVec3};
use rayon::prelude::*;
use thiserror::Error;

use crate::conetracer::{
    direct_light, shade_fragment_counted, ConeCounter, ConeSettings, ShadeComponent,
};
use crate::geometry::{
    normal_matrix, perspective_matrix, view_matrix, Camera, GeometryError, Mesh, Transform,
};
use crate::lighting::Material;
use crate::mipvolume::{
    build_mipmaps, export_visualization, MipPyramid, VolumeError, VoxelGrid, ALLOWED_RESOLUTIONS,
};
use crate::raster::{
    project_with, rasterize, ClipTriangle, Framebuffer, Interpolation, Rect, Vertex,
};
use crate::scene::{Scene, SceneError};
use crate::voxelizer::{voxelize_scene, VoxelizeOptions, VoxelizeStats};

/// Rows per parallel shading tile.
pub const TILE_ROWS: u32 = 8;
pub const CLEAR_COLOR: [u8; 3] = [0, 0, 0];
/// Warm-up frames discarded by [`benchmark`].
pub const WARMUP_FRAMES: usize = 3;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Volume(#[from] VolumeError),
    #[error("invalid render job: {0}")]
    Job(String),
    #[error("malformed image: {0}")]
    Image(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderMode {
    Phong,
    Vxct,
    OcclusionOnly,
    IndirectDiffuseOnly,
    IndirectSpecularOnly,
    Voxels { lod: usize },
}

impl RenderMode {
    pub const NAMES: [&'static str; 6] = [
        "phong",
        "vxct",
        "occlusion_only",
        "indirect_diffuse_only",
        "indirect_specular_only",
        "voxels",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            RenderMode::Phong => "phong",
            RenderMode::Vxct => "vxct",
            RenderMode::OcclusionOnly => "occlusion_only",
            RenderMode::IndirectDiffuseOnly => "indirect_diffuse_only",
            RenderMode::IndirectSpecularOnly => "indirect_specular_only",
            RenderMode::Voxels { .. } => "voxels",
        }
    }

    pub fn needs_volume(&self) -> bool {
        !matches!(self, RenderMode::Phong)
    }

    /// Parses a mode name; `lod` only applies to `voxels`.
    pub fn parse(name: &str, lod: usize) -> Option<Self> {
        Some(match name {
            "phong" => RenderMode::Phong,
            "vxct" => RenderMode::Vxct,
            "occlusion_only" => RenderMode::OcclusionOnly,
            "indirect_diffuse_only" => RenderMode::IndirectDiffuseOnly,
            "indirect_specular_only" => RenderMode::IndirectSpecularOnly,
            "voxels" => RenderMode::Voxels { lod },
            _ => return None,
        })
    }
}

impl FromStr for RenderMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RenderMode::parse(s, 0).ok_or_else(|| {
            format!(
                "unknown mode '{s}' (expected one of {})",
                Self::NAMES.join(", ")
            )
        })
    }
}

impl fmt::Display for RenderMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub struct RenderJob {
    pub scene: Arc<Scene>,
    pub camera: Camera,
    pub width: u32,
    pub height: u32,
    pub mode: RenderMode,
    pub grid: usize,
    /// Frames rendered between revoxelizations; `Some(0)` revoxelizes every
    /// frame, `None` voxelizes only when the volume is missing or stale.
    pub vox_freq: Option<u32>,
    pub threads: usize,
    pub gamma: Option<f64>,
    pub settings: ConeSettings,
}

impl RenderJob {
    /// Job with the scene's camera (aspect set from the size) and its
    /// settings overrides on top of the grid defaults.
    pub fn new(
        scene: Arc<Scene>,
        width: u32,
        height: u32,
        mode: RenderMode,
        grid: usize,
    ) -> Result<Self, EngineError> {
        let settings = scene.cone_settings(grid)?;
        let mut camera = scene.camera;
        camera.aspect = width.max(1) as f64 / height.max(1) as f64;
        let job = Self {
            scene,
            camera,
            width,
            height,
            mode,
            grid,
            vox_freq: None,
            threads: 1,
            gamma: None,
            settings,
        };
        job.validate()?;
        Ok(job)
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.width == 0 || self.height == 0 {
            return Err(EngineError::Job(
                "width and height must be at least 1".into(),
            ));
        }
        if !ALLOWED_RESOLUTIONS.contains(&self.grid) {
            return Err(EngineError::Job(format!(
                "grid resolution {} not in {:?}",
                self.grid, ALLOWED_RESOLUTIONS
            )));
        }
        if self.threads == 0 {
            return Err(EngineError::Job("thread count must be at least 1".into()));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(EngineError::Job(format!("gamma must be positive, got {g}")));
            }
        }
        if let RenderMode::Voxels { lod } = self.mode {
            let levels = self.grid.trailing_zeros() as usize;
            if lod > levels {
                return Err(EngineError::Job(format!(
                    "lod {lod} exceeds the pyramid's top level {levels}"
                )));
            }
        }
        self.camera.validate()?;
        self.settings
            .validate()
            .map_err(|e| EngineError::Job(e.to_string()))
    }
}

/// 8-bit RGB image, rows top to bottom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl Image {
    pub fn new(width: u32, height: u32) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for _ in 0..width as usize * height as usize {
            data.extend_from_slice(&CLEAR_COLOR);
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = 3 * (y as usize * self.width as usize + x as usize);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.data.len() + 20);
        write_ppm(self, &mut out).expect("writing to a Vec cannot fail");
        out
    }
}

pub fn quantize(c: f64, gamma: Option<f64>) -> u8 {
    let mut c = c.clamp(0.0, 1.0);
    if let Some(g) = gamma {
        c = c.powf(1.0 / g);
    }
    (c * 255.0).round() as u8
}

pub fn write_ppm<W: Write>(image: &Image, mut sink: W) -> io::Result<()> {
    write!(sink, "P6\n{} {}\n255\n", image.width, image.height)?;
    sink.write_all(&image.data)
}

/// Reads a binary PPM with maxval 255, tolerating `#` comments in the header.
pub fn read_ppm(bytes: &[u8]) -> Result<Image, EngineError> {
    let bad = |m: &str| EngineError::Image(m.to_string());
    let mut pos = 0;
    let mut fields = Vec::new();
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields
            .push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header is not ASCII"))?);
    }
    if fields[0] != "P6" {
        return Err(bad("not a P6 file"));
    }
    let num = |s: &str| s.parse::<u32>().map_err(|_| bad("bad header number"));
    let (width, height, max) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
    if max != 255 {
        return Err(bad("only maxval 255 is supported"));
    }
    let data = bytes
        .get(pos + 1..)
        .ok_or_else(|| bad("missing pixel data"))?;
    if data.len() != width as usize * height as usize * 3 {
        return Err(bad("pixel data length does not match the header"));
    }
    Ok(Image {
        width,
        height,
        data: data.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FrameStats {
    pub voxelized: bool,
    pub voxelize: Option<VoxelizeStats>,
    pub voxelize_seconds: f64,
    pub frame_seconds: f64,
    pub triangles: usize,
    pub near_plane_rejected: usize,
    pub fragments: usize,
    pub cone_marches: usize,
}

#[derive(Debug, Clone, Copy)]
enum Surface {
    Lit(Material),
    Flat(DVec3),
}

struct FrameGeometry {
    triangles: Vec<(ClipTriangle, u32)>,
    surfaces: Vec<Surface>,
    near_rejected: usize,
}

#[derive(Clone, Copy)]
struct GSample {
    pos: DVec3,
    normal: DVec3,
    surface: u32,
}

/// Fingerprint of what the cached volume was built from.
#[derive(Debug, Clone, PartialEq)]
struct VolumeKey {
    scene: usize,
    grid: usize,
    include_ambient: bool,
}

fn volume_key(scene: &Arc<Scene>, grid: usize, settings: &ConeSettings) -> VolumeKey {
    VolumeKey {
        scene: Arc::as_ptr(scene) as usize,
        grid,
        include_ambient: settings.voxelize_ambient,
    }
}

/// Holds the voxel volume across frames and a worker pool per thread count.
pub struct Renderer {
    pyramid: Option<Arc<MipPyramid>>,
    key: Option<VolumeKey>,
    frames_since_voxelize: u32,
    pool: Option<(usize, rayon::ThreadPool)>,
    last: FrameStats,
}

impl Default for Renderer {
    fn default() -> Self {
        Self::new()
    }
}

impl Renderer {
    pub fn new() -> Self {
        Self {
            pyramid: None,
            key: None,
            frames_since_voxelize: 0,
            pool: None,
            last: FrameStats::default(),
        }
    }

    pub fn pyramid(&self) -> Option<&Arc<MipPyramid>> {
        self.pyramid.as_ref()
    }

    pub fn last_stats(&self) -> FrameStats {
        self.last
    }

    /// Whether the cached volume was built from this scene, grid and settings.
    pub fn is_current(&self, scene: &Arc<Scene>, grid: usize, settings: &ConeSettings) -> bool {
        self.pyramid.is_some() && self.key.as_ref() == Some(&volume_key(scene, grid, settings))
    }

    /// Drops the cached volume so the next frame that needs it revoxelizes.
    pub fn invalidate(&mut self) {
        self.pyramid = None;
        self.key = None;
    }

    /// Voxelizes `scene` into a fresh grid and rebuilds the mip chain.
    pub fn voxelize(
        &mut self,
        scene: &Arc<Scene>,
        grid: usize,
        settings: &ConeSettings,
    ) -> Result<(VoxelizeStats, f64), EngineError> {
        let start = Instant::now();
        let mut g = VoxelGrid::new(grid, scene.bounds)?;
        let stats = voxelize_scene(
            scene,
            &mut g,
            VoxelizeOptions {
                include_ambient: settings.voxelize_ambient,
            },
        )?;
        self.pyramid = Some(Arc::new(build_mipmaps(&g)));
        self.key = Some(volume_key(scene, grid, settings));
        self.frames_since_voxelize = 0;
        Ok((stats, start.elapsed().as_secs_f64()))
    }

    fn pool(&mut self, threads: usize) -> Result<&rayon::ThreadPool, EngineError> {
        if self.pool.as_ref().map(|p| p.0) != Some(threads) {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| EngineError::Job(format!("cannot start worker pool: {e}")))?;
            self.pool = Some((threads, pool));
        }
        Ok(&self.pool.as_ref().unwrap().1)
    }

    pub fn render(&mut self, job: &RenderJob) -> Result<Image, EngineError> {
        job.validate()?;
        let start = Instant::now();
        let mut stats = FrameStats::default();

        if job.mode.needs_volume() {
            let stale = !self.is_current(&job.scene, job.grid, &job.settings);
            let due = job
                .vox_freq
                .is_some_and(|k| self.frames_since_voxelize >= k);
            if stale || due {
                let (vs, secs) = self.voxelize(&job.scene, job.grid, &job.settings)?;
                stats.voxelized = true;
                stats.voxelize = Some(vs);
                stats.voxelize_seconds = secs;
            } else {
                self.frames_since_voxelize += 1;
            }
        }

        let geometry = frame_geometry(job, self.pyramid.as_deref())?;
        stats.triangles = geometry.triangles.len();
        stats.near_plane_rejected = geometry.near_rejected;
        if geometry.near_rejected > 0 {
            log::warn!(
                "skipped {} triangles crossing the near plane",
                geometry.near_rejected
            );
        }
        let pyramid = self.pyramid.clone();
        let pool = self.pool(job.threads)?;
        let bands: Vec<u32> = (0..job.height).step_by(TILE_ROWS as usize).collect();
        let tiles: Vec<(Vec<u8>, usize, usize)> = pool.install(|| {
            bands
                .par_iter()
                .map(|&y0| {
                    render_band(
                        job,
                        &geometry,
                        pyramid.as_deref(),
                        y0,
                        (y0 + TILE_ROWS).min(job.height),
                    )
                })
                .collect()
        });
        let mut image = Image {
            width: job.width,
            height: job.height,
            data: Vec::with_capacity(job.width as usize * job.height as usize * 3),
        };
        for (rows, fragments, marches) in tiles {
            image.data.extend_from_slice(&rows);
            stats.fragments += fragments;
            stats.cone_marches += marches;
        }
        stats.frame_seconds = start.elapsed().as_secs_f64();
        self.last = stats;
        Ok(image)
    }
}

/// One-shot render with a fresh renderer.
pub fn render_frame(job: &RenderJob) -> Result<Image, EngineError> {
    Renderer::new().render(job)
}

fn frame_geometry(
    job: &RenderJob,
    pyramid: Option<&MipPyramid>,
) -> Result<FrameGeometry, EngineError> {
    let view_proj = perspective_matrix(&job.camera) * view_matrix(&job.camera);
    let mut out = FrameGeometry {
        triangles: Vec::new(),
        surfaces: Vec::new(),
        near_rejected: 0,
    };
    let push_mesh = |mesh: &Mesh,
                     model: &DMat4,
                     surface: Surface,
                     out: &mut FrameGeometry|
     -> Result<(), EngineError> {
        let nm = normal_matrix(model)?;
        let id = out.surfaces.len() as u32;
        out.surfaces.push(surface);
        for [i0, i1, i2] in mesh.triangles() {
            let tri = [i0, i1, i2].map(|i| Vertex {
                position: mesh.position(i),
                normal: mesh.normal(i),
            });
            let clip = project_with(model, &nm, &view_proj, &tri);
            if clip.crosses_near_plane() {
                out.near_rejected += 1;
            } else {
                out.triangles.push((clip, id));
            }
        }
        Ok(())
    };
    match job.mode {
        RenderMode::Voxels { lod } => {
            let pyramid = pyramid.ok_or_else(|| EngineError::Job("voxel volume missing".into()))?;
            let cube = Mesh::cube();
            for v in export_visualization(pyramid, lod)? {
                let m = Transform::identity()
                    .translate(v.center)
                    .scale(DVec3::splat(v.size * 0.5))
                    .matrix();
                let rgb = DVec3::new(v.rgba[0] as f64, v.rgba[1] as f64, v.rgba[2] as f64);
                push_mesh(&cube, &m, Surface::Flat(rgb), &mut out)?;
            }
        }
        _ => {
            for model in &job.scene.models {
                push_mesh(
                    &model.mesh,
                    &model.transform.matrix(),
                    Surface::Lit(model.material),
                    &mut out,
                )?;
            }
        }
    }
    Ok(out)
}

/// Rasterizes every triangle into the rows `[y0, y1)` and shades the
/// visible samples. Returns RGB rows, fragment count and cone marches.
fn render_band(
    job: &RenderJob,
    geometry: &FrameGeometry,
    pyramid: Option<&MipPyramid>,
    y0: u32,
    y1: u32,
) -> (Vec<u8>, usize, usize) {
    let w = job.width;
    let region = Rect {
        x0: 0,
        y0,
        x1: w,
        y1,
    };
    let mut fb = Framebuffer::with_region(w, job.height, region);
    let mut gbuf: Vec<Option<GSample>> = vec![None; (w * (y1 - y0)) as usize];
    let mut fragments = 0;
    for (tri, surface) in &geometry.triangles {
        fragments += rasterize(tri, &mut fb, Interpolation::Perspective, true, |f, _| {
            let i = ((f.py - y0) * w + f.px) as usize;
            gbuf[i] = Some(GSample {
                pos: f.world_pos,
                normal: f.world_normal,
                surface: *surface,
            });
        });
    }

    let eye = job.camera.position;
    let lights = &job.scene.lights;
    let s = &job.settings;
    let mut counter = ConeCounter::default();
    let mut rows = Vec::with_capacity(gbuf.len() * 3);
    for sample in &gbuf {
        let Some(g) = sample else {
            rows.extend_from_slice(&CLEAR_COLOR);
            continue;
        };
        let c = match geometry.surfaces[g.surface as usize] {
            Surface::Flat(rgb) => rgb,
            Surface::Lit(m) => {
                let component = match job.mode {
                    RenderMode::Phong | RenderMode::Voxels { .. } => None,
                    RenderMode::Vxct => Some(ShadeComponent::Full),
                    RenderMode::OcclusionOnly => Some(ShadeComponent::Occlusion),
                    RenderMode::IndirectDiffuseOnly => Some(ShadeComponent::IndirectDiffuse),
                    RenderMode::IndirectSpecularOnly => Some(ShadeComponent::IndirectSpecular),
                };
                match (component, pyramid) {
                    (Some(component), Some(p)) => shade_fragment_counted(
                        p,
                        g.pos,
                        g.normal,
                        eye,
                        &m,
                        lights,
                        s,
                        component,
                        &mut counter,
                    ),
                    _ => direct_light(g.pos, g.normal, eye, &m, lights, s)
                        .clamp(DVec3::ZERO, DVec3::ONE),
                }
            }
        };
        rows.extend([c.x, c.y, c.z].map(|v| quantize(v, job.gamma)));
    }
    (rows, fragments, counter.marches)
}

/// Mean seconds per call of `frame` over `frames` calls after
/// [`WARMUP_FRAMES`] untimed calls.
pub fn benchmark_with<E, F>(frames: usize, mut frame: F) -> Result<f64, E>
where
    F: FnMut() -> Result<(), E>,
{
    let frames = frames.max(1);
    for _ in 0..WARMUP_FRAMES {
        frame()?;
    }
    let mut total = 0.0;
    for _ in 0..frames {
        let t = Instant::now();
        frame()?;
        total += t.elapsed().as_secs_f64();
    }
    Ok(total / frames as f64)
}

/// Average frame time of `job` with a renderer kept across frames.
pub fn benchmark(job: &RenderJob, frames: usize) -> Result<f64, EngineError> {
    let mut r = Renderer::new();
    benchmark_with(frames, || r.render(job).map(|_| ()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRow {
    pub grid: usize,
    pub without_revoxelization: f64,
    pub with_revoxelization: Option<f64>,
}

/// Frame times per grid size, once voxelizing only at start and, when
/// `revoxelize` is set, once revoxelizing every frame.
pub fn benchmark_grids(
    base: &RenderJob,
    grids: &[usize],
    frames: usize,
    revoxelize: bool,
) -> Result<Vec<BenchRow>, EngineError> {
    let mut rows = Vec::with_capacity(grids.len());
    for &grid in grids {
        let mut job = base.clone();
        job.grid = grid;
        job.settings = base.scene.cone_settings(grid)?;
        job.vox_freq = None;
        let without = benchmark(&job, frames)?;
        let with = if revoxelize {
            job.vox_freq = Some(0);
            Some(benchmark(&job, frames)?)
        } else {
            None
        };
        rows.push(BenchRow {
            grid,
            without_revoxelization: without,
            with_revoxelization: with,
        });
    }
    Ok(rows)
}
