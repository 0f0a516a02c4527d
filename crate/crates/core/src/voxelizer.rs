//! Injects directly lit scene surfaces into a voxel grid by rasterizing each
//! triangle orthographically along its dominant axis.

use glam::{DVec3, DVec4};

use crate::geometry::{normal_matrix, orthographic_matrix, transform_point, GeometryError};
use crate::lighting::phong_direct;
use crate::mipvolume::VoxelGrid;
use crate::raster::{rasterize, ClipTriangle, ClipVertex, Framebuffer, Interpolation};
use crate::scene::Scene;

/// Tolerance, in texels, for fragments that land just outside the volume.
const TEXEL_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Axis of the largest `|n|` component of the face normal; ties go to the
/// later axis. Collinear vertices yield `(Z, true)`.
pub fn dominant_axis(v1: DVec3, v2: DVec3, v3: DVec3) -> (Axis, bool) {
    let n = (v2 - v1).cross(v3 - v1).abs();
    if n == DVec3::ZERO {
        return (Axis::Z, true);
    }
    let mut axis = Axis::X;
    let mut best = n.x;
    if n.y >= best {
        axis = Axis::Y;
        best = n.y;
    }
    if n.z >= best {
        axis = Axis::Z;
    }
    (axis, false)
}

/// Moves the dominant axis into the depth slot. Each mapping is its own inverse.
pub fn swizzle_for_axis(axis: Axis, p: DVec3) -> DVec3 {
    match axis {
        Axis::X => DVec3::new(p.z, p.y, p.x),
        Axis::Y => DVec3::new(p.x, p.z, p.y),
        Axis::Z => p,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VoxelizeStats {
    pub triangles: usize,
    pub degenerate_triangles: usize,
    pub fragments: usize,
    pub voxels_written: usize,
    /// Triangles with a vertex outside the grid bounds.
    pub out_of_bounds_triangles: usize,
    /// Fragments rejected because they fell outside the grid.
    pub discarded_fragments: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VoxelizeOptions {
    pub include_ambient: bool,
}

impl Default for VoxelizeOptions {
    fn default() -> Self {
        Self {
            include_ambient: true,
        }
    }
}

/// Clears `grid` and fills it with the scene's direct diffuse (and optionally
/// ambient) light, alpha 1 on every touched voxel. Later triangles overwrite
/// earlier ones.
pub fn voxelize_scene(
    scene: &Scene,
    grid: &mut VoxelGrid,
    options: VoxelizeOptions,
) -> Result<VoxelizeStats, GeometryError> {
    grid.clear();
    let n = grid.resolution() as u32;
    let bounds = *grid.bounds();
    let ortho = orthographic_matrix(&bounds);
    let mut fb = Framebuffer::new(n, n);
    let mut stats = VoxelizeStats::default();
    let mut written = vec![false; grid.data().len()];

    for model in &scene.models {
        let m = model.transform.matrix();
        let nm = normal_matrix(&m)?;
        let mesh = &*model.mesh;
        for [i0, i1, i2] in mesh.triangles() {
            stats.triangles += 1;
            let world = [i0, i1, i2].map(|i| transform_point(&m, mesh.position(i)));
            let normals = [i0, i1, i2].map(|i| (nm * mesh.normal(i)).normalize());
            let (axis, degenerate) = dominant_axis(world[0], world[1], world[2]);
            if degenerate {
                stats.degenerate_triangles += 1;
                continue;
            }
            if world
                .iter()
                .any(|p| !bounds.contains(*p, bounds.size() * 1e-9))
            {
                stats.out_of_bounds_triangles += 1;
            }
            let clip = ClipTriangle {
                vertices: [0, 1, 2].map(|k| {
                    let ndc = transform_point(&ortho, world[k]);
                    ClipVertex {
                        clip: DVec4::from((swizzle_for_axis(axis, ndc), 1.0)),
                        world: world[k],
                        normal: normals[k],
                    }
                }),
            };
            stats.fragments += rasterize(
                &clip,
                &mut fb,
                Interpolation::Orthographic,
                false,
                |frag, _| {
                    let Some([x, y, z]) =
                        grid.voxel_of_texel(grid.world_to_texel(frag.world_pos), TEXEL_SLACK)
                    else {
                        stats.discarded_fragments += 1;
                        return;
                    };
                    let mut c = DVec3::ZERO;
                    for light in &scene.lights {
                        c += phong_direct(
                            frag.world_pos,
                            frag.world_normal,
                            frag.world_pos,
                            &model.material,
                            light,
                            options.include_ambient,
                            false,
                        );
                    }
                    let c = c.clamp(DVec3::ZERO, DVec3::ONE);
                    let idx = grid.index(x, y, z);
                    written[idx] = true;
                    grid.data_mut()[idx] = [c.x as f32, c.y as f32, c.z as f32, 1.0];
                },
            );
        }
    }
    stats.voxels_written = written.iter().filter(|w| **w).count();
    if stats.out_of_bounds_triangles > 0 || stats.discarded_fragments > 0 {
        log::warn!(
            "voxelization: {} triangles reach outside the grid bounds, {} fragments discarded",
            stats.out_of_bounds_triangles,
            stats.discarded_fragments
        );
    }
    Ok(stats)
}
