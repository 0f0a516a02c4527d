//! Fixtures shared by the benchmarks.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use vxct_core::mipvolume::{build_mipmaps, MipPyramid, VoxelGrid};
use vxct_core::voxelizer::{voxelize_scene, VoxelizeOptions};
use vxct_core::Scene;

pub fn scene_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenes")
        .join(name)
}

pub fn load_scene(name: &str) -> Arc<Scene> {
    Arc::new(Scene::load(&scene_path(name)).expect("bundled scene loads"))
}

pub fn voxelized(scene: &Scene, resolution: usize) -> (VoxelGrid, MipPyramid) {
    let mut grid = VoxelGrid::new(resolution, scene.bounds).expect("allowed resolution");
    voxelize_scene(scene, &mut grid, VoxelizeOptions::default()).expect("scene voxelizes");
    let pyramid = build_mipmaps(&grid);
    (grid, pyramid)
}
