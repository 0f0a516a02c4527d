//! CPU voxel cone traced global illumination.
//!
//! The pipeline voxelizes directly lit triangles into a dense RGBA grid,
//! builds a box-filtered mip chain over it and shades each rasterized
//! fragment by marching cones through that chain.

pub mod conetracer;
pub mod engine;
pub mod geometry;
pub mod lighting;
pub mod mipvolume;
pub mod raster;
pub mod scene;
pub mod voxelizer;

pub use conetracer::{shade_fragment, ConeSettings, SettingValue, SettingsError};
pub use engine::{render_frame, EngineError, Image, RenderJob, RenderMode, Renderer};
pub use geometry::{Bounds, Camera, GeometryError, Mesh, Transform};
pub use lighting::{Material, PointLight};
pub use mipvolume::{build_mipmaps, MipPyramid, VoxelGrid};
pub use scene::{BuildOptions, Scene, SceneDescription, SceneError};
pub use voxelizer::{voxelize_scene, VoxelizeOptions};
