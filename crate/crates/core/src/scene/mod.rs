//! Scene description language and runtime scene assembly.
//!
//! ```text
//! scene := block* EOF ;   block := IDENT "{" entry* "}" ;
//! entry := IDENT ":" value ";" | block ;
//! value := NUMBER | STRING | "(" NUMBER ("," NUMBER)* ")" ;
//! ```
//!
//! Top-level blocks are `model`, `pointlight`, `camera` and `settings`.

mod build;
mod lexer;
mod parser;
mod serialize;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use glam::DVec3;
use thiserror::Error;

use crate::conetracer::{ConeSettings, SettingValue};
use crate::geometry::{load_obj, transform_point, Bounds, Camera, GeometryError, Mesh, Transform};
use crate::lighting::{Material, PointLight};

pub use build::{build, build_with_warnings, BuildOptions};
pub use lexer::{detokenize, lex, Token, TokenKind};
pub use parser::{parse, NodeBody, SyntaxNode, Value};
pub use serialize::serialize;

/// Lexing or parsing failure at a 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for SyntaxError {}

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("syntax error at {0}")]
    Syntax(#[from] SyntaxError),
    #[error("scene error at {line}:{column}: {message}")]
    Build {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("cannot read '{}': {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("mesh '{}': {source}", path.display())]
    Mesh {
        path: PathBuf,
        source: GeometryError,
    },
    #[error("invalid scene: {0}")]
    Invalid(String),
}

impl SceneError {
    /// Source position of syntax and build errors.
    pub fn location(&self) -> Option<(usize, usize)> {
        match self {
            SceneError::Syntax(e) => Some((e.line, e.column)),
            SceneError::Build { line, column, .. } => Some((*line, *column)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Plane,
    Cube,
    Quad,
}

impl Shape {
    pub fn name(self) -> &'static str {
        match self {
            Shape::Plane => "plane",
            Shape::Cube => "cube",
            Shape::Quad => "quad",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "plane" => Some(Shape::Plane),
            "cube" => Some(Shape::Cube),
            "quad" => Some(Shape::Quad),
            _ => None,
        }
    }

    pub fn mesh(self) -> Mesh {
        match self {
            Shape::Plane => Mesh::plane(),
            Shape::Cube => Mesh::cube(),
            Shape::Quad => Mesh::quad(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    Shape(Shape),
    /// OBJ path as written, relative to the scene file's directory.
    File(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelDesc {
    pub name: String,
    pub source: MeshSource,
    pub position: DVec3,
    pub scale: DVec3,
    /// Euler angles in radians, applied X then Y then Z.
    pub rotation: DVec3,
    pub is_static: bool,
    pub material: Material,
}

impl ModelDesc {
    pub fn new(name: impl Into<String>, source: MeshSource) -> Self {
        Self {
            name: name.into(),
            source,
            position: DVec3::ZERO,
            scale: DVec3::ONE,
            rotation: DVec3::ZERO,
            is_static: false,
            material: Material::default(),
        }
    }

    pub fn transform(&self) -> Transform {
        Transform::from_psr(self.position, self.rotation, self.scale)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SceneDescription {
    pub models: Vec<ModelDesc>,
    pub lights: Vec<PointLight>,
    pub camera: Option<Camera>,
    /// Overrides keyed by cone settings field name, flags stored as 0/1.
    pub settings: BTreeMap<String, f64>,
    /// Explicit voxel volume extent; fitted to the geometry when absent.
    pub bounds: Option<Bounds>,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub name: String,
    pub mesh: Arc<Mesh>,
    pub transform: Transform,
    pub material: Material,
    pub is_static: bool,
}

/// A fully loaded scene ready for voxelization and rendering.
#[derive(Debug, Clone)]
pub struct Scene {
    pub models: Vec<Model>,
    pub lights: Vec<PointLight>,
    pub camera: Camera,
    pub bounds: Bounds,
    pub settings: BTreeMap<String, f64>,
}

impl Scene {
    /// Relative margin added when fitting bounds to the geometry.
    pub const FIT_MARGIN: f64 = 0.05;

    /// Bounds are fitted to the models unless given.
    pub fn new(
        models: Vec<Model>,
        lights: Vec<PointLight>,
        camera: Camera,
        bounds: Option<Bounds>,
    ) -> Self {
        let bounds = bounds.unwrap_or_else(|| fit_bounds(&models));
        Self {
            models,
            lights,
            camera,
            bounds,
            settings: BTreeMap::new(),
        }
    }

    pub fn from_description(desc: &SceneDescription, base_dir: &Path) -> Result<Self, SceneError> {
        let mut cache: HashMap<PathBuf, Arc<Mesh>> = HashMap::new();
        let mut shapes: HashMap<&'static str, Arc<Mesh>> = HashMap::new();
        let mut models = Vec::with_capacity(desc.models.len());
        for m in &desc.models {
            let mesh = match &m.source {
                MeshSource::Shape(s) => shapes
                    .entry(s.name())
                    .or_insert_with(|| Arc::new(s.mesh()))
                    .clone(),
                MeshSource::File(f) => {
                    let path = base_dir.join(f);
                    if let Some(mesh) = cache.get(&path) {
                        mesh.clone()
                    } else {
                        let text =
                            std::fs::read_to_string(&path).map_err(|source| SceneError::Io {
                                path: path.clone(),
                                source,
                            })?;
                        let mesh =
                            Arc::new(load_obj(&text).map_err(|source| SceneError::Mesh {
                                path: path.clone(),
                                source,
                            })?);
                        cache.insert(path, mesh.clone());
                        mesh
                    }
                }
            };
            models.push(Model {
                name: m.name.clone(),
                mesh,
                transform: m.transform(),
                material: m.material,
                is_static: m.is_static,
            });
        }
        let mut scene = Scene::new(
            models,
            desc.lights.clone(),
            desc.camera.unwrap_or_default(),
            desc.bounds,
        );
        scene.settings = desc.settings.clone();
        Ok(scene)
    }

    /// Lexes, parses, builds and loads scene text. Relative mesh paths
    /// resolve against `options.base_dir`.
    pub fn parse(text: &str, options: &BuildOptions) -> Result<Self, SceneError> {
        let desc = build(&parse(&lex(text)?)?, options)?;
        Self::from_description(&desc, &options.base_dir)
    }

    pub fn load(path: &Path) -> Result<Self, SceneError> {
        let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(
            &text,
            &BuildOptions {
                base_dir,
                lenient: false,
            },
        )
    }

    /// Default cone settings for `resolution` with this scene's overrides.
    pub fn cone_settings(&self, resolution: usize) -> Result<ConeSettings, SceneError> {
        let mut s = ConeSettings::for_grid(&self.bounds, resolution);
        for (k, v) in &self.settings {
            s.set(k, SettingValue::Real(*v))
                .map_err(|e| SceneError::Invalid(e.to_string()))?;
        }
        s.validate()
            .map_err(|e| SceneError::Invalid(e.to_string()))?;
        Ok(s)
    }

    pub fn triangle_count(&self) -> usize {
        self.models.iter().map(|m| m.mesh.triangle_count()).sum()
    }
}

fn fit_bounds(models: &[Model]) -> Bounds {
    let mut lo = DVec3::splat(f64::INFINITY);
    let mut hi = DVec3::splat(f64::NEG_INFINITY);
    for m in models {
        let mat = m.transform.matrix();
        for i in 0..m.mesh.vertex_count() {
            let p = transform_point(&mat, m.mesh.position(i));
            lo = lo.min(p);
            hi = hi.max(p);
        }
    }
    if lo.cmple(hi).all() {
        Bounds::enclosing(lo, hi, Scene::FIT_MARGIN)
    } else {
        Bounds {
            center: DVec3::ZERO,
            half_extent: 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(dir: &Path) -> BuildOptions {
        BuildOptions {
            base_dir: dir.to_path_buf(),
            lenient: false,
        }
    }

    #[test]
    fn loads_shapes_and_files() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("tri.obj"),
            "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n",
        )
        .unwrap();
        let text = "model { file: \"tri.obj\"; position: (0, 0, 1); }\n\
                    model { file: \"tri.obj\"; }\n\
                    model { shape: \"cube\"; scale: 0.5; }\n\
                    pointlight { position: (0, 2, 0); }";
        let scene = Scene::parse(text, &opts(dir.path())).unwrap();
        assert_eq!(scene.models.len(), 3);
        assert!(Arc::ptr_eq(&scene.models[0].mesh, &scene.models[1].mesh));
        assert_eq!(scene.triangle_count(), 14);
        assert!(scene.bounds.contains(DVec3::new(1.0, 1.0, 1.0), 0.0));
        assert!(scene.bounds.contains(DVec3::splat(-0.5), 0.0));
    }

    #[test]
    fn missing_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let e = Scene::parse("model { file: \"nope.obj\"; }", &opts(dir.path())).unwrap_err();
        assert_eq!(e.location(), Some((1, 9)));
    }

    #[test]
    fn settings_overrides_apply() {
        let dir = tempfile::tempdir().unwrap();
        let scene = Scene::parse(
            "settings { shadow_str: 0.5; side_cones: 1; } model { shape: \"plane\"; }",
            &opts(dir.path()),
        )
        .unwrap();
        let s = scene.cone_settings(32).unwrap();
        assert_eq!(s.shadow_str, 0.5);
        assert!(s.side_cones);
        assert_eq!(s.cone_count(), 9);
    }

    #[test]
    fn empty_scene_gets_unit_bounds() {
        let scene = Scene::new(vec![], vec![], Camera::default(), None);
        assert_eq!(scene.bounds.half_extent, 1.0);
    }
}
