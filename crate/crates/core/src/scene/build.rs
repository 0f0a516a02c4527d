use std::collections::BTreeSet;
use std::path::PathBuf;

use glam::DVec3;

use super::parser::{SyntaxNode, Value};
use super::{MeshSource, ModelDesc, SceneDescription, SceneError, Shape};
use crate::conetracer::{ConeSettings, SettingValue};
use crate::geometry::{Bounds, Camera};
use crate::lighting::{Material, PointLight};

#[derive(Debug, Clone, Default)]
pub struct BuildOptions {
    /// Directory that relative mesh paths resolve against.
    pub base_dir: PathBuf,
    /// Report unknown blocks and keys as warnings instead of errors.
    pub lenient: bool,
}

pub fn build(tree: &SyntaxNode, options: &BuildOptions) -> Result<SceneDescription, SceneError> {
    let (desc, warnings) = build_with_warnings(tree, options)?;
    for w in warnings {
        log::warn!("{w}");
    }
    Ok(desc)
}

/// Like [`build`], returning lenient-mode warnings instead of logging them.
pub fn build_with_warnings(
    tree: &SyntaxNode,
    options: &BuildOptions,
) -> Result<(SceneDescription, Vec<String>), SceneError> {
    let mut b = Builder {
        options,
        warnings: Vec::new(),
    };
    let mut desc = SceneDescription::default();
    for block in tree.children() {
        match block.name.as_str() {
            "model" => {
                let m = b.model(block, desc.models.len())?;
                desc.models.push(m);
            }
            "pointlight" => desc.lights.push(b.light(block)?),
            "camera" => {
                if desc.camera.is_some() {
                    return Err(located(block, "duplicate camera block"));
                }
                desc.camera = Some(b.camera(block)?);
            }
            "settings" => b.settings(block, &mut desc)?,
            other => b.unknown(block, &format!("unknown block '{other}'"))?,
        }
    }
    Ok((desc, b.warnings))
}

fn located(node: &SyntaxNode, message: impl Into<String>) -> SceneError {
    SceneError::Build {
        line: node.line,
        column: node.column,
        message: message.into(),
    }
}

struct Builder<'a> {
    options: &'a BuildOptions,
    warnings: Vec<String>,
}

impl Builder<'_> {
    fn unknown(&mut self, node: &SyntaxNode, message: &str) -> Result<(), SceneError> {
        if self.options.lenient {
            self.warnings
                .push(format!("{}:{}: {message}", node.line, node.column));
            Ok(())
        } else {
            Err(located(node, message))
        }
    }

    /// Iterates a block's children, rejecting duplicates and misplaced kinds.
    fn entries<'n>(&self, block: &'n SyntaxNode) -> Result<Vec<&'n SyntaxNode>, SceneError> {
        if block.value().is_some() {
            return Err(located(block, format!("'{}' must be a block", block.name)));
        }
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for c in block.children() {
            if !seen.insert(c.name.as_str()) {
                return Err(located(c, format!("duplicate key '{}'", c.name)));
            }
            out.push(c);
        }
        Ok(out)
    }

    fn model(&mut self, block: &SyntaxNode, index: usize) -> Result<ModelDesc, SceneError> {
        let mut source = None;
        let mut m = ModelDesc::new(format!("model_{index}"), MeshSource::Shape(Shape::Cube));
        for e in self.entries(block)? {
            match e.name.as_str() {
                "file" | "shape" if source.is_some() => {
                    return Err(located(e, "model has both 'file' and 'shape'"));
                }
                "file" => {
                    let f = string(e)?;
                    let path = self.options.base_dir.join(&f);
                    if !path.is_file() {
                        return Err(located(
                            e,
                            format!("mesh file '{}' not found", path.display()),
                        ));
                    }
                    source = Some(MeshSource::File(f));
                }
                "shape" => {
                    let s = string(e)?;
                    let shape = Shape::from_name(&s).ok_or_else(|| {
                        located(e, format!("unknown shape '{s}' (plane, cube or quad)"))
                    })?;
                    source = Some(MeshSource::Shape(shape));
                }
                "name" => m.name = string(e)?,
                "position" => m.position = vec3(e)?,
                "rotation" => m.rotation = vec3(e)?,
                "scale" => {
                    m.scale = match e.value() {
                        Some(Value::Number(s)) => DVec3::splat(*s),
                        _ => vec3(e)?,
                    };
                    if m.scale.cmpeq(DVec3::ZERO).any() {
                        return Err(located(e, "scale components must be non-zero"));
                    }
                }
                "static" => m.is_static = flag(e)?,
                "material" => m.material = self.material(e)?,
                other => self.unknown(e, &format!("unknown model key '{other}'"))?,
            }
        }
        m.source = source.ok_or_else(|| located(block, "model needs a 'file' or 'shape'"))?;
        Ok(m)
    }

    fn material(&mut self, block: &SyntaxNode) -> Result<Material, SceneError> {
        let mut m = Material::default();
        for e in self.entries(block)? {
            match e.name.as_str() {
                "color" => m.color = vec3(e)?,
                "ambient" => m.ambient_str = number(e)?,
                "diffuse" => m.diffuse_str = number(e)?,
                "specular" => m.specular_str = number(e)?,
                "shininess" => m.shininess = number(e)?,
                other => self.unknown(e, &format!("unknown material key '{other}'"))?,
            }
        }
        m.validate()
            .map_err(|err| located(block, err.to_string()))?;
        if !m.shininess_in_range() {
            self.warnings.push(format!(
                "{}:{}: shininess {} outside [0, {}]",
                block.line,
                block.column,
                m.shininess,
                Material::MAX_SHININESS
            ));
        }
        Ok(m)
    }

    fn light(&mut self, block: &SyntaxNode) -> Result<PointLight, SceneError> {
        let mut position = None;
        let mut light = PointLight::new(DVec3::ZERO);
        for e in self.entries(block)? {
            match e.name.as_str() {
                "position" => position = Some(vec3(e)?),
                "color" => light.color = vec3(e)?,
                "attenuation" => {
                    let k = vec3(e)?;
                    (light.att_constant, light.att_linear, light.att_quadratic) = (k.x, k.y, k.z);
                }
                other => self.unknown(e, &format!("unknown pointlight key '{other}'"))?,
            }
        }
        light.position = position.ok_or_else(|| located(block, "pointlight needs a 'position'"))?;
        light
            .validate()
            .map_err(|err| located(block, err.to_string()))?;
        Ok(light)
    }

    fn camera(&mut self, block: &SyntaxNode) -> Result<Camera, SceneError> {
        let mut c = Camera::default();
        for e in self.entries(block)? {
            match e.name.as_str() {
                "position" => c.position = vec3(e)?,
                "yaw" => c.yaw = number(e)?,
                "pitch" => c.pitch = number(e)?,
                "fov" => c.fov_y = number(e)?,
                "near" => c.near = number(e)?,
                "far" => c.far = number(e)?,
                other => self.unknown(e, &format!("unknown camera key '{other}'"))?,
            }
        }
        c.validate()
            .map_err(|err| located(block, err.to_string()))?;
        Ok(c)
    }

    fn settings(
        &mut self,
        block: &SyntaxNode,
        desc: &mut SceneDescription,
    ) -> Result<(), SceneError> {
        let mut probe =
            ConeSettings::for_grid(&Bounds::new(DVec3::ZERO, 1.0).expect("unit bounds"), 16);
        let mut center = None;
        let mut half = None;
        for e in self.entries(block)? {
            match e.name.as_str() {
                "bounds_center" => center = Some((e, vec3(e)?)),
                "bounds_half_extent" => half = Some((e, number(e)?)),
                key if probe.get(key).is_some() => {
                    let v = number(e)?;
                    probe
                        .set(key, SettingValue::Real(v))
                        .map_err(|err| located(e, err.to_string()))?;
                    if desc.settings.insert(key.to_string(), v).is_some() {
                        return Err(located(e, format!("duplicate setting '{key}'")));
                    }
                }
                other => self.unknown(e, &format!("unknown setting '{other}'"))?,
            }
        }
        match (center, half) {
            (None, None) => {}
            (Some((_, c)), Some((e, h))) => {
                if desc.bounds.is_some() {
                    return Err(located(e, "bounds given twice"));
                }
                desc.bounds = Some(Bounds::new(c, h).map_err(|err| located(e, err.to_string()))?);
            }
            (Some((e, _)), None) | (None, Some((e, _))) => {
                return Err(located(
                    e,
                    "bounds_center and bounds_half_extent must be given together",
                ));
            }
        }
        Ok(())
    }
}

fn number(e: &SyntaxNode) -> Result<f64, SceneError> {
    match e.value() {
        Some(Value::Number(v)) => Ok(*v),
        _ => Err(located(e, format!("'{}' expects a number", e.name))),
    }
}

fn string(e: &SyntaxNode) -> Result<String, SceneError> {
    match e.value() {
        Some(Value::Str(s)) => Ok(s.clone()),
        _ => Err(located(e, format!("'{}' expects a string", e.name))),
    }
}

fn vec3(e: &SyntaxNode) -> Result<DVec3, SceneError> {
    match e.value() {
        Some(Value::Tuple(v)) if v.len() == 3 => Ok(DVec3::new(v[0], v[1], v[2])),
        Some(Value::Tuple(v)) => Err(located(
            e,
            format!("'{}' needs 3 components, got {}", e.name, v.len()),
        )),
        _ => Err(located(e, format!("'{}' expects a 3-tuple", e.name))),
    }
}

fn flag(e: &SyntaxNode) -> Result<bool, SceneError> {
    let v = number(e)?;
    if v == 0.0 {
        Ok(false)
    } else if v == 1.0 {
        Ok(true)
    } else {
        Err(located(e, format!("'{}' expects 0 or 1, got {v}", e.name)))
    }
}

#[cfg(test)]
mod tests {
    use super::super::{lex, parse};
    use super::*;

    fn desc(text: &str) -> Result<SceneDescription, SceneError> {
        build(&parse(&lex(text)?)?, &BuildOptions::default())
    }

    #[test]
    fn minimal_light_gets_defaults() {
        let d = desc("pointlight { position: (0,4,0); }").unwrap();
        assert_eq!(d.lights.len(), 1);
        let l = d.lights[0];
        assert_eq!(l.color, DVec3::ONE);
        assert_eq!(
            [l.att_constant, l.att_linear, l.att_quadratic],
            PointLight::DEFAULT_ATTENUATION
        );
        assert!(d.models.is_empty() && d.camera.is_none());
    }

    #[test]
    fn model_defaults() {
        let d = desc(
            "model { shape: \"plane\"; } model { shape: \"quad\"; name: \"q\"; scale: (1, 2, 3); }",
        )
        .unwrap();
        assert_eq!(d.models[0].name, "model_0");
        assert_eq!(d.models[0].material, Material::default());
        assert_eq!(d.models[1].name, "q");
        assert_eq!(d.models[1].scale, DVec3::new(1.0, 2.0, 3.0));
        let m = Material::default();
        assert_eq!(
            (
                m.color,
                m.ambient_str,
                m.diffuse_str,
                m.specular_str,
                m.shininess
            ),
            (DVec3::splat(0.8), 0.1, 0.7, 0.2, 32.0)
        );
        let c = desc("camera { position: (0, 1, 2); }")
            .unwrap()
            .camera
            .unwrap();
        assert_eq!(c.fov_y, 1.0);
    }

    #[test]
    fn arity_error() {
        let e = desc("pointlight {\n  position: (1,2);\n}").unwrap_err();
        assert_eq!(e.location(), Some((2, 3)));
        assert!(e.to_string().contains("3 components"));
    }

    #[test]
    fn unknown_keys_strict_and_lenient() {
        let text = "model { shape: \"cube\"; colour: (1,0,0); } fog { density: 1; }";
        let e = desc(text).unwrap_err();
        assert!(e.to_string().contains("colour"));
        let tree = parse(&lex(text).unwrap()).unwrap();
        let (d, w) = build_with_warnings(
            &tree,
            &BuildOptions {
                lenient: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(d.models.len(), 1);
        assert_eq!(w.len(), 2);
    }

    #[test]
    fn settings_validated_by_name() {
        let d = desc("settings { shadow_str: 2; side_cones: 1; bounds_center: (0,0,0); bounds_half_extent: 3; }").unwrap();
        assert_eq!(d.settings.get("shadow_str"), Some(&2.0));
        assert_eq!(d.bounds.unwrap().half_extent, 3.0);
        assert!(desc("settings { side_cones: 2; }").is_err());
        assert!(desc("settings { bounds_half_extent: 3; }").is_err());
    }

    #[test]
    fn invalid_values_are_located() {
        for text in [
            "model { }",
            "model { shape: \"torus\"; }",
            "model { shape: 1; }",
            "model { shape: \"cube\"; material { shininess: -1; } }",
            "pointlight { position: (0,0,0); attenuation: (0,0,0); }",
            "camera { pitch: 2; }",
            "camera { } camera { }",
            "model { shape: \"cube\"; name: \"a\"; name: \"b\"; }",
            "model { shape: \"cube\"; scale: 0; }",
            "model { shape: \"cube\"; static: 3; }",
        ] {
            let e = desc(text).unwrap_err();
            assert!(e.location().is_some(), "{text}: {e}");
        }
    }
}
