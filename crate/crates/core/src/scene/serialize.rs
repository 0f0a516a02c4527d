use std::fmt::Write;

use glam::DVec3;

use super::lexer::quote;
use super::{MeshSource, SceneDescription};

/// Canonical text form: models, then lights, then camera, then settings;
/// keys sorted within each block; numbers in shortest round-trip form.
pub fn serialize(desc: &SceneDescription) -> String {
    let mut out = String::new();
    for m in &desc.models {
        let source = match &m.source {
            MeshSource::File(f) => ("file", quote(f)),
            MeshSource::Shape(s) => ("shape", quote(s.name())),
        };
        let mat = &m.material;
        let material = block(
            "material",
            vec![
                ("ambient", num(mat.ambient_str)),
                ("color", tuple(mat.color)),
                ("diffuse", num(mat.diffuse_str)),
                ("shininess", num(mat.shininess)),
                ("specular", num(mat.specular_str)),
            ],
            1,
        );
        let mut entries = [
            (source.0, source.1),
            ("name", quote(&m.name)),
            ("position", tuple(m.position)),
            ("rotation", tuple(m.rotation)),
            ("scale", tuple(m.scale)),
            ("static", num(m.is_static as u8 as f64)),
        ];
        entries.sort_by_key(|e| e.0);
        let mut body = String::new();
        let split = entries.partition_point(|e| e.0 < "material");
        for (k, v) in &entries[..split] {
            writeln!(body, "  {k}: {v};").unwrap();
        }
        body.push_str(&material);
        for (k, v) in &entries[split..] {
            writeln!(body, "  {k}: {v};").unwrap();
        }
        writeln!(out, "model {{\n{body}}}").unwrap();
    }
    for l in &desc.lights {
        let k = DVec3::new(l.att_constant, l.att_linear, l.att_quadratic);
        out.push_str(&block(
            "pointlight",
            vec![
                ("attenuation", tuple(k)),
                ("color", tuple(l.color)),
                ("position", tuple(l.position)),
            ],
            0,
        ));
    }
    if let Some(c) = &desc.camera {
        out.push_str(&block(
            "camera",
            vec![
                ("far", num(c.far)),
                ("fov", num(c.fov_y)),
                ("near", num(c.near)),
                ("pitch", num(c.pitch)),
                ("position", tuple(c.position)),
                ("yaw", num(c.yaw)),
            ],
            0,
        ));
    }
    if !desc.settings.is_empty() || desc.bounds.is_some() {
        let mut entries: Vec<(&str, String)> = desc
            .settings
            .iter()
            .map(|(k, v)| (k.as_str(), num(*v)))
            .collect();
        if let Some(b) = &desc.bounds {
            entries.push(("bounds_center", tuple(b.center)));
            entries.push(("bounds_half_extent", num(b.half_extent)));
        }
        entries.sort_by_key(|e| e.0);
        out.push_str(&block("settings", entries, 0));
    }
    out
}

fn block(name: &str, entries: Vec<(&str, String)>, depth: usize) -> String {
    let pad = "  ".repeat(depth);
    let mut s = format!("{pad}{name} {{\n");
    for (k, v) in entries {
        writeln!(s, "{pad}  {k}: {v};").unwrap();
    }
    writeln!(s, "{pad}}}").unwrap();
    s
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn tuple(v: DVec3) -> String {
    format!("({}, {}, {})", num(v.x), num(v.y), num(v.z))
}
