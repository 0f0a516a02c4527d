//! Vector and matrix math shared by every stage of the pipeline.
//!
//! Conventions, fixed repo-wide:
//!
//! * Right-handed world space, +Y up.
//! * Column vectors; matrices are column-major `glam::DMat4` and compose as
//!   `P * V * M * p`.
//! * Clip space follows the GL convention: NDC is the cube `[-1, 1]^3`, the
//!   perspective near plane maps to `z = -1` and the far plane to `z = +1`.
//! * A camera with `yaw = 0`, `pitch = 0` looks down `-Z`. Positive yaw turns
//!   towards `+X`, positive pitch tilts towards `+Y`.

use std::collections::HashMap;

use glam::{DMat3, DMat4, DVec3, DVec4};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate transform: upper 3x3 block is singular")]
    DegenerateTransform,
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("obj parse error at line {line}: {message}")]
    Obj { line: usize, message: String },
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
}

/// Triangle mesh with interleaved `[px, py, pz, nx, ny, nz]` vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertex_data: Vec<f64>,
    indices: Vec<u32>,
}

impl Mesh {
    pub const STRIDE: usize = 6;

    /// Builds a mesh, normalizing every stored normal.
    pub fn new(mut vertex_data: Vec<f64>, indices: Vec<u32>) -> Result<Self, GeometryError> {
        if vertex_data.len() % Self::STRIDE != 0 {
            return Err(GeometryError::InvalidMesh(format!(
                "vertex data length {} is not a multiple of {}",
                vertex_data.len(),
                Self::STRIDE
            )));
        }
        if indices.len() % 3 != 0 {
            return Err(GeometryError::InvalidMesh(format!(
                "index count {} is not a multiple of 3",
                indices.len()
            )));
        }
        let count = vertex_data.len() / Self::STRIDE;
        if let Some(bad) = indices.iter().find(|&&i| i as usize >= count) {
            return Err(GeometryError::InvalidMesh(format!(
                "index {bad} out of range for {count} vertices"
            )));
        }
        for chunk in vertex_data.chunks_exact_mut(Self::STRIDE) {
            if chunk.iter().any(|v| !v.is_finite()) {
                return Err(GeometryError::InvalidMesh(
                    "non-finite vertex attribute".into(),
                ));
            }
            let n = DVec3::new(chunk[3], chunk[4], chunk[5]);
            let len = n.length();
            if len < 1e-12 {
                return Err(GeometryError::InvalidMesh("zero-length normal".into()));
            }
            let n = n / len;
            chunk[3] = n.x;
            chunk[4] = n.y;
            chunk[5] = n.z;
        }
        Ok(Self {
            vertex_data,
            indices,
        })
    }

    pub fn vertex_data(&self) -> &[f64] {
        &self.vertex_data
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_data.len() / Self::STRIDE
    }

    pub fn triangle_count(&self) -> usize {
        self.indices.len() / 3
    }

    pub fn position(&self, i: usize) -> DVec3 {
        let v = &self.vertex_data[i * Self::STRIDE..];
        DVec3::new(v[0], v[1], v[2])
    }

    pub fn normal(&self, i: usize) -> DVec3 {
        let v = &self.vertex_data[i * Self::STRIDE..];
        DVec3::new(v[3], v[4], v[5])
    }

    pub fn triangles(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        self.indices
            .chunks_exact(3)
            .map(|t| [t[0] as usize, t[1] as usize, t[2] as usize])
    }

    /// Square in the XZ plane spanning `[-1, 1]`, facing `+Y`.
    pub fn plane() -> Self {
        Self::square(|a, b| DVec3::new(a, 0.0, -b), DVec3::Y)
    }

    /// Square in the XY plane spanning `[-1, 1]`, facing `+Z`.
    pub fn quad() -> Self {
        Self::square(|a, b| DVec3::new(a, b, 0.0), DVec3::Z)
    }

    /// Cube spanning `[-1, 1]^3` with outward normals.
    pub fn cube() -> Self {
        let faces: [(DVec3, DVec3, DVec3); 6] = [
            (DVec3::X, DVec3::NEG_Z, DVec3::Y),
            (DVec3::NEG_X, DVec3::Z, DVec3::Y),
            (DVec3::Y, DVec3::X, DVec3::NEG_Z),
            (DVec3::NEG_Y, DVec3::X, DVec3::Z),
            (DVec3::Z, DVec3::X, DVec3::Y),
            (DVec3::NEG_Z, DVec3::NEG_X, DVec3::Y),
        ];
        let mut data = Vec::with_capacity(24 * Self::STRIDE);
        let mut indices = Vec::with_capacity(36);
        for (f, (n, u, v)) in faces.iter().enumerate() {
            for (a, b) in [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)] {
                let p = *n + *u * a + *v * b;
                data.extend_from_slice(&[p.x, p.y, p.z, n.x, n.y, n.z]);
            }
            let base = (f * 4) as u32;
            indices.extend_from_slice(&[base, base + 1, base + 2, base, base + 2, base + 3]);
        }
        Self::new(data, indices).expect("static cube mesh is valid")
    }

    fn square(place: impl Fn(f64, f64) -> DVec3, n: DVec3) -> Self {
        let mut data = Vec::with_capacity(4 * Self::STRIDE);
        for (a, b) in [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)] {
            let p = place(a, b);
            data.extend_from_slice(&[p.x, p.y, p.z, n.x, n.y, n.z]);
        }
        Self::new(data, vec![0, 1, 2, 0, 2, 3]).expect("static square mesh is valid")
    }
}

#[derive(Clone, Copy, Hash, PartialEq, Eq)]
enum NormalKey {
    Indexed(usize),
    Face(usize),
}

/// Loads the `v` / `vn` / `f` subset of Wavefront OBJ.
///
/// Faces with more than three corners are fan triangulated. Corners without a
/// normal index receive the face's geometric normal. Texture indices are
/// parsed and dropped.
pub fn load_obj(text: &str) -> Result<Mesh, GeometryError> {
    let mut positions: Vec<DVec3> = Vec::new();
    let mut normals: Vec<DVec3> = Vec::new();
    let mut vertex_data = Vec::new();
    let mut indices = Vec::new();
    let mut dedup: HashMap<(usize, NormalKey), u32> = HashMap::new();
    let mut face_no = 0usize;

    for (line_idx, raw) in text.lines().enumerate() {
        let line_no = line_idx + 1;
        let err = |message: String| GeometryError::Obj {
            line: line_no,
            message,
        };
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut parts = line.split_whitespace();
        let Some(tag) = parts.next() else { continue };
        match tag {
            "v" | "vn" => {
                let coords: Vec<f64> = parts
                    .take(3)
                    .map(|s| {
                        s.parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| err(format!("non-numeric coordinate '{s}'")))
                    })
                    .collect::<Result<_, _>>()?;
                if coords.len() != 3 {
                    return Err(err(format!("'{tag}' needs three coordinates")));
                }
                let v = DVec3::new(coords[0], coords[1], coords[2]);
                if tag == "v" {
                    positions.push(v);
                } else {
                    let len = v.length();
                    if len < 1e-12 {
                        return Err(err("zero-length normal".into()));
                    }
                    normals.push(v / len);
                }
            }
            "f" => {
                let mut corners = Vec::new();
                for corner in parts {
                    let mut fields = corner.split('/');
                    let p = fields.next().unwrap_or("");
                    let _tex = fields.next();
                    let n = fields.next().filter(|s| !s.is_empty());
                    let p = resolve_index(p, positions.len()).map_err(&err)?;
                    let n = n
                        .map(|s| resolve_index(s, normals.len()))
                        .transpose()
                        .map_err(&err)?;
                    corners.push((p, n));
                }
                if corners.len() < 3 {
                    return Err(err("face needs at least three vertices".into()));
                }
                face_no += 1;
                let face_normal = if corners.iter().any(|c| c.1.is_none()) {
                    let n = newell_normal(corners.iter().map(|c| positions[c.0]));
                    if n.length() < 1e-12 {
                        // zero-area face without normals covers no pixels; drop it
                        continue;
                    }
                    Some(n.normalize())
                } else {
                    None
                };
                let mut ids = Vec::with_capacity(corners.len());
                for (p, n) in corners {
                    let key = match n {
                        Some(k) => NormalKey::Indexed(k),
                        None => NormalKey::Face(face_no),
                    };
                    let id = *dedup.entry((p, key)).or_insert_with(|| {
                        let nrm = n.map(|k| normals[k]).or(face_normal).unwrap_or(DVec3::Z);
                        let pos = positions[p];
                        vertex_data.extend_from_slice(&[pos.x, pos.y, pos.z, nrm.x, nrm.y, nrm.z]);
                        (vertex_data.len() / Mesh::STRIDE - 1) as u32
                    });
                    ids.push(id);
                }
                for i in 1..ids.len() - 1 {
                    indices.extend_from_slice(&[ids[0], ids[i], ids[i + 1]]);
                }
            }
            _ => {}
        }
    }
    Mesh::new(vertex_data, indices).map_err(|e| GeometryError::Obj {
        line: 0,
        message: e.to_string(),
    })
}

fn resolve_index(s: &str, count: usize) -> Result<usize, String> {
    let i: i64 = s.parse().map_err(|_| format!("invalid index '{s}'"))?;
    let resolved = if i > 0 {
        i - 1
    } else if i < 0 {
        count as i64 + i
    } else {
        return Err("index 0 is not valid in OBJ".into());
    };
    if resolved < 0 || resolved as usize >= count {
        return Err(format!("index {i} out of range ({count} declared)"));
    }
    Ok(resolved as usize)
}

fn newell_normal(points: impl Iterator<Item = DVec3>) -> DVec3 {
    let pts: Vec<DVec3> = points.collect();
    let mut n = DVec3::ZERO;
    for i in 0..pts.len() {
        let a = pts[i];
        let b = pts[(i + 1) % pts.len()];
        n += a.cross(b);
    }
    n
}

/// Model matrix built by post-multiplying elementary transforms, so the last
/// call is applied to vertices first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    matrix: DMat4,
}

impl Default for Transform {
    fn default() -> Self {
        Self::identity()
    }
}

impl Transform {
    pub fn identity() -> Self {
        Self {
            matrix: DMat4::IDENTITY,
        }
    }

    /// `T * Rz * Ry * Rx * S`: scale, then rotate about X, Y, Z, then translate.
    pub fn from_psr(position: DVec3, rotation: DVec3, scale: DVec3) -> Self {
        Self::identity()
            .translate(position)
            .rotate(rotation)
            .scale(scale)
    }

    pub fn matrix(&self) -> DMat4 {
        self.matrix
    }

    pub fn translate(mut self, offset: DVec3) -> Self {
        self.matrix *= DMat4::from_translation(offset);
        self
    }

    pub fn scale(mut self, factors: DVec3) -> Self {
        self.matrix *= DMat4::from_scale(factors);
        self
    }

    /// Euler rotation in radians, X applied first, then Y, then Z.
    pub fn rotate(mut self, euler: DVec3) -> Self {
        self.matrix *= DMat4::from_rotation_z(euler.z)
            * DMat4::from_rotation_y(euler.y)
            * DMat4::from_rotation_x(euler.x);
        self
    }

    pub fn reset(&mut self) {
        self.matrix = DMat4::IDENTITY;
    }
}

pub fn transform_point(m: &DMat4, p: DVec3) -> DVec3 {
    let h = *m * DVec4::new(p.x, p.y, p.z, 1.0);
    h.truncate() / h.w
}

/// Inverse transpose of the upper-left 3x3 block.
pub fn normal_matrix(m: &DMat4) -> Result<DMat3, GeometryError> {
    let upper = DMat3::from_mat4(*m);
    let det = upper.determinant();
    if !det.is_finite() || det.abs() < 1e-12 {
        return Err(GeometryError::DegenerateTransform);
    }
    Ok(upper.inverse().transpose())
}

pub fn transform_normal(m: &DMat4, n: DVec3) -> Result<DVec3, GeometryError> {
    Ok((normal_matrix(m)? * n).normalize())
}

/// Axis-aligned cube used as the voxel volume's extent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub center: DVec3,
    pub half_extent: f64,
}

impl Bounds {
    pub fn new(center: DVec3, half_extent: f64) -> Result<Self, GeometryError> {
        if !(half_extent > 0.0 && half_extent.is_finite()) || !center.is_finite() {
            return Err(GeometryError::InvalidMesh(format!(
                "bounds half extent must be positive, got {half_extent}"
            )));
        }
        Ok(Self {
            center,
            half_extent,
        })
    }

    /// Smallest cube containing the box `[min, max]`, grown by `margin` (relative).
    pub fn enclosing(min: DVec3, max: DVec3, margin: f64) -> Self {
        let center = (min + max) * 0.5;
        let half = ((max - min) * 0.5).max_element().max(1e-6) * (1.0 + margin);
        Self {
            center,
            half_extent: half,
        }
    }

    pub fn min(&self) -> DVec3 {
        self.center - DVec3::splat(self.half_extent)
    }

    pub fn max(&self) -> DVec3 {
        self.center + DVec3::splat(self.half_extent)
    }

    pub fn size(&self) -> f64 {
        2.0 * self.half_extent
    }

    pub fn diagonal(&self) -> f64 {
        self.size() * 3f64.sqrt()
    }

    pub fn contains(&self, p: DVec3, margin: f64) -> bool {
        let d = (p - self.center).abs();
        d.max_element() <= self.half_extent + margin
    }
}

/// Maps the bounds cube onto the clip cube, `min -> (-1,-1,-1)`, `max -> (1,1,1)`.
pub fn orthographic_matrix(bounds: &Bounds) -> DMat4 {
    DMat4::from_scale(DVec3::splat(1.0 / bounds.half_extent))
        * DMat4::from_translation(-bounds.center)
}

pub fn orthographic_inverse(bounds: &Bounds) -> DMat4 {
    DMat4::from_translation(bounds.center) * DMat4::from_scale(DVec3::splat(bounds.half_extent))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub position: DVec3,
    pub yaw: f64,
    pub pitch: f64,
    pub fov_y: f64,
    pub aspect: f64,
    pub near: f64,
    pub far: f64,
}

impl Default for Camera {
    fn default() -> Self {
        Self {
            position: DVec3::new(0.0, 0.0, 5.0),
            yaw: 0.0,
            pitch: 0.0,
            fov_y: 1.0,
            aspect: 1.0,
            near: 0.1,
            far: 100.0,
        }
    }
}

impl Camera {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |m: &str| Err(GeometryError::InvalidCamera(m.to_string()));
        if !(self.near > 0.0 && self.near < self.far && self.far.is_finite()) {
            return bad("require 0 < near < far");
        }
        if self.pitch.is_nan() || self.pitch.abs() >= std::f64::consts::FRAC_PI_2 {
            return bad("pitch must lie strictly within (-pi/2, pi/2)");
        }
        if !(self.fov_y > 0.0 && self.fov_y < std::f64::consts::PI) {
            return bad("fov must lie within (0, pi)");
        }
        if !(self.aspect > 0.0 && self.aspect.is_finite()) {
            return bad("aspect must be positive");
        }
        if !self.position.is_finite() || !self.yaw.is_finite() {
            return bad("non-finite camera position or yaw");
        }
        Ok(())
    }

    pub fn forward(&self) -> DVec3 {
        let (sy, cy) = self.yaw.sin_cos();
        let (sp, cp) = self.pitch.sin_cos();
        DVec3::new(sy * cp, sp, -cy * cp)
    }

    pub fn right(&self) -> DVec3 {
        let (sy, cy) = self.yaw.sin_cos();
        DVec3::new(cy, 0.0, sy)
    }

    pub fn up(&self) -> DVec3 {
        self.right().cross(self.forward())
    }
}

/// World to eye space; the eye looks down its local -Z.
pub fn view_matrix(camera: &Camera) -> DMat4 {
    let (f, r, u) = (camera.forward(), camera.right(), camera.up());
    let e = camera.position;
    DMat4::from_cols(
        DVec4::new(r.x, u.x, -f.x, 0.0),
        DVec4::new(r.y, u.y, -f.y, 0.0),
        DVec4::new(r.z, u.z, -f.z, 0.0),
        DVec4::new(-r.dot(e), -u.dot(e), f.dot(e), 1.0),
    )
}

/// Maps the near plane to NDC z = -1 and the far plane to z = +1.
pub fn perspective_matrix(camera: &Camera) -> DMat4 {
    let g = 1.0 / (camera.fov_y * 0.5).tan();
    let (n, f) = (camera.near, camera.far);
    DMat4::from_cols(
        DVec4::new(g / camera.aspect, 0.0, 0.0, 0.0),
        DVec4::new(0.0, g, 0.0, 0.0),
        DVec4::new(0.0, 0.0, (f + n) / (n - f), -1.0),
        DVec4::new(0.0, 0.0, 2.0 * f * n / (n - f), 0.0),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ndc(m: &DMat4, p: DVec3) -> DVec3 {
        transform_point(m, p)
    }

    #[test]
    fn obj_single_triangle_gets_face_normal() {
        let mesh = load_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        assert_eq!(mesh.vertex_count(), 3);
        assert_eq!(mesh.triangle_count(), 1);
        for i in 0..3 {
            assert_eq!(mesh.normal(i), DVec3::Z);
        }
    }

    #[test]
    fn obj_quad_is_fan_triangulated() {
        let mesh = load_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap();
        assert_eq!(mesh.indices(), &[0, 1, 2, 0, 2, 3]);
    }

    #[test]
    fn obj_out_of_range_index_reports_line() {
        let err = load_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 5 1 2\n").unwrap_err();
        assert!(matches!(err, GeometryError::Obj { line: 4, .. }), "{err:?}");
    }

    #[test]
    fn obj_non_numeric_coordinate() {
        let err = load_obj("v 0 zero 0\n").unwrap_err();
        assert!(matches!(err, GeometryError::Obj { line: 1, .. }));
    }

    #[test]
    fn obj_slashed_and_negative_indices() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvn 0 0 2\nf -3/1/1 -2/1/1 -1//1\n";
        let mesh = load_obj(text).unwrap();
        assert_eq!(mesh.vertex_count(), 3);
        assert!((mesh.normal(0).length() - 1.0).abs() < 1e-12);
        // shared (position, normal) pairs are deduplicated
        let text =
            "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nvn 0 0 1\nf 1//1 2//1 3//1\nf 2//1 4//1 3//1\n";
        assert_eq!(load_obj(text).unwrap().vertex_count(), 4);
    }

    #[test]
    fn transform_point_examples() {
        let p = DVec3::new(1.0, 2.0, 3.0);
        assert_eq!(transform_point(&DMat4::IDENTITY, p), p);
        let t = Transform::identity().translate(DVec3::new(0.0, 0.0, 5.0));
        assert_eq!(
            transform_point(&t.matrix(), DVec3::ZERO),
            DVec3::new(0.0, 0.0, 5.0)
        );
    }

    /// Plain row-by-column product, independent of glam's operators.
    fn mul4(a: [[f64; 4]; 4], b: [[f64; 4]; 4]) -> [[f64; 4]; 4] {
        let mut out = [[0.0; 4]; 4];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = (0..4).map(|k| a[r][k] * b[k][c]).sum();
            }
        }
        out
    }

    #[test]
    fn scale_then_translate_matches_hand_product() {
        let scale = [
            [2.0, 0.0, 0.0, 0.0],
            [0.0, 2.0, 0.0, 0.0],
            [0.0, 0.0, 2.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
        let trans = [
            [1.0, 0.0, 0.0, 1.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
        let m = mul4(trans, scale);
        let p = [1.0, 1.0, 1.0, 1.0];
        let oracle: Vec<f64> = (0..3)
            .map(|r| (0..4).map(|k| m[r][k] * p[k]).sum())
            .collect();
        assert_eq!(oracle, vec![3.0, 2.0, 2.0]);

        let t = Transform::identity()
            .translate(DVec3::new(1.0, 0.0, 0.0))
            .scale(DVec3::splat(2.0));
        assert_eq!(
            transform_point(&t.matrix(), DVec3::ONE),
            DVec3::new(3.0, 2.0, 2.0)
        );
    }

    #[test]
    fn transform_normal_examples() {
        assert_eq!(
            transform_normal(&DMat4::IDENTITY, DVec3::Y).unwrap(),
            DVec3::Y
        );
        let m = DMat4::from_scale(DVec3::splat(3.0));
        assert!((transform_normal(&m, DVec3::Z).unwrap() - DVec3::Z).length() < 1e-12);

        // inverse transpose of diag(2,1,1) is diag(0.5,1,1)
        let m = DMat4::from_scale(DVec3::new(2.0, 1.0, 1.0));
        let got = transform_normal(&m, DVec3::new(1.0, 1.0, 0.0).normalize()).unwrap();
        let want = DVec3::new(0.5, 1.0, 0.0).normalize();
        assert!((got - want).length() < 1e-12);

        let singular = DMat4::from_scale(DVec3::new(1.0, 0.0, 1.0));
        assert_eq!(
            transform_normal(&singular, DVec3::Y),
            Err(GeometryError::DegenerateTransform)
        );
    }

    #[test]
    fn reset_restores_identity() {
        let mut t = Transform::from_psr(DVec3::ONE, DVec3::new(0.3, 0.2, 0.1), DVec3::splat(2.0));
        t.reset();
        assert_eq!(t.matrix(), DMat4::IDENTITY);
    }

    #[test]
    fn euler_order_is_x_then_y_then_z() {
        let t = Transform::identity().rotate(DVec3::new(
            std::f64::consts::FRAC_PI_2,
            std::f64::consts::FRAC_PI_2,
            0.0,
        ));
        // X rotation sends +Y to +Z, then Y rotation sends +Z to +X
        let p = transform_point(&t.matrix(), DVec3::Y);
        assert!((p - DVec3::X).length() < 1e-12, "{p}");
    }

    #[test]
    fn camera_projection_conventions() {
        let cam = Camera {
            position: DVec3::new(1.0, 2.0, 3.0),
            yaw: 0.4,
            pitch: -0.2,
            ..Camera::default()
        };
        let pv = perspective_matrix(&cam) * view_matrix(&cam);
        let mid = cam.position + cam.forward() * (cam.near + cam.far) * 0.5;
        let p = ndc(&pv, mid);
        assert!(p.x.abs() < 1e-9 && p.y.abs() < 1e-9);
        let far = ndc(&pv, cam.position + cam.forward() * cam.far);
        assert!((far.z - 1.0).abs() < 1e-9);
        let near = ndc(&pv, cam.position + cam.forward() * cam.near);
        assert!((near.z + 1.0).abs() < 1e-9);
        assert!(transform_point(&view_matrix(&cam), cam.position).length() < 1e-12);
        // +right maps to +x on screen, +up to +y
        let r = ndc(&pv, mid + cam.right() * 0.1);
        let u = ndc(&pv, mid + cam.up() * 0.1);
        assert!(r.x > 0.0 && u.y > 0.0);
    }

    #[test]
    fn orthographic_maps_corners() {
        let b = Bounds::new(DVec3::new(1.0, -2.0, 0.5), 3.0).unwrap();
        let m = orthographic_matrix(&b);
        assert!((ndc(&m, b.min()) - DVec3::NEG_ONE).length() < 1e-12);
        assert!((ndc(&m, b.max()) - DVec3::ONE).length() < 1e-12);
    }

    #[test]
    fn orthographic_round_trip_random_points() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let b = Bounds::new(DVec3::new(0.3, 1.0, -4.0), 2.5).unwrap();
        let fwd = orthographic_matrix(&b);
        let inv = orthographic_inverse(&b);
        for _ in 0..100 {
            let p = b.min() + DVec3::new(rng.gen(), rng.gen(), rng.gen()) * b.size();
            let back = transform_point(&inv, transform_point(&fwd, p));
            assert!((back - p).length() < 1e-6);
        }
    }

    proptest! {
        #[test]
        fn camera_axes_orthonormal(yaw in -7.0f64..7.0, pitch in -1.5f64..1.5) {
            let cam = Camera { yaw, pitch, ..Camera::default() };
            let (f, r, u) = (cam.forward(), cam.right(), cam.up());
            prop_assert!(f.dot(r).abs() < 1e-6 && f.dot(u).abs() < 1e-6 && r.dot(u).abs() < 1e-6);
            prop_assert!((f.length() - 1.0).abs() < 1e-6 && (u.length() - 1.0).abs() < 1e-6);
        }

        #[test]
        fn transformed_normal_parallel_to_recomputed_normal(
            s in prop::array::uniform3(0.2f64..3.0),
            r in prop::array::uniform3(-3.0f64..3.0),
            t in prop::array::uniform3(-5.0f64..5.0),
            v in prop::array::uniform9(-1.0f64..1.0),
        ) {
            let a = DVec3::new(v[0], v[1], v[2]);
            let b = DVec3::new(v[3], v[4], v[5]);
            let c = DVec3::new(v[6], v[7], v[8]);
            let n = (b - a).cross(c - a);
            prop_assume!(n.length() > 1e-3);
            let m = Transform::from_psr(DVec3::from(t), DVec3::from(r), DVec3::from(s)).matrix();
            let tn = transform_normal(&m, n.normalize()).unwrap();
            let (ta, tb, tc) = (transform_point(&m, a), transform_point(&m, b), transform_point(&m, c));
            let rn = (tb - ta).cross(tc - ta).normalize();
            prop_assert!(tn.dot(rn) > 1.0 - 1e-6);
        }

        #[test]
        fn obj_loader_total_on_subset(
            pts in prop::collection::vec(prop::array::uniform3(-10i32..10), 3..12),
            faces in prop::collection::vec(prop::collection::vec(1usize..100, 3..6), 1..8),
        ) {
            let mut text = String::new();
            for p in &pts {
                text.push_str(&format!("v {} {} {}\n", p[0], p[1], p[2]));
            }
            text.push_str("vn 0 1 0\n");
            for (fi, f) in faces.iter().enumerate() {
                text.push('f');
                for (ci, &i) in f.iter().enumerate() {
                    let i = (i - 1) % pts.len() + 1;
                    if (fi + ci) % 2 == 0 { text.push_str(&format!(" {i}")); } else { text.push_str(&format!(" {i}//1")); }
                }
                text.push('\n');
            }
            let mesh = load_obj(&text).unwrap();
            prop_assert_eq!(mesh.indices().len() % 3, 0);
            for i in 0..mesh.vertex_count() {
                prop_assert!((mesh.normal(i).length() - 1.0).abs() < 1e-4);
            }
        }
    }
}
