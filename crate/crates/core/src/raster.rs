//! Software triangle rasterizer.
//!
//! Pixel `(px, py)` is sampled at its center `(px + 0.5, py + 0.5)`, rows are
//! counted from the top. Screen-space vertex positions are snapped to a
//! fixed-point grid of [`SUBPIXEL_STEPS`] steps per pixel and coverage is
//! decided with exact integer edge functions under the top-left fill rule, so
//! pixels on an edge shared by two triangles are claimed exactly once.

use glam::{DMat3, DMat4, DVec3, DVec4};

use crate::geometry::{normal_matrix, GeometryError};

pub const SUBPIXEL_BITS: u32 = 8;
pub const SUBPIXEL_STEPS: i64 = 1 << SUBPIXEL_BITS;
/// Snapped coordinates beyond this magnitude would overflow the edge functions.
const MAX_FIXED: i64 = 1 << 28;

/// Depth written by [`Framebuffer::clear`].
pub const DEPTH_CLEAR: f64 = f64::INFINITY;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipVertex {
    pub clip: DVec4,
    pub world: DVec3,
    pub normal: DVec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipTriangle {
    pub vertices: [ClipVertex; 3],
}

impl ClipTriangle {
    /// True if any vertex lies behind the near plane (`z < -w`) or at `w <= 0`.
    pub fn crosses_near_plane(&self) -> bool {
        self.vertices
            .iter()
            .any(|v| v.clip.w <= 0.0 || v.clip.z < -v.clip.w)
    }
}

/// Mesh vertex as consumed by [`project_triangle`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vertex {
    pub position: DVec3,
    pub normal: DVec3,
}

pub fn project_triangle(
    model: &DMat4,
    view: &DMat4,
    projection: &DMat4,
    tri: &[Vertex; 3],
) -> Result<ClipTriangle, GeometryError> {
    let nm = normal_matrix(model)?;
    Ok(project_with(model, &nm, &(*projection * *view), tri))
}

/// [`project_triangle`] with the normal matrix and `P * V` precomputed.
pub fn project_with(
    model: &DMat4,
    normal_mat: &DMat3,
    view_proj: &DMat4,
    tri: &[Vertex; 3],
) -> ClipTriangle {
    let vertices = tri.map(|v| {
        let world = model.transform_point3(v.position);
        ClipVertex {
            clip: *view_proj * world.extend(1.0),
            world,
            normal: (*normal_mat * v.normal).normalize(),
        }
    });
    ClipTriangle { vertices }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fragment {
    pub px: u32,
    pub py: u32,
    pub depth: f64,
    pub world_pos: DVec3,
    pub world_normal: DVec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    /// Attributes divided by `w` before interpolation.
    Perspective,
    /// Attributes interpolated linearly in screen space.
    Orthographic,
}

/// Pixel rectangle `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl Rect {
    pub fn width(&self) -> u32 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> u32 {
        self.y1 - self.y0
    }
}

/// Color and depth target. A framebuffer may own only a sub-rectangle of the
/// viewport; the rasterizer then only visits pixels inside that region.
#[derive(Debug, Clone, PartialEq)]
pub struct Framebuffer {
    width: u32,
    height: u32,
    region: Rect,
    clear_color: [f32; 4],
    pub color: Vec<[f32; 4]>,
    pub depth: Vec<f64>,
}

impl Framebuffer {
    pub fn new(width: u32, height: u32) -> Self {
        Self::with_region(
            width,
            height,
            Rect {
                x0: 0,
                y0: 0,
                x1: width,
                y1: height,
            },
        )
    }

    pub fn with_region(width: u32, height: u32, region: Rect) -> Self {
        assert!(
            region.x1 <= width
                && region.y1 <= height
                && region.x0 <= region.x1
                && region.y0 <= region.y1
        );
        let n = (region.width() * region.height()) as usize;
        Self {
            width,
            height,
            region,
            clear_color: [0.0; 4],
            color: vec![[0.0; 4]; n],
            depth: vec![DEPTH_CLEAR; n],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn region(&self) -> Rect {
        self.region
    }

    pub fn set_clear_color(&mut self, c: [f32; 4]) {
        self.clear_color = c;
    }

    pub fn clear(&mut self) {
        self.color.fill(self.clear_color);
        self.depth.fill(DEPTH_CLEAR);
    }

    /// Row-major offset of a viewport pixel inside the owned region.
    pub fn local_index(&self, px: u32, py: u32) -> usize {
        ((py - self.region.y0) * self.region.width() + (px - self.region.x0)) as usize
    }
}

#[derive(Clone, Copy)]
struct ScreenVertex {
    x: i64,
    y: i64,
    fx: f64,
    fy: f64,
    z: f64,
    inv_w: f64,
}

/// Edge function of `a -> b` at `p`, positive on the interior side of a
/// triangle whose area (as computed here) is positive.
#[inline]
fn edge(ax: i64, ay: i64, bx: i64, by: i64, px: i64, py: i64) -> i64 {
    (bx - ax) * (py - ay) - (by - ay) * (px - ax)
}

/// Top edge (horizontal, pointing +x) or left edge (pointing -y in y-down space).
#[inline]
fn is_top_left(ax: i64, ay: i64, bx: i64, by: i64) -> bool {
    let (dx, dy) = (bx - ax, by - ay);
    (dy == 0 && dx > 0) || dy < 0
}

/// Snaps a viewport coordinate in pixels to the subpixel grid.
pub fn snap(v: f64) -> Option<i64> {
    let f = (v * SUBPIXEL_STEPS as f64).round();
    (f.is_finite() && f.abs() < MAX_FIXED as f64).then_some(f as i64)
}

/// Viewport mapping from NDC to pixel coordinates (y flipped, top row first).
pub fn ndc_to_viewport(ndc: DVec3, width: u32, height: u32) -> (f64, f64) {
    (
        (ndc.x + 1.0) * 0.5 * width as f64,
        (1.0 - ndc.y) * 0.5 * height as f64,
    )
}

/// Rasterizes one clip-space triangle into `target`'s region, invoking `sink`
/// for every fragment that survives coverage, depth range and (optionally) the
/// depth test. Returns the number of fragments handed to `sink`.
///
/// Triangles crossing the near plane are not clipped; they produce no
/// fragments. Callers are expected to check [`ClipTriangle::crosses_near_plane`].
pub fn rasterize<F>(
    tri: &ClipTriangle,
    target: &mut Framebuffer,
    mode: Interpolation,
    depth_test: bool,
    mut sink: F,
) -> usize
where
    F: FnMut(&Fragment, &mut [f32; 4]),
{
    if tri.crosses_near_plane() {
        return 0;
    }
    let (w, h) = (target.width, target.height);
    let mut sv = [ScreenVertex {
        x: 0,
        y: 0,
        fx: 0.0,
        fy: 0.0,
        z: 0.0,
        inv_w: 1.0,
    }; 3];
    for (s, v) in sv.iter_mut().zip(&tri.vertices) {
        let inv_w = 1.0 / v.clip.w;
        let ndc = v.clip.truncate() * inv_w;
        let (fx, fy) = ndc_to_viewport(ndc, w, h);
        let (Some(x), Some(y)) = (snap(fx), snap(fy)) else {
            return 0;
        };
        *s = ScreenVertex {
            x,
            y,
            fx,
            fy,
            z: ndc.z,
            inv_w,
        };
    }
    let mut order = [0usize, 1, 2];
    let mut area = edge(sv[0].x, sv[0].y, sv[1].x, sv[1].y, sv[2].x, sv[2].y);
    if area == 0 {
        return 0;
    }
    if area < 0 {
        order.swap(1, 2);
        area = -area;
    }
    let [a, b, c] = order.map(|i| sv[i]);
    let [va, vb, vc] = order.map(|i| tri.vertices[i]);

    let region = target.region;
    let to_px = |f: i64| f.div_euclid(SUBPIXEL_STEPS);
    let min_x = to_px(a.x.min(b.x).min(c.x)).max(region.x0 as i64);
    let min_y = to_px(a.y.min(b.y).min(c.y)).max(region.y0 as i64);
    let max_x = to_px(a.x.max(b.x).max(c.x)).min(region.x1 as i64 - 1);
    let max_y = to_px(a.y.max(b.y).max(c.y)).min(region.y1 as i64 - 1);
    if min_x > max_x || min_y > max_y {
        return 0;
    }

    // Non top-left edges exclude their own pixels: require e > 0, i.e. e - 1 >= 0.
    let bias_bc = if is_top_left(b.x, b.y, c.x, c.y) {
        0
    } else {
        -1
    };
    let bias_ca = if is_top_left(c.x, c.y, a.x, a.y) {
        0
    } else {
        -1
    };
    let bias_ab = if is_top_left(a.x, a.y, b.x, b.y) {
        0
    } else {
        -1
    };
    // Coverage uses the snapped vertices; interpolation weights use the
    // unsnapped ones so attributes match the true surface under the pixel center.
    let area_f = (b.fx - a.fx) * (c.fy - a.fy) - (b.fy - a.fy) * (c.fx - a.fx);
    let exact_weights = area_f.abs() > 1e-9;
    let inv_area = 1.0 / area as f64;
    let inv_area_f = 1.0 / area_f;
    let half = SUBPIXEL_STEPS / 2;

    let mut count = 0;
    for py in min_y..=max_y {
        let cy = py * SUBPIXEL_STEPS + half;
        for px in min_x..=max_x {
            let cx = px * SUBPIXEL_STEPS + half;
            let e_a = edge(b.x, b.y, c.x, c.y, cx, cy);
            let e_b = edge(c.x, c.y, a.x, a.y, cx, cy);
            let e_c = edge(a.x, a.y, b.x, b.y, cx, cy);
            if e_a + bias_bc < 0 || e_b + bias_ca < 0 || e_c + bias_ab < 0 {
                continue;
            }
            let (la, lb, lc) = if exact_weights {
                let (x, y) = (px as f64 + 0.5, py as f64 + 0.5);
                let lb = ((a.fx - c.fx) * (y - c.fy) - (a.fy - c.fy) * (x - c.fx)) * inv_area_f;
                let lc = ((b.fx - a.fx) * (y - a.fy) - (b.fy - a.fy) * (x - a.fx)) * inv_area_f;
                (1.0 - lb - lc, lb, lc)
            } else {
                (
                    e_a as f64 * inv_area,
                    e_b as f64 * inv_area,
                    e_c as f64 * inv_area,
                )
            };
            let depth = a.z + lb * (b.z - a.z) + lc * (c.z - a.z);
            if !(-1.0..=1.0).contains(&depth) {
                continue;
            }
            let idx = target.local_index(px as u32, py as u32);
            if depth_test && depth >= target.depth[idx] {
                continue;
            }
            let (wb, wc) = match mode {
                Interpolation::Orthographic => (lb, lc),
                Interpolation::Perspective => {
                    let pa = la * a.inv_w;
                    let pb = lb * b.inv_w;
                    let pc = lc * c.inv_w;
                    let s = 1.0 / (pa + pb + pc);
                    (pb * s, pc * s)
                }
            };
            // Anchored at vertex a so attributes equal at all vertices stay exact.
            let world_pos = va.world + wb * (vb.world - va.world) + wc * (vc.world - va.world);
            let n = va.normal + wb * (vb.normal - va.normal) + wc * (vc.normal - va.normal);
            let world_normal = if n.length_squared() > 1e-24 {
                n.normalize()
            } else {
                va.normal
            };
            if depth_test {
                target.depth[idx] = depth;
            }
            let frag = Fragment {
                px: px as u32,
                py: py as u32,
                depth,
                world_pos,
                world_normal,
            };
            sink(&frag, &mut target.color[idx]);
            count += 1;
        }
    }
    count
}
