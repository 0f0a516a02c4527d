//! Cone marching through the mip pyramid and per-fragment shading.

use std::f64::consts::PI;
use std::fmt;

use glam::{DVec3, DVec4};

use crate::geometry::Bounds;
use crate::lighting::{phong_terms, reflect, Material, PointLight};
use crate::mipvolume::MipPyramid;

/// Accumulated alpha at which a march stops early.
pub const SATURATION: f64 = 1.0 - 1e-3;
/// Diffuse cones stop at the first sample with alpha strictly above this.
pub const DIFFUSE_HIT_ALPHA: f64 = 0.01;
/// Angular grace of the specular lobe per unit of shininess.
pub const SPECULAR_GRACE: f64 = 0.008 * PI;

/// What a cone march reads from. Implemented by [`MipPyramid`]; tests use
/// scripted samplers.
pub trait ConeSampler {
    /// Edge length of a level-0 voxel in world units.
    fn voxel_size(&self) -> f64;
    fn contains(&self, p: DVec3, margin: f64) -> bool;
    fn sample(&self, p: DVec3, lod: f64) -> DVec4;
}

impl ConeSampler for MipPyramid {
    fn voxel_size(&self) -> f64 {
        MipPyramid::voxel_size(self)
    }

    fn contains(&self, p: DVec3, margin: f64) -> bool {
        self.bounds().contains(p, margin)
    }

    fn sample(&self, p: DVec3, lod: f64) -> DVec4 {
        self.sample_world(p, lod)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeParams {
    pub aperture: f64,
    pub offset: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MarchResult {
    pub color: DVec3,
    pub occlusion: f64,
    pub samples: usize,
}

pub fn cone_diameter(t: f64, aperture: f64) -> f64 {
    2.0 * t * (aperture * 0.5).tan()
}

pub fn smoothstep(e0: f64, e1: f64, x: f64) -> f64 {
    let u = ((x - e0) / (e1 - e0)).clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

/// Walks the cone axis and hands `(t, sample)` to `visit` until it returns
/// `false`, `t` passes `max_dist`, or the sample point leaves the volume by
/// more than the cone radius.
fn walk<S, F>(
    sampler: &S,
    origin: DVec3,
    dir: DVec3,
    cone: &ConeParams,
    max_dist: f64,
    mut visit: F,
) -> usize
where
    S: ConeSampler + ?Sized,
    F: FnMut(f64, DVec4) -> bool,
{
    let edge = sampler.voxel_size();
    let mut t = cone.offset;
    let mut samples = 0;
    while t <= max_dist {
        let d = cone_diameter(t, cone.aperture);
        let p = origin + t * dir;
        if !sampler.contains(p, d * 0.5) {
            break;
        }
        let lod = (d.max(edge) / edge).log2();
        samples += 1;
        if !visit(t, sampler.sample(p, lod)) {
            break;
        }
        t += (cone.step * d).max(edge);
    }
    samples
}

/// Front-to-back accumulation along one cone.
pub fn march_cone<S: ConeSampler + ?Sized>(
    sampler: &S,
    origin: DVec3,
    dir: DVec3,
    cone: &ConeParams,
    max_dist: f64,
) -> MarchResult {
    let mut c = DVec3::ZERO;
    let mut a = 0.0;
    let samples = walk(sampler, origin, dir, cone, max_dist, |_, s| {
        let alpha = s.w;
        c = a * c + (1.0 - a) * alpha * s.truncate();
        a += (1.0 - a) * alpha;
        a < SATURATION
    });
    MarchResult {
        color: c,
        occlusion: a,
        samples,
    }
}

/// Color of the first sample along the cone that is more than 1% opaque.
pub fn trace_diffuse<S: ConeSampler + ?Sized>(
    sampler: &S,
    origin: DVec3,
    dir: DVec3,
    settings: &ConeSettings,
) -> DVec3 {
    let mut hit = DVec3::ZERO;
    walk(
        sampler,
        origin,
        dir,
        &settings.diffuse(),
        settings.max_dist,
        |_, s| {
            if s.w > DIFFUSE_HIT_ALPHA {
                hit = s.truncate();
                false
            } else {
                true
            }
        },
    );
    hit
}

pub fn specular_brdf(omega: DVec3, l: DVec3, shininess: f64, falloff: f64) -> f64 {
    let grace = SPECULAR_GRACE * shininess;
    let angle = omega.dot(l).clamp(-1.0, 1.0).acos();
    let excess = (angle - grace).max(0.0);
    (1.0 - excess / PI).powf(falloff)
}

/// Narrow cone along the mirror direction, weighted by the angular lobe
/// between that direction and the light.
pub fn trace_specular<S: ConeSampler + ?Sized>(
    sampler: &S,
    origin: DVec3,
    view_dir: DVec3,
    n: DVec3,
    light_dir: DVec3,
    material: &Material,
    settings: &ConeSettings,
) -> DVec3 {
    let r = reflect(view_dir, n).normalize();
    let brdf = specular_brdf(r, light_dir, material.shininess, settings.shininess_falloff);
    let m = march_cone(sampler, origin, r, &settings.specular(), settings.max_dist);
    brdf * m.color * material.specular_str
}

/// Visibility of `light_pos` from `origin`, in `[0, 1]`.
pub fn trace_occlusion<S: ConeSampler + ?Sized>(
    sampler: &S,
    origin: DVec3,
    light_pos: DVec3,
    settings: &ConeSettings,
) -> f64 {
    let to_light = light_pos - origin;
    let dist = to_light.length();
    if dist <= 1e-12 {
        return 1.0;
    }
    let dir = to_light / dist;
    let max = settings.max_dist.min(dist);
    let mut occ = 0.0;
    walk(sampler, origin, dir, &settings.occlusion(), max, |t, s| {
        let occ_r = s.w * smoothstep(0.0, max, t.sqrt() * settings.shadow_str);
        occ += (1.0 - occ) * occ_r;
        occ < SATURATION
    });
    1.0 - occ
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConeToggles {
    pub front: bool,
    pub intermediate: bool,
    pub side: bool,
}

/// Right-handed frame `(t, b)` around `n`.
pub fn tangent_frame(n: DVec3) -> (DVec3, DVec3) {
    let a = if n.dot(DVec3::Y).abs() > 0.99 {
        DVec3::X
    } else {
        DVec3::Y
    };
    let t = n.cross(a).normalize();
    (t, n.cross(t))
}

pub fn cone_directions(n: DVec3, toggles: ConeToggles) -> Vec<DVec3> {
    let (t, b) = tangent_frame(n);
    let mut dirs = Vec::with_capacity(9);
    if toggles.front {
        dirs.push(n);
    }
    if toggles.intermediate {
        dirs.extend([n + t, n - t, n + b, n - b].map(DVec3::normalize));
    }
    if toggles.side {
        dirs.extend([t, -t, b, -b]);
    }
    dirs
}

#[derive(Debug, Clone, PartialEq)]
pub enum SettingsError {
    UnknownKey(String),
    Invalid { key: String, message: String },
}

impl fmt::Display for SettingsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SettingsError::UnknownKey(k) => write!(f, "unknown setting '{k}'"),
            SettingsError::Invalid { key, message } => {
                write!(f, "invalid value for '{key}': {message}")
            }
        }
    }
}

impl std::error::Error for SettingsError {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SettingValue {
    Real(f64),
    Flag(bool),
}

impl SettingValue {
    pub fn as_f64(self) -> f64 {
        match self {
            SettingValue::Real(v) => v,
            SettingValue::Flag(b) => b as u8 as f64,
        }
    }
}

/// Every cone-march tunable and lighting component toggle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeSettings {
    pub diffuse_aperture: f64,
    pub diffuse_offset: f64,
    pub diffuse_step: f64,
    pub specular_aperture: f64,
    pub specular_offset: f64,
    pub specular_step: f64,
    pub occlusion_aperture: f64,
    pub occlusion_offset: f64,
    pub occlusion_step: f64,
    pub shadow_str: f64,
    pub shininess_falloff: f64,
    pub max_dist: f64,
    pub front_cones: bool,
    pub intermediate_cones: bool,
    pub side_cones: bool,
    pub direct_diffuse: bool,
    pub direct_glossy: bool,
    pub indirect_diffuse: bool,
    pub indirect_specular: bool,
    pub occlusion_enabled: bool,
    /// Adds the Phong ambient term to the direct light.
    pub ambient: bool,
    /// Divide the diffuse cone sum by the number of cones.
    pub normalize_diffuse: bool,
    /// Multiply each light's specular cone by that light's visibility.
    pub occlude_specular: bool,
    /// Store the ambient term in the voxel grid.
    pub voxelize_ambient: bool,
}

macro_rules! settings_table {
    ($($name:ident : $kind:ident),* $(,)?) => {
        pub const SETTING_NAMES: &[&str] = &[$(stringify!($name)),*];

        impl ConeSettings {
            /// All fields in declaration order.
            pub fn fields(&self) -> Vec<(&'static str, SettingValue)> {
                vec![$((stringify!($name), settings_table!(@get self, $name, $kind))),*]
            }

            pub fn get(&self, key: &str) -> Option<SettingValue> {
                match key {
                    $(stringify!($name) => Some(settings_table!(@get self, $name, $kind)),)*
                    _ => None,
                }
            }

            /// Sets one field. Flags accept `0`/`1` when given as reals.
            /// Range checks are left to [`ConeSettings::validate`].
            pub fn set(&mut self, key: &str, value: SettingValue) -> Result<(), SettingsError> {
                match key {
                    $(stringify!($name) => {
                        settings_table!(@set self, $name, $kind, key, value);
                        Ok(())
                    })*
                    _ => Err(SettingsError::UnknownKey(key.to_string())),
                }
            }
        }
    };
    (@get $s:ident, $name:ident, real) => { SettingValue::Real($s.$name) };
    (@get $s:ident, $name:ident, flag) => { SettingValue::Flag($s.$name) };
    (@set $s:ident, $name:ident, real, $key:ident, $value:ident) => {
        $s.$name = match $value {
            SettingValue::Real(v) => v,
            SettingValue::Flag(_) => return Err(SettingsError::Invalid {
                key: $key.to_string(),
                message: "expected a number".into(),
            }),
        }
    };
    (@set $s:ident, $name:ident, flag, $key:ident, $value:ident) => {
        $s.$name = match $value {
            SettingValue::Flag(b) => b,
            SettingValue::Real(v) if v == 0.0 => false,
            SettingValue::Real(v) if v == 1.0 => true,
            SettingValue::Real(v) => return Err(SettingsError::Invalid {
                key: $key.to_string(),
                message: format!("expected 0 or 1, got {v}"),
            }),
        }
    };
}

settings_table! {
    diffuse_aperture: real,
    diffuse_offset: real,
    diffuse_step: real,
    specular_aperture: real,
    specular_offset: real,
    specular_step: real,
    occlusion_aperture: real,
    occlusion_offset: real,
    occlusion_step: real,
    shadow_str: real,
    shininess_falloff: real,
    max_dist: real,
    front_cones: flag,
    intermediate_cones: flag,
    side_cones: flag,
    direct_diffuse: flag,
    direct_glossy: flag,
    indirect_diffuse: flag,
    indirect_specular: flag,
    occlusion_enabled: flag,
    ambient: flag,
    normalize_diffuse: flag,
    occlude_specular: flag,
    voxelize_ambient: flag,
}

impl ConeSettings {
    pub const DEFAULT_DIFFUSE_APERTURE: f64 = 0.55;

    /// Defaults scaled to a grid of `resolution` voxels across `bounds`.
    pub fn for_grid(bounds: &Bounds, resolution: usize) -> Self {
        let edge = bounds.size() / resolution as f64;
        Self {
            diffuse_aperture: Self::DEFAULT_DIFFUSE_APERTURE,
            diffuse_offset: 2.0 * edge,
            diffuse_step: 0.5,
            specular_aperture: 0.10,
            specular_offset: 2.0 * edge,
            specular_step: 0.5,
            occlusion_aperture: 0.30,
            occlusion_offset: 2.0 * edge,
            occlusion_step: 1.0 / 3.0,
            shadow_str: 1.0,
            shininess_falloff: 10.0,
            max_dist: bounds.diagonal(),
            front_cones: true,
            intermediate_cones: true,
            side_cones: false,
            direct_diffuse: true,
            direct_glossy: true,
            indirect_diffuse: true,
            indirect_specular: true,
            occlusion_enabled: true,
            ambient: false,
            normalize_diffuse: true,
            occlude_specular: false,
            voxelize_ambient: true,
        }
    }

    pub fn diffuse(&self) -> ConeParams {
        ConeParams {
            aperture: self.diffuse_aperture,
            offset: self.diffuse_offset,
            step: self.diffuse_step,
        }
    }

    pub fn specular(&self) -> ConeParams {
        ConeParams {
            aperture: self.specular_aperture,
            offset: self.specular_offset,
            step: self.specular_step,
        }
    }

    pub fn occlusion(&self) -> ConeParams {
        ConeParams {
            aperture: self.occlusion_aperture,
            offset: self.occlusion_offset,
            step: self.occlusion_step,
        }
    }

    pub fn toggles(&self) -> ConeToggles {
        ConeToggles {
            front: self.front_cones,
            intermediate: self.intermediate_cones,
            side: self.side_cones,
        }
    }

    pub fn cone_count(&self) -> usize {
        self.front_cones as usize
            + 4 * self.intermediate_cones as usize
            + 4 * self.side_cones as usize
    }

    /// Marches [`shade_fragment`] performs for `lights` lights.
    pub fn marches_per_fragment(&self, lights: usize) -> usize {
        let mut n = 0;
        if self.indirect_diffuse {
            n += self.cone_count();
        }
        if self.indirect_specular {
            n += lights;
        }
        if self.occlusion_enabled {
            n += lights;
        }
        n
    }

    pub fn validate(&self) -> Result<(), SettingsError> {
        let bad = |key: &str, message: &str| {
            Err(SettingsError::Invalid {
                key: key.to_string(),
                message: message.to_string(),
            })
        };
        for (family, c) in [
            ("diffuse", self.diffuse()),
            ("specular", self.specular()),
            ("occlusion", self.occlusion()),
        ] {
            if !(c.aperture > 0.0 && c.aperture < PI) {
                return bad(&format!("{family}_aperture"), "must lie in (0, pi)");
            }
            if !(c.offset > 0.0 && c.offset.is_finite()) {
                return bad(&format!("{family}_offset"), "must be positive");
            }
            if !(c.step > 0.0 && c.step <= 1.0) {
                return bad(&format!("{family}_step"), "must lie in (0, 1]");
            }
        }
        if !(self.shadow_str >= 0.0 && self.shadow_str.is_finite()) {
            return bad("shadow_str", "must be non-negative");
        }
        if !(self.shininess_falloff >= 0.0 && self.shininess_falloff.is_finite()) {
            return bad("shininess_falloff", "must be non-negative");
        }
        if !(self.max_dist > 0.0 && self.max_dist.is_finite()) {
            return bad("max_dist", "must be positive");
        }
        Ok(())
    }
}

/// Counts cone marches issued by [`shade_fragment_counted`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConeCounter {
    pub marches: usize,
}

/// Which part of the shading result to return.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShadeComponent {
    Full,
    Occlusion,
    IndirectDiffuse,
    IndirectSpecular,
}

/// Sum of per-light direct Phong terms under the settings' toggles.
pub fn direct_light(
    x: DVec3,
    n: DVec3,
    view_pos: DVec3,
    material: &Material,
    lights: &[PointLight],
    settings: &ConeSettings,
) -> DVec3 {
    let mut sum = DVec3::ZERO;
    for light in lights {
        let terms = phong_terms(x, n, view_pos, material, light);
        sum += terms.combine(
            settings.ambient,
            settings.direct_diffuse,
            settings.direct_glossy,
        );
    }
    sum
}

#[allow(clippy::too_many_arguments)]
pub fn shade_fragment<S: ConeSampler + ?Sized>(
    sampler: &S,
    x: DVec3,
    n: DVec3,
    view_pos: DVec3,
    material: &Material,
    lights: &[PointLight],
    settings: &ConeSettings,
) -> DVec3 {
    let mut counter = ConeCounter::default();
    shade_fragment_counted(
        sampler,
        x,
        n,
        view_pos,
        material,
        lights,
        settings,
        ShadeComponent::Full,
        &mut counter,
    )
}

#[allow(clippy::too_many_arguments)]
pub fn shade_fragment_counted<S: ConeSampler + ?Sized>(
    sampler: &S,
    x: DVec3,
    n: DVec3,
    view_pos: DVec3,
    material: &Material,
    lights: &[PointLight],
    settings: &ConeSettings,
    component: ShadeComponent,
    counter: &mut ConeCounter,
) -> DVec3 {
    let mut visibility = Vec::with_capacity(lights.len());
    if settings.occlusion_enabled {
        let origin = x + settings.occlusion_offset * n;
        for light in lights {
            counter.marches += 1;
            visibility.push(trace_occlusion(sampler, origin, light.position, settings));
        }
    } else {
        visibility.resize(lights.len(), 1.0);
    }
    let o_min = visibility.iter().copied().fold(1.0f64, f64::min);
    if component == ShadeComponent::Occlusion {
        return DVec3::splat(o_min);
    }

    let mut diffuse = DVec3::ZERO;
    if settings.indirect_diffuse && component != ShadeComponent::IndirectSpecular {
        let origin = x + settings.diffuse_offset * n;
        let dirs = cone_directions(n, settings.toggles());
        for d in &dirs {
            counter.marches += 1;
            diffuse += trace_diffuse(sampler, origin, *d, settings);
        }
        if settings.normalize_diffuse && !dirs.is_empty() {
            diffuse /= dirs.len() as f64;
        }
        diffuse *= o_min * material.diffuse_str * material.color;
    }
    if component == ShadeComponent::IndirectDiffuse {
        return diffuse.clamp(DVec3::ZERO, DVec3::ONE);
    }

    let mut specular = DVec3::ZERO;
    if settings.indirect_specular {
        let origin = x + settings.specular_offset * n;
        let view_dir = (x - view_pos).normalize_or_zero();
        for (light, vis) in lights.iter().zip(&visibility) {
            counter.marches += 1;
            let l = (light.position - x).normalize_or_zero();
            let mut s = trace_specular(sampler, origin, view_dir, n, l, material, settings);
            if settings.occlude_specular {
                s *= *vis;
            }
            specular += s;
        }
    }
    if component == ShadeComponent::IndirectSpecular {
        return specular.clamp(DVec3::ZERO, DVec3::ONE);
    }

    let mut direct = DVec3::ZERO;
    for (light, vis) in lights.iter().zip(&visibility) {
        let terms = phong_terms(x, n, view_pos, material, light);
        direct += *vis
            * terms.combine(
                settings.ambient,
                settings.direct_diffuse,
                settings.direct_glossy,
            );
    }
    (diffuse + specular + direct).clamp(DVec3::ZERO, DVec3::ONE)
}
