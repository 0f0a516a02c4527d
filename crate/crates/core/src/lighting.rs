//! Phong direct illumination with point lights.

use glam::DVec3;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LightingError {
    #[error("invalid material: {0}")]
    Material(String),
    #[error("invalid light: {0}")]
    Light(String),
}

/// Phong surface description `{c_s, c_d, c_a, alpha}` plus an RGB color.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub color: DVec3,
    pub ambient_str: f64,
    pub diffuse_str: f64,
    pub specular_str: f64,
    pub shininess: f64,
}

impl Default for Material {
    fn default() -> Self {
        Self {
            color: DVec3::splat(0.8),
            ambient_str: 0.1,
            diffuse_str: 0.7,
            specular_str: 0.2,
            shininess: 32.0,
        }
    }
}

impl Material {
    pub const MAX_SHININESS: f64 = 256.0;

    pub fn validate(&self) -> Result<(), LightingError> {
        let strengths = [
            self.ambient_str,
            self.diffuse_str,
            self.specular_str,
            self.shininess,
        ];
        if strengths.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(LightingError::Material(
                "strengths and shininess must be finite and non-negative".into(),
            ));
        }
        if !self.color.is_finite()
            || self.color.min_element() < 0.0
            || self.color.max_element() > 1.0
        {
            return Err(LightingError::Material("color must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Shininess beyond 256 is accepted but unusual.
    pub fn shininess_in_range(&self) -> bool {
        self.shininess <= Self::MAX_SHININESS
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointLight {
    pub position: DVec3,
    pub color: DVec3,
    pub att_constant: f64,
    pub att_linear: f64,
    pub att_quadratic: f64,
}

impl PointLight {
    pub const DEFAULT_ATTENUATION: [f64; 3] = [1.0, 0.09, 0.032];

    pub fn new(position: DVec3) -> Self {
        let [c, l, q] = Self::DEFAULT_ATTENUATION;
        Self {
            position,
            color: DVec3::ONE,
            att_constant: c,
            att_linear: l,
            att_quadratic: q,
        }
    }

    pub fn validate(&self) -> Result<(), LightingError> {
        let k = [self.att_constant, self.att_linear, self.att_quadratic];
        if k.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(LightingError::Light(
                "attenuation constants must be non-negative".into(),
            ));
        }
        if k.iter().sum::<f64>() <= 0.0 {
            return Err(LightingError::Light(
                "attenuation constants must not all be zero".into(),
            ));
        }
        if !self.color.is_finite() || self.color.min_element() < 0.0 {
            return Err(LightingError::Light(
                "light color must be non-negative".into(),
            ));
        }
        if !self.position.is_finite() {
            return Err(LightingError::Light("light position must be finite".into()));
        }
        Ok(())
    }
}

pub fn attenuation(light: &PointLight, d: f64) -> f64 {
    1.0 / (light.att_constant + light.att_linear * d + light.att_quadratic * d * d)
}

pub fn reflect(incident: DVec3, n: DVec3) -> DVec3 {
    incident - 2.0 * incident.dot(n) * n
}

/// The three Phong components of one light, each already attenuated and
/// multiplied by the material color.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhongTerms {
    pub ambient: DVec3,
    pub diffuse: DVec3,
    pub glossy: DVec3,
    /// The shaded point coincides with the light; only ambient is defined.
    pub degenerate: bool,
}

impl PhongTerms {
    pub fn combine(&self, ambient: bool, diffuse: bool, glossy: bool) -> DVec3 {
        let mut out = DVec3::ZERO;
        if ambient {
            out += self.ambient;
        }
        if diffuse {
            out += self.diffuse;
        }
        if glossy {
            out += self.glossy;
        }
        out
    }
}

pub fn phong_terms(
    x: DVec3,
    n: DVec3,
    view_pos: DVec3,
    m: &Material,
    light: &PointLight,
) -> PhongTerms {
    let to_light = light.position - x;
    let distance = to_light.length();
    let att = attenuation(light, distance);
    let ambient = m.ambient_str * light.color * m.color * att;
    if distance <= 1e-12 {
        return PhongTerms {
            ambient,
            degenerate: true,
            ..PhongTerms::default()
        };
    }
    let l = to_light / distance;
    let n_dot_l = n.dot(l);
    let diffuse = m.diffuse_str * n_dot_l.max(0.0) * light.color * m.color * att;

    let to_view = view_pos - x;
    let glossy = if n_dot_l > 0.0 && to_view.length() > 1e-12 {
        let omega = to_view.normalize();
        let r = reflect(-l, n);
        let brdf = omega.dot(r).max(0.0).powf(m.shininess);
        m.specular_str * brdf * light.color * m.color * att
    } else {
        DVec3::ZERO
    };
    PhongTerms {
        ambient,
        diffuse,
        glossy,
        degenerate: false,
    }
}

pub fn phong_direct(
    x: DVec3,
    n: DVec3,
    view_pos: DVec3,
    m: &Material,
    light: &PointLight,
    include_ambient: bool,
    include_glossy: bool,
) -> DVec3 {
    phong_terms(x, n, view_pos, m, light).combine(include_ambient, true, include_glossy)
}
