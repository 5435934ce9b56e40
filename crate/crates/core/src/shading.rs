//! Metallic-roughness shading: Cook-Torrance specular with a GGX normal
//! distribution, Schlick Fresnel and Schlick-GGX geometry terms, a
//! Lambertian diffuse lobe, and the colour pipeline (sRGB transfer
//! functions, Reinhard tone mapping).
//!
//! Conventions: `omega_i` points from the surface toward the light and
//! `omega_o` toward the viewer. Material roughness `r` is remapped to
//! `alpha = r^2` before it reaches the D and G terms.

use std::f64::consts::PI;

use crate::math::{Rgb, Vec3};
use crate::scene::MaterialPbr;

/// Guard added to the specular denominator.
pub const SPECULAR_EPSILON: f64 = 1e-6;

/// Normal-incidence reflectance of dielectrics.
pub const DIELECTRIC_F0: f64 = 0.04;

/// Smallest alpha fed to the distribution; avoids a delta lobe at roughness 0.
const MIN_ALPHA: f64 = 1e-4;

/// Inputs of the specular term. The halfway vector is always derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrdfParams {
    n: Vec3,
    omega_i: Vec3,
    omega_o: Vec3,
    h: Vec3,
    f0: Rgb,
    alpha: f64,
}

impl BrdfParams {
    /// Normalises the three directions and computes `h = normalize(omega_i + omega_o)`.
    pub fn new(n: Vec3, omega_i: Vec3, omega_o: Vec3, f0: Rgb, alpha: f64) -> Self {
        let omega_i = omega_i.normalize();
        let omega_o = omega_o.normalize();
        BrdfParams {
            n: n.normalize(),
            omega_i,
            omega_o,
            h: (omega_i + omega_o).normalize(),
            f0: f0.clamp(0.0, 1.0),
            alpha: alpha.clamp(MIN_ALPHA, 1.0),
        }
    }

    pub fn n(&self) -> Vec3 {
        self.n
    }
    pub fn omega_i(&self) -> Vec3 {
        self.omega_i
    }
    pub fn omega_o(&self) -> Vec3 {
        self.omega_o
    }
    pub fn h(&self) -> Vec3 {
        self.h
    }
    pub fn f0(&self) -> Rgb {
        self.f0
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Same parameters with light and view directions exchanged.
    pub fn swapped(&self) -> Self {
        BrdfParams::new(self.n, self.omega_o, self.omega_i, self.f0, self.alpha)
    }
}

/// One shaded point: position, shading normal, material and direction to the viewer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadingSample {
    pub position: Vec3,
    pub normal: Vec3,
    pub material: MaterialPbr,
    pub view: Vec3,
}

impl ShadingSample {
    /// Builds a sample, flipping the normal into the viewer's hemisphere.
    pub fn new(position: Vec3, normal: Vec3, material: MaterialPbr, view: Vec3) -> Self {
        let view = view.normalize();
        let mut normal = normal.normalize();
        if normal.dot(view) < 0.0 {
            normal = -normal;
        }
        ShadingSample { position, normal, material, view }
    }
}

/// Trowbridge-Reitz (GGX) normal distribution.
pub fn ggx_ndf(n_dot_h: f64, alpha: f64) -> f64 {
    let c = n_dot_h.clamp(0.0, 1.0);
    let a2 = alpha.clamp(MIN_ALPHA, 1.0).powi(2);
    let d = c * c * (a2 - 1.0) + 1.0;
    a2 / (PI * d * d)
}

/// Schlick's Fresnel approximation.
pub fn fresnel_schlick(cos_theta: f64, f0: Rgb) -> Rgb {
    let m = 1.0 - cos_theta.clamp(0.0, 1.0);
    let m5 = m * m * m * m * m;
    f0 + (Vec3::ONE - f0) * m5
}

/// Direct-lighting remap of the Schlick-GGX `k` parameter.
pub fn geometry_k(alpha: f64) -> f64 {
    (alpha + 1.0).powi(2) / 8.0
}

fn schlick_g1(x: f64, k: f64) -> f64 {
    x / (x * (1.0 - k) + k)
}

/// Smith masking-shadowing built from two Schlick-GGX factors.
pub fn smith_g(n_dot_v: f64, n_dot_l: f64, alpha: f64) -> f64 {
    if n_dot_v <= 0.0 || n_dot_l <= 0.0 {
        return 0.0;
    }
    let k = geometry_k(alpha.clamp(MIN_ALPHA, 1.0));
    schlick_g1(n_dot_v.min(1.0), k) * schlick_g1(n_dot_l.min(1.0), k)
}

/// `D · F · G / (4 (omega_o·n)(omega_i·n))`; zero when either direction is below the horizon.
pub fn cook_torrance_specular(p: &BrdfParams) -> Rgb {
    let n_dot_l = p.n.dot(p.omega_i);
    let n_dot_v = p.n.dot(p.omega_o);
    if n_dot_l <= 0.0 || n_dot_v <= 0.0 {
        return Vec3::ZERO;
    }
    let d = ggx_ndf(p.n.dot(p.h), p.alpha);
    let f = fresnel_schlick(p.h.dot(p.omega_i), p.f0);
    let g = smith_g(n_dot_v, n_dot_l, p.alpha);
    f * (d * g / (4.0 * n_dot_v * n_dot_l + SPECULAR_EPSILON))
}

/// Normal-incidence reflectance for the metallic-roughness workflow.
pub fn derive_f0(base_color: Rgb, metallic: f64) -> Rgb {
    Vec3::splat(DIELECTRIC_F0).lerp(base_color, metallic.clamp(0.0, 1.0)).clamp(0.0, 1.0)
}

/// Roughness to distribution alpha.
pub fn roughness_to_alpha(roughness: f64) -> f64 {
    let r = roughness.clamp(0.0, 1.0);
    r * r
}

/// A point light as seen from the shaded point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightSample {
    pub position: Vec3,
    pub intensity: Rgb,
    /// 0 when occluded, 1 when visible.
    pub visibility: f64,
}

/// Outgoing radiance from direct point lights, inverse-square falloff.
pub fn shade_direct(s: &ShadingSample, lights: &[LightSample]) -> Rgb {
    let m = &s.material;
    let f0 = derive_f0(m.base_color, m.metallic);
    let alpha = roughness_to_alpha(m.roughness);
    let diffuse = m.base_color / PI;
    let mut out = Vec3::ZERO;
    for light in lights {
        if light.visibility <= 0.0 {
            continue;
        }
        let to_light = light.position - s.position;
        let dist2 = to_light.length_squared();
        if dist2 <= 0.0 {
            continue;
        }
        let omega_i = to_light / dist2.sqrt();
        let n_dot_l = s.normal.dot(omega_i);
        if n_dot_l <= 0.0 {
            continue;
        }
        let params = BrdfParams::new(s.normal, omega_i, s.view, f0, alpha);
        let f = fresnel_schlick(params.h.dot(omega_i), f0);
        let kd = (Vec3::ONE - f) * (1.0 - m.metallic);
        let brdf = kd.mul_elem(diffuse) + cook_torrance_specular(&params);
        let irradiance = light.intensity * (light.visibility * n_dot_l / dist2);
        out += brdf.mul_elem(irradiance);
    }
    out.max(Vec3::ZERO)
}

pub fn srgb_to_linear_channel(c: f64) -> f64 {
    let c = c.clamp(0.0, 1.0);
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

pub fn linear_to_srgb_channel(c: f64) -> f64 {
    let c = c.clamp(0.0, 1.0);
    if c <= 0.0031308 {
        c * 12.92
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

pub fn srgb_to_linear(c: Rgb) -> Rgb {
    c.map(srgb_to_linear_channel)
}

pub fn linear_to_srgb(c: Rgb) -> Rgb {
    c.map(linear_to_srgb_channel)
}

/// `c / (1 + c)` per channel.
pub fn reinhard_tonemap(c: Rgb) -> Rgb {
    c.map(|x| {
        let x = x.max(0.0);
        x / (1.0 + x)
    })
}

/// Linear radiance to display value: tone map, then gamma-encode.
pub fn display_encode(c: Rgb) -> Rgb {
    linear_to_srgb(reinhard_tonemap(c))
}
