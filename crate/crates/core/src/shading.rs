//! Reference shading models used while baking training data.
//!
//! `SurfaceMaterial` is a diffuse + normalized-Phong reflector with an optional
//! translucency proxy: a diffuse transmission lobe locally, plus an internal
//! random walk (driven by the path tracer in [`crate::integrator`]) through the
//! closed volume behind the surface with per-channel mean free paths.
//!
//! `FiberMaterial` is a Kajiya-Kay style longitudinal Gaussian lobe times an
//! azimuthal factor that varies across the fiber width:
//!
//! ```text
//! f = base_color * M(sin_i + sin_o) / (2 pi) * (1 + gain * g(h, phi)) / (1 + gain)
//! g(h, phi) = (1 - h^2) * (1 + cos phi) / 2
//! ```
//!
//! where `phi` is the azimuth between the light and view directions around the
//! tangent. The fiber model is not reciprocal in general and does not claim
//! to be; only the energy bound is guaranteed.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::math::{Rgb, Vec3};
use crate::neural::NeuralAsset;
use crate::sampling::{cosine_hemisphere, to_world, uniform_sphere, UNIFORM_SPHERE_PDF};

const MAX_PHONG_EXPONENT: f64 = 1e4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Albedo {
    Constant { color: Rgb },
    /// Solid checkerboard in object space with cells of edge `scale`.
    Checker { a: Rgb, b: Rgb, scale: f64 },
}

impl Albedo {
    pub fn at(&self, p: Vec3) -> Rgb {
        match self {
            Albedo::Constant { color } => *color,
            Albedo::Checker { a, b, scale } => {
                let k = (p.x / scale).floor() + (p.y / scale).floor() + (p.z / scale).floor();
                if (k as i64).rem_euclid(2) == 0 {
                    *a
                } else {
                    *b
                }
            }
        }
    }

    fn max_channel(&self) -> f64 {
        match self {
            Albedo::Constant { color } => color.max_component(),
            Albedo::Checker { a, b, .. } => a.max_component().max(b.max_component()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceMaterial {
    pub albedo: Albedo,
    /// Phong lobe roughness in `(0, 1]`; exponent `2 / r^2 - 2`.
    pub roughness: f64,
    /// Weight of the white glossy lobe in `[0, 1]`.
    #[serde(default)]
    pub specular: f64,
    #[serde(default)]
    pub translucency_weight: f64,
    /// Mean free paths (world units) inside the translucent volume.
    #[serde(default = "default_mfp")]
    pub translucency_mfp: Rgb,
}

fn default_mfp() -> Rgb {
    Rgb::splat(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberMaterial {
    pub base_color: Rgb,
    pub longitudinal_roughness: f64,
    pub azimuthal_gain: f64,
}

#[derive(Debug, Clone)]
pub enum Material {
    Surface(SurfaceMaterial),
    Fiber(FiberMaterial),
    Neural(Arc<NeuralAsset>),
}

/// Shading frame at a hit, expressed in whatever space the directions use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShadingFrame {
    Surface { normal: Vec3 },
    Fiber { tangent: Vec3, h: f64 },
}

impl ShadingFrame {
    /// Projected-solid-angle factor for `wi`: `|n . wi|` on surfaces, the
    /// cosine of the longitudinal angle on fibers.
    pub fn cos_factor(&self, wi: Vec3) -> f64 {
        match *self {
            ShadingFrame::Surface { normal } => normal.dot(wi).abs(),
            ShadingFrame::Fiber { tangent, .. } => {
                let s = tangent.dot(wi);
                (1.0 - s * s).max(0.0).sqrt()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsdfSample {
    pub wi: Vec3,
    pub pdf: f64,
    /// `f(wi, wo) * cos_factor(wi)`; `value / pdf` estimates reflectance.
    pub value: Rgb,
}

impl BsdfSample {
    pub const ZERO: BsdfSample = BsdfSample { wi: Vec3::Z, pdf: 1.0, value: Rgb::BLACK };
}

fn check_unit(v: Vec3) {
    debug_assert!((v.length() - 1.0).abs() < 1e-6, "direction not unit length: {v:?}");
}

impl SurfaceMaterial {
    pub fn lambertian(albedo: Rgb) -> Self {
        SurfaceMaterial {
            albedo: Albedo::Constant { color: albedo },
            roughness: 1.0,
            specular: 0.0,
            translucency_weight: 0.0,
            translucency_mfp: default_mfp(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.roughness > 0.0 && self.roughness <= 1.0) {
            return Err(format!("roughness {} outside (0, 1]", self.roughness));
        }
        for (name, v) in [("specular", self.specular), ("translucency_weight", self.translucency_weight)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} {v} outside [0, 1]"));
            }
        }
        if self.albedo.max_channel() > 1.0 {
            return Err("albedo exceeds 1 in some channel".into());
        }
        if self.translucency_mfp.0.iter().any(|&m| !(m > 0.0)) {
            return Err("translucency_mfp must be positive".into());
        }
        Ok(())
    }

    fn exponent(&self) -> f64 {
        (2.0 / (self.roughness * self.roughness) - 2.0).min(MAX_PHONG_EXPONENT)
    }

    pub fn is_translucent(&self) -> bool {
        self.translucency_weight > 0.0
    }

    /// BSDF value for unit `n`, `wi`, `wo`; `p` addresses the albedo texture.
    pub fn eval(&self, p: Vec3, n: Vec3, wi: Vec3, wo: Vec3) -> Rgb {
        check_unit(n);
        check_unit(wi);
        check_unit(wo);
        let cos_i = n.dot(wi);
        let cos_o = n.dot(wo);
        let albedo = self.albedo.at(p);
        let diffuse = (1.0 - self.specular) * albedo / PI;
        if cos_i > 0.0 && cos_o > 0.0 {
            let mut f = diffuse * (1.0 - self.translucency_weight);
            if self.specular > 0.0 {
                let e = self.exponent();
                let c = wo.reflect(n).dot(wi).max(0.0);
                f += Rgb::splat(self.specular * (e + 2.0) / (2.0 * PI) * c.powf(e));
            }
            f
        } else if cos_i * cos_o < 0.0 {
            diffuse * self.translucency_weight
        } else {
            Rgb::BLACK
        }
    }

    fn lobe_probs(&self) -> (f64, f64, f64) {
        let spec = self.specular;
        let trans = (1.0 - spec) * self.translucency_weight;
        (1.0 - spec - trans, trans, spec)
    }

    pub fn pdf(&self, n: Vec3, wi: Vec3, wo: Vec3) -> f64 {
        let (p_diff, p_trans, p_spec) = self.lobe_probs();
        let cos_i = n.dot(wi);
        let mut pdf = 0.0;
        if cos_i > 0.0 {
            pdf += p_diff * cos_i / PI;
        } else {
            pdf += p_trans * (-cos_i) / PI;
        }
        if p_spec > 0.0 {
            let e = self.exponent();
            let c = wo.reflect(n).dot(wi);
            if c > 0.0 {
                pdf += p_spec * (e + 1.0) / (2.0 * PI) * c.powf(e);
            }
        }
        pdf
    }

    /// `n` must face `wo` (the caller flips it for back-facing hits).
    pub fn sample(&self, p: Vec3, n: Vec3, wo: Vec3, rng: &mut impl Rng) -> BsdfSample {
        let (p_diff, p_trans, _) = self.lobe_probs();
        for _ in 0..8 {
            let u: f64 = rng.random();
            let (u1, u2): (f64, f64) = (rng.random(), rng.random());
            let wi = if u < p_diff {
                to_world(cosine_hemisphere(u1, u2), n)
            } else if u < p_diff + p_trans {
                to_world(cosine_hemisphere(u1, u2), -n)
            } else {
                let e = self.exponent();
                let cos_a = u1.powf(1.0 / (e + 1.0));
                let sin_a = (1.0 - cos_a * cos_a).max(0.0).sqrt();
                let phi = 2.0 * PI * u2;
                to_world(Vec3::new(sin_a * phi.cos(), sin_a * phi.sin(), cos_a), wo.reflect(n))
            };
            let pdf = self.pdf(n, wi, wo);
            if pdf > 0.0 && pdf.is_finite() && (wi.length() - 1.0).abs() < 1e-6 {
                let value = self.eval(p, n, wi, wo) * n.dot(wi).abs();
                return BsdfSample { wi, pdf, value };
            }
        }
        BsdfSample::ZERO
    }
}

/// Convenience wrapper matching the free-function form of the model.
pub fn eval_surface_bsdf(material: &SurfaceMaterial, n: Vec3, wi: Vec3, wo: Vec3) -> Rgb {
    material.eval(Vec3::ZERO, n, wi, wo)
}

impl FiberMaterial {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.longitudinal_roughness > 0.0 && self.longitudinal_roughness <= 1.0) {
            return Err(format!("longitudinal_roughness {} outside (0, 1]", self.longitudinal_roughness));
        }
        if !(self.azimuthal_gain >= 0.0) {
            return Err("azimuthal_gain must be non-negative".into());
        }
        if self.base_color.max_component() > 1.0 || self.base_color.0.iter().any(|&c| c < 0.0) {
            return Err("base_color must lie in [0, 1]".into());
        }
        Ok(())
    }

    /// Width-dependent azimuthal term `g(h, phi)` in `[0, 1]`.
    pub fn azimuthal_term(h: f64, tangent: Vec3, wi: Vec3, wo: Vec3) -> f64 {
        let pi_ = wi - tangent * tangent.dot(wi);
        let po = wo - tangent * tangent.dot(wo);
        let (li, lo) = (pi_.length(), po.length());
        let cos_phi = if li > 1e-9 && lo > 1e-9 { (pi_.dot(po) / (li * lo)).clamp(-1.0, 1.0) } else { 1.0 };
        (1.0 - h * h) * 0.5 * (1.0 + cos_phi)
    }

    pub fn eval(&self, tangent: Vec3, h: f64, wi: Vec3, wo: Vec3) -> Rgb {
        check_unit(tangent);
        check_unit(wi);
        check_unit(wo);
        debug_assert!((-1.0..=1.0).contains(&h), "h outside [-1, 1]: {h}");
        let beta = self.longitudinal_roughness;
        let s = tangent.dot(wi) + tangent.dot(wo);
        let m = (-s * s / (2.0 * beta * beta)).exp() / ((2.0 * PI).sqrt() * beta);
        let gain = self.azimuthal_gain;
        let a = (1.0 + gain * Self::azimuthal_term(h, tangent, wi, wo)) / (1.0 + gain);
        self.base_color * (m * a / (2.0 * PI))
    }

    /// Uniform-sphere sampling, pdf `1 / (4 pi)`.
    pub fn sample(&self, tangent: Vec3, h: f64, wo: Vec3, rng: &mut impl Rng) -> BsdfSample {
        let wi = uniform_sphere(rng.random(), rng.random());
        let frame = ShadingFrame::Fiber { tangent, h };
        BsdfSample { wi, pdf: UNIFORM_SPHERE_PDF, value: self.eval(tangent, h, wi, wo) * frame.cos_factor(wi) }
    }
}

pub fn eval_fiber_bsdf(material: &FiberMaterial, d: Vec3, h: f64, wi: Vec3, wo: Vec3) -> Rgb {
    material.eval(d, h, wi, wo)
}

/// Samples the classical material at a shading frame. `p` is the object-space
/// position used for textures.
pub fn sample_bsdf(material: &Material, p: Vec3, frame: ShadingFrame, wo: Vec3, rng: &mut impl Rng) -> BsdfSample {
    match (material, frame) {
        (Material::Surface(m), ShadingFrame::Surface { normal }) => {
            let n = if normal.dot(wo) < 0.0 { -normal } else { normal };
            m.sample(p, n, wo, rng)
        }
        (Material::Fiber(m), ShadingFrame::Fiber { tangent, h }) => m.sample(tangent, h, wo, rng),
        _ => BsdfSample::ZERO,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{sample_uniform_sphere, stream_rng};

    fn random_unit(rng: &mut impl Rng) -> Vec3 {
        sample_uniform_sphere(rng)
    }

    fn glossy_translucent() -> SurfaceMaterial {
        SurfaceMaterial {
            albedo: Albedo::Constant { color: Rgb::new(0.9, 0.6, 0.3) },
            roughness: 0.3,
            specular: 0.2,
            translucency_weight: 0.4,
            translucency_mfp: Rgb::new(0.1, 0.2, 0.3),
        }
    }

    fn fiber(gain: f64) -> FiberMaterial {
        FiberMaterial { base_color: Rgb::new(0.8, 0.5, 0.3), longitudinal_roughness: 0.3, azimuthal_gain: gain }
    }

    #[test]
    fn lambert_is_albedo_over_pi() {
        let m = SurfaceMaterial::lambertian(Rgb::new(0.2, 0.5, 0.8));
        let mut rng = stream_rng(1, 0, 0);
        let n = Vec3::Z;
        for _ in 0..100 {
            let wi = to_world(cosine_hemisphere(rng.random(), rng.random()), n);
            let wo = to_world(cosine_hemisphere(rng.random(), rng.random()), n);
            let f = eval_surface_bsdf(&m, n, wi, wo);
            for c in 0..3 {
                assert!((f.0[c] - [0.2, 0.5, 0.8][c] / PI).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn below_surface_without_translucency_is_black() {
        let m = SurfaceMaterial { translucency_weight: 0.0, ..glossy_translucent() };
        let f = eval_surface_bsdf(&m, Vec3::Z, Vec3::new(0.0, 0.6, -0.8), Vec3::Z);
        assert!(f.is_black());
        let t = eval_surface_bsdf(&glossy_translucent(), Vec3::Z, Vec3::new(0.0, 0.6, -0.8), Vec3::Z);
        assert!(t.0.iter().all(|&c| c > 0.0));
    }

    #[test]
    fn surface_bsdf_is_reciprocal() {
        let m = glossy_translucent();
        let mut rng = stream_rng(2, 0, 0);
        let n = Vec3::new(0.3, -0.2, 0.9).normalized();
        let mut worst: f64 = 0.0;
        for _ in 0..10_000 {
            let wi = random_unit(&mut rng);
            let wo = random_unit(&mut rng);
            let a = eval_surface_bsdf(&m, n, wi, wo);
            let b = eval_surface_bsdf(&m, n, wo, wi);
            for c in 0..3 {
                assert!(a.0[c] >= 0.0 && a.0[c].is_finite());
                worst = worst.max((a.0[c] - b.0[c]).abs());
            }
        }
        assert!(worst < 1e-12, "max asymmetry {worst}");
    }

    #[test]
    fn fiber_gain_zero_ignores_offset() {
        let m = fiber(0.0);
        let d = Vec3::Y;
        let wi = Vec3::new(0.3, 0.4, 0.5).normalized();
        let wo = Vec3::new(-0.6, -0.1, 0.2).normalized();
        let base = eval_fiber_bsdf(&m, d, 0.0, wi, wo);
        for k in 0..=20 {
            let h = -1.0 + k as f64 * 0.1;
            assert_eq!(eval_fiber_bsdf(&m, d, h.clamp(-1.0, 1.0), wi, wo), base);
        }
    }

    #[test]
    fn fiber_offset_changes_value_with_gain() {
        let m = fiber(1.0);
        let d = Vec3::Y;
        // wi and wo share an azimuth, so cos(phi) = 1.
        let wi = Vec3::new(0.0, 0.3, 1.0).normalized();
        let wo = Vec3::new(0.0, -0.2, 1.0).normalized();
        let a = eval_fiber_bsdf(&m, d, 0.0, wi, wo);
        let b = eval_fiber_bsdf(&m, d, 0.9, wi, wo);
        for c in 0..3 {
            assert!((a.0[c] - b.0[c]).abs() / a.0[c] >= 0.05);
        }
    }

    #[test]
    fn fiber_longitudinal_peak_at_mirror_inclination() {
        let m = fiber(1.0);
        let d = Vec3::Y;
        let theta_i: f64 = 0.4;
        let wi = Vec3::new(0.0, theta_i.sin(), theta_i.cos());
        // Scan wo inclination in the same azimuthal plane.
        let mut best = (f64::NEG_INFINITY, 0.0);
        for k in 0..=2000 {
            let theta_o = -PI / 2.0 + PI * k as f64 / 2000.0;
            let wo = Vec3::new(0.0, theta_o.sin(), theta_o.cos());
            let v = eval_fiber_bsdf(&m, d, 0.3, wi, wo).0[0];
            if v > best.0 {
                best = (v, theta_o);
            }
        }
        assert!((best.1 + theta_i).abs() < 2.0 * PI / 2000.0, "peak at {}", best.1);
    }

    #[test]
    fn fiber_sampling_is_uniform_sphere() {
        let m = fiber(1.0);
        let mut rng = stream_rng(3, 0, 0);
        let s = m.sample(Vec3::Y, 0.2, Vec3::Z, &mut rng);
        assert_eq!(s.pdf, 1.0 / (4.0 * PI));
        assert!((s.wi.length() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lambert_sample_pdf_is_cosine() {
        let m = SurfaceMaterial::lambertian(Rgb::splat(1.0));
        let mut rng = stream_rng(4, 0, 0);
        for _ in 0..100 {
            let s = m.sample(Vec3::ZERO, Vec3::Z, Vec3::new(0.1, 0.0, 1.0).normalized(), &mut rng);
            assert!((s.pdf - s.wi.z / PI).abs() < 1e-12);
        }
    }

    #[test]
    fn white_furnace_lambert() {
        let m = SurfaceMaterial::lambertian(Rgb::splat(1.0));
        let mut rng = stream_rng(5, 0, 0);
        let n = 1_000_000;
        let wo = Vec3::new(0.2, 0.1, 1.0).normalized();
        let mut sum = 0.0;
        for _ in 0..n {
            let s = m.sample(Vec3::ZERO, Vec3::Z, wo, &mut rng);
            sum += s.value.0[0] / s.pdf;
        }
        let mean = sum / n as f64;
        assert!((mean - 1.0).abs() < 0.005, "{mean}");
    }

    /// Reflected energy with unit incident radiance from every direction,
    /// estimated by uniform sphere sampling (independent of the lobe samplers).
    fn energy(f: impl Fn(Vec3) -> (Rgb, f64), rng: &mut impl Rng, n: usize) -> ([f64; 3], [f64; 3]) {
        let mut sum = [0.0; 3];
        let mut sq = [0.0; 3];
        for _ in 0..n {
            let wi = sample_uniform_sphere(rng);
            let (v, cos) = f(wi);
            for c in 0..3 {
                let x = v.0[c] * cos / UNIFORM_SPHERE_PDF;
                sum[c] += x;
                sq[c] += x * x;
            }
        }
        let mean = sum.map(|s| s / n as f64);
        let mut sigma = [0.0; 3];
        for c in 0..3 {
            sigma[c] = ((sq[c] / n as f64 - mean[c] * mean[c]) / n as f64).sqrt();
        }
        (mean, sigma)
    }

    #[test]
    fn energy_bounded_for_both_models() {
        let mut rng = stream_rng(6, 0, 0);
        let white = SurfaceMaterial { albedo: Albedo::Constant { color: Rgb::WHITE }, ..glossy_translucent() };
        for wo in [Vec3::Z, Vec3::new(0.9, 0.0, 0.2).normalized()] {
            let (mean, sigma) = energy(|wi| (eval_surface_bsdf(&white, Vec3::Z, wi, wo), wi.z.abs()), &mut rng, 1_000_000);
            for c in 0..3 {
                assert!(mean[c] - 3.0 * sigma[c] <= 1.0, "surface energy {mean:?}");
            }
        }
        let f = FiberMaterial { base_color: Rgb::WHITE, longitudinal_roughness: 0.2, azimuthal_gain: 2.0 };
        let frame = ShadingFrame::Fiber { tangent: Vec3::Y, h: 0.0 };
        for wo in [Vec3::Z, Vec3::new(0.0, 0.7, 0.7).normalized()] {
            let (mean, sigma) = energy(|wi| (f.eval(Vec3::Y, 0.0, wi, wo), frame.cos_factor(wi)), &mut rng, 1_000_000);
            for c in 0..3 {
                assert!(mean[c] - 3.0 * sigma[c] <= 1.0, "fiber energy {mean:?}");
            }
        }
    }
}
