use std::f64::consts::PI;

use rand::Rng;

use crate::geometry::Ray;
use crate::math::{Rgb, Vec3};

/// Emitters. Directions point from the shading point toward the light.
#[derive(Debug, Clone, PartialEq)]
pub enum Light {
    /// Distant light delivering `irradiance` on a surface facing `direction`.
    Directional { direction: Vec3, irradiance: Rgb },
    Point { position: Vec3, intensity: Rgb },
    Rect(RectLight),
    Environment(EnvironmentLight),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightSample {
    pub wi: Vec3,
    /// Distance to the sampled point; infinite for distant lights.
    pub distance: f64,
    /// Irradiance for delta lights, `radiance / pdf` otherwise.
    pub weight: Rgb,
    /// Solid-angle pdf; 1 for delta lights.
    pub pdf: f64,
    pub is_delta: bool,
}

impl Light {
    pub fn directional(direction: Vec3, irradiance: Rgb) -> Light {
        Light::Directional { direction: direction.normalized(), irradiance }
    }

    pub fn is_delta(&self) -> bool {
        matches!(self, Light::Directional { .. } | Light::Point { .. })
    }

    pub fn sample(&self, p: Vec3, rng: &mut impl Rng) -> Option<LightSample> {
        match self {
            Light::Directional { direction, irradiance } => Some(LightSample {
                wi: *direction,
                distance: f64::INFINITY,
                weight: *irradiance,
                pdf: 1.0,
                is_delta: true,
            }),
            Light::Point { position, intensity } => {
                let d = *position - p;
                let r2 = d.length_squared();
                if r2 == 0.0 {
                    return None;
                }
                let r = r2.sqrt();
                Some(LightSample { wi: d / r, distance: r, weight: *intensity / r2, pdf: 1.0, is_delta: true })
            }
            Light::Rect(rect) => rect.sample(p, rng),
            Light::Environment(env) => env.sample(rng),
        }
    }

    /// Solid-angle pdf with which [`Light::sample`] would produce `wi` from `p`.
    pub fn pdf(&self, p: Vec3, wi: Vec3) -> f64 {
        match self {
            Light::Directional { .. } | Light::Point { .. } => 0.0,
            Light::Rect(rect) => rect.pdf(p, wi),
            Light::Environment(env) => env.pdf(wi),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectLight {
    pub corner: Vec3,
    pub edge_u: Vec3,
    pub edge_v: Vec3,
    /// Emitted on the side of `edge_u x edge_v`.
    pub radiance: Rgb,
}

impl RectLight {
    fn normal_area(&self) -> (Vec3, f64) {
        let c = self.edge_u.cross(self.edge_v);
        let a = c.length();
        (c / a, a)
    }

    /// Ray parameter of the hit, if the ray crosses the rectangle in `(t_min, t_max)`.
    pub fn intersect(&self, ray: &Ray) -> Option<f64> {
        let (n, _) = self.normal_area();
        let denom = n.dot(ray.direction);
        if denom.abs() < 1e-12 {
            return None;
        }
        let t = n.dot(self.corner - ray.origin) / denom;
        if !(t > ray.t_min && t < ray.t_max) {
            return None;
        }
        let q = ray.at(t) - self.corner;
        let s = q.dot(self.edge_u) / self.edge_u.length_squared();
        let r = q.dot(self.edge_v) / self.edge_v.length_squared();
        ((0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&r)).then_some(t)
    }

    /// Radiance seen along a ray travelling in `dir`.
    pub fn emitted(&self, dir: Vec3) -> Rgb {
        let (n, _) = self.normal_area();
        if n.dot(dir) < 0.0 {
            self.radiance
        } else {
            Rgb::BLACK
        }
    }

    fn sample(&self, p: Vec3, rng: &mut impl Rng) -> Option<LightSample> {
        let (n, area) = self.normal_area();
        let q = self.corner + self.edge_u * rng.random::<f64>() + self.edge_v * rng.random::<f64>();
        let d = q - p;
        let dist2 = d.length_squared();
        let dist = dist2.sqrt();
        let wi = d / dist;
        let cos_l = -n.dot(wi);
        if cos_l <= 0.0 || dist == 0.0 {
            return None;
        }
        let pdf = dist2 / (area * cos_l);
        Some(LightSample { wi, distance: dist, weight: self.radiance / pdf, pdf, is_delta: false })
    }

    fn pdf(&self, p: Vec3, wi: Vec3) -> f64 {
        let ray = Ray::new(p, wi);
        match self.intersect(&ray) {
            Some(t) => {
                let (n, area) = self.normal_area();
                let cos_l = -n.dot(wi);
                if cos_l <= 0.0 {
                    0.0
                } else {
                    t * t / (area * cos_l)
                }
            }
            None => 0.0,
        }
    }
}

/// Piecewise-constant 1D distribution over `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
struct Distribution1D {
    func: Vec<f64>,
    cdf: Vec<f64>,
    integral: f64,
}

impl Distribution1D {
    fn new(func: Vec<f64>) -> Self {
        let n = func.len();
        let mut cdf = vec![0.0; n + 1];
        for i in 0..n {
            cdf[i + 1] = cdf[i] + func[i] / n as f64;
        }
        let integral = cdf[n];
        if integral > 0.0 {
            cdf.iter_mut().for_each(|c| *c /= integral);
        } else {
            for (i, c) in cdf.iter_mut().enumerate() {
                *c = i as f64 / n as f64;
            }
        }
        cdf[n] = 1.0;
        Distribution1D { func, cdf, integral }
    }

    fn count(&self) -> usize {
        self.func.len()
    }

    /// Returns `(x, pdf, bin)`.
    fn sample(&self, u: f64) -> (f64, f64, usize) {
        let n = self.count();
        let bin = self.cdf.partition_point(|&c| c <= u).saturating_sub(1).min(n - 1);
        let width = self.cdf[bin + 1] - self.cdf[bin];
        let du = if width > 0.0 { (u - self.cdf[bin]) / width } else { 0.5 };
        let pdf = self.pdf(bin);
        ((bin as f64 + du) / n as f64, pdf, bin)
    }

    fn pdf(&self, bin: usize) -> f64 {
        if self.integral > 0.0 {
            self.func[bin] / self.integral
        } else {
            1.0
        }
    }
}

/// Lat-long environment: row 0 is the `+z` pole, `u` runs with the azimuth
/// `atan2(y, x)`. Sampled proportionally to luminance times `sin(theta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentLight {
    width: usize,
    height: usize,
    texels: Vec<Rgb>,
    rows: Vec<Distribution1D>,
    marginal: Distribution1D,
}

impl EnvironmentLight {
    /// `texels` are row-major, `height` rows of `width`.
    pub fn new(width: usize, height: usize, texels: Vec<Rgb>) -> Self {
        assert!(width > 0 && height > 0 && texels.len() == width * height, "environment map size mismatch");
        let rows: Vec<Distribution1D> = (0..height)
            .map(|j| {
                let sin_t = (PI * (j as f64 + 0.5) / height as f64).sin();
                Distribution1D::new((0..width).map(|i| texels[j * width + i].luminance().max(0.0) * sin_t).collect())
            })
            .collect();
        let marginal = Distribution1D::new(rows.iter().map(|r| r.integral).collect());
        EnvironmentLight { width, height, texels, rows, marginal }
    }

    /// Constant radiance, tabulated coarsely so sampling roughly follows `sin(theta)`.
    pub fn constant(radiance: Rgb) -> Self {
        Self::new(32, 16, vec![radiance; 32 * 16])
    }

    pub fn size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn texels(&self) -> &[Rgb] {
        &self.texels
    }

    fn texel_of(&self, dir: Vec3) -> (usize, usize, f64) {
        let theta = dir.z.clamp(-1.0, 1.0).acos();
        let mut phi = dir.y.atan2(dir.x);
        if phi < 0.0 {
            phi += 2.0 * PI;
        }
        let i = ((phi / (2.0 * PI) * self.width as f64) as usize).min(self.width - 1);
        let j = ((theta / PI * self.height as f64) as usize).min(self.height - 1);
        (i, j, theta)
    }

    /// Radiance arriving from direction `dir` (pointing away from the scene).
    pub fn radiance(&self, dir: Vec3) -> Rgb {
        let (i, j, _) = self.texel_of(dir);
        self.texels[j * self.width + i]
    }

    /// Texel index `(i, j)` a direction falls in.
    pub fn texel_index(&self, dir: Vec3) -> (usize, usize) {
        let (i, j, _) = self.texel_of(dir);
        (i, j)
    }

    pub fn pdf(&self, dir: Vec3) -> f64 {
        let (i, j, theta) = self.texel_of(dir);
        let sin_t = theta.sin();
        if sin_t <= 0.0 || self.marginal.integral <= 0.0 {
            return 0.0;
        }
        let p_uv = self.marginal.pdf(j) * self.rows[j].pdf(i);
        p_uv / (2.0 * PI * PI * sin_t)
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Option<LightSample> {
        let (v, pv, j) = self.marginal.sample(rng.random());
        let (u, pu, _) = self.rows[j].sample(rng.random());
        let theta = v * PI;
        let phi = u * 2.0 * PI;
        let sin_t = theta.sin();
        if sin_t <= 0.0 || pu * pv <= 0.0 {
            return None;
        }
        let wi = Vec3::new(sin_t * phi.cos(), sin_t * phi.sin(), theta.cos());
        let pdf = pu * pv / (2.0 * PI * PI * sin_t);
        Some(LightSample { wi, distance: f64::INFINITY, weight: self.radiance(wi) / pdf, pdf, is_delta: false })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::stream_rng;

    #[test]
    fn directional_is_delta_with_irradiance_weight() {
        let l = Light::directional(Vec3::new(0.0, 0.0, 2.0), Rgb::new(1.0, 2.0, 3.0));
        let s = l.sample(Vec3::ZERO, &mut stream_rng(0, 0, 0)).unwrap();
        assert!(s.is_delta);
        assert_eq!(s.weight, Rgb::new(1.0, 2.0, 3.0));
        assert_eq!(s.wi, Vec3::Z);
    }

    #[test]
    fn point_light_inverse_square() {
        let l = Light::Point { position: Vec3::new(0.0, 3.0, 0.0), intensity: Rgb::splat(9.0) };
        let s = l.sample(Vec3::ZERO, &mut stream_rng(0, 0, 0)).unwrap();
        assert!((s.weight.0[0] - 1.0).abs() < 1e-15);
        assert_eq!(s.distance, 3.0);
    }

    #[test]
    fn rect_pdf_matches_sample() {
        let rect = RectLight {
            corner: Vec3::new(-0.5, -0.5, 2.0),
            edge_u: Vec3::new(0.0, 1.0, 0.0),
            edge_v: Vec3::new(1.0, 0.0, 0.0),
            radiance: Rgb::splat(3.0),
        };
        let mut rng = stream_rng(1, 0, 0);
        let p = Vec3::new(0.1, 0.2, 0.0);
        let mut estimate = 0.0;
        let n = 200_000;
        for _ in 0..n {
            let s = Light::Rect(rect).sample(p, &mut rng).unwrap();
            assert!((Light::Rect(rect).pdf(p, s.wi) - s.pdf).abs() < 1e-9 * s.pdf);
            estimate += s.weight.0[0] * s.wi.z;
        }
        // Irradiance from a unit square at height 2 under radiance 3, by
        // midpoint quadrature over the emitter.
        let m = 400;
        let mut quad = 0.0;
        for a in 0..m {
            for b in 0..m {
                let q = Vec3::new(-0.5 + (a as f64 + 0.5) / m as f64, -0.5 + (b as f64 + 0.5) / m as f64, 2.0);
                let d = q - p;
                let r2 = d.length_squared();
                let c = d.z / r2.sqrt();
                quad += 3.0 * c * c / r2 / (m * m) as f64;
            }
        }
        assert!((estimate / n as f64 - quad).abs() < 0.01 * quad);
    }

    #[test]
    fn environment_pdf_integrates_to_one() {
        let texels: Vec<Rgb> = (0..8 * 4).map(|k| Rgb::splat(1.0 + (k % 5) as f64)).collect();
        let env = EnvironmentLight::new(8, 4, texels);
        let mut rng = stream_rng(2, 0, 0);
        let n = 200_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let w = crate::sampling::sample_uniform_sphere(&mut rng);
            sum += env.pdf(w) * 4.0 * PI;
        }
        assert!((sum / n as f64 - 1.0).abs() < 0.01);
    }
}
