//! Unidirectional path tracer shared by the baker and the renderer.
//!
//! Classical vertices use next-event estimation over every light plus BSDF
//! sampling, combined with the balance heuristic. Translucent surfaces hand
//! transmitted paths to an internal random walk (isotropic phase, spectral
//! free-flight sampling, at most [`MAX_WALK_SCATTERS`] scattering events).
//!
//! Neural vertices evaluate the asset in its object space. Each light sample
//! picks the lit or self-shadowed output from the shadow walk's hint, and the
//! continuation ray is sampled uniformly (hemisphere for surfaces, sphere for
//! fibers) and walks through the asset's own geometry, so transport inside
//! the asset is never counted twice.

use std::f64::consts::PI;

use rand::Rng;

use crate::geometry::{Hit, HitKind, Instance, Ray, Scene};
use crate::math::{Rgb, Vec3};
use crate::neural::{NeuralAsset, ShadingQuery};
use crate::sampling::{sample_uniform_hemisphere, sample_uniform_sphere, UNIFORM_HEMISPHERE_PDF, UNIFORM_SPHERE_PDF};
use crate::shading::{FiberMaterial, Material, ShadingFrame, SurfaceMaterial};

use super::light::{Light, LightSample};
use super::mis::mis_weight;
use super::shadow::{closest_skipping, occluded, trace_shadow_payload, RayPayload, ShadowResult};

pub const MAX_WALK_SCATTERS: usize = 8;
const PHASE_PDF: f64 = 1.0 / (4.0 * PI);

/// Per-contribution caps: `direct` for paths with exactly one scattering
/// vertex, `indirect` for longer ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clamp {
    pub direct: f64,
    pub indirect: f64,
}

pub fn clamp_contribution(v: Rgb, vertices: usize, clamp: Option<Clamp>) -> Rgb {
    match clamp {
        None => v,
        Some(c) => v.clamp_max(if vertices <= 1 { c.direct } else { c.indirect }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSettings {
    /// Maximum number of scattering vertices.
    pub max_depth: usize,
    pub clamp: Option<Clamp>,
    /// Russian roulette starts after this many vertices.
    pub roulette_after: usize,
}

impl Default for PathSettings {
    fn default() -> Self {
        PathSettings { max_depth: 8, clamp: None, roulette_after: 3 }
    }
}

/// What one neural light sample evaluated and which output it used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuralLightRecord {
    pub sample: LightSample,
    pub lit: Rgb,
    pub shadowed: Rgb,
    pub shadow: ShadowResult,
    pub used: Rgb,
}

/// The pdf of the strategy that produced the current ray, with the point it
/// was sampled from; `None` when no light sampling strategy could produce it.
type MisState = Option<(f64, Vec3)>;

pub struct PathTracer<'a> {
    pub scene: &'a Scene,
    pub lights: &'a [Light],
    pub settings: PathSettings,
}

struct Accum {
    radiance: Rgb,
    clamp: Option<Clamp>,
}

impl Accum {
    fn add(&mut self, v: Rgb, vertices: usize) {
        self.radiance += clamp_contribution(v, vertices, self.clamp);
    }
}

/// Object-space shading query for a hit on `inst`.
pub fn neural_query(inst: &Instance, hit: &Hit, wo: Vec3, wi: Vec3) -> ShadingQuery {
    let xf = &inst.object_to_world;
    let frame = match hit.kind {
        HitKind::Surface { normal } => ShadingFrame::Surface { normal: xf.inverse_normal(normal).normalized() },
        HitKind::Fiber { tangent, h } => ShadingFrame::Fiber { tangent: xf.inverse_vector(tangent).normalized(), h },
    };
    ShadingQuery {
        position: xf.inverse_point(hit.position),
        wo: xf.inverse_vector(wo).normalized(),
        wi: xf.inverse_vector(wi).normalized(),
        frame,
    }
}

fn face_forward(n: Vec3, wo: Vec3) -> Vec3 {
    if n.dot(wo) < 0.0 {
        -n
    } else {
        n
    }
}

impl<'a> PathTracer<'a> {
    pub fn new(scene: &'a Scene, lights: &'a [Light], settings: PathSettings) -> Self {
        PathTracer { scene, lights, settings }
    }

    /// Radiance along `ray` and its primary hit.
    pub fn radiance(&self, ray: Ray, rng: &mut impl Rng) -> (Rgb, Option<Hit>) {
        let first = self.scene.intersect(&ray);
        (self.trace(ray, first, rng), first)
    }

    /// Radiance along `ray` whose closest hit is already known.
    pub fn trace(&self, mut ray: Ray, first: Option<Hit>, rng: &mut impl Rng) -> Rgb {
        let mut acc = Accum { radiance: Rgb::BLACK, clamp: self.settings.clamp };
        let mut beta = Rgb::WHITE;
        let mut vertices = 0usize;
        let mut mis: MisState = None;
        let mut next = first;
        loop {
            let t_hit = next.map_or(f64::INFINITY, |h| h.t);
            let e = self.emission(&ray, t_hit, mis);
            if !e.is_black() {
                acc.add(beta * e, vertices);
            }
            let Some(hit) = next else { break };
            vertices += 1;
            // The last vertex still samples a continuation; its emission is
            // picked up above on the next pass, keeping the NEE weights unbiased.
            if vertices > self.settings.max_depth {
                break;
            }
            let inst = self.scene.instance(hit.instance_id).expect("hit instance exists");
            let wo = -ray.direction;
            let step = match &self.scene.materials[inst.material] {
                Material::Neural(asset) => self.neural_vertex(asset, inst, &hit, wo, &mut beta, vertices, &mut acc, rng),
                Material::Surface(m) => self.surface_vertex(m, inst, &hit, wo, &mut beta, &mut vertices, &mut acc, rng),
                Material::Fiber(m) => self.fiber_vertex(m, &hit, wo, &mut beta, vertices, &mut acc, rng),
            };
            let Some((r, n, m)) = step else { break };
            ray = r;
            next = n;
            mis = m;
            if beta.is_black() {
                break;
            }
            if vertices >= self.settings.roulette_after {
                let q = beta.max_component().min(0.95);
                if rng.random::<f64>() >= q {
                    break;
                }
                beta = beta / q;
            }
        }
        acc.radiance
    }

    /// Emission from rectangle lights in front of `t_hit`, and from the
    /// environment when the ray escapes.
    fn emission(&self, ray: &Ray, t_hit: f64, mis: MisState) -> Rgb {
        let mut total = Rgb::BLACK;
        let mut bounded = *ray;
        bounded.t_max = bounded.t_max.min(t_hit);
        for light in self.lights {
            let le = match light {
                Light::Rect(rect) => match rect.intersect(&bounded) {
                    Some(_) => rect.emitted(ray.direction),
                    None => continue,
                },
                Light::Environment(env) if t_hit.is_infinite() => env.radiance(ray.direction),
                _ => continue,
            };
            if le.is_black() {
                continue;
            }
            let w = match mis {
                Some((pdf, origin)) => mis_weight(pdf, light.pdf(origin, ray.direction)),
                None => 1.0,
            };
            total += le * w;
        }
        total
    }

    pub fn neural_light(
        &self,
        asset: &NeuralAsset,
        inst: &Instance,
        hit: &Hit,
        wo: Vec3,
        light: &Light,
        rng: &mut impl Rng,
    ) -> Option<NeuralLightRecord> {
        let sample = light.sample(hit.position, rng)?;
        let q = neural_query(inst, hit, wo, sample.wi);
        let (lit, shadowed) = asset.shade(&q).expect("neural asset layout validated at scene load");
        let mut payload = RayPayload::new(hit, lit, shadowed);
        let transmittance = trace_shadow_payload(self.scene, hit, sample.wi, sample.distance, &mut payload);
        let shadow = ShadowResult { transmittance, self_hint: payload.self_occluded_hint };
        Some(NeuralLightRecord { sample, lit, shadowed, shadow, used: payload.resolve() })
    }

    #[allow(clippy::too_many_arguments)]
    fn neural_vertex(
        &self,
        asset: &NeuralAsset,
        inst: &Instance,
        hit: &Hit,
        wo: Vec3,
        beta: &mut Rgb,
        vertices: usize,
        acc: &mut Accum,
        rng: &mut impl Rng,
    ) -> Option<(Ray, Option<Hit>, MisState)> {
        let (upper, uniform_pdf) = match hit.kind {
            HitKind::Surface { normal } => (Some(face_forward(normal, wo)), UNIFORM_HEMISPHERE_PDF),
            HitKind::Fiber { .. } => (None, UNIFORM_SPHERE_PDF),
        };
        let strategy_pdf = |wi: Vec3| match upper {
            Some(n) if n.dot(wi) <= 0.0 => 0.0,
            _ => uniform_pdf,
        };
        for light in self.lights {
            let Some(rec) = self.neural_light(asset, inst, hit, wo, light, rng) else { continue };
            if rec.shadow.transmittance == 0 {
                continue;
            }
            let w = if rec.sample.is_delta { 1.0 } else { mis_weight(rec.sample.pdf, strategy_pdf(rec.sample.wi)) };
            acc.add(*beta * rec.used * rec.sample.weight * w, vertices);
        }
        let dir = match upper {
            Some(n) => sample_uniform_hemisphere(n, rng),
            None => sample_uniform_sphere(rng),
        };
        let ray = self.scene.spawn_ray(hit, dir);
        let (next, hint) = closest_skipping(self.scene, ray, hit.instance_id);
        let (lit, shadowed) = asset.shade(&neural_query(inst, hit, wo, dir)).expect("layout validated");
        let transport = if hint { shadowed } else { lit };
        *beta *= transport / uniform_pdf;
        // Continue from the first non-self hit; emission lookups use the
        // original ray, which self hits do not block.
        Some((ray, next, Some((uniform_pdf, hit.position))))
    }

    fn nee_classical(
        &self,
        hit: &Hit,
        eval: impl Fn(Vec3) -> (Rgb, f64),
        beta: Rgb,
        vertices: usize,
        acc: &mut Accum,
        rng: &mut impl Rng,
    ) {
        for light in self.lights {
            let Some(s) = light.sample(hit.position, rng) else { continue };
            let (f_cos, bsdf_pdf) = eval(s.wi);
            if f_cos.is_black() {
                continue;
            }
            let ray = if s.distance.is_finite() {
                self.scene.spawn_segment(hit, s.wi, s.distance)
            } else {
                self.scene.spawn_ray(hit, s.wi)
            };
            if occluded(self.scene, &ray) {
                continue;
            }
            let w = if s.is_delta { 1.0 } else { mis_weight(s.pdf, bsdf_pdf) };
            acc.add(beta * f_cos * s.weight * w, vertices);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn surface_vertex(
        &self,
        m: &SurfaceMaterial,
        inst: &Instance,
        hit: &Hit,
        wo: Vec3,
        beta: &mut Rgb,
        vertices: &mut usize,
        acc: &mut Accum,
        rng: &mut impl Rng,
    ) -> Option<(Ray, Option<Hit>, MisState)> {
        let HitKind::Surface { normal } = hit.kind else { return None };
        let n = face_forward(normal, wo);
        let p_obj = inst.object_to_world.inverse_point(hit.position);
        let eval = |wi: Vec3| (m.eval(p_obj, n, wi, wo) * n.dot(wi).abs(), m.pdf(n, wi, wo));
        self.nee_classical(hit, eval, *beta, *vertices, acc, rng);
        let bs = m.sample(p_obj, n, wo, rng);
        if bs.value.is_black() {
            return None;
        }
        *beta *= bs.value / bs.pdf;
        if bs.wi.dot(n) < 0.0 && m.is_translucent() {
            let albedo = m.albedo.at(p_obj);
            let (ray, mis) = self.medium_walk(hit, bs.wi, m.translucency_mfp, albedo, beta, vertices, acc, rng)?;
            let next = self.scene.intersect(&ray);
            return Some((ray, next, mis));
        }
        let ray = self.scene.spawn_ray(hit, bs.wi);
        let next = self.scene.intersect(&ray);
        Some((ray, next, Some((bs.pdf, hit.position))))
    }

    #[allow(clippy::too_many_arguments)]
    fn fiber_vertex(
        &self,
        m: &FiberMaterial,
        hit: &Hit,
        wo: Vec3,
        beta: &mut Rgb,
        vertices: usize,
        acc: &mut Accum,
        rng: &mut impl Rng,
    ) -> Option<(Ray, Option<Hit>, MisState)> {
        let HitKind::Fiber { tangent, h } = hit.kind else { return None };
        let frame = ShadingFrame::Fiber { tangent, h };
        let eval = |wi: Vec3| (m.eval(tangent, h, wi, wo) * frame.cos_factor(wi), UNIFORM_SPHERE_PDF);
        self.nee_classical(hit, eval, *beta, vertices, acc, rng);
        let bs = m.sample(tangent, h, wo, rng);
        if bs.value.is_black() {
            return None;
        }
        *beta *= bs.value / bs.pdf;
        let ray = self.scene.spawn_ray(hit, bs.wi);
        let next = self.scene.intersect(&ray);
        Some((ray, next, Some((bs.pdf, hit.position))))
    }

    /// Random walk inside a translucent volume entered at `entry` along
    /// `dir`. Returns the ray leaving the volume, or `None` if the path was
    /// absorbed or ran out of depth.
    #[allow(clippy::too_many_arguments)]
    fn medium_walk(
        &self,
        entry: &Hit,
        dir: Vec3,
        mfp: Rgb,
        albedo: Rgb,
        beta: &mut Rgb,
        vertices: &mut usize,
        acc: &mut Accum,
        rng: &mut impl Rng,
    ) -> Option<(Ray, MisState)> {
        let sigma = mfp.map(|d| 1.0 / d);
        let mut ray = self.scene.spawn_ray(entry, dir);
        let mut mis: MisState = None;
        let mut scatters = 0;
        loop {
            let boundary = self.scene.intersect(&ray);
            let t_b = boundary.map_or(f64::INFINITY, |h| h.t);
            let k = rng.random_range(0..3usize);
            let u: f64 = rng.random();
            let s = -(1.0 - u).ln() / sigma.0[k];
            if let Some(b) = boundary.filter(|_| s >= t_b) {
                let tr = sigma.map(|sg| (-sg * t_b).exp());
                let avg = tr.mean();
                if avg <= 0.0 {
                    return None;
                }
                *beta *= tr / avg;
                let out = Ray::new(b.offset_origin(ray.direction, self.scene.epsilon()), ray.direction);
                return Some((out, mis));
            }
            if scatters == MAX_WALK_SCATTERS || *vertices >= self.settings.max_depth {
                return None;
            }
            let tr = sigma.map(|sg| (-sg * s).exp());
            let density = sigma * tr;
            let avg = density.mean();
            if avg <= 0.0 || !s.is_finite() {
                return None;
            }
            *beta *= albedo * density / avg;
            scatters += 1;
            *vertices += 1;
            let p = ray.at(s);
            for light in self.lights {
                let Some(ls) = light.sample(p, rng) else { continue };
                let Some(exit) = self.scene.intersect(&Ray::new(p, ls.wi)) else { continue };
                if exit.t >= ls.distance {
                    continue;
                }
                let out_origin = exit.offset_origin(ls.wi, self.scene.epsilon());
                let remaining = ls.distance - exit.t;
                let shadow = if remaining.is_finite() {
                    Ray::segment(out_origin, ls.wi, (remaining - 2.0 * self.scene.epsilon()).max(0.0))
                } else {
                    Ray::new(out_origin, ls.wi)
                };
                if occluded(self.scene, &shadow) {
                    continue;
                }
                let t_med = sigma.map(|sg| (-sg * exit.t).exp());
                let w = if ls.is_delta { 1.0 } else { mis_weight(ls.pdf, PHASE_PDF) };
                acc.add(*beta * t_med * ls.weight * (PHASE_PDF * w), *vertices);
            }
            let new_dir = sample_uniform_sphere(rng);
            ray = Ray::new(p, new_dir);
            mis = Some((PHASE_PDF, p));
        }
    }
}
