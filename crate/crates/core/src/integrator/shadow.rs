use crate::geometry::{Hit, Ray, Scene};
use crate::math::{Rgb, Vec3};

/// Upper bound on self hits skipped by one walk.
const MAX_SKIPS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShadowResult {
    /// 1 if the light is reachable.
    pub transmittance: u8,
    /// Set once the walk passes through the origin instance's own geometry.
    pub self_hint: bool,
}

/// Closest hit along `ray` that is not part of instance `skip`. Passing
/// through `skip` sets the returned hint. The walk advances `t_min` along the
/// original ray, so the result does not depend on how many self hits exist.
pub fn closest_skipping(scene: &Scene, mut ray: Ray, skip: u32) -> (Option<Hit>, bool) {
    let mut hint = false;
    for _ in 0..MAX_SKIPS {
        match scene.intersect(&ray) {
            Some(h) if h.instance_id == skip => {
                hint = true;
                ray.t_min = h.t;
            }
            other => return (other, hint),
        }
    }
    (None, hint)
}

/// Shadow ray from `from` toward the light, treating the hit's own instance
/// as transparent but recording that it was crossed.
pub fn trace_shadow(scene: &Scene, from: &Hit, toward_light: Vec3, distance: f64) -> ShadowResult {
    let mut payload = RayPayload::new(from, Rgb::BLACK, Rgb::BLACK);
    let transmittance = trace_shadow_payload(scene, from, toward_light, distance, &mut payload);
    ShadowResult { transmittance, self_hint: payload.self_occluded_hint }
}

/// Closest-hit shadow walk updating `payload`; returns the transmittance.
pub fn trace_shadow_payload(scene: &Scene, from: &Hit, toward_light: Vec3, distance: f64, payload: &mut RayPayload) -> u8 {
    let mut ray = if distance.is_finite() {
        scene.spawn_segment(from, toward_light, distance)
    } else {
        scene.spawn_ray(from, toward_light)
    };
    for _ in 0..MAX_SKIPS {
        match scene.intersect(&ray) {
            None => return 1,
            Some(h) if payload.on_hit(h.instance_id) => ray.t_min = h.t,
            Some(_) => return 0,
        }
    }
    1
}

/// Plain occlusion test for classical shading: any hit blocks.
pub fn occluded(scene: &Scene, ray: &Ray) -> bool {
    scene.intersect(ray).is_some()
}

/// Values carried along a neural shadow ray until its walk resolves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayPayload {
    pub pending_lit: Rgb,
    pub pending_shadowed: Rgb,
    pub self_occluded_hint: bool,
    pub origin_instance: u32,
}

impl RayPayload {
    pub fn new(origin: &Hit, lit: Rgb, shadowed: Rgb) -> Self {
        RayPayload { pending_lit: lit, pending_shadowed: shadowed, self_occluded_hint: false, origin_instance: origin.instance_id }
    }

    /// Records a hit on `instance_id`; returns `false` if it ends the walk.
    pub fn on_hit(&mut self, instance_id: u32) -> bool {
        if instance_id == self.origin_instance {
            self.self_occluded_hint = true;
            true
        } else {
            false
        }
    }

    pub fn resolve(&self) -> Rgb {
        if self.self_occluded_hint {
            self.pending_shadowed
        } else {
            self.pending_lit
        }
    }
}
