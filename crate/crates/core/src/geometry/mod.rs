//! Ray-traceable geometry: triangle meshes, spheres and fiber cylinder
//! segments under per-instance transforms, with a BVH and intersection records
//! carrying every property the neural model consumes.

mod bvh;
mod primitive;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrator::Light;
use crate::math::{Aabb, Transform, Vec3};
use crate::shading::Material;

pub use bvh::{intersect_brute, Bvh, RawHit};
pub use primitive::{fiber_offset, Primitive, PrimitiveShape};

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("cannot build an acceleration structure over zero primitives")]
    EmptyScene,
    #[error("view direction is parallel to the fiber axis")]
    DegenerateFiberFrame,
    #[error("duplicate instance id {0}")]
    DuplicateInstance(u32),
    #[error("instance {0}: transform is not invertible")]
    SingularTransform(u32),
    #[error("instance {0}: spheres and fibers need a uniform-scale transform")]
    NonUniformScale(u32),
    #[error("instance {0}: {1}")]
    InvalidShape(u32, String),
    #[error("instance {0}: material index {1} out of range")]
    UnknownMaterial(u32, usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
    pub t_min: f64,
    pub t_max: f64,
}

impl Ray {
    pub fn new(origin: Vec3, direction: Vec3) -> Ray {
        Ray::segment(origin, direction, f64::INFINITY)
    }

    pub fn segment(origin: Vec3, direction: Vec3, t_max: f64) -> Ray {
        debug_assert!((direction.length() - 1.0).abs() < 1e-6, "ray direction not unit: {direction:?}");
        Ray { origin, direction, t_min: 0.0, t_max }
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

/// Kind-specific shading frame of a hit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HitKind {
    Surface { normal: Vec3 },
    /// `h` is the signed offset across the fiber width, in `[-1, 1]`.
    Fiber { tangent: Vec3, h: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub position: Vec3,
    pub instance_id: u32,
    /// Global primitive index inside the scene.
    pub primitive: u32,
    pub kind: HitKind,
    /// Unit normal of the underlying primitive; radial direction for fibers.
    pub geometric_normal: Vec3,
}

impl Hit {
    /// Origin for a ray leaving the hit toward `dir`, pushed off the surface by `eps`.
    pub fn offset_origin(&self, dir: Vec3, eps: f64) -> Vec3 {
        if dir.dot(self.geometric_normal) >= 0.0 {
            self.position + self.geometric_normal * eps
        } else {
            self.position - self.geometric_normal * eps
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssetKind {
    Surface,
    Fiber,
}

/// Object-space geometry description; the same schema is used in scene files
/// and embedded in neural asset headers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Shape {
    Sphere {
        center: Vec3,
        radius: f64,
    },
    Mesh {
        vertices: Vec<Vec3>,
        triangles: Vec<[u32; 3]>,
    },
    /// Polyline strands swept into open cylinders of a shared radius.
    Fibers {
        strands: Vec<Vec<Vec3>>,
        fiber_radius: f64,
    },
}

impl Shape {
    pub fn kind(&self) -> AssetKind {
        match self {
            Shape::Fibers { .. } => AssetKind::Fiber,
            _ => AssetKind::Surface,
        }
    }

    pub fn bounds(&self) -> Aabb {
        let mut b = Aabb::EMPTY;
        match self {
            Shape::Sphere { center, radius } => {
                b.grow(*center - Vec3::splat(*radius));
                b.grow(*center + Vec3::splat(*radius));
            }
            Shape::Mesh { vertices, .. } => vertices.iter().for_each(|v| b.grow(*v)),
            Shape::Fibers { strands, fiber_radius } => {
                for p in strands.iter().flatten() {
                    b.grow(*p - Vec3::splat(*fiber_radius));
                    b.grow(*p + Vec3::splat(*fiber_radius));
                }
            }
        }
        b
    }

    pub fn primitive_count(&self) -> usize {
        match self {
            Shape::Sphere { .. } => 1,
            Shape::Mesh { triangles, .. } => triangles.len(),
            Shape::Fibers { strands, .. } => strands.iter().map(|s| s.len().saturating_sub(1)).sum(),
        }
    }

    fn world_primitives(&self, id: u32, xf: &Transform, out: &mut Vec<Primitive>) -> Result<(), GeometryError> {
        match self {
            Shape::Sphere { center, radius } => {
                let s = xf.uniform_scale().ok_or(GeometryError::NonUniformScale(id))?;
                if !(*radius > 0.0) {
                    return Err(GeometryError::InvalidShape(id, "sphere radius must be positive".into()));
                }
                out.push(Primitive {
                    shape: PrimitiveShape::Sphere { center: xf.point(*center), radius: radius * s },
                    instance_id: id,
                    local_index: 0,
                });
            }
            Shape::Mesh { vertices, triangles } => {
                let world: Vec<Vec3> = vertices.iter().map(|v| xf.point(*v)).collect();
                for (i, tri) in triangles.iter().enumerate() {
                    let fetch = |k: u32| {
                        world.get(k as usize).copied().ok_or_else(|| {
                            GeometryError::InvalidShape(id, format!("triangle {i} references vertex {k}"))
                        })
                    };
                    let (a, b, c) = (fetch(tri[0])?, fetch(tri[1])?, fetch(tri[2])?);
                    // Degenerate triangles cannot be hit; they keep their index slot.
                    if let Some(p) = Primitive::triangle(a, b, c, id, i as u32) {
                        out.push(p);
                    }
                }
            }
            Shape::Fibers { strands, fiber_radius } => {
                let s = xf.uniform_scale().ok_or(GeometryError::NonUniformScale(id))?;
                if !(*fiber_radius > 0.0) {
                    return Err(GeometryError::InvalidShape(id, "fiber_radius must be positive".into()));
                }
                let mut local = 0u32;
                for strand in strands {
                    for seg in strand.windows(2) {
                        let p0 = xf.point(seg[0]);
                        let p1 = xf.point(seg[1]);
                        let d = p1 - p0;
                        let length = d.length();
                        if length > 0.0 {
                            out.push(Primitive {
                                shape: PrimitiveShape::Fiber { p0, axis: d / length, length, radius: fiber_radius * s },
                                instance_id: id,
                                local_index: local,
                            });
                        }
                        local += 1;
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub id: u32,
    pub shape: Shape,
    pub object_to_world: Transform,
    /// Index into [`Scene::materials`].
    pub material: usize,
}

/// Camera defaults carried by scene files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraDesc {
    pub position: Vec3,
    pub look_at: Vec3,
    #[serde(default = "default_up")]
    pub up: Vec3,
    pub vfov_deg: f64,
}

fn default_up() -> Vec3 {
    Vec3::Z
}

/// Immutable after construction; safe to intersect from any number of threads.
#[derive(Debug, Clone)]
pub struct Scene {
    instances: Vec<Instance>,
    primitives: Vec<Primitive>,
    bvh: Option<Bvh>,
    bounds: Aabb,
    epsilon: f64,
    pub lights: Vec<Light>,
    pub materials: Vec<Material>,
    pub camera: Option<CameraDesc>,
}

impl Scene {
    /// Builds the scene. An empty instance list is allowed (it renders black);
    /// [`Bvh::build`] itself rejects empty input.
    pub fn new(
        mut instances: Vec<Instance>,
        materials: Vec<Material>,
        lights: Vec<Light>,
        camera: Option<CameraDesc>,
    ) -> Result<Scene, GeometryError> {
        instances.sort_by_key(|i| i.id);
        for w in instances.windows(2) {
            if w[0].id == w[1].id {
                return Err(GeometryError::DuplicateInstance(w[0].id));
            }
        }
        let mut primitives = Vec::new();
        for inst in &instances {
            if inst.material >= materials.len() {
                return Err(GeometryError::UnknownMaterial(inst.id, inst.material));
            }
            inst.shape.world_primitives(inst.id, &inst.object_to_world, &mut primitives)?;
        }
        let bvh = if primitives.is_empty() { None } else { Some(Bvh::build(&primitives)?) };
        let bounds = bvh.as_ref().map_or(Aabb::EMPTY, |b| b.bounds());
        let epsilon = if bounds.is_empty() { 1e-4 } else { 1e-4 * bounds.diagonal() };
        Ok(Scene { instances, primitives, bvh, bounds, epsilon, lights, materials, camera })
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn instance(&self, id: u32) -> Option<&Instance> {
        self.instances.binary_search_by_key(&id, |i| i.id).ok().map(|k| &self.instances[k])
    }

    pub fn primitives(&self) -> &[Primitive] {
        &self.primitives
    }

    pub fn bounds(&self) -> Aabb {
        self.bounds
    }

    /// Self-intersection offset: `1e-4` of the scene diagonal.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn intersect(&self, ray: &Ray) -> Option<Hit> {
        let raw = self.bvh.as_ref()?.intersect(&self.primitives, ray.origin, ray.direction, ray.t_min, ray.t_max)?;
        Some(self.make_hit(ray, raw))
    }

    pub fn intersect_brute(&self, ray: &Ray) -> Option<Hit> {
        let raw = intersect_brute(&self.primitives, ray.origin, ray.direction, ray.t_min, ray.t_max)?;
        Some(self.make_hit(ray, raw))
    }

    /// Ray leaving `hit` toward `dir`, offset along the geometric normal.
    pub fn spawn_ray(&self, hit: &Hit, dir: Vec3) -> Ray {
        Ray::new(hit.offset_origin(dir, self.epsilon), dir)
    }

    /// Like [`Scene::spawn_ray`] but bounded to `distance` from the hit.
    pub fn spawn_segment(&self, hit: &Hit, dir: Vec3, distance: f64) -> Ray {
        Ray::segment(hit.offset_origin(dir, self.epsilon), dir, (distance - 2.0 * self.epsilon).max(0.0))
    }

    fn make_hit(&self, ray: &Ray, (t, index): RawHit) -> Hit {
        let prim = &self.primitives[index as usize];
        let position = ray.at(t);
        let (kind, geometric_normal) = match prim.shape {
            PrimitiveShape::Triangle { normal, .. } => (HitKind::Surface { normal }, normal),
            PrimitiveShape::Sphere { center, .. } => {
                let n = (position - center).normalized();
                (HitKind::Surface { normal: n }, n)
            }
            PrimitiveShape::Fiber { p0, axis, radius, .. } => {
                let radial = position - p0;
                let radial = (radial - axis * radial.dot(axis)).normalized();
                let h = fiber_offset(position, p0, axis, ray.direction, radius).unwrap_or(0.0);
                (HitKind::Fiber { tangent: axis, h }, radial)
            }
        };
        Hit { t, position, instance_id: prim.instance_id, primitive: index, kind, geometric_normal }
    }
}
