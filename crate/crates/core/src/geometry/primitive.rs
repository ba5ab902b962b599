//! World-space primitives and their analytic ray intersections.

use crate::math::{Aabb, Vec3};

use super::GeometryError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrimitiveShape {
    Triangle { v0: Vec3, e1: Vec3, e2: Vec3, normal: Vec3 },
    Sphere { center: Vec3, radius: f64 },
    /// Open cylinder around the segment `p0 + s * axis`, `s` in `[0, length]`.
    Fiber { p0: Vec3, axis: Vec3, length: f64, radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Primitive {
    pub shape: PrimitiveShape,
    pub instance_id: u32,
    /// Index of the primitive within its instance.
    pub local_index: u32,
}

impl Primitive {
    pub fn triangle(a: Vec3, b: Vec3, c: Vec3, instance_id: u32, local_index: u32) -> Option<Primitive> {
        let e1 = b - a;
        let e2 = c - a;
        let n = e1.cross(e2);
        let len = n.length();
        if !(len > 0.0) || !len.is_finite() {
            return None;
        }
        Some(Primitive {
            shape: PrimitiveShape::Triangle { v0: a, e1, e2, normal: n / len },
            instance_id,
            local_index,
        })
    }

    pub fn bounds(&self) -> Aabb {
        match self.shape {
            PrimitiveShape::Triangle { v0, e1, e2, .. } => {
                let mut b = Aabb::from_point(v0);
                b.grow(v0 + e1);
                b.grow(v0 + e2);
                b
            }
            PrimitiveShape::Sphere { center, radius } => {
                Aabb::new(center - Vec3::splat(radius), center + Vec3::splat(radius))
            }
            PrimitiveShape::Fiber { p0, axis, length, radius } => {
                let p1 = p0 + axis * length;
                let r = Vec3::splat(radius);
                Aabb::new(p0.min(p1) - r, p0.max(p1) + r)
            }
        }
    }

    pub fn centroid(&self) -> Vec3 {
        match self.shape {
            PrimitiveShape::Triangle { v0, e1, e2, .. } => v0 + (e1 + e2) / 3.0,
            PrimitiveShape::Sphere { center, .. } => center,
            PrimitiveShape::Fiber { p0, axis, length, .. } => p0 + axis * (0.5 * length),
        }
    }

    /// Nearest intersection distance strictly inside `(t_min, t_max)`.
    #[inline]
    pub fn intersect(&self, origin: Vec3, dir: Vec3, t_min: f64, t_max: f64) -> Option<f64> {
        let inside = |t: f64| t > t_min && t < t_max;
        match self.shape {
            PrimitiveShape::Triangle { v0, e1, e2, .. } => {
                let p = dir.cross(e2);
                let det = e1.dot(p);
                if det.abs() < 1e-14 {
                    return None;
                }
                let inv = 1.0 / det;
                let s = origin - v0;
                let u = s.dot(p) * inv;
                if !(0.0..=1.0).contains(&u) {
                    return None;
                }
                let q = s.cross(e1);
                let v = dir.dot(q) * inv;
                if v < 0.0 || u + v > 1.0 {
                    return None;
                }
                let t = e2.dot(q) * inv;
                inside(t).then_some(t)
            }
            PrimitiveShape::Sphere { center, radius } => {
                let oc = origin - center;
                let b = oc.dot(dir);
                let c = oc.length_squared() - radius * radius;
                let disc = b * b - c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                // Stable root pair.
                let q = if b > 0.0 { -b - sq } else { -b + sq };
                let (mut t0, mut t1) = if q != 0.0 { (c / q, q) } else { (-b, -b) };
                if t0 > t1 {
                    std::mem::swap(&mut t0, &mut t1);
                }
                if inside(t0) {
                    Some(t0)
                } else if inside(t1) {
                    Some(t1)
                } else {
                    None
                }
            }
            PrimitiveShape::Fiber { p0, axis, length, radius } => {
                let o = origin - p0;
                let dp = dir - axis * dir.dot(axis);
                let op = o - axis * o.dot(axis);
                let a = dp.length_squared();
                if a < 1e-16 {
                    return None;
                }
                let b = op.dot(dp);
                let c = op.length_squared() - radius * radius;
                let disc = b * b - a * c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                let q = if b > 0.0 { -b - sq } else { -b + sq };
                let (mut t0, mut t1) = if q != 0.0 { (c / q, q / a) } else { (-b / a, -b / a) };
                if t0 > t1 {
                    std::mem::swap(&mut t0, &mut t1);
                }
                for t in [t0, t1] {
                    if inside(t) {
                        let s = (o + dir * t).dot(axis);
                        if (0.0..=length).contains(&s) {
                            return Some(t);
                        }
                    }
                }
                None
            }
        }
    }
}

/// Signed, radius-normalized offset of a viewing ray from a fiber axis.
///
/// `view_dir` is the direction the ray travels. The offset is measured along
/// `axis_dir x view_perp`, where `view_perp` is `view_dir` projected into the
/// plane orthogonal to the axis. The result is clamped to `[-1, 1]`.
pub fn fiber_offset(
    hit_point: Vec3,
    axis_point: Vec3,
    axis_dir: Vec3,
    view_dir: Vec3,
    radius: f64,
) -> Result<f64, GeometryError> {
    let view_perp = view_dir - axis_dir * view_dir.dot(axis_dir);
    let len = view_perp.length();
    if len < 1e-8 {
        return Err(GeometryError::DegenerateFiberFrame);
    }
    let side = axis_dir.cross(view_perp / len);
    let radial = hit_point - axis_point;
    let radial = radial - axis_dir * radial.dot(axis_dir);
    Ok((radial.dot(side) / radius).clamp(-1.0, 1.0))
}
