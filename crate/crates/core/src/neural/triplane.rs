//! Triplane feature grid: three axis-aligned `R x R x C` tables whose bilinear
//! lookups are summed into one `C`-channel feature vector.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::math::{Aabb, Vec3};

use super::Real;

/// Coordinate pairs `(first, second)` addressed by each plane: XY, YZ, ZX.
pub const PLANE_AXES: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 0)];
pub const PLANE_NAMES: [&str; 3] = ["xy", "yz", "zx"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TexelWeight<T> {
    pub plane: usize,
    /// Texel index `b * R + a` within the plane.
    pub texel: usize,
    pub weight: T,
}

/// The 12 bilinear taps (4 per plane) of one query.
pub type Footprint<T> = [TexelWeight<T>; 12];

/// Sparse gradient of a query: one `C`-vector per touched texel.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriplaneGrad<T> {
    pub entries: Vec<(usize, usize, Vec<T>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriplaneGrid<T> {
    resolution: usize,
    channels: usize,
    /// `planes[p][(b * R + a) * C + c]`.
    planes: [Vec<T>; 3],
    bounds: Aabb,
}

impl<T: Real> TriplaneGrid<T> {
    pub fn zeros(resolution: usize, channels: usize, bounds: Aabb) -> Self {
        assert!(resolution >= 2, "triplane resolution must be at least 2");
        assert!(channels >= 1);
        let n = resolution * resolution * channels;
        TriplaneGrid {
            resolution,
            channels,
            planes: [vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n]],
            bounds,
        }
    }

    /// Texels drawn from `N(0, std^2)`.
    pub fn random(resolution: usize, channels: usize, bounds: Aabb, std: f64, rng: &mut impl Rng) -> Self {
        let mut g = Self::zeros(resolution, channels, bounds);
        let normal = Normal::new(0.0, std).expect("valid std");
        for plane in g.planes.iter_mut() {
            for v in plane.iter_mut() {
                *v = T::of(normal.sample(rng));
            }
        }
        g
    }

    pub fn from_planes(resolution: usize, channels: usize, bounds: Aabb, planes: [Vec<T>; 3]) -> Self {
        for p in &planes {
            assert_eq!(p.len(), resolution * resolution * channels, "plane size mismatch");
        }
        TriplaneGrid { resolution, channels, planes, bounds }
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn bounds(&self) -> Aabb {
        self.bounds
    }

    pub fn planes(&self) -> &[Vec<T>; 3] {
        &self.planes
    }

    pub fn planes_mut(&mut self) -> &mut [Vec<T>; 3] {
        &mut self.planes
    }

    pub fn parameter_count(&self) -> usize {
        3 * self.resolution * self.resolution * self.channels
    }

    pub fn texel(&self, plane: usize, a: usize, b: usize) -> &[T] {
        let start = (b * self.resolution + a) * self.channels;
        &self.planes[plane][start..start + self.channels]
    }

    pub fn texel_mut(&mut self, plane: usize, a: usize, b: usize) -> &mut [T] {
        let start = (b * self.resolution + a) * self.channels;
        let c = self.channels;
        &mut self.planes[plane][start..start + c]
    }

    /// World position of the center of texel `(a, b)` projected on `plane`
    /// along the two coordinates that plane addresses.
    pub fn texel_center(&self, plane: usize, a: usize, b: usize) -> (f64, f64) {
        let (ia, ib) = PLANE_AXES[plane];
        let r = self.resolution as f64;
        let e = self.bounds.extent();
        (
            self.bounds.min[ia] + (a as f64 + 0.5) / r * e[ia],
            self.bounds.min[ib] + (b as f64 + 0.5) / r * e[ib],
        )
    }

    /// Continuous texel coordinate of `x` along `axis`, clamped to the
    /// centers of the first and last texel.
    fn texel_coord(&self, x: Vec3, axis: usize) -> (usize, f64) {
        let r = self.resolution;
        let e = self.bounds.extent()[axis];
        let u = if e > 0.0 { (x[axis] - self.bounds.min[axis]) / e } else { 0.5 };
        let p = (u * r as f64 - 0.5).clamp(0.0, (r - 1) as f64);
        let i0 = (p.floor() as usize).min(r - 2);
        (i0, p - i0 as f64)
    }

    pub fn footprint(&self, x: Vec3) -> Footprint<T> {
        let coords = [self.texel_coord(x, 0), self.texel_coord(x, 1), self.texel_coord(x, 2)];
        let r = self.resolution;
        let mut out = [TexelWeight { plane: 0, texel: 0, weight: T::zero() }; 12];
        for (plane, &(ia, ib)) in PLANE_AXES.iter().enumerate() {
            let (a0, fa) = coords[ia];
            let (b0, fb) = coords[ib];
            let taps = [
                (a0, b0, (1.0 - fa) * (1.0 - fb)),
                (a0 + 1, b0, fa * (1.0 - fb)),
                (a0, b0 + 1, (1.0 - fa) * fb),
                (a0 + 1, b0 + 1, fa * fb),
            ];
            for (k, (a, b, w)) in taps.into_iter().enumerate() {
                out[plane * 4 + k] = TexelWeight { plane, texel: b * r + a, weight: T::of(w) };
            }
        }
        out
    }

    pub fn gather(&self, fp: &Footprint<T>, out: &mut [T]) {
        let c = self.channels;
        out[..c].iter_mut().for_each(|v| *v = T::zero());
        for tw in fp {
            if tw.weight == T::zero() {
                continue;
            }
            let src = &self.planes[tw.plane][tw.texel * c..(tw.texel + 1) * c];
            for (o, &s) in out.iter_mut().zip(src) {
                *o = *o + tw.weight * s;
            }
        }
    }

    /// `zeta(x) = bilerp(xy) + bilerp(yz) + bilerp(zx)`.
    pub fn query(&self, x: Vec3) -> Vec<T> {
        let mut out = vec![T::zero(); self.channels];
        self.gather(&self.footprint(x), &mut out);
        out
    }

    /// Gradient of `upstream . zeta(x)` w.r.t. the texels: bilinear weight
    /// times upstream on each touched texel. Zero weights and an all-zero
    /// upstream produce no entries.
    pub fn query_grad(&self, x: Vec3, upstream: &[T]) -> TriplaneGrad<T> {
        let mut g = TriplaneGrad::default();
        if upstream.iter().all(|&u| u == T::zero()) {
            return g;
        }
        for tw in self.footprint(x) {
            if tw.weight != T::zero() {
                g.entries.push((tw.plane, tw.texel, upstream.iter().map(|&u| u * tw.weight).collect()));
            }
        }
        g
    }

    /// Scatter-adds `weight * upstream` into a dense gradient laid out like the planes.
    pub fn scatter(&self, fp: &Footprint<T>, upstream: &[T], dense: &mut [Vec<T>; 3]) {
        let c = self.channels;
        for tw in fp {
            if tw.weight == T::zero() {
                continue;
            }
            let dst = &mut dense[tw.plane][tw.texel * c..(tw.texel + 1) * c];
            for (d, &u) in dst.iter_mut().zip(upstream) {
                *d = *d + tw.weight * u;
            }
        }
    }

    pub fn cast<U: Real>(&self) -> TriplaneGrid<U> {
        TriplaneGrid {
            resolution: self.resolution,
            channels: self.channels,
            planes: self.planes.clone().map(|p| p.into_iter().map(|v| U::of(v.f64())).collect()),
            bounds: self.bounds,
        }
    }
}
