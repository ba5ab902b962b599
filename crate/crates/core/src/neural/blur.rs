use super::{Real, TriplaneGrid};

/// Normalized Gaussian taps for a blur footprint in texels: `sigma =
/// footprint / 2`, truncated at `ceil(3 sigma)`. A footprint of exactly 1 is
/// the identity kernel `[1]`.
pub fn blur_kernel(footprint: f64) -> Vec<f64> {
    assert!(footprint >= 1.0, "blur footprint must be at least 1 texel, got {footprint}");
    if footprint == 1.0 {
        return vec![1.0];
    }
    let sigma = footprint / 2.0;
    let radius = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-radius..=radius).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable in-place blur of every plane and channel, clamping at the edges.
pub fn blur_grids<T: Real>(grid: &mut TriplaneGrid<T>, footprint: f64) {
    let kernel = blur_kernel(footprint);
    if kernel.len() == 1 {
        return;
    }
    let r = grid.resolution();
    let c = grid.channels();
    let kernel: Vec<T> = kernel.into_iter().map(T::of).collect();
    let radius = (kernel.len() / 2) as isize;
    let mut tmp = vec![T::zero(); r * r * c];
    for plane in grid.planes_mut().iter_mut() {
        // along a, then along b
        for pass in 0..2 {
            let (src, dst): (&[T], &mut [T]) = if pass == 0 { (plane, &mut tmp) } else { (&tmp, plane) };
            for b in 0..r {
                for a in 0..r {
                    let out = &mut dst[(b * r + a) * c..(b * r + a + 1) * c];
                    out.iter_mut().for_each(|v| *v = T::zero());
                    for (j, &w) in kernel.iter().enumerate() {
                        let off = j as isize - radius;
                        let (sa, sb) = if pass == 0 {
                            ((a as isize + off).clamp(0, r as isize - 1) as usize, b)
                        } else {
                            (a, (b as isize + off).clamp(0, r as isize - 1) as usize)
                        };
                        let s = &src[(sb * r + sa) * c..(sb * r + sa + 1) * c];
                        for (o, &v) in out.iter_mut().zip(s) {
                            *o = *o + w * v;
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{Aabb, Vec3};
    use crate::sampling::stream_rng;

    fn grid(r: usize, c: usize) -> TriplaneGrid<f64> {
        TriplaneGrid::zeros(r, c, Aabb::new(Vec3::ZERO, Vec3::splat(1.0)))
    }

    #[test]
    fn footprint_one_is_identity() {
        let mut rng = stream_rng(4, 0, 0);
        let mut g = TriplaneGrid::<f64>::random(8, 3, Aabb::new(Vec3::ZERO, Vec3::splat(1.0)), 1.0, &mut rng);
        let before = g.clone();
        blur_grids(&mut g, 1.0);
        assert_eq!(g, before);
    }

    #[test]
    fn constant_table_is_unchanged() {
        let mut g = grid(10, 2);
        for p in g.planes_mut().iter_mut() {
            p.iter_mut().for_each(|v| *v = 0.75);
        }
        for fp in [1.5, 2.0, 4.0, 7.3] {
            blur_grids(&mut g, fp);
            for p in g.planes() {
                assert!(p.iter().all(|&v| (v - 0.75).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn impulse_reproduces_kernel() {
        // Direct Gaussian evaluation, independent of blur_kernel.
        let sigma: f64 = 2.0;
        let raw: Vec<f64> = (-6..=6).map(|i: i32| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
        let total: f64 = raw.iter().sum();
        let expected: Vec<f64> = raw.iter().map(|v| v / total).collect();
        assert!((expected.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let r = 32;
        let mut g = grid(r, 1);
        let (a0, b0) = (16usize, 16usize);
        g.texel_mut(0, a0, b0)[0] = 1.0;
        blur_grids(&mut g, 4.0);
        let row: Vec<f64> = (0..r).map(|a| g.texel(0, a, b0)[0]).collect();
        let row_sum: f64 = row.iter().sum();
        for (j, &e) in expected.iter().enumerate() {
            let a = a0 + j - 6;
            assert!((row[a] / row_sum - e).abs() < 1e-12);
        }
        let total: f64 = g.planes()[0].iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    #[should_panic(expected = "at least 1")]
    fn footprint_below_one_panics() {
        blur_kernel(0.5);
    }
}
