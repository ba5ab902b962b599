//! Fourth-order central finite-difference checks of the hand-written backward passes, run
//! in `f64` on small networks. Perturbations that flip a ReLU between the
//! stencil evaluations are skipped, since the derivative is undefined there.

use rand::Rng;

use crate::math::{Aabb, Vec3};
use crate::neural::{Architecture, Mlp, NeuralModel, OutputActivation, PropertyLayout, ShadingQuery, OUTPUTS};
use crate::sampling::{stream_rng, uniform_sphere};
use crate::shading::ShadingFrame;
use crate::trainer::{batch_gradient, Sample};

/// Step of the fourth-order central stencil.
const STEP: f64 = 1e-4;
/// Gradients smaller than this are compared absolutely.
const FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct GradReport {
    pub class: &'static str,
    pub checked: usize,
    pub skipped: usize,
    pub max_rel_error: f64,
}

impl GradReport {
    fn new(class: &'static str) -> Self {
        GradReport { class, checked: 0, skipped: 0, max_rel_error: 0.0 }
    }

    /// Compares `analytic` with the stencil estimate built from
    /// `eval(delta)`, which evaluates the function with the parameter offset
    /// by `delta`.
    fn probe(&mut self, analytic: f64, mut eval: impl FnMut(f64) -> (f64, Vec<bool>)) {
        let (p1, m1) = eval(STEP);
        let (m1v, mm1) = eval(-STEP);
        let (p2, m2) = eval(2.0 * STEP);
        let (m2v, mm2) = eval(-2.0 * STEP);
        eval(0.0);
        if m1 != mm1 || m1 != m2 || m1 != mm2 {
            self.skipped += 1;
            return;
        }
        self.record(analytic, (8.0 * (p1 - m1v) - (p2 - m2v)) / (12.0 * STEP));
    }

    fn record(&mut self, analytic: f64, numeric: f64) {
        let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR);
        self.max_rel_error = self.max_rel_error.max(err);
        self.checked += 1;
    }
}

fn relu_mask(pre: &[Vec<f64>]) -> Vec<bool> {
    let hidden = pre.len().saturating_sub(1);
    pre[..hidden].iter().flatten().map(|&z| z > 0.0).collect()
}

/// Checks `d(u . mlp(x))` with respect to weights, biases and inputs.
pub fn check_mlp(seed: u64) -> Vec<GradReport> {
    let mut rng = stream_rng(seed, 0x6c, 0);
    let mut mlp: Mlp<f64> = Mlp::with_sizes(&[7, 12, 12, OUTPUTS], OutputActivation::Softplus, &mut rng);
    for l in &mut mlp.layers {
        for b in &mut l.biases {
            *b = rng.random_range(-0.5..0.5);
        }
    }
    let x: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
    let u: [f64; OUTPUTS] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
    let (grad, dx) = mlp.backward(&x, &u);
    let f = |m: &Mlp<f64>, x: &[f64]| -> (f64, Vec<bool>) {
        let c = m.forward_batch(x, 1);
        (c.out.iter().zip(&u).map(|(o, w)| o * w).sum(), relu_mask(&c.pre))
    };
    let mut reports = [GradReport::new("mlp weights"), GradReport::new("mlp biases"), GradReport::new("mlp inputs")];
    for l in 0..mlp.layers.len() {
        for i in 0..mlp.layers[l].weights.len() {
            let w0 = mlp.layers[l].weights[i];
            reports[0].probe(grad.weights[l][i], |d| {
                mlp.layers[l].weights[i] = w0 + d;
                f(&mlp, &x)
            });
        }
        for i in 0..mlp.layers[l].biases.len() {
            let b0 = mlp.layers[l].biases[i];
            reports[1].probe(grad.biases[l][i], |d| {
                mlp.layers[l].biases[i] = b0 + d;
                f(&mlp, &x)
            });
        }
    }
    for i in 0..x.len() {
        reports[2].probe(dx[i], |d| {
            let mut xd = x.clone();
            xd[i] += d;
            f(&mlp, &xd)
        });
    }
    reports.to_vec()
}

fn dir(rng: &mut impl Rng) -> Vec3 {
    uniform_sphere(rng.random(), rng.random())
}

fn random_samples(n: usize, bounds: &Aabb, layout: PropertyLayout, rng: &mut impl Rng) -> Vec<Sample> {
    (0..n)
        .map(|k| {
            let e = bounds.extent();
            let position = bounds.min + Vec3::new(rng.random::<f64>() * e.x, rng.random::<f64>() * e.y, rng.random::<f64>() * e.z);
            let frame = match layout {
                PropertyLayout::Surface => ShadingFrame::Surface { normal: dir(rng) },
                _ => ShadingFrame::Fiber { tangent: dir(rng), h: rng.random_range(-1.0..1.0) },
            };
            Sample {
                pixel: k as u32,
                query: ShadingQuery { position, wo: dir(rng), wi: dir(rng), frame },
                target: [rng.random_range(0.0..2.0), rng.random_range(0.0..2.0), rng.random_range(0.0..2.0)],
                visible: rng.random(),
            }
        })
        .collect()
}

/// Checks the training loss gradient through the decoder and the triplane
/// lookup, for every texel and every decoder parameter.
pub fn check_end_to_end(seed: u64, layout: PropertyLayout) -> Vec<GradReport> {
    let mut rng = stream_rng(seed, 0xe2e, 0);
    let bounds = Aabb::new(Vec3::new(-1.0, -0.5, 0.0), Vec3::new(1.0, 0.5, 2.0));
    let arch = Architecture { resolution: 5, channels: 3, hidden_layers: 2, width: 10, output_activation: OutputActivation::Softplus };
    let mut model: NeuralModel<f64> = NeuralModel::new(&arch, layout, bounds, &mut rng);
    // larger texels so the features matter next to the properties
    for p in model.grid.planes_mut().iter_mut() {
        for v in p.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
    }
    let samples = random_samples(24, &bounds, layout, &mut rng);
    let mut grad = model.zero_grad();
    batch_gradient(&model, &samples, true, &mut grad).expect("layout matches");
    let queries: Vec<ShadingQuery> = samples.iter().map(|s| s.query).collect();
    let eval = |m: &NeuralModel<f64>| -> (f64, Vec<bool>) {
        let mut scratch = m.zero_grad();
        let l = batch_gradient(m, &samples, true, &mut scratch).expect("layout matches");
        (l, relu_mask(&m.forward_batch(&queries).expect("layout matches").cache.pre))
    };
    let mut reports = [GradReport::new("triplane texels"), GradReport::new("decoder weights"), GradReport::new("decoder biases")];
    for p in 0..3 {
        for i in 0..model.grid.planes()[p].len() {
            let v0 = model.grid.planes()[p][i];
            reports[0].probe(grad.grid[p][i], |d| {
                model.grid.planes_mut()[p][i] = v0 + d;
                eval(&model)
            });
        }
    }
    for l in 0..model.mlp.layers.len() {
        for i in 0..model.mlp.layers[l].weights.len() {
            let w0 = model.mlp.layers[l].weights[i];
            reports[1].probe(grad.mlp.weights[l][i], |d| {
                model.mlp.layers[l].weights[i] = w0 + d;
                eval(&model)
            });
        }
        for i in 0..model.mlp.layers[l].biases.len() {
            let b0 = model.mlp.layers[l].biases[i];
            reports[2].probe(grad.mlp.biases[l][i], |d| {
                model.mlp.layers[l].biases[i] = b0 + d;
                eval(&model)
            });
        }
    }
    reports.to_vec()
}

/// Tolerance each report class is held to.
pub fn tolerance(class: &str) -> f64 {
    if class.starts_with("mlp") {
        1e-6
    } else {
        1e-5
    }
}

pub fn run_all(seed: u64) -> Vec<GradReport> {
    let mut r = check_mlp(seed);
    r.extend(check_end_to_end(seed, PropertyLayout::Surface));
    r.extend(check_end_to_end(seed.wrapping_add(1), PropertyLayout::Fiber));
    r
}
