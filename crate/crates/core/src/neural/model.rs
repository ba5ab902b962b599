use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::AssetKind;
use crate::math::{Aabb, Vec3};
use crate::shading::ShadingFrame;

use super::mlp::{ForwardCache, Mlp, MlpGrad, OutputActivation};
use super::triplane::{Footprint, TriplaneGrid};
use super::Real;

/// Which shading properties follow the triplane features in the MLP input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropertyLayout {
    /// `[w_o, w_i, n]`
    Surface,
    /// `[w_o, w_i, d, h]`
    Fiber,
    /// `[w_o, w_i, d]`, the fiber layout with the width offset dropped.
    FiberNoOffset,
}

impl PropertyLayout {
    pub fn len(self) -> usize {
        match self {
            PropertyLayout::Surface | PropertyLayout::FiberNoOffset => 9,
            PropertyLayout::Fiber => 10,
        }
    }

    pub fn is_empty(self) -> bool {
        false
    }

    pub fn kind(self) -> AssetKind {
        match self {
            PropertyLayout::Surface => AssetKind::Surface,
            _ => AssetKind::Fiber,
        }
    }

    pub fn default_for(kind: AssetKind) -> Self {
        match kind {
            AssetKind::Surface => PropertyLayout::Surface,
            AssetKind::Fiber => PropertyLayout::Fiber,
        }
    }

    /// Writes the property vector; `None` if the frame kind does not match.
    pub fn encode<T: Real>(self, q: &ShadingQuery, out: &mut [T]) -> Option<()> {
        let put = |out: &mut [T], at: usize, v: Vec3| {
            out[at] = T::of(v.x);
            out[at + 1] = T::of(v.y);
            out[at + 2] = T::of(v.z);
        };
        put(out, 0, q.wo);
        put(out, 3, q.wi);
        match (self, q.frame) {
            (PropertyLayout::Surface, ShadingFrame::Surface { normal }) => put(out, 6, normal),
            (PropertyLayout::Fiber, ShadingFrame::Fiber { tangent, h }) => {
                put(out, 6, tangent);
                out[9] = T::of(h);
            }
            (PropertyLayout::FiberNoOffset, ShadingFrame::Fiber { tangent, .. }) => put(out, 6, tangent),
            _ => return None,
        }
        Some(())
    }
}

/// One evaluation point in training (object) space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadingQuery {
    pub position: Vec3,
    /// Toward the viewer.
    pub wo: Vec3,
    /// Toward the light.
    pub wi: Vec3,
    pub frame: ShadingFrame,
}

/// Triplane features plus decoder, generic over the scalar so the same code
/// trains in `f32` and is verified in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralModel<T> {
    pub grid: TriplaneGrid<T>,
    pub mlp: Mlp<T>,
    pub layout: PropertyLayout,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub resolution: usize,
    pub channels: usize,
    pub hidden_layers: usize,
    pub width: usize,
    #[serde(default)]
    pub output_activation: OutputActivation,
}

impl Architecture {
    pub fn parameter_count(&self, layout: PropertyLayout) -> usize {
        let input = self.channels + layout.len();
        let mut sizes = vec![input];
        sizes.extend(std::iter::repeat_n(self.width, self.hidden_layers));
        sizes.push(super::OUTPUTS);
        let mlp: usize = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        3 * self.resolution * self.resolution * self.channels + mlp
    }
}

/// Dense gradient of the whole model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrad<T> {
    pub grid: [Vec<T>; 3],
    pub mlp: MlpGrad<T>,
}

/// Intermediate state of a batched forward pass.
pub struct BatchForward<T> {
    pub footprints: Vec<Footprint<T>>,
    pub inputs: Vec<T>,
    pub cache: ForwardCache<T>,
}

impl<T: Real> NeuralModel<T> {
    pub fn new(arch: &Architecture, layout: PropertyLayout, bounds: Aabb, rng: &mut impl Rng) -> Self {
        let grid = TriplaneGrid::random(arch.resolution, arch.channels, bounds, 0.01, rng);
        let mlp = Mlp::new(arch.channels + layout.len(), arch.hidden_layers, arch.width, arch.output_activation, rng);
        NeuralModel { grid, mlp, layout }
    }

    pub fn architecture(&self) -> Architecture {
        let sizes = self.mlp.sizes();
        Architecture {
            resolution: self.grid.resolution(),
            channels: self.grid.channels(),
            hidden_layers: sizes.len() - 2,
            width: if sizes.len() > 2 { sizes[1] } else { 0 },
            output_activation: self.mlp.output,
        }
    }

    pub fn input_size(&self) -> usize {
        self.grid.channels() + self.layout.len()
    }

    pub fn parameter_count(&self) -> usize {
        self.grid.parameter_count() + self.mlp.parameter_count()
    }

    pub fn zero_grad(&self) -> ModelGrad<T> {
        let n = self.grid.planes()[0].len();
        ModelGrad { grid: [vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n]], mlp: self.mlp.zero_grad() }
    }

    /// Builds the MLP input `[zeta(x), properties]` for one query.
    pub fn encode(&self, q: &ShadingQuery, fp: &Footprint<T>, out: &mut [T]) -> Option<()> {
        let c = self.grid.channels();
        self.grid.gather(fp, &mut out[..c]);
        self.layout.encode(q, &mut out[c..])
    }

    /// `(lit, shadowed)` outputs; `None` on a frame/layout mismatch.
    pub fn eval(&self, q: &ShadingQuery) -> Option<([T; 3], [T; 3])> {
        let fp = self.grid.footprint(q.position);
        let mut x = vec![T::zero(); self.input_size()];
        self.encode(q, &fp, &mut x)?;
        Some(self.mlp.forward(&x))
    }

    pub fn forward_batch(&self, queries: &[ShadingQuery]) -> Option<BatchForward<T>> {
        let width = self.input_size();
        let mut inputs = vec![T::zero(); queries.len() * width];
        let mut footprints = Vec::with_capacity(queries.len());
        for (q, row) in queries.iter().zip(inputs.chunks_exact_mut(width)) {
            let fp = self.grid.footprint(q.position);
            self.encode(q, &fp, row)?;
            footprints.push(fp);
        }
        let cache = self.mlp.forward_batch(&inputs, queries.len());
        Some(BatchForward { footprints, inputs, cache })
    }

    /// Accumulates the MLP gradient into `grad` and returns the gradient with
    /// respect to the triplane features, `batch x C`, for later scattering.
    pub fn backward_batch(&self, fwd: &BatchForward<T>, upstream: &[T], grad: &mut MlpGrad<T>) -> Vec<T> {
        let dx = self.mlp.backward_batch(&fwd.inputs, &fwd.cache, upstream, grad);
        let width = self.input_size();
        let c = self.grid.channels();
        dx.chunks_exact(width).flat_map(|row| row[..c].iter().copied()).collect()
    }

    /// Scatters feature gradients (one `C`-row per footprint) into `dense`.
    pub fn scatter_features(&self, footprints: &[Footprint<T>], feature_grad: &[T], dense: &mut [Vec<T>; 3]) {
        let c = self.grid.channels();
        for (fp, g) in footprints.iter().zip(feature_grad.chunks_exact(c)) {
            self.grid.scatter(fp, g, dense);
        }
    }

    pub fn cast<U: Real>(&self) -> NeuralModel<U> {
        NeuralModel { grid: self.grid.cast(), mlp: self.mlp.cast(), layout: self.layout }
    }
}
