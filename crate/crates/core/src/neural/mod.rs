//! Feed-forward feature maps and classifier heads with hand-written
//! forward/backward passes. No autodiff: the chain rule is spelled out for
//! exactly the shapes this crate trains (affine stacks with ReLU between
//! layers, optionally followed by row-wise sphere normalization).

pub mod checkpoint;
pub mod loss;
pub mod norm;
pub mod optim;

use crate::error::{Error, Result};
use ndarray::{Array1, Array2};
use rand::Rng;

pub use loss::{cross_entropy, CrossEntropy};
pub use norm::sphere_norm;
pub use optim::{Optimizer, OptimizerKind};

/// One affine transform; inputs hit `weight` (in×out) then `bias`.
#[derive(Debug, Clone)]
pub struct AffineLayer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl AffineLayer {
    fn init<R: Rng>(input: usize, output: usize, rng: &mut R) -> Self {
        // Uniform fan-in scaling.
        let bound = 1.0 / (input as f64).sqrt();
        let weight = Array2::from_shape_fn((input, output), |_| rng.random_range(-bound..bound));
        let bias = Array1::from_shape_fn(output, |_| rng.random_range(-bound..bound));
        Self { weight, bias }
    }
}

/// Multi-layer ReLU network, optionally sphere-normalizing each output row.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    layers: Vec<AffineLayer>,
    sphere_radius: Option<f64>,
    version: u64,
}

/// Activations recorded by [`FeatureMap::forward`] for the backward pass.
#[derive(Debug)]
pub struct ForwardCache {
    layer_inputs: Vec<Array2<f64>>,
    pre_activations: Vec<Array2<f64>>,
    sphere: Option<norm::SphereCache>,
    version: u64,
}

/// Parameter gradients, one (weight, bias) pair per layer.
#[derive(Debug, Clone)]
pub struct ParamGrads {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl ParamGrads {
    pub fn flat(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for (w, b) in &self.layers {
            out.push(w.as_slice().expect("standard layout"));
            out.push(b.as_slice().expect("standard layout"));
        }
        out
    }

    pub fn scale(&mut self, factor: f64) {
        for (w, b) in &mut self.layers {
            w.mapv_inplace(|v| v * factor);
            b.mapv_inplace(|v| v * factor);
        }
    }

    pub fn add(&mut self, other: &ParamGrads) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(other.layers.iter()) {
            *w += ow;
            *b += ob;
        }
    }
}

impl FeatureMap {
    /// Builds a network with the given layer dimensions (`dims[0]` is the
    /// input width) and fan-in uniform initialization. `sphere_radius`
    /// turns on row-wise sphere normalization of the final output.
    pub fn new<R: Rng>(dims: &[usize], sphere_radius: Option<f64>, rng: &mut R) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidConfig(
                "feature map needs at least one layer (two dimensions)".into(),
            ));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidConfig("zero-width layer".into()));
        }
        if *dims.last().unwrap() < 2 {
            return Err(Error::InvalidConfig(
                "output dimension must be at least 2".into(),
            ));
        }
        if let Some(r) = sphere_radius {
            if !r.is_finite() || r <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "sphere radius must be positive, got {r}"
                )));
            }
        }
        let layers = dims
            .windows(2)
            .map(|w| AffineLayer::init(w[0], w[1], rng))
            .collect();
        Ok(Self {
            layers,
            sphere_radius,
            version: 0,
        })
    }

    /// Assembles a map from explicit layers (used by tests and checkpoints).
    pub fn from_layers(layers: Vec<AffineLayer>, sphere_radius: Option<f64>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidConfig("feature map with no layers".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].weight.ncols() != pair[1].weight.nrows() {
                return Err(Error::InvalidConfig(format!(
                    "layer widths do not chain: {} -> {}",
                    pair[0].weight.ncols(),
                    pair[1].weight.nrows()
                )));
            }
        }
        for layer in &layers {
            if layer.weight.ncols() != layer.bias.len() {
                return Err(Error::InvalidConfig("bias width mismatch".into()));
            }
        }
        Ok(Self {
            layers,
            sphere_radius,
            version: 0,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().weight.ncols()
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[AffineLayer] {
        &self.layers
    }

    pub fn sphere_radius(&self) -> Option<f64> {
        self.sphere_radius
    }

    /// Forward pass with cached activations for a later [`Self::backward`].
    pub fn forward(&self, x: &Array2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        if x.ncols() != self.input_dim() {
            return Err(Error::InvalidInput(format!(
                "input width {} does not match first layer width {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        let mut layer_inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut current = x.clone();
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            layer_inputs.push(current.clone());
            let mut z = current.dot(&layer.weight);
            for mut row in z.rows_mut() {
                row += &layer.bias;
            }
            pre_activations.push(z.clone());
            current = if li < last {
                z.mapv(|v| v.max(0.0))
            } else {
                z
            };
        }
        let sphere = match self.sphere_radius {
            Some(r) => {
                let (out, cache) = norm::sphere_norm_batch(&current, r)?;
                current = out;
                Some(cache)
            }
            None => None,
        };
        Ok((
            current,
            ForwardCache {
                layer_inputs,
                pre_activations,
                sphere,
                version: self.version,
            },
        ))
    }

    /// Forward pass without caching (inference).
    pub fn output(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.forward(x).map(|(out, _)| out)
    }

    /// Backward pass: exact gradients of every parameter plus the gradient
    /// with respect to the input batch, for the upstream d(loss)/d(output).
    /// The cache must come from a forward call against the current
    /// parameters.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        upstream: &Array2<f64>,
    ) -> Result<(ParamGrads, Array2<f64>)> {
        if cache.version != self.version {
            return Err(Error::InvalidState(
                "stale forward cache: parameters changed since the forward pass".into(),
            ));
        }
        let mut delta = match (&cache.sphere, self.sphere_radius) {
            (Some(sc), Some(_)) => norm::sphere_norm_backward(sc, upstream),
            (None, None) => upstream.clone(),
            _ => {
                return Err(Error::InvalidState(
                    "cache normalization state does not match the map".into(),
                ))
            }
        };
        let mut grads = vec![None; self.layers.len()];
        for li in (0..self.layers.len()).rev() {
            if li < self.layers.len() - 1 {
                // ReLU derivative; subgradient at 0 taken as 0.
                let pre = &cache.pre_activations[li];
                delta.zip_mut_with(pre, |g, &p| {
                    if p <= 0.0 {
                        *g = 0.0;
                    }
                });
            }
            let input = &cache.layer_inputs[li];
            let dw = input.t().dot(&delta);
            let db = delta.sum_axis(ndarray::Axis(0));
            delta = delta.dot(&self.layers[li].weight.t());
            grads[li] = Some((dw, db));
        }
        Ok((
            ParamGrads {
                layers: grads.into_iter().map(|g| g.unwrap()).collect(),
            },
            delta,
        ))
    }

    /// Mutable views of every parameter tensor, in the same order as
    /// [`ParamGrads::flat`]. Taking them invalidates outstanding caches.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.version += 1;
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for layer in &mut self.layers {
            out.push(layer.weight.as_slice_mut().expect("standard layout"));
            out.push(layer.bias.as_slice_mut().expect("standard layout"));
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }
}

/// Two-layer ReLU classifier producing class logits.
#[derive(Debug, Clone)]
pub struct ClassifierHead {
    net: FeatureMap,
}

impl ClassifierHead {
    pub fn new<R: Rng>(input: usize, hidden: usize, classes: usize, rng: &mut R) -> Result<Self> {
        if classes < 2 {
            return Err(Error::InvalidConfig(
                "classifier needs at least two classes".into(),
            ));
        }
        Ok(Self {
            net: FeatureMap::new(&[input, hidden, classes], None, rng)?,
        })
    }

    pub fn from_feature_map(net: FeatureMap) -> Result<Self> {
        if net.sphere_radius().is_some() {
            return Err(Error::InvalidConfig(
                "classifier head must not sphere-normalize logits".into(),
            ));
        }
        Ok(Self { net })
    }

    pub fn class_count(&self) -> usize {
        self.net.output_dim()
    }

    pub fn forward(&self, z: &Array2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.net.forward(z)
    }

    pub fn logits(&self, z: &Array2<f64>) -> Result<Array2<f64>> {
        self.net.output(z)
    }

    pub fn backward(
        &self,
        cache: &ForwardCache,
        upstream: &Array2<f64>,
    ) -> Result<(ParamGrads, Array2<f64>)> {
        self.net.backward(cache, upstream)
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.net.param_slices_mut()
    }

    pub fn feature_map(&self) -> &FeatureMap {
        &self.net
    }
}
