//! Feed-forward model representation and single-image inference.
//!
//! A [`Model`] is an ordered list of layers. Each layer reads the output of the
//! previous layer unless it names another source, and may add the output of
//! an earlier layer to its own result (residual merge). Only activation layers
//! (`aa_relu`) carry runtime configuration: a threshold and a storage
//! precision for the cast applied to their output.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicUsize, Ordering};

use crate::activation;
use crate::error::{Error, Result};
use crate::ops::{self, Window};
use crate::tensor::{Precision, Tensor};

/// Source id that refers to the model input rather than a layer.
pub const MODEL_INPUT: &str = "input";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv2d {
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    DepthwiseConv2d {
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    Dense {
        out_features: usize,
    },
    MaxPool {
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    AvgPool {
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    Flatten,
    Softmax,
    AaRelu,
}

impl LayerKind {
    pub fn name(&self) -> &'static str {
        match self {
            LayerKind::Conv2d { .. } => "conv2d",
            LayerKind::DepthwiseConv2d { .. } => "depthwise_conv2d",
            LayerKind::Dense { .. } => "dense",
            LayerKind::MaxPool { .. } => "maxpool",
            LayerKind::AvgPool { .. } => "avgpool",
            LayerKind::Flatten => "flatten",
            LayerKind::Softmax => "softmax",
            LayerKind::AaRelu => "aa_relu",
        }
    }

    pub fn has_weights(&self) -> bool {
        matches!(
            self,
            LayerKind::Conv2d { .. } | LayerKind::DepthwiseConv2d { .. } | LayerKind::Dense { .. }
        )
    }

    pub fn is_activation(&self) -> bool {
        matches!(self, LayerKind::AaRelu)
    }
}

/// Element range `[offset, offset + length)` of a layer's parameters in the
/// weight blob. Weights come first, then biases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightRef {
    pub offset: usize,
    pub length: usize,
}

/// Unresolved layer as written in a manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerDef {
    pub id: String,
    pub kind: LayerKind,
    /// Source layer id; `None` means the previous layer (or the model input
    /// for the first layer).
    pub input: Option<String>,
    /// Id of an earlier layer whose output is added to this layer's result.
    pub add: Option<String>,
    pub weight_ref: Option<WeightRef>,
}

impl LayerDef {
    pub fn new(id: impl Into<String>, kind: LayerKind) -> Self {
        Self {
            id: id.into(),
            kind,
            input: None,
            add: None,
            weight_ref: None,
        }
    }

    pub fn with_weights(mut self, offset: usize, length: usize) -> Self {
        self.weight_ref = Some(WeightRef { offset, length });
        self
    }

    pub fn with_input(mut self, id: impl Into<String>) -> Self {
        self.input = Some(id.into());
        self
    }

    pub fn with_add(mut self, id: impl Into<String>) -> Self {
        self.add = Some(id.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    ModelInput,
    Layer(usize),
}

/// Resolved layer with inferred shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    pub id: String,
    pub kind: LayerKind,
    pub input: Source,
    pub add: Option<usize>,
    pub weight_ref: Option<WeightRef>,
    pub input_shape: Vec<usize>,
    pub output_shape: Vec<usize>,
}

impl LayerSpec {
    pub fn output_len(&self) -> usize {
        self.output_shape.iter().product()
    }

    pub fn param_count(&self) -> usize {
        match self.kind {
            LayerKind::Conv2d {
                out_channels,
                kernel,
                ..
            } => out_channels * self.input_shape[0] * kernel * kernel + out_channels,
            LayerKind::DepthwiseConv2d { kernel, .. } => {
                let c = self.input_shape[0];
                c * kernel * kernel + c
            }
            LayerKind::Dense { out_features } => out_features * self.input_shape[0] + out_features,
            _ => 0,
        }
    }

    /// Multiply-accumulate count of one forward pass.
    pub fn macs(&self) -> u64 {
        let out = self.output_len() as u64;
        match self.kind {
            LayerKind::Conv2d { kernel, .. } => {
                out * (self.input_shape[0] * kernel * kernel) as u64
            }
            LayerKind::DepthwiseConv2d { kernel, .. } => out * (kernel * kernel) as u64,
            LayerKind::Dense { .. } => out * self.input_shape[0] as u64,
            _ => 0,
        }
    }
}

/// Runtime knobs of one activation layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerRuntimeConfig {
    pub threshold: f32,
    pub precision: Precision,
    /// Sparsity level the threshold was calibrated for. Only the latency
    /// proxy reads it.
    pub sparsity: f32,
}

impl Default for LayerRuntimeConfig {
    fn default() -> Self {
        Self {
            threshold: 0.0,
            precision: Precision::Fp32,
            sparsity: 0.0,
        }
    }
}

impl LayerRuntimeConfig {
    pub fn new(threshold: f32, precision: Precision, sparsity: f32) -> Result<Self> {
        if !(threshold.is_finite() && threshold >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "threshold must be finite and non-negative, got {threshold}"
            )));
        }
        if !(0.0..=1.0).contains(&sparsity) {
            return Err(Error::InvalidArgument(format!(
                "sparsity level must lie in [0, 1], got {sparsity}"
            )));
        }
        Ok(Self {
            threshold,
            precision,
            sparsity,
        })
    }

    /// True when this configuration reproduces the unmodified network.
    pub fn is_baseline(&self) -> bool {
        self.threshold == 0.0 && self.precision == Precision::Fp32
    }
}

/// Per-activation runtime configuration. Layers without an entry run at the
/// baseline `(T = 0, FP32)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RuntimeConfig {
    layers: BTreeMap<String, LayerRuntimeConfig>,
}

impl RuntimeConfig {
    pub fn baseline() -> Self {
        Self::default()
    }

    pub fn get(&self, id: &str) -> LayerRuntimeConfig {
        self.layers.get(id).copied().unwrap_or_default()
    }

    /// Explicit entry for `id`, if any.
    pub fn entry(&self, id: &str) -> Option<&LayerRuntimeConfig> {
        self.layers.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &LayerRuntimeConfig)> {
        self.layers.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Sets `id` after checking it names an activation layer of `model`.
    pub fn set(&mut self, model: &Model, id: &str, cfg: LayerRuntimeConfig) -> Result<()> {
        model.activation_index(id)?;
        self.layers.insert(id.to_string(), cfg);
        Ok(())
    }

    pub fn with(mut self, model: &Model, id: &str, cfg: LayerRuntimeConfig) -> Result<Self> {
        self.set(model, id, cfg)?;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// True when every layer runs at its baseline configuration.
    pub fn is_baseline(&self) -> bool {
        self.layers.values().all(LayerRuntimeConfig::is_baseline)
    }

    pub fn validate(&self, model: &Model) -> Result<()> {
        for id in self.layers.keys() {
            model.activation_index(id)?;
        }
        Ok(())
    }
}

/// Labelled evaluation samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<Tensor>,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn new(inputs: Vec<Tensor>, labels: Vec<usize>) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} inputs but {} labels",
                inputs.len(),
                labels.len()
            )));
        }
        Ok(Self { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[Tensor] {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Tensor, usize)> {
        self.inputs.iter().zip(self.labels.iter().copied())
    }

    /// First `n` samples.
    pub fn subset(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            inputs: self.inputs[..n].to_vec(),
            labels: self.labels[..n].to_vec(),
        }
    }
}

#[derive(Debug)]
pub struct Model {
    name: String,
    input_shape: Vec<usize>,
    class_count: usize,
    layers: Vec<LayerSpec>,
    weights: Option<Vec<f32>>,
    runtime: RuntimeConfig,
    /// Last layer index reading each layer's output.
    last_use: Vec<usize>,
    dataset_passes: AtomicUsize,
}

impl Clone for Model {
    fn clone(&self) -> Self {
        Self {
            name: self.name.clone(),
            input_shape: self.input_shape.clone(),
            class_count: self.class_count,
            layers: self.layers.clone(),
            weights: self.weights.clone(),
            runtime: self.runtime.clone(),
            last_use: self.last_use.clone(),
            dataset_passes: AtomicUsize::new(self.dataset_passes.load(Ordering::Relaxed)),
        }
    }
}

fn layer_err(id: &str, reason: impl Into<String>) -> Error {
    Error::Layer {
        layer: id.to_string(),
        reason: reason.into(),
    }
}

fn infer_output_shape(id: &str, kind: &LayerKind, input: &[usize]) -> Result<Vec<usize>> {
    let chw = || -> Result<(usize, usize, usize)> {
        match *input {
            [c, h, w] => Ok((c, h, w)),
            _ => Err(layer_err(
                id,
                format!("expects a [C, H, W] input, got {input:?}"),
            )),
        }
    };
    let window = |kernel: usize, stride: usize, padding: usize, h: usize, w: usize| {
        let win = Window {
            kernel,
            stride,
            padding,
        };
        match (win.output_len(h), win.output_len(w)) {
            (Some(oh), Some(ow)) if oh > 0 && ow > 0 => Ok((oh, ow)),
            _ => Err(layer_err(
                id,
                format!("window k={kernel} s={stride} p={padding} does not fit {h}x{w}"),
            )),
        }
    };
    match *kind {
        LayerKind::Conv2d {
            out_channels,
            kernel,
            stride,
            padding,
        } => {
            if out_channels == 0 {
                return Err(layer_err(id, "out_channels must be positive"));
            }
            let (_, h, w) = chw()?;
            let (oh, ow) = window(kernel, stride, padding, h, w)?;
            Ok(vec![out_channels, oh, ow])
        }
        LayerKind::DepthwiseConv2d {
            kernel,
            stride,
            padding,
        } => {
            let (c, h, w) = chw()?;
            let (oh, ow) = window(kernel, stride, padding, h, w)?;
            Ok(vec![c, oh, ow])
        }
        LayerKind::MaxPool {
            kernel,
            stride,
            padding,
        }
        | LayerKind::AvgPool {
            kernel,
            stride,
            padding,
        } => {
            if 2 * padding > kernel {
                return Err(layer_err(id, "pool padding exceeds half the kernel"));
            }
            let (c, h, w) = chw()?;
            let (oh, ow) = window(kernel, stride, padding, h, w)?;
            Ok(vec![c, oh, ow])
        }
        LayerKind::Dense { out_features } => {
            if out_features == 0 {
                return Err(layer_err(id, "out_features must be positive"));
            }
            if input.len() != 1 {
                return Err(layer_err(
                    id,
                    format!("expects a flat input, got {input:?}"),
                ));
            }
            Ok(vec![out_features])
        }
        LayerKind::Flatten => Ok(vec![input.iter().product()]),
        LayerKind::Softmax | LayerKind::AaRelu => Ok(input.to_vec()),
    }
}

impl Model {
    /// Resolves layer sources, infers shapes and validates weight references.
    ///
    /// `weights = None` builds a descriptor: usable by the cost model, not by
    /// inference.
    pub fn new(
        name: impl Into<String>,
        input_shape: Vec<usize>,
        class_count: usize,
        defs: Vec<LayerDef>,
        weights: Option<Vec<f32>>,
    ) -> Result<Self> {
        let name = name.into();
        if input_shape.is_empty() || input_shape.contains(&0) {
            return Err(Error::InvalidShape(input_shape));
        }
        if defs.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "model `{name}` has no layers"
            )));
        }
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        let mut layers: Vec<LayerSpec> = Vec::with_capacity(defs.len());
        for (i, def) in defs.into_iter().enumerate() {
            if def.id.is_empty() {
                return Err(Error::InvalidArgument(format!("layer {i} has an empty id")));
            }
            if def.id == MODEL_INPUT {
                return Err(layer_err(
                    &def.id,
                    "`input` is reserved for the model input",
                ));
            }
            if index.contains_key(&def.id) {
                return Err(layer_err(&def.id, "duplicate layer id"));
            }
            let lookup = |id: &str| {
                index.get(id).copied().ok_or_else(|| {
                    layer_err(&def.id, format!("references unknown or later layer `{id}`"))
                })
            };
            let input = match &def.input {
                Some(src) if src == MODEL_INPUT => Source::ModelInput,
                Some(src) => Source::Layer(lookup(src)?),
                None if i == 0 => Source::ModelInput,
                None => Source::Layer(i - 1),
            };
            let input_shape_l = match input {
                Source::ModelInput => input_shape.clone(),
                Source::Layer(j) => layers[j].output_shape.clone(),
            };
            let output_shape = infer_output_shape(&def.id, &def.kind, &input_shape_l)?;
            let add = match &def.add {
                Some(src) => {
                    let j = lookup(src)?;
                    if layers[j].output_shape != output_shape {
                        return Err(layer_err(
                            &def.id,
                            format!(
                                "residual `{src}` has shape {:?}, expected {output_shape:?}",
                                layers[j].output_shape
                            ),
                        ));
                    }
                    Some(j)
                }
                None => None,
            };
            if !def.kind.has_weights() && def.weight_ref.is_some_and(|r| r.length > 0) {
                return Err(layer_err(&def.id, "parameterless layer carries weights"));
            }
            index.insert(def.id.clone(), i);
            layers.push(LayerSpec {
                id: def.id,
                kind: def.kind,
                input,
                add,
                weight_ref: def.weight_ref,
                input_shape: input_shape_l,
                output_shape,
            });
        }

        let out_len = layers.last().map(LayerSpec::output_len).unwrap_or(0);
        if class_count == 0 || out_len != class_count {
            return Err(Error::InvalidArgument(format!(
                "model `{name}` produces {out_len} outputs but declares {class_count} classes"
            )));
        }

        if let Some(blob) = &weights {
            for layer in layers.iter().filter(|l| l.kind.has_weights()) {
                let expected = layer.param_count();
                let r = layer
                    .weight_ref
                    .ok_or_else(|| layer_err(&layer.id, "missing weight_ref"))?;
                if r.length != expected {
                    return Err(layer_err(
                        &layer.id,
                        format!(
                            "weight_ref covers {} values but the layer needs {expected}",
                            r.length
                        ),
                    ));
                }
                if r.offset
                    .checked_add(r.length)
                    .is_none_or(|end| end > blob.len())
                {
                    return Err(layer_err(
                        &layer.id,
                        format!(
                            "weight_ref [{}, +{}) runs past the end of the {}-value blob",
                            r.offset,
                            r.length,
                            blob.len()
                        ),
                    ));
                }
            }
        }

        let mut last_use: Vec<usize> = (0..layers.len()).collect();
        for (i, l) in layers.iter().enumerate() {
            if let Source::Layer(j) = l.input {
                last_use[j] = last_use[j].max(i);
            }
            if let Some(j) = l.add {
                last_use[j] = last_use[j].max(i);
            }
        }

        Ok(Self {
            name,
            input_shape,
            class_count,
            layers,
            weights,
            runtime: RuntimeConfig::baseline(),
            last_use,
            dataset_passes: AtomicUsize::new(0),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn weights(&self) -> Option<&[f32]> {
        self.weights.as_deref()
    }

    pub fn has_weights(&self) -> bool {
        self.weights.is_some()
    }

    pub fn layer_index(&self, id: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.id == id)
    }

    /// Index of activation layer `id`.
    pub fn activation_index(&self, id: &str) -> Result<usize> {
        let i = self
            .layer_index(id)
            .ok_or_else(|| Error::UnknownLayer(id.to_string()))?;
        if !self.layers[i].kind.is_activation() {
            return Err(Error::NotAnActivation(id.to_string()));
        }
        Ok(i)
    }

    pub fn activation_ids(&self) -> Vec<&str> {
        self.layers
            .iter()
            .filter(|l| l.kind.is_activation())
            .map(|l| l.id.as_str())
            .collect()
    }

    pub fn runtime_config(&self) -> &RuntimeConfig {
        &self.runtime
    }

    pub fn set_runtime_config(&mut self, cfg: RuntimeConfig) -> Result<()> {
        cfg.validate(self)?;
        self.runtime = cfg;
        Ok(())
    }

    /// Number of passes over a dataset (evaluation or calibration) run with
    /// this model.
    pub fn dataset_passes(&self) -> u64 {
        self.dataset_passes.load(Ordering::Relaxed) as u64
    }

    pub(crate) fn count_dataset_pass(&self) {
        self.dataset_passes.fetch_add(1, Ordering::Relaxed);
    }

    /// Forward pass under the model's installed runtime configuration.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        self.forward_with(&self.runtime, input)
    }

    /// Forward pass under an explicit configuration.
    pub fn forward_with(&self, cfg: &RuntimeConfig, input: &Tensor) -> Result<Tensor> {
        self.forward_inspect(cfg, input, &mut |_, _| {})
    }

    /// Outputs of every layer, in layer order.
    pub fn forward_trace(&self, cfg: &RuntimeConfig, input: &Tensor) -> Result<Vec<Tensor>> {
        let mut trace = Vec::with_capacity(self.layers.len());
        self.forward_inspect(cfg, input, &mut |_, t| trace.push(t.clone()))?;
        Ok(trace)
    }

    /// Forward pass calling `hook(layer_index, output)` after each layer. The
    /// hook may modify the output before later layers read it.
    pub fn forward_inspect(
        &self,
        cfg: &RuntimeConfig,
        input: &Tensor,
        hook: &mut dyn FnMut(usize, &mut Tensor),
    ) -> Result<Tensor> {
        let weights = self
            .weights
            .as_deref()
            .ok_or_else(|| Error::MissingWeights(self.name.clone()))?;
        if input.shape() != self.input_shape.as_slice() {
            return Err(Error::InputShape {
                expected: self.input_shape.clone(),
                found: input.shape().to_vec(),
            });
        }
        if input.first_non_finite().is_some() {
            return Err(Error::NonFinite {
                index: input.first_non_finite().unwrap_or(0),
            });
        }
        let mut outputs: Vec<Option<Tensor>> = vec![None; self.layers.len()];
        for (i, layer) in self.layers.iter().enumerate() {
            let x = match layer.input {
                Source::ModelInput => input,
                Source::Layer(j) => outputs[j].as_ref().ok_or_else(|| {
                    Error::Internal(format!("output of layer {j} released early"))
                })?,
            };
            let mut y = self.apply(layer, x, weights, cfg)?;
            if let Some(j) = layer.add {
                let skip = outputs[j].as_ref().ok_or_else(|| {
                    Error::Internal(format!("output of layer {j} released early"))
                })?;
                for (a, b) in y.data_mut().iter_mut().zip(skip.data()) {
                    *a += *b;
                }
            }
            if y.first_non_finite().is_some() {
                return Err(Error::NonFiniteActivation {
                    layer: layer.id.clone(),
                });
            }
            hook(i, &mut y);
            outputs[i] = Some(y);
            // release tensors nobody reads anymore
            if let Source::Layer(j) = layer.input {
                if self.last_use[j] == i && j + 1 != self.layers.len() {
                    outputs[j] = None;
                }
            }
            if let Some(j) = layer.add {
                if self.last_use[j] == i {
                    outputs[j] = None;
                }
            }
        }
        outputs
            .pop()
            .flatten()
            .ok_or_else(|| Error::Internal("missing final output".to_string()))
    }

    fn apply(
        &self,
        layer: &LayerSpec,
        x: &Tensor,
        weights: &[f32],
        cfg: &RuntimeConfig,
    ) -> Result<Tensor> {
        let dims3 = || {
            (
                layer.input_shape[0],
                layer.input_shape[1],
                layer.input_shape[2],
            )
        };
        let params = || {
            let r = layer.weight_ref.unwrap_or(WeightRef {
                offset: 0,
                length: 0,
            });
            &weights[r.offset..r.offset + r.length]
        };
        let data = match layer.kind {
            LayerKind::Conv2d {
                out_channels,
                kernel,
                stride,
                padding,
            } => {
                let p = params();
                let split = p.len() - out_channels;
                ops::conv2d(
                    x.data(),
                    dims3(),
                    &p[..split],
                    &p[split..],
                    out_channels,
                    Window {
                        kernel,
                        stride,
                        padding,
                    },
                )
            }
            LayerKind::DepthwiseConv2d {
                kernel,
                stride,
                padding,
            } => {
                let p = params();
                let split = p.len() - layer.input_shape[0];
                ops::depthwise_conv2d(
                    x.data(),
                    dims3(),
                    &p[..split],
                    &p[split..],
                    Window {
                        kernel,
                        stride,
                        padding,
                    },
                )
            }
            LayerKind::Dense { out_features } => {
                let p = params();
                let split = p.len() - out_features;
                ops::dense(x.data(), &p[..split], &p[split..])
            }
            LayerKind::MaxPool {
                kernel,
                stride,
                padding,
            } => ops::max_pool(
                x.data(),
                dims3(),
                Window {
                    kernel,
                    stride,
                    padding,
                },
            ),
            LayerKind::AvgPool {
                kernel,
                stride,
                padding,
            } => ops::avg_pool(
                x.data(),
                dims3(),
                Window {
                    kernel,
                    stride,
                    padding,
                },
            ),
            LayerKind::Flatten => x.data().to_vec(),
            LayerKind::Softmax => ops::softmax(x.data()),
            LayerKind::AaRelu => {
                let c = cfg.get(&layer.id);
                let shifted: Vec<f32> = x
                    .data()
                    .iter()
                    .map(|&v| activation::aa_relu(v, c.threshold))
                    .collect();
                let t = Tensor::new(layer.output_shape.clone(), shifted)?;
                return t
                    .cast(c.precision, None)
                    .map_err(|_| Error::NonFiniteActivation {
                        layer: layer.id.clone(),
                    });
            }
        };
        Tensor::new(layer.output_shape.clone(), data)
    }
}

/// Index of the largest score; the first one wins ties.
pub fn argmax(values: &[f32]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f32::NEG_INFINITY), |(bi, bv), (i, &v)| {
            if v > bv {
                (i, v)
            } else {
                (bi, bv)
            }
        })
        .0
}

/// Top-1 accuracy of `model` under `cfg`.
pub fn evaluate_accuracy(model: &Model, cfg: &RuntimeConfig, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("evaluation dataset is empty".into()));
    }
    for (index, &label) in data.labels().iter().enumerate() {
        if label >= model.class_count() {
            return Err(Error::LabelOutOfRange {
                index,
                label,
                classes: model.class_count(),
            });
        }
    }
    model.count_dataset_pass();
    let mut correct = 0usize;
    for (x, label) in data.iter() {
        let y = model.forward_with(cfg, x)?;
        if argmax(y.data()) == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Indices of the layers whose main input is layer `index`.
pub fn consumers(model: &Model, index: usize) -> Vec<usize> {
    model
        .layers()
        .iter()
        .enumerate()
        .filter(|(_, l)| l.input == Source::Layer(index))
        .map(|(i, _)| i)
        .collect()
}

/// Layer ids whose runtime entries differ between two configurations.
pub fn changed_layers<'a>(a: &'a RuntimeConfig, b: &'a RuntimeConfig) -> BTreeSet<&'a str> {
    let mut out = BTreeSet::new();
    for (id, cfg) in a.iter() {
        if b.get(id) != *cfg {
            out.insert(id);
        }
    }
    for (id, cfg) in b.iter() {
        if a.get(id) != *cfg {
            out.insert(id);
        }
    }
    out
}
