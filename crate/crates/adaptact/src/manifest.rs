//! Model manifests: a JSON layer list plus an optional `.aat` weight blob.
//!
//! ```json
//! {
//!   "name": "tiny",
//!   "input_shape": [1, 32, 32],
//!   "class_count": 8,
//!   "layers": [
//!     {"id": "conv1", "kind": "conv2d",
//!      "geometry": {"out_channels": 8, "kernel": 3, "stride": 1, "padding": 1},
//!      "weight_ref": {"offset": 0, "length": 80}},
//!     {"id": "relu1", "kind": "aa_relu"}
//!   ],
//!   "weights_file": "tiny.weights.aat"
//! }
//! ```
//!
//! Layers read the previous layer unless `input` names another one; `add`
//! names a layer whose output is summed in (residual connections). Without
//! `weights_file` the manifest is a descriptor, good for costing only.
//! Weight offsets and lengths count `f32` elements.

use std::fs;
use std::path::{Path, PathBuf};

use adaptact_core::{LayerDef, LayerKind, Model, Source};
use serde::{Deserialize, Serialize};

use crate::aat;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestDto {
    pub name: String,
    pub input_shape: Vec<usize>,
    pub class_count: usize,
    pub layers: Vec<LayerDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights_file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerDto {
    pub id: String,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Geometry::is_empty")]
    pub geometry: Geometry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_ref: Option<WeightRefDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub add: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_channels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_features: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub padding: Option<usize>,
}

impl Geometry {
    fn is_empty(&self) -> bool {
        *self == Geometry::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightRefDto {
    pub offset: usize,
    pub length: usize,
}

impl LayerDto {
    fn kind(&self) -> std::result::Result<LayerKind, String> {
        let g = &self.geometry;
        let need = |v: Option<usize>, field: &str| {
            v.ok_or_else(|| format!("layer `{}`: {} needs geometry.{field}", self.id, self.kind))
        };
        Ok(match self.kind.as_str() {
            "conv2d" => LayerKind::Conv2d {
                out_channels: need(g.out_channels, "out_channels")?,
                kernel: need(g.kernel, "kernel")?,
                stride: g.stride.unwrap_or(1),
                padding: g.padding.unwrap_or(0),
            },
            "depthwise_conv2d" => LayerKind::DepthwiseConv2d {
                kernel: need(g.kernel, "kernel")?,
                stride: g.stride.unwrap_or(1),
                padding: g.padding.unwrap_or(0),
            },
            "dense" => LayerKind::Dense {
                out_features: need(g.out_features, "out_features")?,
            },
            "maxpool" | "avgpool" => {
                let kernel = need(g.kernel, "kernel")?;
                let stride = g.stride.unwrap_or(kernel);
                let padding = g.padding.unwrap_or(0);
                if self.kind == "maxpool" {
                    LayerKind::MaxPool {
                        kernel,
                        stride,
                        padding,
                    }
                } else {
                    LayerKind::AvgPool {
                        kernel,
                        stride,
                        padding,
                    }
                }
            }
            "flatten" => LayerKind::Flatten,
            "softmax" => LayerKind::Softmax,
            "aa_relu" => LayerKind::AaRelu,
            other => return Err(format!("layer `{}`: unknown layer kind `{other}`", self.id)),
        })
    }

    fn to_def(&self) -> std::result::Result<LayerDef, String> {
        let mut def = LayerDef::new(self.id.clone(), self.kind()?);
        if let Some(w) = self.weight_ref {
            def = def.with_weights(w.offset, w.length);
        }
        if let Some(i) = &self.input {
            def = def.with_input(i.clone());
        }
        if let Some(a) = &self.add {
            def = def.with_add(a.clone());
        }
        Ok(def)
    }
}

impl ManifestDto {
    /// Layer list of an existing model, e.g. for writing it back out.
    pub fn from_model(model: &Model, weights_file: Option<String>) -> Self {
        let layers = model.layers();
        let prev_id = |i: usize| (i > 0).then(|| layers[i - 1].id.clone());
        let dtos = layers
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let input = match l.input {
                    Source::ModelInput if i == 0 => None,
                    Source::ModelInput => Some(adaptact_core::graph::MODEL_INPUT.to_string()),
                    Source::Layer(j) if Some(layers[j].id.clone()) == prev_id(i) => None,
                    Source::Layer(j) => Some(layers[j].id.clone()),
                };
                let geometry = match l.kind {
                    LayerKind::Conv2d {
                        out_channels,
                        kernel,
                        stride,
                        padding,
                    } => Geometry {
                        out_channels: Some(out_channels),
                        kernel: Some(kernel),
                        stride: Some(stride),
                        padding: Some(padding),
                        ..Geometry::default()
                    },
                    LayerKind::DepthwiseConv2d {
                        kernel,
                        stride,
                        padding,
                    }
                    | LayerKind::MaxPool {
                        kernel,
                        stride,
                        padding,
                    }
                    | LayerKind::AvgPool {
                        kernel,
                        stride,
                        padding,
                    } => Geometry {
                        kernel: Some(kernel),
                        stride: Some(stride),
                        padding: Some(padding),
                        ..Geometry::default()
                    },
                    LayerKind::Dense { out_features } => Geometry {
                        out_features: Some(out_features),
                        ..Geometry::default()
                    },
                    _ => Geometry::default(),
                };
                LayerDto {
                    id: l.id.clone(),
                    kind: l.kind.name().to_string(),
                    geometry,
                    weight_ref: l.weight_ref.map(|w| WeightRefDto {
                        offset: w.offset,
                        length: w.length,
                    }),
                    input,
                    add: l.add.map(|j| layers[j].id.clone()),
                }
            })
            .collect();
        Self {
            name: model.name().to_string(),
            input_shape: model.input_shape().to_vec(),
            class_count: model.class_count(),
            layers: dtos,
            weights_file,
        }
    }
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<ManifestDto> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.into(),
        source,
    })
}

pub fn write_manifest(path: impl AsRef<Path>, m: &ManifestDto) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(m).map_err(|source| Error::Json {
        path: path.into(),
        source,
    })?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Builds a model from a parsed manifest. `base` resolves a relative
/// `weights_file`.
pub fn build_model(m: &ManifestDto, base: &Path, origin: &Path) -> Result<Model> {
    let defs = m
        .layers
        .iter()
        .map(LayerDto::to_def)
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|reason| Error::format(origin, reason))?;
    let weights = match &m.weights_file {
        None => None,
        Some(f) => {
            let wpath: PathBuf = base.join(f);
            Some(aat::read_tensor(&wpath)?.into_data())
        }
    };
    Model::new(
        m.name.clone(),
        m.input_shape.clone(),
        m.class_count,
        defs,
        weights,
    )
    .map_err(|e| Error::format(origin, e.to_string()))
}

/// Loads a manifest and, unless it is a descriptor, its weights.
pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let m = read_manifest(path)?;
    build_model(&m, path.parent().unwrap_or(Path::new(".")), path)
}
