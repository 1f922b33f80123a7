//! The `.gnode.json` model document.
//!
//! Weights and biases are stored as decimal strings with 17 significant
//! digits so every `f64` survives a save/load cycle bit for bit. Errors carry
//! a JSON pointer to the offending value.

use std::fmt::Write as _;
use std::path::Path;

use gnode_reach_core::{
    Activation, Error as CoreError, FcLayer, GnodeModel, Layer, LayerActivation, Matrix, NodeDynamics, NodeLayer,
    OutputMode, TimeConfig,
};
use serde::{Deserialize, Serialize};

pub const FORMAT: &str = "gnode-reach-model";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{pointer}: {message}")]
    Schema { pointer: String, message: String },
}

impl ModelError {
    fn at(pointer: impl Into<String>, message: impl std::fmt::Display) -> Self {
        ModelError::Schema {
            pointer: pointer.into(),
            message: message.to_string(),
        }
    }

    /// JSON pointer of the offending value, for schema errors.
    pub fn pointer(&self) -> Option<&str> {
        match self {
            ModelError::Schema { pointer, .. } => Some(pointer),
            ModelError::Io { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub format: String,
    pub version: u32,
    pub metadata: Metadata,
    pub layers: Vec<LayerDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    pub name: String,
    pub input_dim: usize,
    pub output_dim: usize,
    /// Free-form provenance of the weights, e.g. the fixture recipe and seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerDoc {
    Fc(FcDoc),
    Node(NodeDoc),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FcDoc {
    pub activation: ActivationDoc,
    #[serde(rename = "W")]
    pub weights: Vec<Vec<String>>,
    pub b: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub dynamics: Vec<FcDoc>,
    pub t_f: f64,
    pub step: f64,
    pub output_mode: OutputMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_order: Option<f64>,
}

/// `"relu"`, `"leaky_relu(0.01)"`, … or one such name per neuron.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ActivationDoc {
    Uniform(String),
    PerNeuron(Vec<String>),
}

/// Shortest exact text for `x`: 17 significant digits in scientific form.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(s: &str, pointer: &str) -> Result<f64, ModelError> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| ModelError::at(pointer, format!("`{s}` is not a number")))?;
    if !v.is_finite() {
        return Err(ModelError::at(pointer, "weights must be finite"));
    }
    Ok(v)
}

pub fn activation_name(a: Activation) -> String {
    match a {
        Activation::LeakyRelu(s) => format!("leaky_relu({})", format_f64(s)),
        other => other.name().to_string(),
    }
}

pub fn parse_activation(s: &str) -> Option<Activation> {
    Some(match s.trim() {
        "linear" | "fc" => Activation::Linear,
        "relu" => Activation::Relu,
        "tanh" => Activation::Tanh,
        "sigmoid" | "logsig" => Activation::Sigmoid,
        "satlin" => Activation::Satlin,
        other => {
            let inner = other.strip_prefix("leaky_relu(")?.strip_suffix(')')?;
            Activation::LeakyRelu(inner.trim().parse().ok()?)
        }
    })
}

impl FcDoc {
    pub fn from_layer(l: &FcLayer) -> Self {
        let activation = match l.activation() {
            LayerActivation::Uniform(a) => ActivationDoc::Uniform(activation_name(*a)),
            LayerActivation::PerNeuron(v) => ActivationDoc::PerNeuron(v.iter().map(|a| activation_name(*a)).collect()),
        };
        FcDoc {
            activation,
            weights: l
                .weights()
                .to_rows()
                .iter()
                .map(|r| r.iter().map(|v| format_f64(*v)).collect())
                .collect(),
            b: l.bias().iter().map(|v| format_f64(*v)).collect(),
        }
    }

    fn to_layer(&self, at: &str) -> Result<FcLayer, ModelError> {
        let activation = match &self.activation {
            ActivationDoc::Uniform(s) => LayerActivation::Uniform(
                parse_activation(s)
                    .ok_or_else(|| ModelError::at(format!("{at}/activation"), format!("unknown activation `{s}`")))?,
            ),
            ActivationDoc::PerNeuron(v) => LayerActivation::PerNeuron(
                v.iter()
                    .enumerate()
                    .map(|(i, s)| {
                        parse_activation(s).ok_or_else(|| {
                            ModelError::at(format!("{at}/activation/{i}"), format!("unknown activation `{s}`"))
                        })
                    })
                    .collect::<Result<_, _>>()?,
            ),
        };
        if self.weights.is_empty() {
            return Err(ModelError::at(format!("{at}/W"), "weight matrix has no rows"));
        }
        let cols = self.weights[0].len();
        let mut rows = Vec::with_capacity(self.weights.len());
        for (r, row) in self.weights.iter().enumerate() {
            if row.len() != cols {
                return Err(ModelError::at(
                    format!("{at}/W/{r}"),
                    format!("row has {} entries, row 0 has {cols}", row.len()),
                ));
            }
            rows.push(
                row.iter()
                    .enumerate()
                    .map(|(c, s)| parse_f64(s, &format!("{at}/W/{r}/{c}")))
                    .collect::<Result<Vec<_>, _>>()?,
            );
        }
        if self.b.len() != rows.len() {
            return Err(ModelError::at(
                format!("{at}/b"),
                format!("bias has {} entries but W has {} rows", self.b.len(), rows.len()),
            ));
        }
        let b = self
            .b
            .iter()
            .enumerate()
            .map(|(i, s)| parse_f64(s, &format!("{at}/b/{i}")))
            .collect::<Result<Vec<_>, _>>()?;
        let w = Matrix::from_rows(&rows).map_err(|e| ModelError::at(format!("{at}/W"), e))?;
        FcLayer::new(w, b, activation).map_err(|e| ModelError::at(at, e))
    }
}

impl ModelDocument {
    pub fn from_model(model: &GnodeModel, name: &str, source: Option<String>) -> Self {
        let layers = model
            .layers()
            .iter()
            .map(|l| match l {
                Layer::Fc(f) => LayerDoc::Fc(FcDoc::from_layer(f)),
                Layer::Node(n) => LayerDoc::Node(NodeDoc {
                    dynamics: n.dynamics().layers().iter().map(FcDoc::from_layer).collect(),
                    t_f: n.time().t_f(),
                    step: n.time().step(),
                    output_mode: n.time().output_mode(),
                    max_order: (n.max_order() != gnode_reach_core::node::DEFAULT_MAX_ORDER).then_some(n.max_order()),
                }),
            })
            .collect();
        ModelDocument {
            format: FORMAT.into(),
            version: VERSION,
            metadata: Metadata {
                name: name.into(),
                input_dim: model.input_dim(),
                output_dim: model.output_dim(),
                source,
            },
            layers,
        }
    }

    pub fn to_model(&self) -> Result<GnodeModel, ModelError> {
        if self.format != FORMAT {
            return Err(ModelError::at(
                "/format",
                format!("expected `{FORMAT}`, found `{}`", self.format),
            ));
        }
        if self.version != VERSION {
            return Err(ModelError::at(
                "/version",
                format!("unsupported version {}", self.version),
            ));
        }
        if self.layers.is_empty() {
            return Err(ModelError::at("/layers", "model has no layers"));
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            let at = format!("/layers/{i}");
            layers.push(match l {
                LayerDoc::Fc(f) => Layer::Fc(f.to_layer(&at)?),
                LayerDoc::Node(n) => {
                    let fcs = n
                        .dynamics
                        .iter()
                        .enumerate()
                        .map(|(j, f)| f.to_layer(&format!("{at}/dynamics/{j}")))
                        .collect::<Result<Vec<_>, _>>()?;
                    let dynamics = NodeDynamics::new(fcs).map_err(|e| ModelError::at(format!("{at}/dynamics"), e))?;
                    let time = TimeConfig::new(n.t_f, n.step, n.output_mode).map_err(|e| ModelError::at(&at, e))?;
                    let mut node = NodeLayer::new(dynamics, time);
                    if let Some(o) = n.max_order {
                        node = node
                            .with_max_order(o)
                            .map_err(|e| ModelError::at(format!("{at}/max_order"), e))?;
                    }
                    Layer::Node(node)
                }
            });
        }
        let model = GnodeModel::new(layers).map_err(|e| match e {
            CoreError::AtLayer { layer, source } => ModelError::at(format!("/layers/{layer}"), source),
            e => ModelError::at("/layers", e),
        })?;
        if model.input_dim() != self.metadata.input_dim {
            return Err(ModelError::at(
                "/metadata/input_dim",
                format!(
                    "declared {}, layers take {}",
                    self.metadata.input_dim,
                    model.input_dim()
                ),
            ));
        }
        if model.output_dim() != self.metadata.output_dim {
            return Err(ModelError::at(
                "/metadata/output_dim",
                format!(
                    "declared {}, layers give {}",
                    self.metadata.output_dim,
                    model.output_dim()
                ),
            ));
        }
        Ok(model)
    }

    /// Canonical text: two-space indented JSON with a trailing newline.
    pub fn to_canonical_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("documents always serialize");
        s.push('\n');
        s
    }
}

/// Converts a serde path such as `layers[1].W[0]` into `/layers/1/W/0`.
pub(crate) fn path_to_pointer(path: &str) -> String {
    let mut out = String::new();
    for part in path.split('.') {
        if part.is_empty() || part == "?" {
            continue;
        }
        let mut rest = part;
        if let Some(i) = rest.find('[') {
            let _ = write!(out, "/{}", &rest[..i]);
            rest = &rest[i..];
            while let Some(end) = rest.find(']') {
                let _ = write!(out, "/{}", &rest[1..end]);
                rest = &rest[end + 1..];
            }
        } else {
            let _ = write!(out, "/{rest}");
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    format: String,
    version: u32,
    metadata: Metadata,
    layers: Vec<serde_json::Value>,
}

fn located<'de, T: Deserialize<'de>>(
    de: impl serde::Deserializer<'de, Error = serde_json::Error>,
    prefix: &str,
) -> Result<T, ModelError> {
    serde_path_to_error::deserialize(de).map_err(|e| {
        let rest = path_to_pointer(&e.path().to_string());
        let pointer = if rest == "/" && !prefix.is_empty() {
            prefix.to_string()
        } else {
            format!("{prefix}{rest}")
        };
        ModelError::at(pointer, e.into_inner())
    })
}

/// Parses a document. Layers are decoded one at a time so that errors inside
/// a layer keep their full location.
pub fn parse_document(text: &str) -> Result<ModelDocument, ModelError> {
    let raw: RawDocument = located(&mut serde_json::Deserializer::from_str(text), "")?;
    let mut layers = Vec::with_capacity(raw.layers.len());
    for (i, mut v) in raw.layers.into_iter().enumerate() {
        let at = format!("/layers/{i}");
        let kind = match v.as_object_mut().map(|o| o.remove("kind")) {
            None => return Err(ModelError::at(at, "layer must be an object")),
            Some(None) => return Err(ModelError::at(at, "missing field `kind`")),
            Some(Some(serde_json::Value::String(k))) => k,
            Some(Some(_)) => return Err(ModelError::at(format!("{at}/kind"), "`kind` must be a string")),
        };
        layers.push(match kind.as_str() {
            "fc" => LayerDoc::Fc(located(v, &at)?),
            "node" => LayerDoc::Node(located(v, &at)?),
            other => {
                return Err(ModelError::at(
                    format!("{at}/kind"),
                    format!("unknown layer kind `{other}`, expected `fc` or `node`"),
                ))
            }
        });
    }
    Ok(ModelDocument {
        format: raw.format,
        version: raw.version,
        metadata: raw.metadata,
        layers,
    })
}

pub fn parse_model(text: &str) -> Result<GnodeModel, ModelError> {
    parse_document(text)?.to_model()
}

pub fn load_document(path: &Path) -> Result<ModelDocument, ModelError> {
    let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_document(&text)
}

pub fn load_model(path: &Path) -> Result<GnodeModel, ModelError> {
    load_document(path)?.to_model()
}

pub fn save_document(doc: &ModelDocument, path: &Path) -> Result<(), ModelError> {
    std::fs::write(path, doc.to_canonical_string()).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn save_model(model: &GnodeModel, name: &str, path: &Path) -> Result<(), ModelError> {
    save_document(&ModelDocument::from_model(model, name, None), path)
}
