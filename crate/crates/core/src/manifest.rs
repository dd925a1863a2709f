//! Model persistence: a versioned JSON manifest with named, shaped,
//! base64-encoded little-endian f64 parameter arrays.
//!
//! The envelope is diffable and language-portable; `load(save(m))`
//! reproduces every parameter bit-exactly and every composition choice.

use std::path::Path;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::math::fnv1a_hex;
use crate::model::{EventFeatureSource, HawkesModel, ModelConfig, SeqFeatureSource};

pub const FORMAT_VERSION: u32 = 1;

/// Name under which a fixed event-feature matrix travels in the array list.
const EVENT_FEATURES_ARRAY: &str = "features.event";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub trainable: bool,
    /// base64 of little-endian f64 values, row-major.
    pub data: String,
}

/// Where per-type features come from, without the data itself (a fixed
/// matrix is shipped as the `features.event` array).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum EventSourceInfo {
    None,
    Given { dim: usize },
    Embedded { dim: usize },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: String,
    #[serde(default)]
    pub loss: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelManifest {
    pub format_version: u32,
    pub config: ModelConfig,
    pub num_types: usize,
    /// Event type names, index order.
    pub type_names: Vec<String>,
    pub seq_source: SeqFeatureSource,
    pub event_source: EventSourceInfo,
    pub params: Vec<NamedArray>,
    pub provenance: Provenance,
}

fn encode_f64(values: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    BASE64.encode(bytes)
}

fn decode_f64(s: &str, name: &str) -> Result<Vec<f64>> {
    let bytes = BASE64
        .decode(s)
        .map_err(|e| Error::InvalidConfig(format!("array '{name}': bad base64 ({e})")))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::InvalidConfig(format!(
            "array '{name}': byte length {} is not a multiple of 8",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Build the manifest for a model. `type_names` must have length C.
pub fn to_manifest(
    model: &HawkesModel,
    type_names: &[String],
    mut provenance: Provenance,
) -> Result<ModelManifest> {
    if type_names.len() != model.num_types() {
        return Err(Error::ShapeMismatch(format!(
            "{} type names for {} types",
            type_names.len(),
            model.num_types()
        )));
    }
    let config = model_config_of(model);
    provenance.config_hash = fnv1a_hex(serde_json::to_string(&config)?.as_bytes());

    let mut params: Vec<NamedArray> = model
        .group_keys()
        .iter()
        .map(|&k| NamedArray {
            name: model.group_name(k),
            shape: model.group_shape(k),
            trainable: model.group_trainable(k),
            data: encode_f64(model.group_data(k)),
        })
        .collect();

    let event_source = match model.event_source() {
        EventFeatureSource::None => EventSourceInfo::None,
        EventFeatureSource::Embedded { dim } => EventSourceInfo::Embedded { dim: *dim },
        EventFeatureSource::Given(m) => {
            params.push(NamedArray {
                name: EVENT_FEATURES_ARRAY.to_string(),
                shape: vec![m.dim, m.num_cols],
                trainable: false,
                data: encode_f64(&m.data),
            });
            EventSourceInfo::Given { dim: m.dim }
        }
    };

    Ok(ModelManifest {
        format_version: FORMAT_VERSION,
        config,
        num_types: model.num_types(),
        type_names: type_names.to_vec(),
        seq_source: model.seq_source(),
        event_source,
        params,
        provenance,
    })
}

/// Reconstruct the composition config a model was built from.
fn model_config_of(model: &HawkesModel) -> ModelConfig {
    ModelConfig {
        memory_size: model.memory_size(),
        exogenous: model.exo_spec().clone(),
        impact: model.impact_spec().clone(),
        kernel: kernel_spec_of(model),
        kernel_trainable: (
            model.kernels().p0_trainable(),
            model.kernels().p1_trainable(),
        ),
        outer: model.outer_activation(),
        embed_dim: embed_dim_of(model),
        hidden_dim: model.hidden_dim(),
        quadrature: model.quadrature(),
        init_seed: 0,
    }
}

fn kernel_spec_of(model: &HawkesModel) -> crate::model::KernelSpec {
    use crate::kernels::KernelKind::*;
    use crate::model::KernelSpec;
    let bank = model.kernels();
    match bank.kind() {
        Exponential => KernelSpec::Exponential {
            omega: bank.p0()[0],
            delta: bank.p1()[0],
        },
        Rayleigh => KernelSpec::Rayleigh { omega: bank.p0()[0] },
        Gaussian => KernelSpec::Gaussian { sigma: bank.p0()[0] },
        Powerlaw => KernelSpec::Powerlaw {
            omega: bank.p0()[0],
            delta: bank.p1()[0],
        },
        Gate => KernelSpec::Gate {
            omega: bank.p0()[0],
            delta: bank.p1()[0],
        },
        MultiGauss => KernelSpec::MultiGauss {
            centers: bank.p0().to_vec(),
            widths: bank.p1().to_vec(),
        },
    }
}

fn embed_dim_of(model: &HawkesModel) -> usize {
    match (model.seq_source(), model.event_source()) {
        (SeqFeatureSource::Embedded { dim, .. }, _) => dim,
        (_, EventFeatureSource::Embedded { dim }) => *dim,
        _ => 8,
    }
}

/// Instantiate a model from a manifest, filling every parameter array.
pub fn from_manifest(manifest: &ModelManifest) -> Result<HawkesModel> {
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::ManifestVersion {
            found: manifest.format_version,
            supported: FORMAT_VERSION,
        });
    }
    let event_source = match manifest.event_source {
        EventSourceInfo::None => EventFeatureSource::None,
        EventSourceInfo::Embedded { dim } => EventFeatureSource::Embedded { dim },
        EventSourceInfo::Given { dim } => {
            EventFeatureSource::Given(FeatureMatrix::zeros(dim, manifest.num_types))
        }
    };
    let mut model = manifest.config.build_with_sources(
        manifest.num_types,
        manifest.seq_source,
        event_source,
    )?;

    let mut filled: Vec<String> = Vec::new();
    for array in &manifest.params {
        let values = decode_f64(&array.data, &array.name)?;
        if array.name == EVENT_FEATURES_ARRAY {
            if array.shape.len() != 2 {
                return Err(Error::ManifestArrayShape {
                    name: array.name.clone(),
                    expected: vec![0, manifest.num_types],
                    found: array.shape.clone(),
                });
            }
            let m = FeatureMatrix {
                dim: array.shape[0],
                num_cols: array.shape[1],
                data: values,
            };
            if m.data.len() != m.dim * m.num_cols || m.num_cols != manifest.num_types {
                return Err(Error::ManifestArrayShape {
                    name: array.name.clone(),
                    expected: vec![m.dim, manifest.num_types],
                    found: array.shape.clone(),
                });
            }
            model.set_event_features(m)?;
            filled.push(array.name.clone());
            continue;
        }
        let key = model
            .group_keys()
            .into_iter()
            .find(|&k| model.group_name(k) == array.name)
            .ok_or_else(|| Error::ManifestUnknownArray(array.name.clone()))?;
        let expected = model.group_shape(key);
        if expected != array.shape || values.len() != model.group_data(key).len() {
            return Err(Error::ManifestArrayShape {
                name: array.name.clone(),
                expected,
                found: array.shape.clone(),
            });
        }
        model.group_data_mut(key).copy_from_slice(&values);
        model.set_group_trainable(key, array.trainable);
        filled.push(array.name.clone());
    }

    for key in model.group_keys() {
        let name = model.group_name(key);
        if !filled.contains(&name) {
            return Err(Error::ManifestMissingArray(name));
        }
    }
    if matches!(manifest.event_source, EventSourceInfo::Given { .. })
        && !filled.iter().any(|n| n == EVENT_FEATURES_ARRAY)
    {
        return Err(Error::ManifestMissingArray(EVENT_FEATURES_ARRAY.into()));
    }
    Ok(model)
}

/// Write the model to a manifest file (pretty JSON).
pub fn model_save(
    model: &HawkesModel,
    type_names: &[String],
    provenance: Provenance,
    path: impl AsRef<Path>,
) -> Result<()> {
    let manifest = to_manifest(model, type_names, provenance)?;
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(path, json)?;
    Ok(())
}

/// Read a manifest file back into a model. The version gate runs before the
/// full parse, so a future format fails with a version error rather than a
/// parse crash.
pub fn model_load(path: impl AsRef<Path>) -> Result<(HawkesModel, ModelManifest)> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let version = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::InvalidConfig("manifest has no format_version".into()))?;
    if version != FORMAT_VERSION as u64 {
        return Err(Error::ManifestVersion {
            found: version as u32,
            supported: FORMAT_VERSION,
        });
    }
    let manifest: ModelManifest = serde_json::from_value(value)?;
    let model = from_manifest(&manifest)?;
    Ok((model, manifest))
}
