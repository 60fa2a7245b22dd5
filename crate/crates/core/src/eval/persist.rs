//! Versioned model files.
//!
//! ```text
//! frostcast-model
//! format_version = 1
//! method = gru
//! checksum = sha256:<hex digest of the payload line>
//! payload = {"scaler":...,"config":...,"model":...}
//! ```
//!
//! The payload is one JSON line carrying the scaler, an echo of the method config and
//! the method-specific body. Neural parameters are a flat array in the order
//! documented on [`GruModel`](crate::nn::GruModel) and [`TcnModel`](crate::nn::TcnModel);
//! trees are preorder node lists with their DART multiplier. Floats are written in
//! shortest round-trip form, so a reloaded model predicts bit-identically.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::method::{Method, MethodConfig, TrainedModel};
use crate::empirical::EmpiricalModel;
use crate::error::{Error, Result};
use crate::gbt::{BoostedEnsemble, TreeNode};
use crate::nn::{GruModel, SequenceModel, TcnConfig, TcnModel};
use crate::timeseries::{Scaler, FEATURES_PER_DAY, INTERVALS_PER_DAY};

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "frostcast-model";

// Bounds applied before allocating anything described by a file.
const MAX_HIDDEN: usize = 4096;
const MAX_CHANNELS: usize = 1024;
const MAX_KERNEL: usize = 64;
const MAX_BLOCKS: usize = 64;
const MAX_DILATION: usize = 4096;
const MAX_TREE_DEPTH: usize = 64;

#[derive(Serialize, Deserialize)]
struct Payload {
    scaler: Option<Scaler>,
    config: MethodConfig,
    model: Body,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Body {
    Empirical {
        a: f64,
        b: f64,
        c: f64,
        afternoon_interval: usize,
    },
    Gru {
        hidden_dim: usize,
        params: Vec<f64>,
    },
    Tcn {
        architecture: TcnConfig,
        params: Vec<f64>,
    },
    Xgb {
        base_score: f64,
        learning_rate: f64,
        trees: Vec<FlatTree>,
    },
}

impl Body {
    fn method(&self) -> Method {
        match self {
            Body::Empirical { .. } => Method::Empirical,
            Body::Gru { .. } => Method::Gru,
            Body::Tcn { .. } => Method::Tcn,
            Body::Xgb { .. } => Method::Xgb,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct FlatTree {
    multiplier: f64,
    nodes: Vec<FlatNode>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum FlatNode {
    Split { feature: usize, threshold: f64 },
    Leaf { weight: f64 },
}

fn flatten_tree(node: &TreeNode, out: &mut Vec<FlatNode>) {
    match node {
        TreeNode::Leaf { weight } => out.push(FlatNode::Leaf { weight: *weight }),
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            out.push(FlatNode::Split {
                feature: *feature,
                threshold: *threshold,
            });
            flatten_tree(left, out);
            flatten_tree(right, out);
        }
    }
}

fn rebuild_tree(nodes: &[FlatNode], pos: &mut usize, depth: usize) -> Result<TreeNode> {
    if depth > MAX_TREE_DEPTH {
        return Err(Error::CorruptPayload("tree too deep".into()));
    }
    let node = nodes
        .get(*pos)
        .ok_or_else(|| Error::CorruptPayload("truncated tree".into()))?;
    *pos += 1;
    match *node {
        FlatNode::Leaf { weight } => Ok(TreeNode::Leaf { weight }),
        FlatNode::Split { feature, threshold } => {
            if feature >= FEATURES_PER_DAY {
                return Err(Error::CorruptPayload(format!(
                    "feature {feature} out of range"
                )));
            }
            let left = rebuild_tree(nodes, pos, depth + 1)?;
            let right = rebuild_tree(nodes, pos, depth + 1)?;
            Ok(TreeNode::Split {
                feature,
                threshold,
                left: Box::new(left),
                right: Box::new(right),
            })
        }
    }
}

/// A decoded model file.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub model: TrainedModel,
    pub config: MethodConfig,
}

pub fn encode_model(model: &TrainedModel, config: &MethodConfig) -> String {
    let (scaler, body) = match model {
        TrainedModel::Empirical(m) => (
            None,
            Body::Empirical {
                a: m.a,
                b: m.b,
                c: m.c,
                afternoon_interval: m.afternoon_interval,
            },
        ),
        TrainedModel::Gru { model, scaler } => (
            Some(*scaler),
            Body::Gru {
                hidden_dim: model.hidden_dim(),
                params: model.params().to_vec(),
            },
        ),
        TrainedModel::Tcn { model, scaler } => (
            Some(*scaler),
            Body::Tcn {
                architecture: model.config().clone(),
                params: model.params().to_vec(),
            },
        ),
        TrainedModel::Xgb(e) => (
            None,
            Body::Xgb {
                base_score: e.base_score,
                learning_rate: e.learning_rate,
                trees: e
                    .trees
                    .iter()
                    .zip(&e.tree_weights)
                    .map(|(t, &multiplier)| {
                        let mut nodes = Vec::new();
                        flatten_tree(t, &mut nodes);
                        FlatTree { multiplier, nodes }
                    })
                    .collect(),
            },
        ),
    };
    let payload = Payload {
        scaler,
        config: config.clone(),
        model: body,
    };
    let json = serde_json::to_string(&payload).expect("payload serializes");
    let digest = hex::encode(Sha256::digest(json.as_bytes()));
    format!(
        "{MAGIC}\nformat_version = {MODEL_FORMAT_VERSION}\nmethod = {}\nchecksum = sha256:{digest}\npayload = {json}\n",
        model.method().tag()
    )
}

fn header_value<'a>(line: Option<&'a str>, key: &str) -> Result<&'a str> {
    let line = line.ok_or_else(|| Error::CorruptPayload(format!("missing {key} line")))?;
    let (k, v) = line
        .split_once('=')
        .ok_or_else(|| Error::CorruptPayload(format!("malformed {key} line")))?;
    if k.trim() != key {
        return Err(Error::CorruptPayload(format!(
            "expected {key}, found {:?}",
            k.trim()
        )));
    }
    Ok(v.trim())
}

fn finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::CorruptPayload(format!("non-finite {what}")))
    }
}

fn require_scaler(scaler: Option<Scaler>) -> Result<Scaler> {
    let s = scaler.ok_or_else(|| Error::CorruptPayload("missing scaler".into()))?;
    if !(s.mean.is_finite() && s.sd.is_finite() && s.sd > 0.0) {
        return Err(Error::CorruptPayload("invalid scaler".into()));
    }
    Ok(s)
}

/// Parses a model file, checking version, checksum and method tag.
pub fn decode_model(text: &str) -> Result<SavedModel> {
    let mut lines = text.lines();
    if lines.next() != Some(MAGIC) {
        return Err(Error::CorruptPayload("not a model file".into()));
    }
    let version = header_value(lines.next(), "format_version")?;
    if version != MODEL_FORMAT_VERSION.to_string() {
        return Err(Error::UnknownVersion(version.to_string()));
    }
    let tag: Method = header_value(lines.next(), "method")?
        .parse()
        .map_err(|_| Error::CorruptPayload("unknown method tag".into()))?;
    let checksum = header_value(lines.next(), "checksum")?;
    let digest = checksum
        .strip_prefix("sha256:")
        .ok_or_else(|| Error::CorruptPayload("unsupported checksum".into()))?;
    let json = header_value(lines.next(), "payload")?;
    if hex::encode(Sha256::digest(json.as_bytes())) != digest {
        return Err(Error::CorruptPayload("checksum mismatch".into()));
    }
    let payload: Payload =
        serde_json::from_str(json).map_err(|e| Error::CorruptPayload(e.to_string()))?;
    if payload.model.method() != tag {
        return Err(Error::MethodMismatch {
            expected: tag.tag().into(),
            found: payload.model.method().tag().into(),
        });
    }

    let model = match payload.model {
        Body::Empirical {
            a,
            b,
            c,
            afternoon_interval,
        } => {
            finite(&[a, b, c], "coefficient")?;
            if afternoon_interval >= INTERVALS_PER_DAY {
                return Err(Error::CorruptPayload(
                    "afternoon interval out of range".into(),
                ));
            }
            TrainedModel::Empirical(EmpiricalModel {
                a,
                b,
                c,
                afternoon_interval,
            })
        }
        Body::Gru { hidden_dim, params } => {
            if hidden_dim == 0 || hidden_dim > MAX_HIDDEN {
                return Err(Error::CorruptPayload("hidden_dim out of range".into()));
            }
            let model = GruModel::from_params(hidden_dim, params)
                .map_err(|e| Error::CorruptPayload(e.to_string()))?;
            TrainedModel::Gru {
                model,
                scaler: require_scaler(payload.scaler)?,
            }
        }
        Body::Tcn {
            architecture,
            params,
        } => {
            if architecture.channels > MAX_CHANNELS
                || architecture.kernel_size > MAX_KERNEL
                || architecture.dilations.len() > MAX_BLOCKS
                || architecture.dilations.iter().any(|&d| d > MAX_DILATION)
            {
                return Err(Error::CorruptPayload(
                    "TCN architecture out of range".into(),
                ));
            }
            let model = TcnModel::from_params(architecture, params)
                .map_err(|e| Error::CorruptPayload(e.to_string()))?;
            TrainedModel::Tcn {
                model,
                scaler: require_scaler(payload.scaler)?,
            }
        }
        Body::Xgb {
            base_score,
            learning_rate,
            trees,
        } => {
            finite(&[base_score, learning_rate], "ensemble constant")?;
            let mut ensemble = BoostedEnsemble {
                base_score,
                trees: Vec::with_capacity(trees.len()),
                tree_weights: Vec::with_capacity(trees.len()),
                learning_rate,
            };
            for t in &trees {
                finite(&[t.multiplier], "tree multiplier")?;
                let mut pos = 0;
                let root = rebuild_tree(&t.nodes, &mut pos, 0)?;
                if pos != t.nodes.len() {
                    return Err(Error::CorruptPayload("trailing tree nodes".into()));
                }
                ensemble.trees.push(root);
                ensemble.tree_weights.push(t.multiplier);
            }
            TrainedModel::Xgb(ensemble)
        }
    };
    Ok(SavedModel {
        model,
        config: payload.config,
    })
}

pub fn save_model(
    model: &TrainedModel,
    config: &MethodConfig,
    path: impl AsRef<Path>,
) -> Result<()> {
    std::fs::write(path, encode_model(model, config))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SavedModel> {
    let bytes = std::fs::read(path)?;
    let text = String::from_utf8(bytes).map_err(|_| Error::CorruptPayload("not utf-8".into()))?;
    decode_model(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::fit_method;
    use crate::nn::{GruConfig, TrainConfig};
    use crate::synthgen::{generate_station, ClimateConfig};
    use crate::timeseries::build_pairs;

    fn quick_config() -> MethodConfig {
        MethodConfig {
            gru: GruConfig { hidden_dim: 4 },
            tcn: TcnConfig {
                channels: 4,
                ..TcnConfig::default()
            },
            train: TrainConfig {
                epochs: 2,
                ..TrainConfig::default()
            },
            gbt: crate::gbt::GbtConfig {
                n_estimators: 10,
                ..Default::default()
            },
            ..MethodConfig::default()
        }
    }

    #[test]
    fn every_method_round_trips_exactly() {
        let series = generate_station(&ClimateConfig::default(), 40, "s").unwrap();
        let pairs = build_pairs(&series).unwrap();
        let cfg = quick_config();
        for m in Method::ALL {
            let model = fit_method(m, &cfg, &pairs, 3).unwrap();
            let text = encode_model(&model, &cfg);
            let back = decode_model(&text).unwrap();
            assert_eq!(back.model, model, "{m}");
            assert_eq!(back.config, cfg);
            for p in &pairs {
                assert_eq!(
                    back.model.predict_min(&p.input).to_bits(),
                    model.predict_min(&p.input).to_bits()
                );
            }
        }
    }

    #[test]
    fn rejects_damaged_files() {
        let series = generate_station(&ClimateConfig::default(), 20, "s").unwrap();
        let pairs = build_pairs(&series).unwrap();
        let cfg = quick_config();
        let model = fit_method(Method::Xgb, &cfg, &pairs, 1).unwrap();
        let text = encode_model(&model, &cfg);

        let truncated = &text[..text.len() - 40];
        assert!(matches!(
            decode_model(truncated),
            Err(Error::CorruptPayload(_))
        ));
        let bumped = text.replace("format_version = 1", "format_version = 2");
        assert_eq!(
            decode_model(&bumped),
            Err(Error::UnknownVersion("2".into()))
        );
        let retagged = text.replace("method = xgb", "method = gru");
        assert!(matches!(
            decode_model(&retagged),
            Err(Error::MethodMismatch { .. })
        ));
        assert!(decode_model("").is_err());
        assert!(decode_model("frostcast-model\n").is_err());
        let tampered = text.replacen("\"base_score\":", "\"base_score\":1", 1);
        assert_ne!(tampered, text);
        assert!(matches!(
            decode_model(&tampered),
            Err(Error::CorruptPayload(_))
        ));
    }
}
