//! Model and result files.
//!
//! Models live in a single self-describing JSON schema (`format_version`
//! "1") with arrays as nested numeric lists, outermost index first, so a
//! matrix is a list of rows. Results share one envelope: a `kind` tag, a
//! kind-specific payload, and provenance (model hash, input, seed, tool
//! version — never a timestamp, so equal invocations give equal bytes).
//! Floats serialize with shortest round-trip precision, making every
//! payload lossless through a parse/serialize cycle.
//!
//! Loading validates eagerly: malformed JSON, schema violations, shape
//! chain breaks, unsupported versions, and non-finite entries are distinct
//! errors naming the offending field path. Converters from other
//! checkpoint formats are out of scope; anything that can print this
//! schema can feed the tool.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Tensor};
use crate::networks::{
    ActivationPattern, DenseLayer, FeedforwardNetwork, GcnLayer, GcnNetwork, Network,
    PatternLayer, TensorLayer, TensorNetwork,
};
use crate::regions::{RegionCensus, RegionDescription};
use crate::shap::{Attribution, AttributionMode, PreconditionCheck};
use crate::surrogate::{Mrt, MrtNode, Theory};
use crate::unwrap::LocalLinearModel;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::Path;

pub const FORMAT_VERSION: &str = "1";

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

// ---- JSON value construction ----------------------------------------------

fn jnum(x: f64) -> Value {
    Value::Number(serde_json::Number::from_f64(x).expect("values are validated finite"))
}

fn jvec(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| jnum(x)).collect())
}

fn jmatrix(m: &Matrix) -> Value {
    Value::Array((0..m.rows()).map(|i| jvec(m.row(i))).collect())
}

fn jnested(shape: &[usize], data: &[f64]) -> Value {
    if shape.len() <= 1 {
        return jvec(data);
    }
    let chunk = data.len() / shape[0];
    Value::Array(
        data.chunks_exact(chunk)
            .map(|c| jnested(&shape[1..], c))
            .collect(),
    )
}

fn jtensor(t: &Tensor) -> Value {
    jnested(t.shape(), t.data())
}

fn jpattern(p: &ActivationPattern) -> Value {
    Value::Array(
        p.layers()
            .iter()
            .map(|l| {
                json!({
                    "shape": l.shape(),
                    "bits": l.bits().iter().map(|&b| u8::from(b)).collect::<Vec<_>>(),
                })
            })
            .collect(),
    )
}

// ---- JSON value inspection -------------------------------------------------

fn schema(path: &str, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.to_string(),
        message: message.into(),
    }
}

fn obj<'v>(v: &'v Value, path: &str) -> Result<&'v Map<String, Value>> {
    v.as_object().ok_or_else(|| schema(path, "expected an object"))
}

fn arr<'v>(v: &'v Value, path: &str) -> Result<&'v Vec<Value>> {
    v.as_array().ok_or_else(|| schema(path, "expected an array"))
}

fn req<'v>(m: &'v Map<String, Value>, key: &str, path: &str) -> Result<&'v Value> {
    m.get(key)
        .ok_or_else(|| schema(path, format!("missing required field `{key}`")))
}

fn text<'v>(v: &'v Value, path: &str) -> Result<&'v str> {
    v.as_str().ok_or_else(|| schema(path, "expected a string"))
}

fn fnum(v: &Value, path: &str) -> Result<f64> {
    let x = v
        .as_f64()
        .ok_or_else(|| schema(path, "expected a number"))?;
    if !x.is_finite() {
        return Err(Error::NonFinite {
            path: path.to_string(),
        });
    }
    Ok(x)
}

fn unsigned(v: &Value, path: &str) -> Result<u64> {
    v.as_u64()
        .ok_or_else(|| schema(path, "expected a non-negative integer"))
}

/// Nested numeric lists to (shape, row-major data); rejects ragged
/// nesting and non-finite entries with the exact offending path.
fn parse_nested(v: &Value, path: &str) -> Result<(Vec<usize>, Vec<f64>)> {
    match v {
        Value::Array(a) => {
            if a.is_empty() {
                return Err(schema(path, "empty array has no shape"));
            }
            let (child_shape, mut data) = parse_nested(&a[0], &format!("{path}[0]"))?;
            for (i, el) in a.iter().enumerate().skip(1) {
                let el_path = format!("{path}[{i}]");
                let (s, d) = parse_nested(el, &el_path)?;
                if s != child_shape {
                    return Err(Error::ShapeMismatch {
                        context: el_path,
                        expected: format!("{child_shape:?}"),
                        actual: format!("{s:?}"),
                    });
                }
                data.extend(d);
            }
            let mut shape = child_shape;
            shape.insert(0, a.len());
            Ok((shape, data))
        }
        _ => Ok((Vec::new(), vec![fnum(v, path)?])),
    }
}

/// Flat numeric list to a vector; `path` names the value in diagnostics.
pub fn parse_vec(v: &Value, path: &str) -> Result<Vec<f64>> {
    let (shape, data) = parse_nested(v, path)?;
    if shape.len() != 1 {
        return Err(schema(path, format!("expected a flat list, got depth {}", shape.len())));
    }
    Ok(data)
}

/// List of equal-length rows to a matrix.
pub fn parse_matrix(v: &Value, path: &str) -> Result<Matrix> {
    let (shape, data) = parse_nested(v, path)?;
    if shape.len() != 2 {
        return Err(schema(
            path,
            format!("expected a list of rows, got depth {}", shape.len()),
        ));
    }
    Matrix::new(shape[0], shape[1], data)
}

/// Nested numeric lists to a tensor, outermost index first.
pub fn parse_tensor(v: &Value, path: &str) -> Result<Tensor> {
    let (shape, data) = parse_nested(v, path)?;
    if shape.is_empty() {
        return Err(schema(path, "expected nested lists, got a bare number"));
    }
    Tensor::new(shape, data)
}

fn parse_pattern(v: &Value, path: &str) -> Result<ActivationPattern> {
    let layers = arr(v, path)?
        .iter()
        .enumerate()
        .map(|(i, lv)| {
            let lp = format!("{path}[{i}]");
            let m = obj(lv, &lp)?;
            let shape = arr(req(m, "shape", &lp)?, &format!("{lp}.shape"))?
                .iter()
                .map(|d| unsigned(d, &format!("{lp}.shape")).map(|u| u as usize))
                .collect::<Result<Vec<_>>>()?;
            let bits = arr(req(m, "bits", &lp)?, &format!("{lp}.bits"))?
                .iter()
                .map(|b| match b.as_u64() {
                    Some(0) => Ok(false),
                    Some(1) => Ok(true),
                    _ => Err(schema(&format!("{lp}.bits"), "bits must be 0 or 1")),
                })
                .collect::<Result<Vec<_>>>()?;
            PatternLayer::new(shape, bits)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ActivationPattern::new(layers))
}

// ---- Model schema -----------------------------------------------------------

pub fn model_to_json(net: &Network, metadata: &Map<String, Value>) -> Value {
    let layers: Vec<Value> = match net {
        Network::Feedforward(n) => n
            .layers()
            .iter()
            .map(|l| json!({"weight": jmatrix(l.weight()), "bias": jvec(l.bias())}))
            .collect(),
        Network::Gcn(n) => n
            .layers()
            .iter()
            .map(|l| {
                json!({
                    "operator": jmatrix(l.operator()),
                    "weight": jmatrix(l.weight()),
                    "bias": jmatrix(l.bias()),
                })
            })
            .collect(),
        Network::Tensor(n) => n
            .layers()
            .iter()
            .map(|l| {
                json!({
                    "mode_matrices": Value::Array(l.mode_mats().iter().map(jmatrix).collect()),
                    "bias": jtensor(l.bias()),
                })
            })
            .collect(),
    };
    json!({
        "format_version": FORMAT_VERSION,
        "family": net.family(),
        "layers": layers,
        "metadata": metadata,
    })
}

pub fn model_to_string(net: &Network, metadata: &Map<String, Value>) -> String {
    let mut s = serde_json::to_string_pretty(&model_to_json(net, metadata))
        .expect("model values are plain JSON");
    s.push('\n');
    s
}

pub fn parse_model(source: &str) -> Result<(Network, Map<String, Value>)> {
    let root: Value = serde_json::from_str(source).map_err(|e| Error::Parse {
        message: e.to_string(),
    })?;
    let top = obj(&root, "$")?;
    for key in top.keys() {
        if !matches!(key.as_str(), "format_version" | "family" | "layers" | "metadata") {
            return Err(schema("$", format!("unknown field `{key}`")));
        }
    }
    let version = text(req(top, "format_version", "$")?, "$.format_version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version.to_string(),
            supported: FORMAT_VERSION.to_string(),
        });
    }
    let family = text(req(top, "family", "$")?, "$.family")?;
    let layers = arr(req(top, "layers", "$")?, "$.layers")?;
    if layers.is_empty() {
        return Err(schema("$.layers", "a model needs at least one layer"));
    }
    let metadata = match top.get("metadata") {
        Some(v) => obj(v, "$.metadata")?.clone(),
        None => Map::new(),
    };
    let network = match family {
        "feedforward" => Network::Feedforward(parse_feedforward(layers)?),
        "gcn" => Network::Gcn(parse_gcn(layers)?),
        "tensor" => Network::Tensor(parse_tensor_net(layers)?),
        other => {
            return Err(schema(
                "$.family",
                format!("unknown family `{other}` (expected feedforward, gcn, or tensor)"),
            ));
        }
    };
    Ok((network, metadata))
}

fn layer_obj<'v>(layers: &'v [Value], i: usize) -> Result<(&'v Map<String, Value>, String)> {
    let path = format!("$.layers[{i}]");
    Ok((obj(&layers[i], &path)?, path))
}

fn parse_feedforward(layers: &[Value]) -> Result<FeedforwardNetwork> {
    let mut parsed = Vec::with_capacity(layers.len());
    for i in 0..layers.len() {
        let (m, path) = layer_obj(layers, i)?;
        let weight = parse_matrix(req(m, "weight", &path)?, &format!("{path}.weight"))?;
        let bias = parse_vec(req(m, "bias", &path)?, &format!("{path}.bias"))?;
        parsed.push(DenseLayer::new(weight, bias)?);
    }
    // Chain check here rather than in the constructor so the diagnostic
    // names both offending layers by field path.
    for i in 1..parsed.len() {
        let prev = &parsed[i - 1];
        let cur = &parsed[i];
        if cur.in_dim() != prev.out_dim() {
            return Err(Error::ShapeMismatch {
                context: format!("$.layers[{i}].weight"),
                expected: format!(
                    "{} columns to follow $.layers[{}].weight ({}x{})",
                    prev.out_dim(),
                    i - 1,
                    prev.out_dim(),
                    prev.in_dim()
                ),
                actual: format!("{}x{}", cur.out_dim(), cur.in_dim()),
            });
        }
    }
    FeedforwardNetwork::new(parsed)
}

fn parse_gcn(layers: &[Value]) -> Result<GcnNetwork> {
    let mut parsed = Vec::with_capacity(layers.len());
    for i in 0..layers.len() {
        let (m, path) = layer_obj(layers, i)?;
        let operator = parse_matrix(req(m, "operator", &path)?, &format!("{path}.operator"))?;
        let weight = parse_matrix(req(m, "weight", &path)?, &format!("{path}.weight"))?;
        let bias = parse_matrix(req(m, "bias", &path)?, &format!("{path}.bias"))?;
        parsed.push(GcnLayer::new(operator, weight, bias)?);
    }
    GcnNetwork::new(parsed)
}

fn parse_tensor_net(layers: &[Value]) -> Result<TensorNetwork> {
    let mut parsed = Vec::with_capacity(layers.len());
    for i in 0..layers.len() {
        let (m, path) = layer_obj(layers, i)?;
        let mats_path = format!("{path}.mode_matrices");
        let mode_mats = arr(req(m, "mode_matrices", &path)?, &mats_path)?
            .iter()
            .enumerate()
            .map(|(j, mv)| parse_matrix(mv, &format!("{mats_path}[{j}]")))
            .collect::<Result<Vec<_>>>()?;
        let bias = parse_tensor(req(m, "bias", &path)?, &format!("{path}.bias"))?;
        parsed.push(TensorLayer::new(mode_mats, bias)?);
    }
    TensorNetwork::new(parsed)
}

/// A validated network plus the hash identifying the exact file bytes.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub network: Network,
    pub metadata: Map<String, Value>,
    pub sha256: String,
}

fn with_path(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(
        e.kind(),
        format!("{}: {e}", path.display()),
    ))
}

pub fn load_model(path: &Path) -> Result<LoadedModel> {
    let bytes = fs::read(path).map_err(|e| with_path(path, e))?;
    let source = std::str::from_utf8(&bytes).map_err(|e| Error::Parse {
        message: format!("model file is not UTF-8: {e}"),
    })?;
    let (network, metadata) = parse_model(source)?;
    Ok(LoadedModel {
        network,
        metadata,
        sha256: sha256_hex(&bytes),
    })
}

pub fn save_model(path: &Path, net: &Network, metadata: &Map<String, Value>) -> Result<()> {
    fs::write(path, model_to_string(net, metadata)).map_err(|e| with_path(path, e))
}

// ---- Result files -----------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResultKind {
    LinearModel,
    Region,
    Tree,
    Theory,
    Attribution,
    VerifyReport,
}

impl ResultKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ResultKind::LinearModel => "linear_model",
            ResultKind::Region => "region",
            ResultKind::Tree => "tree",
            ResultKind::Theory => "theory",
            ResultKind::Attribution => "attribution",
            ResultKind::VerifyReport => "verify_report",
        }
    }

    pub fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "linear_model" => ResultKind::LinearModel,
            "region" => ResultKind::Region,
            "tree" => ResultKind::Tree,
            "theory" => ResultKind::Theory,
            "attribution" => ResultKind::Attribution,
            "verify_report" => ResultKind::VerifyReport,
            other => return Err(schema("$.kind", format!("unknown result kind `{other}`"))),
        })
    }
}

/// What produced a result: enough to reproduce it exactly. No wall-clock
/// fields, so reruns are byte-identical.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Provenance {
    pub model_sha256: String,
    pub tool_version: String,
    pub input: Option<Value>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultFile {
    pub kind: ResultKind,
    pub payload: Value,
    pub provenance: Provenance,
}

impl ResultFile {
    pub fn to_json(&self) -> Value {
        let mut prov = Map::new();
        prov.insert("model_sha256".into(), self.provenance.model_sha256.clone().into());
        prov.insert("tool_version".into(), self.provenance.tool_version.clone().into());
        if let Some(input) = &self.provenance.input {
            prov.insert("input".into(), input.clone());
        }
        if let Some(seed) = self.provenance.seed {
            prov.insert("seed".into(), seed.into());
        }
        json!({
            "kind": self.kind.as_str(),
            "payload": self.payload,
            "provenance": prov,
        })
    }

    pub fn to_json_string(&self) -> String {
        let mut s =
            serde_json::to_string_pretty(&self.to_json()).expect("result values are plain JSON");
        s.push('\n');
        s
    }

    pub fn parse(source: &str) -> Result<ResultFile> {
        let root: Value = serde_json::from_str(source).map_err(|e| Error::Parse {
            message: e.to_string(),
        })?;
        let top = obj(&root, "$")?;
        let kind = ResultKind::from_str(text(req(top, "kind", "$")?, "$.kind")?)?;
        let payload = req(top, "payload", "$")?.clone();
        let prov_v = req(top, "provenance", "$")?;
        let prov = obj(prov_v, "$.provenance")?;
        let provenance = Provenance {
            model_sha256: text(req(prov, "model_sha256", "$.provenance")?, "$.provenance.model_sha256")?
                .to_string(),
            tool_version: text(req(prov, "tool_version", "$.provenance")?, "$.provenance.tool_version")?
                .to_string(),
            input: prov.get("input").cloned(),
            seed: prov
                .get("seed")
                .map(|v| unsigned(v, "$.provenance.seed"))
                .transpose()?,
        };
        Ok(ResultFile {
            kind,
            payload,
            provenance,
        })
    }
}

// ---- Payloads ---------------------------------------------------------------

pub fn linear_model_payload(m: &LocalLinearModel) -> Value {
    json!({
        "weight": jmatrix(m.weight()),
        "bias": jvec(m.bias()),
        "pattern": jpattern(m.pattern()),
    })
}

pub fn parse_linear_model_payload(v: &Value) -> Result<LocalLinearModel> {
    let top = obj(v, "$.payload")?;
    let weight = parse_matrix(req(top, "weight", "$.payload")?, "$.payload.weight")?;
    let bias = parse_vec(req(top, "bias", "$.payload")?, "$.payload.bias")?;
    let pattern = parse_pattern(req(top, "pattern", "$.payload")?, "$.payload.pattern")?;
    if weight.rows() != bias.len() {
        return Err(Error::ShapeMismatch {
            context: "$.payload.bias".into(),
            expected: format!("{} entries", weight.rows()),
            actual: format!("{}", bias.len()),
        });
    }
    Ok(LocalLinearModel::new(weight, bias, pattern))
}

pub fn region_payload(r: &RegionDescription) -> Value {
    json!({
        "pattern": jpattern(r.pattern()),
        "halfspaces": Value::Array(
            r.halfspaces()
                .iter()
                .map(|h| json!({"normal": jvec(h.normal()), "offset": jnum(h.offset())}))
                .collect()
        ),
    })
}

pub fn census_payload(census: &RegionCensus, strategy: Value) -> Value {
    json!({
        "count": census.len(),
        "strategy": strategy,
        "regions": Value::Array(
            census
                .regions
                .iter()
                .map(|r| json!({"pattern": jpattern(&r.pattern), "witness": jvec(&r.witness)}))
                .collect()
        ),
    })
}

fn mrt_node_value(node: &MrtNode) -> Value {
    match node {
        MrtNode::Internal {
            layer,
            neuron,
            condition,
            active,
            inactive,
        } => json!({
            "split": {
                "layer": layer,
                "neuron": neuron,
                "normal": jvec(condition.normal()),
                "offset": jnum(condition.offset()),
            },
            "active": mrt_node_value(active),
            "inactive": mrt_node_value(inactive),
        }),
        MrtNode::Leaf { model, feasible } => json!({
            "leaf": {
                "weight": jmatrix(model.weight()),
                "bias": jvec(model.bias()),
                "feasible": feasible.map_or(Value::Null, Value::Bool),
            }
        }),
    }
}

pub fn tree_payload(tree: &Mrt, materialize: bool) -> Value {
    let mut payload = json!({
        "input_dim": tree.input_dim(),
        "output_dim": tree.output_dim(),
        "depth": tree.depth(),
        "internal_nodes": tree.num_internal(),
        "leaves": tree.num_leaves(),
    });
    if materialize {
        payload["root"] = mrt_node_value(tree.root());
    }
    payload
}

/// Tree statistics computed from the neuron count alone, for networks too
/// wide to materialize. Field-compatible with [`tree_payload`].
pub fn tree_stats_payload(
    input_dim: usize,
    output_dim: usize,
    hidden_neurons: usize,
) -> Result<Value> {
    let leaves = u64::try_from(hidden_neurons)
        .ok()
        .filter(|&n| n < 64)
        .map(|n| 1u64 << n)
        .ok_or(Error::CapExceeded {
            what: "tree statistics (leaf count overflows)".into(),
            needed: hidden_neurons as u128,
            cap: 63,
        })?;
    Ok(json!({
        "input_dim": input_dim,
        "output_dim": output_dim,
        "depth": hidden_neurons,
        "internal_nodes": leaves - 1,
        "leaves": leaves,
    }))
}

pub fn theory_payload(theory: &Theory) -> Value {
    json!({
        "atoms": theory.atoms.len(),
        "terms": theory.terms.len(),
        "text": theory.to_text(),
    })
}

pub fn attribution_payload(a: &Attribution) -> Value {
    let mut payload = Map::new();
    payload.insert("values".into(), jmatrix(a.values()));
    payload.insert("input".into(), jvec(a.input()));
    payload.insert("baseline".into(), jvec(a.baseline()));
    payload.insert("mode".into(), a.mode().label().into());
    if let AttributionMode::GlobalSampled { permutations, seed } = a.mode() {
        payload.insert(
            "sample".into(),
            json!({"permutations": permutations, "seed": seed}),
        );
    }
    if let Some(s) = a.stats() {
        payload.insert(
            "stats".into(),
            json!({
                "masked_points": s.masked_points,
                "coalitions": s.coalitions,
                "unwrap_calls": s.unwrap_calls,
                "pattern_cache_hits": s.pattern_cache_hits,
                "distinct_patterns": s.distinct_patterns,
            }),
        );
    }
    if let Some(check) = a.precondition_check() {
        let v = match check {
            PreconditionCheck::Exhaustive => {
                json!({"exhaustive": true, "approximate": false})
            }
            PreconditionCheck::Sampled { coalitions } => {
                json!({"exhaustive": false, "approximate": true, "coalitions_tested": coalitions})
            }
        };
        payload.insert("precondition_check".into(), v);
    }
    Value::Object(payload)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample;
    use crate::shap;

    fn meta(name: &str) -> Map<String, Value> {
        let mut m = Map::new();
        m.insert("name".into(), name.into());
        m
    }

    #[test]
    fn minimal_feedforward_file_loads() {
        let src = r#"{
            "format_version": "1",
            "family": "feedforward",
            "layers": [
                {"weight": [[1.0, -1.0]], "bias": [0.5]},
                {"weight": [[2.0]], "bias": [0.0]}
            ]
        }"#;
        let (net, metadata) = parse_model(src).unwrap();
        assert!(metadata.is_empty());
        let ffn = net.vectorized().unwrap();
        let (out, _) = ffn.forward(&[1.0, 0.0]).unwrap();
        assert_eq!(out, vec![3.0]);
    }

    #[test]
    fn model_files_round_trip_by_byte() {
        let mut rng = sample::rng_from_seed(41);
        let nets = [
            Network::Feedforward(sample::random_feedforward(&mut rng, &[3, 4, 4, 2])),
            Network::Gcn(sample::random_gcn(&mut rng, 3, &[2, 3, 1])),
            Network::Tensor(sample::random_tensor_network(
                &mut rng,
                &[vec![2, 2, 2], vec![2, 3, 2], vec![1, 1, 2]],
            )),
        ];
        for net in &nets {
            let s1 = model_to_string(net, &meta("roundtrip"));
            let (parsed, metadata) = parse_model(&s1).unwrap();
            let s2 = model_to_string(&parsed, &metadata);
            assert_eq!(s1, s2);
            assert_eq!(parsed.family(), net.family());
            // Vectorized forward agrees bit for bit after the round trip.
            let dim: usize = net.input_shape().iter().product();
            let x = sample::random_vector(&mut rng, dim, -1.0, 1.0);
            assert_eq!(
                net.vectorized().unwrap().forward(&x).unwrap().0,
                parsed.vectorized().unwrap().forward(&x).unwrap().0
            );
        }
    }

    #[test]
    fn broken_layer_chain_names_both_layers() {
        // First layer emits 2 values; second expects 4 inputs.
        let src = r#"{
            "format_version": "1",
            "family": "feedforward",
            "layers": [
                {"weight": [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]], "bias": [0.0, 0.0]},
                {"weight": [[1.0, 2.0, 3.0, 4.0]], "bias": [0.0]}
            ]
        }"#;
        let err = parse_model(src).unwrap_err();
        assert_eq!(err.kind(), "shape_mismatch");
        let msg = err.to_string();
        assert!(msg.contains("layers[1]"), "{msg}");
        assert!(msg.contains("layers[0]"), "{msg}");
    }

    #[test]
    fn gcn_operator_must_be_square() {
        let src = r#"{
            "format_version": "1",
            "family": "gcn",
            "layers": [
                {"operator": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], "weight": [[1.0]], "bias": [[0.0], [0.0]]},
                {"operator": [[1.0]], "weight": [[1.0]], "bias": [[0.0]]}
            ]
        }"#;
        let err = parse_model(src).unwrap_err();
        assert_eq!(err.kind(), "shape_mismatch");
        assert!(err.to_string().contains("square"));
    }

    #[test]
    fn distinct_load_failures() {
        assert_eq!(parse_model("not json").unwrap_err().kind(), "parse_error");
        let versioned = r#"{"format_version": "7", "family": "feedforward", "layers": [{}]}"#;
        let err = parse_model(versioned).unwrap_err();
        assert_eq!(err.kind(), "version_error");
        assert!(err.to_string().contains('7'));
        let missing = r#"{"format_version": "1", "family": "feedforward",
            "layers": [{"weight": [[1.0]]}, {"weight": [[1.0]], "bias": [0.0]}]}"#;
        let err = parse_model(missing).unwrap_err();
        assert_eq!(err.kind(), "schema_error");
        assert!(err.to_string().contains("bias"));
        let unknown = r#"{"format_version": "1", "family": "feedforward", "layers": [], "extra": 1}"#;
        assert_eq!(parse_model(unknown).unwrap_err().kind(), "schema_error");
    }

    #[test]
    fn rejects_out_of_range_and_ragged_numbers() {
        let huge = r#"{
            "format_version": "1",
            "family": "feedforward",
            "layers": [
                {"weight": [[1e999]], "bias": [0.0]},
                {"weight": [[1.0]], "bias": [0.0]}
            ]
        }"#;
        let err = parse_model(huge).unwrap_err();
        assert!(
            matches!(err.kind(), "parse_error" | "non_finite"),
            "{}",
            err.kind()
        );
        let ragged = r#"{
            "format_version": "1",
            "family": "feedforward",
            "layers": [
                {"weight": [[1.0, 2.0], [3.0]], "bias": [0.0, 0.0]},
                {"weight": [[1.0, 1.0]], "bias": [0.0]}
            ]
        }"#;
        let err = parse_model(ragged).unwrap_err();
        assert_eq!(err.kind(), "shape_mismatch");
        assert!(err.to_string().contains("weight[1]"));
    }

    #[test]
    fn save_and_load_hashes_the_bytes() {
        let dir = std::env::temp_dir().join("relunwrap-io-test");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.json");
        let net = Network::Feedforward(sample::random_feedforward(
            &mut sample::rng_from_seed(42),
            &[2, 3, 1],
        ));
        save_model(&path, &net, &meta("hash me")).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded.sha256.len(), 64);
        assert_eq!(
            loaded.sha256,
            sha256_hex(model_to_string(&net, &meta("hash me")).as_bytes())
        );
        assert_eq!(loaded.metadata.get("name").unwrap(), "hash me");
        fs::remove_file(&path).unwrap();
    }

    #[test]
    fn tensor_nested_lists_round_trip() {
        let t = Tensor::new(vec![2, 3, 2], (1..=12).map(f64::from).collect()).unwrap();
        let v = jtensor(&t);
        let back = parse_tensor(&v, "$.t").unwrap();
        assert_eq!(back, t);
        assert_eq!(v[1][2][0], json!(11.0));
    }

    #[test]
    fn stats_only_tree_payload_matches_materialized_counts() {
        let net = sample::random_feedforward(&mut sample::rng_from_seed(45), &[2, 3, 2, 1]);
        let tree = crate::surrogate::build_mrt(&net, 1 << 6).unwrap();
        let by_formula =
            tree_stats_payload(net.input_dim(), net.output_dim(), net.total_hidden_neurons())
                .unwrap();
        assert_eq!(by_formula, tree_payload(&tree, false));
        assert!(tree_stats_payload(1, 1, 200).is_err());
    }

    #[test]
    fn result_files_round_trip_losslessly() {
        let mut rng = sample::rng_from_seed(43);
        let net = sample::random_feedforward(&mut rng, &[3, 4, 2]);
        let x = sample::random_vector(&mut rng, 3, -1.0, 1.0);
        let pattern = net.pattern_of(&x).unwrap();
        let model = crate::unwrap::unwrap_feedforward(&net, &pattern).unwrap();
        let file = ResultFile {
            kind: ResultKind::LinearModel,
            payload: linear_model_payload(&model),
            provenance: Provenance {
                model_sha256: sha256_hex(b"fake"),
                tool_version: "0.0.0".into(),
                input: Some(jvec(&x)),
                seed: Some(7),
            },
        };
        let s1 = file.to_json_string();
        let parsed = ResultFile::parse(&s1).unwrap();
        assert_eq!(parsed, file);
        assert_eq!(parsed.to_json_string(), s1);
        // And the payload reconstructs the exact model.
        let back = parse_linear_model_payload(&parsed.payload).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn payloads_survive_a_parse_cycle() {
        let mut rng = sample::rng_from_seed(44);
        let net = sample::random_feedforward(&mut rng, &[2, 3, 3, 1]);
        let x = sample::random_vector(&mut rng, 2, -1.0, 1.0);
        let pattern = net.pattern_of(&x).unwrap();

        let region = crate::regions::region_halfspaces(&net, &pattern).unwrap();
        let tree = crate::surrogate::build_mrt(&net, 1 << 12).unwrap();
        let theory = crate::surrogate::export_theory(&net, &[pattern.clone()]).unwrap();
        let attribution = shap::shap_global(&net, &x, &[0.0, 0.0]).unwrap();
        let census = crate::regions::enumerate_regions(
            &net,
            &crate::regions::BoundingBox::uniform(2, -2.0, 2.0).unwrap(),
            &crate::regions::Strategy::Sample {
                count: 50,
                seed: 3,
            },
        )
        .unwrap();

        for payload in [
            region_payload(&region),
            tree_payload(&tree, true),
            theory_payload(&theory),
            attribution_payload(&attribution),
            census_payload(&census, json!({"sample": {"count": 50, "seed": 3}})),
        ] {
            let s = serde_json::to_string_pretty(&payload).unwrap();
            let back: Value = serde_json::from_str(&s).unwrap();
            assert_eq!(back, payload);
        }
    }
}
