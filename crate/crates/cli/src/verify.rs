//! Self-check suite behind the `verify` subcommand.
//!
//! Three properties, each on freshly seeded random inputs inside
//! [-3, 3]^d, with errors measured relative to max(1, |a|, |b|):
//! the local linear model at each input reproduces the forward pass, the
//! regression-tree view reproduces the forward pass, and exact
//! model-backed Shapley values match the forward-only brute force.

use relunwrap::linalg::{Matrix, Tensor};
use relunwrap::networks::{ActivationPattern, Network};
use relunwrap::regions::BoundingBox;
use relunwrap::surrogate::{build_mrt, LazyMrt};
use relunwrap::unwrap::{unwrap_feedforward, LocalLinearModel};
use relunwrap::{sample, shap, Result};
use serde_json::{json, Value};
use std::collections::HashMap;

const SAMPLE_RANGE: (f64, f64) = (-3.0, 3.0);
/// Materializing the tree is only attempted below this many neurons.
const MATERIALIZE_LIMIT: usize = 12;
/// Exact Shapley comparison is only run below this many features.
const SHAP_COMPARE_LIMIT: usize = 10;
const SHAP_PAIRS: usize = 5;

pub struct PropertyReport {
    pub name: &'static str,
    pub passed: bool,
    pub samples: usize,
    pub max_error: f64,
    pub note: Option<String>,
}

pub struct VerifyReport {
    pub properties: Vec<PropertyReport>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.properties.iter().all(|p| p.passed)
    }

    pub fn failures(&self) -> Vec<&'static str> {
        self.properties
            .iter()
            .filter(|p| !p.passed)
            .map(|p| p.name)
            .collect()
    }

    pub fn payload(&self) -> Value {
        json!({
            "passed": self.passed(),
            "properties": Value::Array(
                self.properties
                    .iter()
                    .map(|p| {
                        let mut v = json!({
                            "name": p.name,
                            "passed": p.passed,
                            "samples": p.samples,
                            "max_error": p.max_error,
                        });
                        if let Some(note) = &p.note {
                            v["note"] = note.clone().into();
                        }
                        v
                    })
                    .collect(),
            ),
        })
    }
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / 1.0_f64.max(x.abs()).max(y.abs()))
        .fold(0.0, f64::max)
}

/// Forward pass through the family-native network, flattened; for graph
/// and tensor models this exercises the reshaping as well.
fn native_forward(net: &Network, flat: &[f64]) -> Result<Vec<f64>> {
    match net {
        Network::Feedforward(n) => Ok(n.forward(flat)?.0),
        Network::Gcn(n) => {
            let x = Matrix::unvec(n.node_count(), n.input_features(), flat)?;
            Ok(n.forward(&x)?.0.vec())
        }
        Network::Tensor(n) => {
            let x = Tensor::from_vec(n.input_shape(), flat)?;
            Ok(n.forward(&x)?.0.vec())
        }
    }
}

pub fn run_verify(net: &Network, samples: usize, seed: u64, tol: f64) -> Result<VerifyReport> {
    let ffn = net.vectorized()?;
    let domain = BoundingBox::uniform(ffn.input_dim(), SAMPLE_RANGE.0, SAMPLE_RANGE.1)?;
    let mut rng = sample::rng_from_seed(seed);
    let mut properties = Vec::new();

    // Local linear models against the native forward pass.
    let mut models: HashMap<ActivationPattern, LocalLinearModel> = HashMap::new();
    let mut max_err = 0.0_f64;
    for _ in 0..samples {
        let x = domain.sample(&mut rng);
        let expected = native_forward(net, &x)?;
        let pattern = ffn.pattern_of(&x)?;
        if !models.contains_key(&pattern) {
            models.insert(pattern.clone(), unwrap_feedforward(&ffn, &pattern)?);
        }
        max_err = max_err.max(relative_error(&models[&pattern].eval(&x)?, &expected));
    }
    properties.push(PropertyReport {
        name: "decomposition_matches_forward",
        passed: max_err <= tol,
        samples,
        max_error: max_err,
        note: None,
    });

    // The regression-tree view against the forward pass; the lazy walker
    // covers every size, the materialized tree is cross-checked when small.
    let lazy = LazyMrt::new(&ffn);
    let materialized = if ffn.total_hidden_neurons() <= MATERIALIZE_LIMIT {
        Some(build_mrt(&ffn, 1 << MATERIALIZE_LIMIT)?)
    } else {
        None
    };
    let mut max_err = 0.0_f64;
    for _ in 0..samples {
        let x = domain.sample(&mut rng);
        let expected = ffn.forward(&x)?.0;
        max_err = max_err.max(relative_error(&lazy.eval(&x)?, &expected));
        if let Some(tree) = &materialized {
            max_err = max_err.max(relative_error(&tree.eval(&x)?, &expected));
        }
    }
    properties.push(PropertyReport {
        name: "tree_matches_forward",
        passed: max_err <= tol,
        samples,
        max_error: max_err,
        note: materialized
            .is_none()
            .then(|| "lazy walker only; tree too large to materialize".to_string()),
    });

    // Exact Shapley values: model-backed against forward-only.
    let n = ffn.input_dim();
    if n <= SHAP_COMPARE_LIMIT {
        let mut max_err = 0.0_f64;
        for _ in 0..SHAP_PAIRS {
            let x = domain.sample(&mut rng);
            let baseline = domain.sample(&mut rng);
            let global = shap::shap_global(&ffn, &x, &baseline)?;
            let brute = shap::shap_bruteforce(&ffn, &x, &baseline)?;
            max_err = max_err.max(relative_error(
                global.values().data(),
                brute.values().data(),
            ));
            // Efficiency for both routes.
            let fx = ffn.forward(&x)?.0;
            let fb = ffn.forward(&baseline)?.0;
            let gap: Vec<f64> = fx.iter().zip(&fb).map(|(a, b)| a - b).collect();
            max_err = max_err.max(relative_error(&global.sum_per_output(), &gap));
            max_err = max_err.max(relative_error(&brute.sum_per_output(), &gap));
        }
        properties.push(PropertyReport {
            name: "shap_global_matches_bruteforce",
            passed: max_err <= tol.max(1e-8),
            samples: SHAP_PAIRS,
            max_error: max_err,
            note: None,
        });
    } else {
        properties.push(PropertyReport {
            name: "shap_global_matches_bruteforce",
            passed: true,
            samples: 0,
            max_error: 0.0,
            note: Some(format!(
                "skipped: {n} features exceed the exact-coalition limit {SHAP_COMPARE_LIMIT}"
            )),
        });
    }

    Ok(VerifyReport { properties })
}
