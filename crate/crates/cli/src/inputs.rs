//! Flag-value parsing: inputs arrive as inline JSON or `@file`, shaped to
//! match the model family, and are flattened the same way the vectorized
//! network flattens them.

use relunwrap::networks::Network;
use relunwrap::{io, Error, Result};
use serde_json::Value;
use std::fs;

/// Inline JSON, or the contents of a file when prefixed with `@`.
pub fn parse_value_arg(arg: &str, flag: &str) -> Result<Value> {
    let text = match arg.strip_prefix('@') {
        Some(path) => fs::read_to_string(path).map_err(|e| {
            Error::Io(std::io::Error::new(e.kind(), format!("{flag}: {path}: {e}")))
        })?,
        None => arg.to_string(),
    };
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        message: format!("{flag}: {e}"),
    })
}

/// One input for `net`, flattened to the coordinates its vectorized form
/// uses: a plain list for feedforward, a node-by-feature matrix for graph
/// models (column-stacked), nested lists for tensor models (first index
/// fastest).
pub fn flatten_input(net: &Network, v: &Value, flag: &str) -> Result<Vec<f64>> {
    let shape = net.input_shape();
    match net {
        Network::Feedforward(_) => {
            let x = io::parse_vec(v, flag)?;
            expect_len(x.len(), shape[0], flag)?;
            Ok(x)
        }
        Network::Gcn(_) => {
            let m = io::parse_matrix(v, flag)?;
            if m.rows() != shape[0] || m.cols() != shape[1] {
                return Err(Error::ShapeMismatch {
                    context: flag.to_string(),
                    expected: format!("{}x{} node-feature matrix", shape[0], shape[1]),
                    actual: format!("{}x{}", m.rows(), m.cols()),
                });
            }
            Ok(m.vec())
        }
        Network::Tensor(_) => {
            let t = io::parse_tensor(v, flag)?;
            if t.shape() != shape {
                return Err(Error::ShapeMismatch {
                    context: flag.to_string(),
                    expected: format!("tensor of shape {shape:?}"),
                    actual: format!("{:?}", t.shape()),
                });
            }
            Ok(t.vec())
        }
    }
}

fn expect_len(got: usize, want: usize, flag: &str) -> Result<()> {
    if got != want {
        return Err(Error::ShapeMismatch {
            context: flag.to_string(),
            expected: format!("{want} entries"),
            actual: format!("{got}"),
        });
    }
    Ok(())
}

/// A list of inputs (for the theory subcommand).
pub fn flatten_inputs(net: &Network, v: &Value, flag: &str) -> Result<Vec<Vec<f64>>> {
    let items = v.as_array().ok_or_else(|| Error::Schema {
        path: flag.to_string(),
        message: "expected a JSON array of inputs".into(),
    })?;
    if items.is_empty() {
        return Err(Error::InvalidArgument {
            context: flag.to_string(),
            message: "need at least one input".into(),
        });
    }
    items
        .iter()
        .enumerate()
        .map(|(i, item)| flatten_input(net, item, &format!("{flag}[{i}]")))
        .collect()
}
