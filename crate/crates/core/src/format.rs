//! TOML text format for networks.
//!
//! ```toml
//! n_units = 3
//! activation = "sigmoid"      # or "noisy_or"
//! biases = [0.0, 0.1, -0.2]
//! visible = [3]               # 1-based
//!
//! [[edges]]                   # w_ij with j < i, 1-based
//! i = 3
//! j = 1
//! w = 0.5
//! ```
//!
//! Unknown keys are rejected.

use serde::{Deserialize, Serialize};

use crate::activation::ActivationKind;
use crate::error::{Error, Result};
use crate::net::{BeliefNetwork, Edge};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    n_units: usize,
    activation: ActivationKind,
    biases: Vec<f64>,
    #[serde(default)]
    visible: Vec<usize>,
    #[serde(default)]
    edges: Vec<EdgeRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeRecord {
    i: usize,
    j: usize,
    w: f64,
}

pub fn serialize(net: &BeliefNetwork) -> String {
    let file = NetworkFile {
        n_units: net.n_units(),
        activation: net.activation(),
        biases: net.biases().to_vec(),
        visible: net.visible().iter().map(|&v| v + 1).collect(),
        edges: net
            .edges()
            .iter()
            .map(|e| EdgeRecord {
                i: e.child + 1,
                j: e.parent + 1,
                w: e.weight,
            })
            .collect(),
    };
    toml::to_string(&file).expect("network file is always representable as TOML")
}

pub fn parse(text: &str) -> Result<BeliefNetwork> {
    let file: NetworkFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if file.biases.len() != file.n_units {
        return Err(Error::Dimension {
            what: "biases",
            got: file.biases.len(),
            expected: file.n_units,
        });
    }
    let to_zero_based = |idx: usize| -> Result<usize> {
        if idx == 0 || idx > file.n_units {
            Err(Error::BadIndex {
                index: idx,
                n_units: file.n_units,
            })
        } else {
            Ok(idx - 1)
        }
    };
    let edges = file
        .edges
        .iter()
        .map(|r| Ok(Edge::new(to_zero_based(r.i)?, to_zero_based(r.j)?, r.w)))
        .collect::<Result<Vec<_>>>()?;
    let visible = file
        .visible
        .iter()
        .map(|&v| to_zero_based(v))
        .collect::<Result<Vec<_>>>()?;
    BeliefNetwork::new(file.activation, file.biases, edges, visible)
}

pub fn read_network(path: &std::path::Path) -> Result<BeliefNetwork> {
    let text = std::fs::read_to_string(path)?;
    parse(&text)
}

pub fn write_network(path: &std::path::Path, net: &BeliefNetwork) -> Result<()> {
    std::fs::write(path, serialize(net))?;
    Ok(())
}
