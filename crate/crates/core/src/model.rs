//! Model files: store metadata, the road network and every learned variable,
//! as one line of JSON.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::learner::{LearnedVariable, StoreMeta, VariableStore, MODEL_VERSION};
use crate::roadnet::{Edge, Path, RoadNetError, RoadNetwork};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("malformed model file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported model version {0} (expected {MODEL_VERSION})")]
    Version(u32),
    #[error("model network: {0}")]
    Network(#[from] RoadNetError),
    #[error("variable {index}: histogram dimensions do not match its path")]
    Dimensions { index: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A learned store together with the network it was learned on.
#[derive(Debug, Clone)]
pub struct Model {
    pub network: RoadNetwork,
    pub store: VariableStore,
}

#[derive(Serialize)]
struct FileOut<'a> {
    #[serde(flatten)]
    meta: &'a StoreMeta,
    network: Vec<&'a Edge>,
    variables: &'a [LearnedVariable],
}

#[derive(Deserialize)]
struct FileIn {
    #[serde(flatten)]
    meta: StoreMeta,
    network: Vec<Edge>,
    variables: Vec<LearnedVariable>,
}

impl Model {
    pub fn new(network: RoadNetwork, store: VariableStore) -> Self {
        Model { network, store }
    }

    pub fn to_json(&self) -> Result<String, ModelError> {
        let out = FileOut {
            meta: self.store.meta(),
            network: self.network.edges().collect(),
            variables: self.store.variables(),
        };
        Ok(serde_json::to_string(&out)?)
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<(), ModelError> {
        w.write_all(self.to_json()?.as_bytes())?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self, ModelError> {
        let file: FileIn = serde_json::from_str(s)?;
        if file.meta.version != MODEL_VERSION {
            return Err(ModelError::Version(file.meta.version));
        }
        let network = RoadNetwork::new(file.network)?;
        let mut vars = Vec::with_capacity(file.variables.len());
        for (index, mut v) in file.variables.into_iter().enumerate() {
            v.path = Path::new(&network, v.path.edges().to_vec())?;
            if v.hist.dims() != v.path.edges() {
                return Err(ModelError::Dimensions { index });
            }
            vars.push(v);
        }
        Ok(Model {
            network,
            store: VariableStore::new(file.meta, vars),
        })
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self, ModelError> {
        let mut s = String::new();
        r.read_to_string(&mut s)?;
        Self::from_json(&s)
    }
}
