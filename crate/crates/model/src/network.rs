//! A network kind plus its parameters, and its checkpoint form.

use std::path::Path;

use d3net_neural::{load_checkpoint, save_checkpoint, Checkpoint, Graph, ParamStore, Real, Tensor, Var};
use serde::{Deserialize, Serialize};

use crate::d2net::{self, D2NetConfig};
use crate::error::{ModelError, Result};
use crate::rdfdbk::{self, RdfdbkConfig};

pub const META_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", content = "config", rename_all = "lowercase")]
pub enum ModelSpec {
    D2net(D2NetConfig),
    Rdfdbk(RdfdbkConfig),
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::D2net(_) => "d2net",
            ModelSpec::Rdfdbk(_) => "rdfdbk",
        }
    }

    pub fn in_channels(&self) -> usize {
        match self {
            ModelSpec::D2net(c) => c.in_channels,
            ModelSpec::Rdfdbk(c) => c.in_channels,
        }
    }

    /// Output side over input side.
    pub fn scale(&self) -> usize {
        match self {
            ModelSpec::D2net(_) => 1,
            ModelSpec::Rdfdbk(_) => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::D2net(c) => c.validate(),
            ModelSpec::Rdfdbk(c) => c.validate(),
        }
    }

    pub fn init_params<T: Real>(&self, store: &mut ParamStore<T>) -> Result<()> {
        match self {
            ModelSpec::D2net(c) => d2net::init_params(c, store),
            ModelSpec::Rdfdbk(c) => rdfdbk::init_params(c, store),
        }
    }

    pub fn forward<T: Real>(&self, g: &mut Graph<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        match self {
            ModelSpec::D2net(c) => d2net::forward(c, g, store, x),
            ModelSpec::Rdfdbk(c) => rdfdbk::forward(c, g, store, x),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Meta {
    format_version: u32,
    spec: ModelSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub spec: ModelSpec,
    pub params: ParamStore<f32>,
}

impl Network {
    /// Freshly initialized parameters.
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut params = ParamStore::new(seed);
        spec.init_params(&mut params)?;
        Ok(Network { spec, params })
    }

    /// Parameters whose residual head is zeroed: D²Net becomes the identity
    /// and RDFDBK becomes nearest-neighbour x2.
    pub fn identity(spec: ModelSpec) -> Result<Self> {
        let mut net = Network::new(spec, 0)?;
        match spec {
            ModelSpec::D2net(_) => d2net::zero_tail(&mut net.params),
            ModelSpec::Rdfdbk(_) => rdfdbk::zero_head(&mut net.params),
        }
        Ok(net)
    }

    pub fn infer(&self, x: &Tensor<f32>) -> Result<Tensor<f32>> {
        let mut g = Graph::new();
        let xv = g.input(x.clone());
        let y = self.spec.forward(&mut g, &self.params, xv)?;
        Ok(g.value(y).clone())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let meta = Meta {
            format_version: META_FORMAT_VERSION,
            spec: self.spec,
        };
        Checkpoint::new(serde_json::to_string(&meta).expect("meta serializes"), self.params.clone())
    }

    pub fn from_checkpoint(ckpt: Checkpoint, path: &Path) -> Result<Self> {
        let bad = |message: String| ModelError::Checkpoint {
            path: path.to_owned(),
            message,
        };
        let meta: Meta = serde_json::from_str(&ckpt.meta).map_err(|e| bad(format!("bad metadata: {e}")))?;
        if meta.format_version != META_FORMAT_VERSION {
            return Err(bad(format!("unsupported metadata version {}", meta.format_version)));
        }
        meta.spec.validate()?;
        // The parameter set must be exactly the one the spec builds.
        let mut expected = ParamStore::<f32>::new(0);
        meta.spec.init_params(&mut expected)?;
        let matches = expected.len() == ckpt.store.len()
            && expected
                .iter()
                .all(|(n, p)| ckpt.store.value(n).is_some_and(|v| v.shape() == p.value.shape()));
        if !matches {
            return Err(bad(format!("parameters do not match a {} network", meta.spec.name())));
        }
        Ok(Network {
            spec: meta.spec,
            params: ckpt.store,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(save_checkpoint(path, &self.to_checkpoint())?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ckpt = load_checkpoint(path)?;
        Network::from_checkpoint(ckpt, path)
    }
}
