//! JSON checkpoints: the model parameters plus the config and seed that
//! produced them. Floats round-trip bit-exactly.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::config::TrainingConfig;
use crate::dense::{CrossEncoder, DualEncoder};
use crate::error::{Error, Result};

const FORMAT: &str = "metric-distill-checkpoint/1";

pub trait ModelKind: Serialize + DeserializeOwned {
    const KIND: &'static str;
}

impl ModelKind for DualEncoder {
    const KIND: &'static str = "dual_encoder";
}

impl ModelKind for CrossEncoder {
    const KIND: &'static str = "cross_encoder";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint<M> {
    pub format: String,
    pub kind: String,
    pub seed: u64,
    pub config: TrainingConfig,
    pub model: M,
}

impl<M: ModelKind> Checkpoint<M> {
    pub fn new(config: &TrainingConfig, model: M) -> Self {
        Self {
            format: FORMAT.to_string(),
            kind: M::KIND.to_string(),
            seed: config.seed,
            config: config.clone(),
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Self = serde_json::from_str(text)?;
        if ckpt.format != FORMAT {
            return Err(Error::invalid(format!("unsupported checkpoint format {:?}", ckpt.format)));
        }
        if ckpt.kind != M::KIND {
            return Err(Error::invalid(format!(
                "checkpoint holds a {} but a {} was expected",
                ckpt.kind,
                M::KIND
            )));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{ModelDims, ParamSet, Vocab};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn roundtrip_is_bit_exact() {
        let vocab = Vocab::from(["<unk>", "a", "b"].map(String::from).to_vec());
        let dims = ModelDims { d_emb: 5, d: 3, hidden: 4 };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = TrainingConfig { seed: 99, ..Default::default() };

        let dual = DualEncoder::new(vocab.clone(), dims, &mut rng);
        let back = Checkpoint::<DualEncoder>::from_json(&Checkpoint::new(&cfg, dual.clone()).to_json().unwrap()).unwrap();
        let bits = |m: &dyn Fn() -> Vec<f64>| m().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&|| back.model.flatten()), bits(&|| dual.flatten()));
        assert_eq!(back.seed, 99);
        assert_eq!(back.config, cfg);

        let cross = CrossEncoder::new(vocab, dims, &mut rng);
        let json = Checkpoint::new(&cfg, cross.clone()).to_json().unwrap();
        assert_eq!(Checkpoint::<CrossEncoder>::from_json(&json).unwrap().model, cross);
        assert!(Checkpoint::<DualEncoder>::from_json(&json).is_err());
    }
}
