//! JSON checkpoints holding the model config, vocabulary and parameters.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Vocabulary;
use crate::error::{Error, Result};
use crate::math::Tensor;
use crate::model::{Ksan, ModelConfig};
use crate::trainer::TrainConfig;

pub const FORMAT: &str = "ksan-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub name: String,
    pub shape: [usize; 2],
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub model: ModelConfig,
    pub training: Option<TrainConfig>,
    pub vocab: Vocabulary,
    pub params: Vec<ParamRecord>,
}

impl Checkpoint {
    pub fn from_model(model: &Ksan, training: Option<&TrainConfig>) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            model: model.config().clone(),
            training: training.cloned(),
            vocab: model.vocab().clone(),
            params: model
                .params()
                .iter()
                .map(|(_, name, t)| ParamRecord {
                    name: name.to_string(),
                    shape: t.shape(),
                    values: t.data().to_vec(),
                })
                .collect(),
        }
    }

    /// Rebuilds the model, rejecting any parameter whose name or shape
    /// disagrees with what the config and vocabulary imply.
    pub fn into_model(self) -> Result<(Ksan, Option<TrainConfig>)> {
        let bad = |msg: String| Error::Checkpoint(msg);
        if self.format != FORMAT {
            return Err(bad(format!("unexpected format `{}`", self.format)));
        }
        if self.version != VERSION {
            return Err(bad(format!("unsupported version {}", self.version)));
        }
        // initial values are overwritten below, so any seed will do
        let mut model =
            Ksan::new(self.model, self.vocab, &mut ChaCha8Rng::seed_from_u64(0)).map_err(|e| bad(e.to_string()))?;
        let expected = model.params().len();
        if self.params.len() != expected {
            return Err(bad(format!(
                "expected {expected} parameters, found {}",
                self.params.len()
            )));
        }
        for record in self.params {
            let id = model
                .params()
                .id_of(&record.name)
                .ok_or_else(|| bad(format!("unexpected parameter `{}`", record.name)))?;
            let want = model.params().get(id).shape();
            if record.shape != want {
                return Err(bad(format!(
                    "parameter `{}` has shape {:?}, expected {:?}",
                    record.name, record.shape, want
                )));
            }
            let t = Tensor::new(want[0], want[1], record.values)
                .map_err(|e| bad(format!("parameter `{}`: {e}", record.name)))?;
            if !t.is_finite() {
                return Err(bad(format!("parameter `{}` has non-finite values", record.name)));
            }
            *model.params_mut().get_mut(id) = t;
        }
        Ok((model, self.training))
    }
}

pub fn save(path: impl AsRef<Path>, model: &Ksan, training: Option<&TrainConfig>) -> Result<()> {
    let json = serde_json::to_string(&Checkpoint::from_model(model, training))?;
    fs::write(path, json)?;
    Ok(())
}

/// Loads a checkpoint; unreadable or inconsistent files are
/// [`Error::Checkpoint`] errors.
pub fn load(path: impl AsRef<Path>) -> Result<(Ksan, Option<TrainConfig>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    let ck: Checkpoint =
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    ck.into_model()
}
