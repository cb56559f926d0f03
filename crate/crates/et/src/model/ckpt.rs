//! Model checkpointing on top of the tensor archive.

use std::path::Path;

use super::{ETParams, LstmParams, ModelConfig, ModelError, TranslatorParams};
use crate::rng;
use crate::tensor::{load_checkpoint, save_checkpoint, Tensor};

fn header(kind: &str, config: &ModelConfig) -> serde_json::Value {
    serde_json::json!({ "kind": kind, "config": config })
}

fn save(
    path: &Path,
    kind: &str,
    config: &ModelConfig,
    named: Vec<(String, &Tensor)>,
) -> Result<(), ModelError> {
    save_checkpoint(path, &header(kind, config), &named)?;
    Ok(())
}

fn fill(
    mut named: Vec<(String, &mut Tensor)>,
    tensors: Vec<(String, Tensor)>,
) -> Result<(), ModelError> {
    if named.len() != tensors.len() {
        return Err(ModelError::Checkpoint(format!(
            "{} parameters expected, archive has {}",
            named.len(),
            tensors.len()
        )));
    }
    for (name, loaded) in tensors {
        let slot = named
            .iter_mut()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| ModelError::Checkpoint(format!("unexpected tensor {name}")))?;
        if slot.1.shape != loaded.shape {
            return Err(ModelError::Checkpoint(format!(
                "{name}: shape {:?} vs {:?}",
                slot.1.shape, loaded.shape
            )));
        }
        slot.1.data = loaded.data;
    }
    Ok(())
}

fn read(path: &Path, expect_kind: &str) -> Result<(ModelConfig, Vec<(String, Tensor)>), ModelError> {
    let ckpt = load_checkpoint(path)?;
    let kind = ckpt.config["kind"].as_str().unwrap_or_default().to_string();
    if kind != expect_kind {
        return Err(ModelError::Checkpoint(format!(
            "checkpoint kind `{kind}`, expected `{expect_kind}`"
        )));
    }
    let config: ModelConfig = serde_json::from_value(ckpt.config["config"].clone())
        .map_err(|e| ModelError::Checkpoint(format!("config: {e}")))?;
    Ok((config, ckpt.tensors))
}

/// Kind tag stored in a checkpoint header, without loading the payload.
pub fn checkpoint_kind(path: &Path) -> Result<String, ModelError> {
    let ckpt = load_checkpoint(path)?;
    Ok(ckpt.config["kind"].as_str().unwrap_or_default().to_string())
}

impl ETParams {
    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        save(path, "et", &self.config, self.named())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let (config, tensors) = read(path, "et")?;
        let mut params = ETParams::init(&config, &mut rng::seeded(0))?;
        fill(params.named_mut(), tensors)?;
        Ok(params)
    }
}

impl LstmParams {
    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        save(path, "lstm", &self.config, self.named())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let (config, tensors) = read(path, "lstm")?;
        let mut params = LstmParams::init(&config, &mut rng::seeded(0))?;
        fill(params.named_mut(), tensors)?;
        Ok(params)
    }
}

impl TranslatorParams {
    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        save(path, "translator", &self.config, self.named())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let (config, tensors) = read(path, "translator")?;
        let mut params = TranslatorParams::init(&config, &mut rng::seeded(0))?;
        fill(params.named_mut(), tensors)?;
        Ok(params)
    }
}
