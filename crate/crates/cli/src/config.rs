//! Run configuration: built-in defaults, overridden by a TOML key-value file,
//! overridden by command-line flags. The resolved result is what manifests
//! record, and a manifest can be fed back in with `--config`.

use std::path::Path;

use lattice_core::oracle::MaterialConfig;
use lattice_nn::LossKind;
use lattice_pipeline::augment::{DEFAULT_COPIES, TRANSFER_COPIES};
use lattice_pipeline::autoencoder::AeConfig;
use lattice_pipeline::split::DEFAULT_HELDOUT_KEYS;
use lattice_pipeline::train::GruConfig;
use lattice_pipeline::transfer::{TransferConfig, DEFAULT_EPOCHS, DEFAULT_REPLAY};
use serde::{Deserialize, Serialize};

use crate::UsageError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSettings {
    /// Oracle simulations per `data generate` run.
    pub n: usize,
    /// Augmented copies per key-design simulation.
    pub k: usize,
    /// Augmented copies per fixture-geometry simulation.
    pub fixture_k: usize,
    /// Designs withheld from autoencoder and GRU training (Test2).
    pub heldout: usize,
}

impl Default for DataSettings {
    fn default() -> Self {
        DataSettings {
            n: 1500,
            k: DEFAULT_COPIES,
            fixture_k: TRANSFER_COPIES,
            heldout: DEFAULT_HELDOUT_KEYS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AeSettings {
    pub hidden: usize,
    pub latent: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub decay: f64,
    /// Fraction of seen designs used for training; the rest is the test split.
    pub train_frac: f64,
}

impl Default for AeSettings {
    fn default() -> Self {
        let d = AeConfig::default();
        AeSettings {
            hidden: d.hidden,
            latent: d.latent,
            epochs: d.epochs,
            batch_size: d.batch_size,
            lr0: d.lr0,
            decay: d.decay,
            train_frac: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GruSettings {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub decay: f64,
    pub loss: String,
}

impl Default for GruSettings {
    fn default() -> Self {
        let d = GruConfig::default();
        GruSettings {
            hidden: d.hidden,
            epochs: d.epochs,
            batch_size: d.batch_size,
            lr0: d.lr0,
            decay: d.decay,
            loss: d.loss.name().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferSettings {
    pub epochs: usize,
    pub replay: usize,
    /// Fraction of new-geometry simulations used for training.
    pub new_train_frac: f64,
}

impl Default for TransferSettings {
    fn default() -> Self {
        TransferSettings {
            epochs: DEFAULT_EPOCHS,
            replay: DEFAULT_REPLAY,
            new_train_frac: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub material: MaterialConfig,
    pub data: DataSettings,
    pub ae: AeSettings,
    pub gru: GruSettings,
    pub transfer: TransferSettings,
    /// Provenance table written into manifests; ignored on input.
    #[serde(skip_serializing)]
    pub run: Option<toml::Table>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, UsageError> {
        toml::from_str(text).map_err(|e| UsageError(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), UsageError> {
        let usage = |m: String| Err(UsageError(m));
        self.material.validate().map_err(|e| UsageError(e.to_string()))?;
        if self.data.n == 0 || self.data.k == 0 || self.data.fixture_k == 0 {
            return usage("data.n, data.k and data.fixture_k must be at least 1".into());
        }
        if self.ae.batch_size == 0 || self.gru.batch_size == 0 {
            return usage("batch sizes must be at least 1".into());
        }
        if self.gru.hidden.is_empty() || self.gru.hidden.contains(&0) {
            return usage(format!("gru.hidden {:?} needs one or more positive widths", self.gru.hidden));
        }
        if self.ae.hidden == 0 || self.ae.latent == 0 {
            return usage("autoencoder widths must be positive".into());
        }
        for (name, f) in [("ae.train_frac", self.ae.train_frac), ("transfer.new_train_frac", self.transfer.new_train_frac)] {
            if !(f > 0.0 && f < 1.0) {
                return usage(format!("{name} = {f} must lie in (0, 1)"));
            }
        }
        for (name, lr) in [("ae.lr0", self.ae.lr0), ("gru.lr0", self.gru.lr0)] {
            if !(lr.is_finite() && lr >= 0.0) {
                return usage(format!("{name} = {lr} must be finite and non-negative"));
            }
        }
        self.loss()?;
        Ok(())
    }

    pub fn loss(&self) -> Result<LossKind, UsageError> {
        LossKind::from_name(&self.gru.loss).ok_or_else(|| UsageError(format!("unknown loss {:?} (mae or mse)", self.gru.loss)))
    }

    pub fn ae_config(&self) -> AeConfig {
        AeConfig {
            hidden: self.ae.hidden,
            latent: self.ae.latent,
            epochs: self.ae.epochs,
            batch_size: self.ae.batch_size,
            lr0: self.ae.lr0,
            decay: self.ae.decay,
            seed: self.seed,
        }
    }

    pub fn gru_config(&self) -> Result<GruConfig, UsageError> {
        Ok(GruConfig {
            hidden: self.gru.hidden.clone(),
            epochs: self.gru.epochs,
            batch_size: self.gru.batch_size,
            lr0: self.gru.lr0,
            decay: self.gru.decay,
            seed: self.seed,
            loss: self.loss()?,
        })
    }

    pub fn transfer_config(&self) -> Result<TransferConfig, UsageError> {
        Ok(TransferConfig {
            train: GruConfig {
                epochs: self.transfer.epochs,
                ..self.gru_config()?
            },
            replay: self.transfer.replay,
        })
    }

    /// The resolved configuration plus a `[run]` provenance table.
    pub fn manifest(&self, run: toml::Table) -> anyhow::Result<String> {
        let mut table = toml::Table::try_from(self)?;
        table.insert("run".into(), toml::Value::Table(run));
        Ok(toml::to_string(&table)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let c = RunConfig::from_toml("seed = 9\n[gru]\nhidden = [64, 64, 64]\n[material]\nk_b = 0.05\n").unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.gru.hidden, vec![64; 3]);
        assert_eq!(c.gru.epochs, GruConfig::default().epochs);
        assert_eq!(c.material.k_b, 0.05);
        assert_eq!(c.material.e, MaterialConfig::default().e);
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::from_toml("sed = 1"), Err(UsageError(_))));
        assert!(RunConfig::from_toml("[gru]\nwidth = 3").is_err());
    }

    #[test]
    fn manifest_reads_back_as_config() {
        let mut c = RunConfig::default();
        c.seed = 77;
        c.gru.loss = "mse".into();
        let mut run = toml::Table::new();
        run.insert("command".into(), "train gru".into());
        let text = c.manifest(run).unwrap();
        let back = RunConfig::from_toml(&text).unwrap();
        assert!(back.run.is_some());
        assert_eq!(RunConfig { run: None, ..back }, c);
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut c = RunConfig::default();
        c.gru.loss = "huber".into();
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.data.n = 0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.transfer.new_train_frac = 1.0;
        assert!(c.validate().is_err());
    }
}
