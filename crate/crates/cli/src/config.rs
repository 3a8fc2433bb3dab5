//! Run configuration: built-in defaults, then a JSON file, then flags.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

use dualloop::gaussian::LossModel;
use dualloop::loopcompiler::{FinalPhaseMode, DEFAULT_TAU_NS};

use crate::CliError;

pub const OUT_DIR_ENV: &str = "DUALLOOP_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "dualloop-out";
pub const DEFAULT_SAMPLES: usize = 5000;

/// Every key is optional; absent keys fall through to the next layer.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub n_modes: Option<usize>,
    pub tau_ns: Option<f64>,
    pub source_detection_loss: Option<f64>,
    pub inner_trip_loss: Option<f64>,
    pub outer_trip_loss: Option<f64>,
    pub input_squeezing_db: Option<f64>,
    pub charge_injection_trip: Option<bool>,
    pub lossless: Option<bool>,
    pub preset: Option<String>,
    pub unitary: Option<PathBuf>,
    pub final_phase_mode: Option<FinalPhaseMode>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub estimate: Option<bool>,
    pub out_dir: Option<PathBuf>,
}

impl ConfigLayer {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        let mut layer: ConfigLayer = serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("bad config {}: {e}", path.display())))?;
        // Paths inside a config file are relative to the file.
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut layer.unitary, &mut layer.out_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(layer)
    }

    /// `self` wins wherever it sets a key. Preset and unitary form one
    /// source choice, so setting either in `self` replaces both.
    pub fn over(self, lower: ConfigLayer) -> ConfigLayer {
        let (preset, unitary) = if self.preset.is_some() || self.unitary.is_some() {
            (self.preset, self.unitary)
        } else {
            (lower.preset, lower.unitary)
        };
        ConfigLayer {
            n_modes: self.n_modes.or(lower.n_modes),
            tau_ns: self.tau_ns.or(lower.tau_ns),
            source_detection_loss: self.source_detection_loss.or(lower.source_detection_loss),
            inner_trip_loss: self.inner_trip_loss.or(lower.inner_trip_loss),
            outer_trip_loss: self.outer_trip_loss.or(lower.outer_trip_loss),
            input_squeezing_db: self.input_squeezing_db.or(lower.input_squeezing_db),
            charge_injection_trip: self.charge_injection_trip.or(lower.charge_injection_trip),
            lossless: self.lossless.or(lower.lossless),
            preset,
            unitary,
            final_phase_mode: self.final_phase_mode.or(lower.final_phase_mode),
            seed: self.seed.or(lower.seed),
            samples: self.samples.or(lower.samples),
            estimate: self.estimate.or(lower.estimate),
            out_dir: self.out_dir.or(lower.out_dir),
        }
    }
}

/// Fully resolved configuration. The output directory is not part of the
/// hashed identity of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub n_modes: Option<usize>,
    pub tau_ns: f64,
    pub loss: LossModel,
    pub lossless: bool,
    pub preset: Option<String>,
    pub unitary: Option<PathBuf>,
    pub final_phase_mode: FinalPhaseMode,
    pub seed: u64,
    pub samples: usize,
    pub estimate: bool,
    #[serde(skip)]
    pub out_dir: PathBuf,
}

impl RunConfig {
    /// Resolves flags over the optional file over defaults; the output
    /// directory falls back to the environment before the built-in default.
    pub fn resolve(flags: ConfigLayer, file: Option<&Path>, env_out_dir: Option<PathBuf>) -> Result<Self, CliError> {
        let file_layer = match file {
            Some(p) => ConfigLayer::from_file(p)?,
            None => ConfigLayer::default(),
        };
        let c = flags.over(file_layer);
        let defaults = LossModel::default();
        let lossless = c.lossless.unwrap_or(false);
        let squeezing = c.input_squeezing_db.unwrap_or(defaults.input_squeezing_db);
        let loss = if lossless {
            LossModel::lossless(squeezing)
        } else {
            LossModel {
                source_detection_loss: c.source_detection_loss.unwrap_or(defaults.source_detection_loss),
                inner_trip_loss: c.inner_trip_loss.unwrap_or(defaults.inner_trip_loss),
                outer_trip_loss: c.outer_trip_loss.unwrap_or(defaults.outer_trip_loss),
                input_squeezing_db: squeezing,
                charge_injection_trip: c.charge_injection_trip.unwrap_or(false),
            }
        };
        loss.validate()?;

        let cfg = RunConfig {
            n_modes: c.n_modes,
            tau_ns: c.tau_ns.unwrap_or(DEFAULT_TAU_NS),
            loss,
            lossless,
            preset: c.preset,
            unitary: c.unitary,
            final_phase_mode: c.final_phase_mode.unwrap_or(FinalPhaseMode::MeasurementBasis),
            seed: c.seed.unwrap_or(0),
            samples: c.samples.unwrap_or(DEFAULT_SAMPLES),
            estimate: c.estimate.unwrap_or(false),
            out_dir: c.out_dir.or(env_out_dir).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        match (&self.preset, &self.unitary) {
            (Some(_), Some(_)) => {
                return Err(CliError::Validation("give either a preset or a unitary, not both".into()))
            }
            (None, None) => return Err(CliError::Validation("a preset or a unitary file is required".into())),
            _ => {}
        }
        if !(self.tau_ns.is_finite() && self.tau_ns > 0.0) {
            return Err(CliError::Validation(format!("tau_ns must be positive, got {}", self.tau_ns)));
        }
        if self.estimate && self.samples < 2 {
            return Err(CliError::Validation("estimation needs at least 2 samples per basis".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}
