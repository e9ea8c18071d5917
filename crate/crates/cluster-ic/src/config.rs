//! Experiment configuration: one JSON document that fully determines an
//! experiment run.
//!
//! Every run of the command-line tool is driven by an [`ExperimentConfig`];
//! scalar fields may be overridden by flags, and the canonical JSON form of
//! the *effective* configuration is hashed so each output row can carry a
//! `(version, seed, config-hash)` stamp.  Identical configuration, seed and
//! build produce byte-identical outputs.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channels::ChannelSpec;
use crate::error::Error;

/// Which estimator family a run exercises.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Pure and decohered coherent information on 1D chains.
    Ic1d,
    /// Pure-protocol coherent information on 2D cylinders.
    Ic2d,
    /// Environment-resolved coherent information (channel-class values).
    IcEnv,
    /// Decoder-failure threshold scan.
    Threshold,
    /// Strange-correlator sweeps.
    Strange,
    /// Closed-form phase-diagram grid over sublattice strengths.
    PhaseDiagram,
    /// Virtual-channel (foliated) estimators.
    Virtual,
    /// Invariant self-checks.
    Selftest,
}

fn default_n_samples() -> u64 {
    10_000
}

/// Complete description of one experiment run.
///
/// Unused sections may be omitted; [`ExperimentConfig::validate`] checks
/// that everything the chosen experiment needs is present.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Half-length `N` of the 1D chain (sites `0..=2N`).
    #[serde(default)]
    pub n_half: Option<usize>,
    /// Cylinder length (columns) for 2D runs.
    #[serde(default)]
    pub lx: Option<usize>,
    /// Cylinder circumference for 2D runs.
    #[serde(default)]
    pub ly: Option<usize>,
    /// Linear sizes of a threshold or size sweep.
    #[serde(default)]
    pub sizes: Vec<usize>,
    /// Decoherence channel, where the experiment needs one.
    #[serde(default)]
    pub channel: Option<ChannelSpec>,
    /// Noise-strength grid.
    #[serde(default)]
    pub p_grid: Vec<f64>,
    /// Perturbation-strength grid (strange-correlator sweeps).
    #[serde(default)]
    pub lambda_grid: Vec<f64>,
    /// Monte-Carlo samples per grid point.
    #[serde(default = "default_n_samples")]
    pub n_samples: u64,
    /// Master seed; per-point seeds derive from it deterministically.
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    /// Parse a JSON config file.
    pub fn from_file(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config { message, .. } => Error::Config {
                path: path.display().to_string(),
                message,
            },
            other => other,
        })
    }

    /// Parse a JSON config string.
    pub fn from_json(text: &str) -> Result<Self, Error> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config {
            path: "<inline>".into(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Check that every section the experiment needs is present and sane.
    pub fn validate(&self) -> Result<(), Error> {
        let need = |ok: bool, message: &str| -> Result<(), Error> {
            if ok {
                Ok(())
            } else {
                Err(Error::Config {
                    path: format!("{:?}", self.experiment),
                    message: message.into(),
                })
            }
        };
        for &p in &self.p_grid {
            need((0.0..=0.5).contains(&p), "p_grid entries must lie in [0, 0.5]")?;
        }
        need(self.n_samples > 0, "n_samples must be positive")?;
        match self.experiment {
            ExperimentKind::Ic1d | ExperimentKind::IcEnv => {
                need(self.n_half.is_some(), "n_half is required")?;
                if self.experiment == ExperimentKind::IcEnv {
                    need(self.channel.is_some(), "channel is required")?;
                }
            }
            ExperimentKind::Ic2d => {
                need(self.lx.is_some() && self.ly.is_some(), "lx and ly are required")?;
            }
            ExperimentKind::Threshold => {
                need(self.sizes.len() >= 2, "at least two sizes are required")?;
                need(self.p_grid.len() >= 2, "at least two p values are required")?;
            }
            ExperimentKind::Strange => {
                need(self.n_half.is_some(), "n_half (ring cells) is required")?;
                need(!self.p_grid.is_empty(), "p_grid is required")?;
            }
            ExperimentKind::PhaseDiagram => {
                need(!self.p_grid.is_empty(), "p_grid is required")?;
            }
            ExperimentKind::Virtual => {
                need(
                    self.n_half.is_some() || (self.lx.is_some() && self.ly.is_some()),
                    "n_half (1D) or lx/ly (2D) is required",
                )?;
                need(!self.p_grid.is_empty(), "p_grid is required")?;
            }
            ExperimentKind::Selftest => {}
        }
        Ok(())
    }

    /// Canonical JSON form: fixed field order, no insignificant whitespace.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 digest of the canonical form, truncated to 16 chars.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        let mut hex = String::with_capacity(16);
        for byte in digest.iter().take(8) {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::Mask;

    fn minimal(kind: ExperimentKind) -> ExperimentConfig {
        ExperimentConfig {
            experiment: kind,
            n_half: Some(3),
            lx: Some(3),
            ly: Some(3),
            sizes: vec![4, 6],
            channel: Some(ChannelSpec::z_dephase(0.1, 0.1, Mask::Odd).unwrap()),
            p_grid: vec![0.05, 0.1],
            lambda_grid: vec![],
            n_samples: 100,
            seed: 1,
        }
    }

    #[test]
    fn round_trips_through_json() {
        let cfg = minimal(ExperimentKind::Threshold);
        let text = cfg.canonical_json();
        let back = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(back.canonical_json(), text);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn hash_tracks_every_field() {
        let cfg = minimal(ExperimentKind::Threshold);
        let mut other = cfg.clone();
        other.seed = 2;
        assert_ne!(cfg.hash(), other.hash());
        let mut other = cfg.clone();
        other.p_grid = vec![0.05, 0.11];
        assert_ne!(cfg.hash(), other.hash());
    }

    #[test]
    fn rejects_missing_sections_and_bad_grids() {
        let mut cfg = minimal(ExperimentKind::IcEnv);
        cfg.channel = None;
        assert!(matches!(cfg.validate(), Err(Error::Config { .. })));
        let mut cfg = minimal(ExperimentKind::Threshold);
        cfg.p_grid = vec![0.05, 0.7];
        assert!(matches!(cfg.validate(), Err(Error::Config { .. })));
        let mut cfg = minimal(ExperimentKind::Ic1d);
        cfg.n_half = None;
        assert!(matches!(cfg.validate(), Err(Error::Config { .. })));
    }

    #[test]
    fn rejects_unknown_fields() {
        let err = ExperimentConfig::from_json(r#"{"experiment":"selftest","bogus":1}"#);
        assert!(matches!(err, Err(Error::Config { .. })));
    }
}
