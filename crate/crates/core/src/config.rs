//! Every tunable constant of the toolkit in one serializable tree.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::metrics::{ObjectBox, DEFAULT_MC_SAMPLES, DEFAULT_MC_SEED, DEFAULT_RESOLUTION};
use crate::refine::BeamConfig;
use crate::sampler::SamplerConfig;
use crate::segmentation::SegmentationConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub voxel_resolution: usize,
    pub mc_samples: usize,
    pub mc_seed: u64,
    pub object_box: ObjectBox,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            voxel_resolution: DEFAULT_RESOLUTION,
            mc_samples: DEFAULT_MC_SAMPLES,
            mc_seed: DEFAULT_MC_SEED,
            object_box: ObjectBox::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    pub beam: BeamConfig,
    /// Largest-component IoU below which a part is flagged, not cleaned.
    pub artifact_theta: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            beam: BeamConfig::default(),
            artifact_theta: 0.5,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub parallelism: usize,
    pub segmentation: SegmentationConfig,
    pub metrics: MetricsConfig,
    pub refine: RefineConfig,
    pub sampler: SamplerConfig,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.segmentation.validate()?;
        self.refine.beam.validate()?;
        self.sampler.validate()?;
        if self.metrics.voxel_resolution < 2 || self.metrics.mc_samples == 0 {
            return Err(Error::Invalid("voxel_resolution must be ≥ 2 and mc_samples ≥ 1".into()));
        }
        if !(self.refine.artifact_theta > 0.0 && self.refine.artifact_theta <= 1.0) {
            return Err(Error::Invalid("artifact_theta must be in (0, 1]".into()));
        }
        Ok(())
    }

    /// Lowercase hex SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Per-item seed derived from the global seed and a stable key.
    pub fn derive_seed(&self, key: &str) -> u64 {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(key.as_bytes());
        u64::from_le_bytes(h.finalize()[..8].try_into().expect("8 bytes"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_and_validates() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        let back: PipelineConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"sede": 1}"#).is_err());
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"segmentation": {"tua": 1}}"#).is_err());
        let partial: PipelineConfig = serde_json::from_str(r#"{"seed": 7}"#).unwrap();
        assert_eq!(partial.seed, 7);
        assert_ne!(partial.hash(), PipelineConfig::default().hash());
    }

    #[test]
    fn derived_seeds_are_stable() {
        let c = PipelineConfig::default();
        assert_eq!(c.derive_seed("a"), c.derive_seed("a"));
        assert_ne!(c.derive_seed("a"), c.derive_seed("b"));
    }
}
