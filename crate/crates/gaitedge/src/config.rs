//! Pipeline configuration.
//!
//! One TOML file drives the whole evaluation: data locations, operator
//! settings, disturbance, and the gallery/probe protocol. Every default is
//! a deliberate value, not a placeholder — a completely empty config file
//! is a valid, canonical setup (3x3 structuring element, 64x44 target,
//! lambda 10, alignment on, NM#01-04 gallery with NM/BG/CL probe subsets,
//! identical-view exclusion on). Unknown keys are rejected: a typo in an
//! experiment config should fail loudly, not silently fall back.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{EvalProtocol, ProbeSubset};
use crate::grid::{StructuringElement, TargetSize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub data: DataSection,
    pub pipeline: PipelineSection,
    pub disturb: DisturbSection,
    pub protocol: ProtocolSection,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub domain_a: Option<PathBuf>,
    pub domain_b: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineSection {
    pub se_size: usize,
    pub target_height: usize,
    pub target_width: usize,
    pub lambda_seg: f64,
    pub align: bool,
    pub embedding: EmbeddingKind,
    pub prob_source: ProbSource,
    /// First k subjects (sorted) are held out as the reference split.
    pub train_subjects: usize,
    pub seed: u64,
}

impl Default for PipelineSection {
    fn default() -> Self {
        PipelineSection {
            se_size: 3,
            target_height: 64,
            target_width: 44,
            lambda_seg: 10.0,
            align: true,
            embedding: EmbeddingKind::Gei,
            prob_source: ProbSource::Mask,
            train_subjects: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingKind {
    Gei,
}

/// What plays the role of the segmentation probability map P.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ProbSource {
    /// P is the silhouette itself; the composite reconstructs it exactly.
    Mask,
    /// P is the silhouette pushed toward 0.5 by seeded per-pixel noise,
    /// imitating an imperfect segmenter.
    NoisyMask,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields, default)]
pub struct DisturbSection {
    pub enabled: bool,
    /// None means 10% of the larger frame dimension. The translation
    /// probability is fixed at 1/2 and not configurable.
    pub max_offset: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolSection {
    pub gallery: Vec<String>,
    pub exclude_identical_view: bool,
    pub probes: Vec<ProbeSubsetConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProbeSubsetConfig {
    pub name: String,
    pub conditions: Vec<String>,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        ProtocolSection {
            gallery: vec![
                "NM#01".into(),
                "NM#02".into(),
                "NM#03".into(),
                "NM#04".into(),
            ],
            exclude_identical_view: true,
            probes: vec![
                ProbeSubsetConfig {
                    name: "NM".into(),
                    conditions: vec!["NM#05".into(), "NM#06".into()],
                },
                ProbeSubsetConfig {
                    name: "BG".into(),
                    conditions: vec!["BG#01".into(), "BG#02".into()],
                },
                ProbeSubsetConfig {
                    name: "CL".into(),
                    conditions: vec!["CL#01".into(), "CL#02".into()],
                },
            ],
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config {
            reason: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.structuring_element()?;
        self.target_size()?;
        if !self.pipeline.lambda_seg.is_finite() || self.pipeline.lambda_seg < 0.0 {
            return Err(Error::Config {
                reason: format!("lambda_seg {} must be finite and >= 0", self.pipeline.lambda_seg),
            });
        }
        if self.protocol.gallery.is_empty() {
            return Err(Error::Config {
                reason: "protocol.gallery is empty".into(),
            });
        }
        if self.protocol.probes.is_empty() {
            return Err(Error::Config {
                reason: "protocol needs at least one probe subset".into(),
            });
        }
        let mut names = std::collections::BTreeSet::new();
        for subset in &self.protocol.probes {
            if subset.conditions.is_empty() {
                return Err(Error::Config {
                    reason: format!("probe subset {} has no conditions", subset.name),
                });
            }
            if !names.insert(&subset.name) {
                return Err(Error::Config {
                    reason: format!("duplicate probe subset name {}", subset.name),
                });
            }
        }
        Ok(())
    }

    pub fn structuring_element(&self) -> Result<StructuringElement> {
        StructuringElement::new(self.pipeline.se_size)
    }

    pub fn target_size(&self) -> Result<TargetSize> {
        TargetSize::new(self.pipeline.target_height, self.pipeline.target_width)
    }

    pub fn protocol(&self) -> EvalProtocol {
        EvalProtocol {
            gallery: self.protocol.gallery.clone(),
            probes: self
                .protocol
                .probes
                .iter()
                .map(|p| ProbeSubset {
                    name: p.name.clone(),
                    conditions: p.conditions.clone(),
                })
                .collect(),
            exclude_identical_view: self.protocol.exclude_identical_view,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_canonical_setup() {
        let cfg = PipelineConfig::from_toml("").unwrap();
        assert_eq!(cfg.pipeline.se_size, 3);
        assert_eq!(cfg.pipeline.target_height, 64);
        assert_eq!(cfg.pipeline.target_width, 44);
        assert_eq!(cfg.pipeline.lambda_seg, 10.0);
        assert!(cfg.pipeline.align);
        assert_eq!(cfg.pipeline.embedding, EmbeddingKind::Gei);
        assert_eq!(cfg.pipeline.prob_source, ProbSource::Mask);
        assert_eq!(cfg.pipeline.train_subjects, 0);
        assert_eq!(cfg.pipeline.seed, 0);
        assert!(!cfg.disturb.enabled);
        assert_eq!(cfg.disturb.max_offset, None);
        assert_eq!(
            cfg.protocol.gallery,
            vec!["NM#01", "NM#02", "NM#03", "NM#04"]
        );
        assert!(cfg.protocol.exclude_identical_view);
        let names: Vec<&str> = cfg.protocol.probes.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, vec!["NM", "BG", "CL"]);
        assert_eq!(cfg.protocol.probes[0].conditions, vec!["NM#05", "NM#06"]);
        assert_eq!(cfg.protocol.probes[1].conditions, vec!["BG#01", "BG#02"]);
        assert_eq!(cfg.protocol.probes[2].conditions, vec!["CL#01", "CL#02"]);
    }

    #[test]
    fn partial_sections_keep_unmentioned_defaults() {
        let cfg = PipelineConfig::from_toml(
            r#"
            [pipeline]
            se_size = 5
            seed = 9

            [disturb]
            enabled = true
            max_offset = 6
            "#,
        )
        .unwrap();
        assert_eq!(cfg.pipeline.se_size, 5);
        assert_eq!(cfg.pipeline.seed, 9);
        assert_eq!(cfg.pipeline.target_height, 64);
        assert!(cfg.disturb.enabled);
        assert_eq!(cfg.disturb.max_offset, Some(6));
        assert!(cfg.protocol.exclude_identical_view);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = PipelineConfig::from_toml("[pipeline]\nse_sizes = 3\n").unwrap_err();
        assert!(matches!(err, Error::Config { .. }), "{err}");
    }

    #[test]
    fn bad_values_fail_validation() {
        assert!(PipelineConfig::from_toml("[pipeline]\nse_size = 4\n").is_err());
        assert!(PipelineConfig::from_toml("[pipeline]\nse_size = 1\n").is_err());
        assert!(PipelineConfig::from_toml("[pipeline]\ntarget_height = 1\n").is_err());
        assert!(PipelineConfig::from_toml("[pipeline]\nlambda_seg = -1.0\n").is_err());
        assert!(PipelineConfig::from_toml("[pipeline]\nlambda_seg = nan\n").is_err());
        assert!(PipelineConfig::from_toml("[protocol]\ngallery = []\n").is_err());
        assert!(PipelineConfig::from_toml("[protocol]\nprobes = []\n").is_err());
        let dup = r#"
            [[protocol.probes]]
            name = "NM"
            conditions = ["NM#05"]
            [[protocol.probes]]
            name = "NM"
            conditions = ["NM#06"]
        "#;
        assert!(PipelineConfig::from_toml(dup).is_err());
    }

    #[test]
    fn custom_protocol_and_paths_round_trip() {
        let text = r#"
            [data]
            domain_a = "/tmp/a"
            domain_b = "/tmp/b"

            [pipeline]
            prob_source = "noisy-mask"
            align = false
            train_subjects = 2

            [protocol]
            gallery = ["NM#01"]
            exclude_identical_view = false

            [[protocol.probes]]
            name = "NM"
            conditions = ["NM#02"]
        "#;
        let cfg = PipelineConfig::from_toml(text).unwrap();
        assert_eq!(cfg.data.domain_a.as_deref(), Some(Path::new("/tmp/a")));
        assert_eq!(cfg.pipeline.prob_source, ProbSource::NoisyMask);
        assert!(!cfg.pipeline.align);
        assert_eq!(cfg.pipeline.train_subjects, 2);
        let proto = cfg.protocol();
        assert_eq!(proto.gallery, vec!["NM#01"]);
        assert!(!proto.exclude_identical_view);
        assert_eq!(proto.probes.len(), 1);
        let back: PipelineConfig =
            toml::from_str(&toml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, back);
    }
}
