//! Pipeline configuration file: a JSON document in which every key is
//! optional and defaults to the study's published values, so a run with
//! no config file reproduces the reference setup.

use serde::{Deserialize, Serialize};

use dbi_core::dbi::TimeWindows;
use dbi_core::extract::ExtractConfig;
use dbi_core::forest::{ForestConfig, SuiteConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Inter-sample gap that opens a new trip, seconds.
    pub gap_s: f64,
    /// Harsh-event detection threshold, m/s².
    pub harsh_threshold_ms2: f64,
    /// Urban/suburb distance boundary, km.
    pub urban_limit_km: f64,
    /// Cohort-local offset from UTC in hours; null means "use the
    /// cohort's own offset from its manifest".
    pub utc_offset_hours: Option<i32>,
    pub windows: TimeWindows,
    pub test_fraction: f64,
    /// Split whole participants rather than rows.
    pub grouped_split: bool,
    pub forest: ForestConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            gap_s: dbi_core::trip::DEFAULT_TRIP_GAP_S,
            harsh_threshold_ms2: dbi_core::events::HARSH_THRESHOLD_MS2,
            urban_limit_km: dbi_core::dbi::URBAN_LIMIT_KM,
            utc_offset_hours: None,
            windows: TimeWindows::default(),
            test_fraction: 0.33,
            grouped_split: false,
            forest: ForestConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn extract_config(&self) -> ExtractConfig {
        ExtractConfig {
            gap_s: self.gap_s,
            harsh_threshold_ms2: self.harsh_threshold_ms2,
            urban_limit_km: self.urban_limit_km,
            utc_offset_hours: self.utc_offset_hours,
            windows: self.windows.clone(),
        }
    }

    pub fn suite_config(&self, only_group: Option<u8>) -> SuiteConfig {
        SuiteConfig {
            forest: self.forest.clone(),
            test_fraction: self.test_fraction,
            grouped_split: self.grouped_split,
            only_group,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_yields_defaults() {
        let cfg: PipelineConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        assert_eq!(cfg.gap_s, 300.0);
        assert_eq!(cfg.harsh_threshold_ms2, 3.943);
        assert_eq!(cfg.urban_limit_km, 32.0);
        assert_eq!(cfg.forest.n_trees, 100);
    }

    #[test]
    fn partial_overrides_apply() {
        let cfg: PipelineConfig =
            serde_json::from_str(r#"{"gap_s": 120.0, "forest": {"n_trees": 10, "seed": 7}}"#).unwrap();
        assert_eq!(cfg.gap_s, 120.0);
        assert_eq!(cfg.forest.n_trees, 10);
        assert_eq!(cfg.forest.seed, 7);
        assert_eq!(cfg.forest.min_samples_leaf, 1, "unspecified forest keys keep defaults");
    }
}
