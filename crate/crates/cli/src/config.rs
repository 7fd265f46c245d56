//! The augment subcommand's JSON config: input/output paths, the asset
//! source, and the augmentation parameters. Unknown keys are rejected so
//! typos fail loudly; every seed is explicit.

use std::path::PathBuf;

use serde::Deserialize;

use foliage_core::augment::AugmentConfig;
use foliage_core::occlusion::LevelThresholds;
use foliage_core::treegen::TreeParams;

/// Where the trunk and leaf sprites come from.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum AssetSource {
    /// Hermetic generated bank, e.g. `{"synthetic": 7}`.
    Synthetic(u64),
    /// A directory with assets.json plus sprites, e.g. `{"dir": "bank/"}`.
    Dir(PathBuf),
}

fn default_trees_per_image() -> (u32, u32) {
    (1, 4)
}
fn default_rotation_range() -> (f64, f64) {
    (-20.0, 20.0)
}
fn default_scale_factor_range() -> (f64, f64) {
    (0.9, 1.2)
}
fn default_person_category() -> String {
    "person".to_string()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentFileConfig {
    pub dataset: PathBuf,
    pub images_root: PathBuf,
    pub output: PathBuf,
    pub assets: AssetSource,
    pub master_seed: u64,
    #[serde(default = "default_trees_per_image")]
    pub trees_per_image: (u32, u32),
    #[serde(default = "default_rotation_range")]
    pub rotation_range_deg: (f64, f64),
    #[serde(default = "default_scale_factor_range")]
    pub scale_factor_range: (f64, f64),
    #[serde(default = "default_person_category")]
    pub person_category: String,
    #[serde(default)]
    pub thresholds: LevelThresholds,
    #[serde(default)]
    pub tree_params: TreeParams,
}

impl AugmentFileConfig {
    pub fn augment_config(&self) -> AugmentConfig {
        AugmentConfig {
            trees_per_image: self.trees_per_image,
            rotation_range_deg: self.rotation_range_deg,
            scale_factor_range: self.scale_factor_range,
            person_category: self.person_category.clone(),
            master_seed: self.master_seed,
            thresholds: self.thresholds,
            tree_params: self.tree_params.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg: AugmentFileConfig = serde_json::from_str(
            r#"{
                "dataset": "d.json",
                "images_root": "imgs",
                "output": "out",
                "assets": {"synthetic": 3},
                "master_seed": 42
            }"#,
        )
        .unwrap();
        assert_eq!(cfg.trees_per_image, (1, 4));
        assert_eq!(cfg.person_category, "person");
        assert!(matches!(cfg.assets, AssetSource::Synthetic(3)));
        assert!(cfg.augment_config().validate().is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let err = serde_json::from_str::<AugmentFileConfig>(
            r#"{
                "dataset": "d.json",
                "images_root": "imgs",
                "output": "out",
                "assets": {"synthetic": 3},
                "master_seed": 42,
                "tres_per_image": [1, 4]
            }"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("tres_per_image"));
    }

    #[test]
    fn master_seed_is_mandatory() {
        let err = serde_json::from_str::<AugmentFileConfig>(
            r#"{
                "dataset": "d.json",
                "images_root": "imgs",
                "output": "out",
                "assets": {"synthetic": 3}
            }"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("master_seed"));
    }

    #[test]
    fn asset_dir_variant_parses() {
        let cfg: AugmentFileConfig = serde_json::from_str(
            r#"{
                "dataset": "d.json",
                "images_root": "imgs",
                "output": "out",
                "assets": {"dir": "bank"},
                "master_seed": 1
            }"#,
        )
        .unwrap();
        assert!(matches!(cfg.assets, AssetSource::Dir(_)));
    }
}
