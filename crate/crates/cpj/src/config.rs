use serde::{Deserialize, Serialize};

use crate::error::{CpjError, Result};

/// Channel counts of the five convolution blocks at width multiplier 1.
pub const BASE_CHANNELS: [usize; 5] = [64, 128, 256, 512, 512];
/// Convolutions per block.
pub const BLOCK_DEPTHS: [usize; 5] = [2, 2, 3, 3, 3];
/// Two input channels: the estimated map and the ground truth.
pub const INPUT_CHANNELS: usize = 2;
/// Total downsampling of the five pooling stages.
pub const DOWNSAMPLE: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    #[default]
    GlorotUniform,
    HeUniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CpjConfig {
    pub input_res: usize,
    pub width_multiplier: f64,
    pub fc_dims: [usize; 3],
    pub seed: u64,
    pub init: InitScheme,
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_iterations: usize,
    pub lr_drop_factor: f64,
    /// Iterations averaged into one smoothed-loss reading.
    pub plateau_window: usize,
    /// Relative improvement a window must show over the best earlier one.
    pub plateau_min_improvement: f64,
    pub max_lr_drops: usize,
    /// Anchor triplets placed in every batch. `None` draws anchors and
    /// regular triplets from one shuffled pool.
    pub anchors_per_batch: Option<usize>,
}

impl Default for CpjConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl CpjConfig {
    /// Small enough to train on one core in minutes.
    pub fn desk() -> Self {
        CpjConfig {
            input_res: 64,
            width_multiplier: 0.125,
            fc_dims: [256, 256, 1],
            seed: 0,
            init: InitScheme::GlorotUniform,
            learning_rate: 0.001,
            momentum: 0.9,
            weight_decay: 0.0005,
            batch_size: 32,
            max_iterations: 10_000,
            lr_drop_factor: 0.1,
            plateau_window: 500,
            plateau_min_improvement: 0.01,
            max_lr_drops: 2,
            anchors_per_batch: None,
        }
    }

    pub fn full() -> Self {
        CpjConfig {
            input_res: 128,
            width_multiplier: 1.0,
            fc_dims: [4096, 4096, 1],
            ..Self::desk()
        }
    }

    /// 32x32 input, width 1/16.
    pub fn tiny() -> Self {
        CpjConfig {
            input_res: 32,
            width_multiplier: 0.0625,
            fc_dims: [32, 32, 1],
            ..Self::desk()
        }
    }

    pub fn channels(&self) -> [usize; 5] {
        BASE_CHANNELS.map(|c| ((c as f64 * self.width_multiplier).round() as usize).max(1))
    }

    /// Side length of the last feature map.
    pub fn final_res(&self) -> usize {
        self.input_res / DOWNSAMPLE
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CpjError::InvalidConfig(msg));
        if self.input_res == 0 || self.input_res % DOWNSAMPLE != 0 {
            return bad(format!("input_res {} is not a positive multiple of {DOWNSAMPLE}", self.input_res));
        }
        if !(self.width_multiplier > 0.0 && self.width_multiplier <= 1.0) {
            return bad(format!("width_multiplier {} outside (0, 1]", self.width_multiplier));
        }
        if self.fc_dims[2] != 1 {
            return bad(format!("last fully connected layer must have 1 unit, got {}", self.fc_dims[2]));
        }
        if self.fc_dims.contains(&0) {
            return bad("fully connected layers need at least one unit".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("momentum", self.momentum),
            ("weight_decay", self.weight_decay),
            ("lr_drop_factor", self.lr_drop_factor),
            ("plateau_min_improvement", self.plateau_min_improvement),
        ] {
            if !v.is_finite() || v < 0.0 {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if self.momentum >= 1.0 {
            return bad(format!("momentum {} must be below 1", self.momentum));
        }
        if self.anchors_per_batch.is_some_and(|k| k >= self.batch_size) {
            return bad("anchors_per_batch must leave room for regular triplets".into());
        }
        if self.plateau_window == 0 {
            return bad("plateau_window must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for c in [CpjConfig::desk(), CpjConfig::full(), CpjConfig::tiny()] {
            c.validate().unwrap();
        }
        assert_eq!(CpjConfig::desk().channels(), [8, 16, 32, 64, 64]);
        assert_eq!(CpjConfig::tiny().channels(), [4, 8, 16, 32, 32]);
    }

    #[test]
    fn rejects_bad_resolution_and_head() {
        let c = CpjConfig {
            input_res: 48,
            ..CpjConfig::desk()
        };
        assert!(matches!(c.validate(), Err(CpjError::InvalidConfig(_))));
        let c = CpjConfig {
            fc_dims: [8, 8, 2],
            ..CpjConfig::desk()
        };
        assert!(c.validate().is_err());
        let c = CpjConfig {
            width_multiplier: 0.0,
            ..CpjConfig::desk()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn json_fills_missing_fields() {
        let c: CpjConfig = serde_json::from_str(r#"{"input_res": 32, "seed": 4}"#).unwrap();
        assert_eq!(c.input_res, 32);
        assert_eq!(c.seed, 4);
        assert_eq!(c.fc_dims, [256, 256, 1]);
    }
}
