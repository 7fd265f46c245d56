//! Ordinal occlusion levels, the thresholds that assign them from an
//! occluded fraction, and confusion counts for the evaluation protocol.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Severity of fragmented occlusion: none, slight, moderate, heavy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OcclusionLevel {
    L0,
    L1,
    L2,
    L3,
}

pub const ALL_LEVELS: [OcclusionLevel; 4] = [
    OcclusionLevel::L0,
    OcclusionLevel::L1,
    OcclusionLevel::L2,
    OcclusionLevel::L3,
];

impl OcclusionLevel {
    pub fn index(self) -> usize {
        match self {
            OcclusionLevel::L0 => 0,
            OcclusionLevel::L1 => 1,
            OcclusionLevel::L2 => 2,
            OcclusionLevel::L3 => 3,
        }
    }

    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            0 => Ok(OcclusionLevel::L0),
            1 => Ok(OcclusionLevel::L1),
            2 => Ok(OcclusionLevel::L2),
            3 => Ok(OcclusionLevel::L3),
            other => Err(Error::BadOcclusionLevel(other)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OcclusionLevel::L0 => "L0",
            OcclusionLevel::L1 => "L1",
            OcclusionLevel::L2 => "L2",
            OcclusionLevel::L3 => "L3",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "L0" => Some(OcclusionLevel::L0),
            "L1" => Some(OcclusionLevel::L1),
            "L2" => Some(OcclusionLevel::L2),
            "L3" => Some(OcclusionLevel::L3),
            _ => None,
        }
    }
}

impl std::fmt::Display for OcclusionLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

// On the wire occlusion levels are the integers 0..=3.
impl Serialize for OcclusionLevel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.index() as u8)
    }
}

impl<'de> Deserialize<'de> for OcclusionLevel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let v = u8::deserialize(deserializer)?;
        OcclusionLevel::from_index(v).map_err(serde::de::Error::custom)
    }
}

/// Occluded-fraction cut points between the four levels.
///
/// The defaults (0.05, 0.35, 0.65) keep L0 tolerant of rasterization noise
/// and split the remaining range roughly in thirds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelThresholds {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
}

impl LevelThresholds {
    pub fn new(t1: f64, t2: f64, t3: f64) -> Result<Self> {
        if !(0.0 < t1 && t1 < t2 && t2 < t3 && t3 < 1.0) {
            return Err(Error::BadThresholds(t1, t2, t3));
        }
        Ok(LevelThresholds { t1, t2, t3 })
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.t1, self.t2, self.t3).map(|_| ())
    }
}

impl Default for LevelThresholds {
    fn default() -> Self {
        LevelThresholds {
            t1: 0.05,
            t2: 0.35,
            t3: 0.65,
        }
    }
}

/// Map an occluded fraction `f = 1 - visible_fraction` to a level:
/// L0 for f < t1, L1 for t1 <= f < t2, L2 for t2 <= f < t3, L3 for f >= t3.
pub fn classify_occlusion(occluded_fraction: f64, th: &LevelThresholds) -> OcclusionLevel {
    if occluded_fraction < th.t1 {
        OcclusionLevel::L0
    } else if occluded_fraction < th.t2 {
        OcclusionLevel::L1
    } else if occluded_fraction < th.t3 {
        OcclusionLevel::L2
    } else {
        OcclusionLevel::L3
    }
}

/// TP/FP/FN/TN counts at one (level, threshold) cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    /// tp / (tp + fp), defined as 1.0 when no detections exist so curves
    /// stay total functions.
    pub fn precision(&self) -> f64 {
        if self.tp + self.fp == 0 {
            1.0
        } else {
            self.tp as f64 / (self.tp + self.fp) as f64
        }
    }

    /// tp / (tp + fn), undefined without positives.
    pub fn recall(&self) -> Option<f64> {
        if self.tp + self.fn_ == 0 {
            None
        } else {
            Some(self.tp as f64 / (self.tp + self.fn_) as f64)
        }
    }
}
