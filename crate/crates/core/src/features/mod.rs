//! Play-level feature vectors: pre-motion geometry and context, naive
//! post-motion displacement, and (optionally) the four decoded-HMM features.

mod basic;
mod hmm;
mod hull;
mod io;

use serde::{Deserialize, Serialize};

pub use basic::{feature_row, post_motion_features, pre_motion_features};
pub use hmm::{
    argmax_sequence, attach_hmm_features, mean_entropy, play_features, quantile_sorted, soft_entropy, switch_stats,
    HmmFeatures, HmmSummary, SUMMARY_COLUMNS, SUMMARY_STATS,
};
pub use hull::{convex_hull, convex_hull_stats, HullStats};
pub use io::{read_feature_csv, write_feature_csv};

use crate::tracking::PlayKey;

pub const CONTEXT_NAMES: [&str; 7] = [
    "quarter",
    "down",
    "yardsToGo",
    "absoluteYardlineNumber",
    "preSnapHomeScore",
    "preSnapVisitorScore",
    "secondsLeftInHalf",
];

pub const POST_MOTION_NAMES: [&str; 6] = ["max_x_o", "max_x_d", "max_y_o", "max_y_d", "tot_dist_o", "tot_dist_d"];

pub const HMM_NAMES: [&str; 4] = ["per_play_RE", "sum_switches", "n_player_changes", "avg_entropy"];

/// The 33 pre-motion feature names in column order.
pub fn pre_motion_names() -> Vec<String> {
    let mut names: Vec<String> = ["chull_area_o", "chull_x_o", "chull_y_o", "chull_area_d", "chull_x_d", "chull_y_d"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for axis in ["x", "y"] {
        for side in ["off", "def"] {
            for i in 1..=5 {
                names.push(format!("{axis}_rel_player_{side}{i}"));
            }
        }
    }
    names.extend(CONTEXT_NAMES.iter().map(|s| s.to_string()));
    names
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSet {
    /// Pre-motion features only.
    Pre,
    /// Pre-motion plus naive post-motion.
    Naive,
    /// Everything, including the HMM-derived features.
    Hmm,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 3] = [FeatureSet::Pre, FeatureSet::Naive, FeatureSet::Hmm];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pre => "pre",
            Self::Naive => "naive",
            Self::Hmm => "hmm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "pre" => Some(Self::Pre),
            "naive" => Some(Self::Naive),
            "hmm" => Some(Self::Hmm),
            _ => None,
        }
    }

    pub fn names(self) -> Vec<String> {
        let mut names = pre_motion_names();
        if self != Self::Pre {
            names.extend(POST_MOTION_NAMES.iter().map(|s| s.to_string()));
        }
        if self == Self::Hmm {
            names.extend(HMM_NAMES.iter().map(|s| s.to_string()));
        }
        names
    }
}

/// One play's features and coverage label (1 = man, 0 = zone).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub key: PlayKey,
    pub offense: String,
    pub defense: String,
    pub label: Option<u8>,
    /// Aligned with [`pre_motion_names`].
    pub pre_motion: Vec<f64>,
    /// Aligned with [`POST_MOTION_NAMES`].
    pub post_motion_naive: Vec<f64>,
    /// Aligned with [`HMM_NAMES`] once attached.
    pub hmm: Option<Vec<f64>>,
}

impl FeatureRow {
    /// Values for `set`, or `None` when the HMM features are requested but
    /// have not been attached.
    pub fn values(&self, set: FeatureSet) -> Option<Vec<f64>> {
        let mut v = self.pre_motion.clone();
        if set != FeatureSet::Pre {
            v.extend_from_slice(&self.post_motion_naive);
        }
        if set == FeatureSet::Hmm {
            v.extend_from_slice(self.hmm.as_ref()?);
        }
        Some(v)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        if let Some(i) = pre_motion_names().iter().position(|n| n == name) {
            return Some(self.pre_motion[i]);
        }
        if let Some(i) = POST_MOTION_NAMES.iter().position(|n| *n == name) {
            return Some(self.post_motion_naive[i]);
        }
        let i = HMM_NAMES.iter().position(|n| *n == name)?;
        self.hmm.as_ref().map(|h| h[i])
    }
}
