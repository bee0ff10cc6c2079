//! Offline behavior discovery: cluster users by interaction behavior, label
//! the clusters by learning gain, mine class association rules per cluster
//! and export everything the online classifier needs as one document.

mod cluster;
mod model;
mod rules;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interaction::{FeatureVector, InteractionError};

pub use cluster::{cluster_users, ClusterModel, Separation, Standardization};
pub use model::{export_model, ClusterSummary, ModelDocument, ModelError, Provenance};
pub use rules::{feature_histogram, mine_rules, AssociationRule, Condition, MiningParams, RuleSet};

/// Higher or lower learning gain group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "HLG")]
    Hlg,
    #[serde(rename = "LLG")]
    Llg,
}

impl Label {
    pub const BOTH: [Label; 2] = [Label::Hlg, Label::Llg];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Hlg => "HLG",
            Label::Llg => "LLG",
        }
    }

    /// Group name as shown to students.
    pub fn group_name(self) -> &'static str {
        match self {
            Label::Hlg => "higher learning",
            Label::Llg => "lower learning",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One value per group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PerLabel<T> {
    #[serde(rename = "HLG")]
    pub hlg: T,
    #[serde(rename = "LLG")]
    pub llg: T,
}

impl<T> PerLabel<T> {
    pub fn new(hlg: T, llg: T) -> Self {
        PerLabel { hlg, llg }
    }

    pub fn get(&self, label: Label) -> &T {
        match label {
            Label::Hlg => &self.hlg,
            Label::Llg => &self.llg,
        }
    }

    pub fn get_mut(&mut self, label: Label) -> &mut T {
        match label {
            Label::Hlg => &mut self.hlg,
            Label::Llg => &mut self.llg,
        }
    }
}

/// A training user: behavior summary plus percentage learning gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledUser {
    pub user: String,
    pub features: FeatureVector,
    pub plg: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiscoveryError {
    #[error("corpus has {got} users; at least {needed} are required")]
    CorpusTooSmall { got: usize, needed: usize },
    #[error("all feature vectors are identical")]
    DegenerateCorpus,
    #[error("a cluster stayed empty after {0} seedings")]
    EmptyCluster(usize),
    #[error("only k = 2 is supported, got {0}")]
    UnsupportedK(usize),
    #[error("learning gain of user `{0}` is not finite")]
    NonFinitePlg(String),
    #[error("no rules reach the thresholds for cluster {0}; try lowering min_support or min_confidence")]
    NoRulesForCluster(Label),
    #[error(transparent)]
    Binning(#[from] InteractionError),
}

impl DiscoveryError {
    pub fn code(&self) -> &'static str {
        match self {
            DiscoveryError::CorpusTooSmall { .. } => "CorpusTooSmall",
            DiscoveryError::DegenerateCorpus => "DegenerateCorpus",
            DiscoveryError::EmptyCluster(_) => "EmptyCluster",
            DiscoveryError::UnsupportedK(_) => "UnsupportedK",
            DiscoveryError::NonFinitePlg(_) => "NonFinitePlg",
            DiscoveryError::NoRulesForCluster(_) => "NoRulesForCluster",
            DiscoveryError::Binning(e) => e.code(),
        }
    }
}
