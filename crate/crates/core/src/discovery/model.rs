use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ClusterModel, Label, PerLabel, RuleSet, Standardization};
use crate::discovery::AssociationRule;
use crate::interaction::BinningModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub index: usize,
    pub label: Label,
    pub size: usize,
    pub mean_plg: f64,
    pub centroid: Vec<f64>,
}

/// Where a model came from; surfaced on the WhyRules page.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub training_users: usize,
    pub seed: Option<u64>,
    pub separated: bool,
    pub p_value: Option<f64>,
    pub description: String,
}

/// Everything the online classifier needs, as one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub standardization: Standardization,
    pub binning: BinningModel,
    pub clusters: Vec<ClusterSummary>,
    pub rules: Vec<AssociationRule>,
    pub totals: PerLabel<u64>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("malformed model document: {0}")]
    Malformed(String),
    #[error("model document has no binning")]
    MissingBinning,
    #[error("binning must give ordered finite cuts for all 13 features")]
    InvalidBinning,
    #[error("stored {label} total {stored} differs from recomputed {computed}")]
    TotalsMismatch { label: Label, stored: u64, computed: u64 },
    #[error("{0} rules have zero total weight")]
    ZeroTotalWeight(Label),
    #[error("rule `{0}` has a weight outside 1..=100")]
    InvalidWeight(String),
}

impl ModelError {
    pub fn code(&self) -> &'static str {
        match self {
            ModelError::Malformed(_) => "MalformedModel",
            ModelError::MissingBinning => "MissingBinning",
            ModelError::InvalidBinning => "InvalidBinning",
            ModelError::TotalsMismatch { .. } => "TotalsMismatch",
            ModelError::ZeroTotalWeight(_) => "ZeroTotalWeight",
            ModelError::InvalidWeight(_) => "InvalidWeight",
        }
    }
}

impl ModelDocument {
    /// Assembles a document from a binning and rules, e.g. for hand-built
    /// fixtures. Totals are computed here.
    pub fn from_rules(binning: BinningModel, rules: Vec<AssociationRule>, provenance: Provenance) -> Self {
        let set = RuleSet::new(rules);
        let n = binning.cuts.len();
        ModelDocument {
            standardization: Standardization { mean: vec![0.0; n], deviation: vec![1.0; n] },
            binning,
            clusters: Vec::new(),
            rules: set.rules,
            totals: set.totals,
            provenance,
        }
    }

    pub fn rule_set(&self) -> RuleSet {
        RuleSet { rules: self.rules.clone(), totals: self.totals }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !self.binning.is_valid() {
            return Err(ModelError::InvalidBinning);
        }
        if let Some(r) = self.rules.iter().find(|r| !(1..=100).contains(&r.weight)) {
            return Err(ModelError::InvalidWeight(r.id.clone()));
        }
        let computed = RuleSet::totals_of(&self.rules);
        for label in Label::BOTH {
            let (stored, computed) = (*self.totals.get(label), *computed.get(label));
            if stored != computed {
                return Err(ModelError::TotalsMismatch { label, stored, computed });
            }
            if computed == 0 {
                return Err(ModelError::ZeroTotalWeight(label));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ModelError::Malformed(e.to_string()))?;
        if value.get("binning").is_none() {
            return Err(ModelError::MissingBinning);
        }
        let doc: ModelDocument = serde_json::from_value(value).map_err(|e| ModelError::Malformed(e.to_string()))?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model documents always serialize")
    }
}

/// Bundles a clustering and its rules into a self-contained document.
pub fn export_model(model: &ClusterModel, rules: &RuleSet, seed: Option<u64>) -> ModelDocument {
    ModelDocument {
        standardization: model.standardization.clone(),
        binning: model.binning.clone(),
        clusters: (0..model.k)
            .map(|i| ClusterSummary {
                index: i,
                label: model.labels[i],
                size: model.sizes[i],
                mean_plg: model.mean_plg[i],
                centroid: model.centroids[i].clone(),
            })
            .collect(),
        rules: rules.rules.clone(),
        totals: rules.totals,
        provenance: Provenance {
            training_users: model.sizes.iter().sum(),
            seed,
            separated: model.separated,
            p_value: Some(model.separation.p_value),
            description: "behavior logs of previous students using this system".into(),
        },
    }
}
