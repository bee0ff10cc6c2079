//! Hint ranking and one-at-a-time delivery with escalation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::ClassifierSnapshot;
use crate::discovery::{AssociationRule, Label, ModelDocument};
use crate::interaction::{accumulate, ActionEvent, Bin, BinningModel, Feature};

/// Actions a hint is given time to take effect over.
pub const REACTION_WINDOW: u64 = 40;

/// Label of the explanation entry point shown with every hint.
pub const EXPLANATION_BUTTON: &str = "Why am I delivered this hint?";

const DEFAULT_CATALOG: &str = include_str!("../data/catalog.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increase,
    Decrease,
}

impl Direction {
    /// The bin the hint tries to move the student out of.
    pub fn discouraged_bin(self) -> Bin {
        match self {
            Direction::Increase => Bin::Low,
            Direction::Decrease => Bin::High,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HintTarget {
    pub feature: Feature,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HintItem {
    pub id: String,
    pub behavior_text: String,
    /// Phrase used when the item is listed among ranked hints.
    pub list_label: String,
    pub target: HintTarget,
    pub message: String,
    /// Interface element ids highlighted on a strong delivery.
    pub strong_guidance: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CatalogError {
    #[error("malformed catalog: {0}")]
    Malformed(String),
    #[error("catalog is empty")]
    Empty,
    #[error("duplicate hint id `{0}`")]
    DuplicateId(String),
}

impl CatalogError {
    pub fn code(&self) -> &'static str {
        match self {
            CatalogError::Malformed(_) => "MalformedCatalog",
            CatalogError::Empty => "EmptyCatalog",
            CatalogError::DuplicateId(_) => "DuplicateHintId",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Catalog {
    pub items: Vec<HintItem>,
}

impl Catalog {
    pub fn from_json(text: &str) -> Result<Self, CatalogError> {
        let items: Vec<HintItem> = serde_json::from_str(text).map_err(|e| CatalogError::Malformed(e.to_string()))?;
        Self::new(items)
    }

    pub fn new(items: Vec<HintItem>) -> Result<Self, CatalogError> {
        if items.is_empty() {
            return Err(CatalogError::Empty);
        }
        let mut seen = BTreeSet::new();
        for it in &items {
            if !seen.insert(it.id.as_str()) {
                return Err(CatalogError::DuplicateId(it.id.clone()));
            }
        }
        Ok(Catalog { items })
    }

    pub fn get(&self, id: &str) -> Option<&HintItem> {
        self.items.iter().find(|i| i.id == id)
    }
}

impl Default for Catalog {
    fn default() -> Self {
        Catalog::from_json(DEFAULT_CATALOG).expect("bundled catalog is valid")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedHint {
    pub item: HintItem,
    pub rank: u64,
    pub contributing_rules: Vec<AssociationRule>,
}

/// Ranks every catalog item touched by a satisfied LLG rule.
pub fn score_hints(snapshot: &ClassifierSnapshot, model: &ModelDocument, catalog: &Catalog) -> Vec<RankedHint> {
    let satisfied: Vec<&AssociationRule> = model
        .rules
        .iter()
        .filter(|r| r.consequent == Label::Llg && snapshot.satisfied.llg.iter().any(|s| s.id == r.id))
        .collect();
    let mut ranked: Vec<RankedHint> = catalog
        .items
        .iter()
        .filter_map(|item| {
            let rules: Vec<AssociationRule> =
                satisfied.iter().filter(|r| r.mentions(item.target.feature)).map(|r| (*r).clone()).collect();
            let rank: u64 = rules.iter().map(|r| u64::from(r.weight)).sum();
            (rank > 0).then(|| RankedHint { item: item.clone(), rank, contributing_rules: rules })
        })
        .collect();
    // stable: equal ranks keep catalog order
    ranked.sort_by_key(|r| std::cmp::Reverse(r.rank));
    ranked
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    Text,
    Strong,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveHint {
    pub item: String,
    pub delivered_at: u64,
    pub stage: Stage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub delivered_at: u64,
    pub stage: Stage,
    pub followed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemHistory {
    pub deliveries: u32,
    pub outcomes: Vec<Outcome>,
    /// An unfollowed text delivery is waiting to be repeated with guidance.
    pub escalation_pending: bool,
    pub exhausted: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveryState {
    pub active: Option<ActiveHint>,
    pub history: BTreeMap<String, ItemHistory>,
}

impl DeliveryState {
    pub fn window(&self) -> u64 {
        REACTION_WINDOW
    }

    /// True while an active hint's window is still running at `seq`.
    pub fn in_window(&self, seq: u64) -> bool {
        self.active.as_ref().is_some_and(|a| seq.saturating_sub(a.delivered_at) < REACTION_WINDOW)
    }

    pub fn record_delivery(&mut self, item: &str, stage: Stage, seq: u64) {
        let h = self.history.entry(item.to_string()).or_default();
        h.deliveries += 1;
        if stage == Stage::Strong {
            h.escalation_pending = false;
            h.exhausted = true;
        }
        self.active = Some(ActiveHint { item: item.to_string(), delivered_at: seq, stage });
    }

    /// Ends the active window with its follow-up verdict.
    pub fn close_window(&mut self, followed: bool) -> Option<Outcome> {
        let active = self.active.take()?;
        let h = self.history.entry(active.item).or_default();
        let outcome = Outcome { delivered_at: active.delivered_at, stage: active.stage, followed };
        h.outcomes.push(outcome);
        if !followed && active.stage == Stage::Text {
            h.escalation_pending = true;
        }
        Some(outcome)
    }

    fn stage_for(&self, item: &str) -> Option<Stage> {
        match self.history.get(item) {
            Some(h) if h.exhausted => None,
            Some(h) if h.escalation_pending => Some(Stage::Strong),
            _ => Some(Stage::Text),
        }
    }
}

/// Picks what to deliver at `seq`, if anything: the top-ranked item that
/// is not exhausted, at the stage its history calls for.
pub fn select_hint(ranked: &[RankedHint], delivery: &DeliveryState, seq: u64) -> Option<(HintItem, Stage)> {
    if delivery.in_window(seq) {
        return None;
    }
    ranked.iter().find_map(|r| delivery.stage_for(&r.item.id).map(|stage| (r.item.clone(), stage)))
}

/// Whether the window's own behavior left the discouraged bin.
pub fn check_followed(item: &HintItem, window: &[ActionEvent], binning: &BinningModel) -> bool {
    let v = accumulate(window).vector();
    binning.bin(item.target.feature, v.get(item.target.feature)) != item.target.direction.discouraged_bin()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HintPayload {
    /// 1-based delivery number within the session.
    pub hint: u32,
    pub item: String,
    pub stage: Stage,
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub highlight: Vec<String>,
    pub explanation_label: String,
}

pub fn render_hint(item: &HintItem, stage: Stage, number: u32) -> HintPayload {
    HintPayload {
        hint: number,
        item: item.id.clone(),
        stage,
        text: item.message.clone(),
        highlight: match stage {
            Stage::Text => Vec::new(),
            Stage::Strong => item.strong_guidance.clone(),
        },
        explanation_label: EXPLANATION_BUTTON.to_string(),
    }
}

/// Everything the explanation pages need about one delivery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliveredHint {
    pub payload: HintPayload,
    pub seq: u64,
    pub chosen: RankedHint,
    /// Candidates at delivery time; exhausted items are left out.
    pub ranked: Vec<RankedHint>,
    pub snapshot: ClassifierSnapshot,
}

/// Per-session driver: call [`HintEngine::observe`] after every classified
/// action.
#[derive(Debug, Clone, PartialEq)]
pub struct HintEngine {
    catalog: Catalog,
    delivery: DeliveryState,
    delivered: Vec<DeliveredHint>,
}

impl HintEngine {
    pub fn new(catalog: Catalog) -> Self {
        HintEngine { catalog, delivery: DeliveryState::default(), delivered: Vec::new() }
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn delivery(&self) -> &DeliveryState {
        &self.delivery
    }

    pub fn delivered(&self) -> &[DeliveredHint] {
        &self.delivered
    }

    pub fn latest(&self) -> Option<&DeliveredHint> {
        self.delivered.last()
    }

    /// `events` is the full stream so far, ending with the action that
    /// produced `snapshot`.
    pub fn observe(
        &mut self,
        snapshot: &ClassifierSnapshot,
        model: &ModelDocument,
        events: &[ActionEvent],
    ) -> Option<&DeliveredHint> {
        let seq = events.len() as u64;
        if let Some(active) = self.delivery.active.clone() {
            if seq - active.delivered_at >= REACTION_WINDOW {
                let start = active.delivered_at as usize;
                let window = &events[start..start + REACTION_WINDOW as usize];
                let followed =
                    self.catalog.get(&active.item).is_none_or(|item| check_followed(item, window, &model.binning));
                self.delivery.close_window(followed);
            }
        }
        if snapshot.label != Label::Llg {
            return None;
        }
        let mut ranked = score_hints(snapshot, model, &self.catalog);
        let (item, stage) = select_hint(&ranked, &self.delivery, seq)?;
        ranked.retain(|r| self.delivery.stage_for(&r.item.id).is_some());
        self.delivery.record_delivery(&item.id, stage, seq);
        let chosen = ranked.iter().find(|r| r.item.id == item.id).cloned()?;
        let payload = render_hint(&item, stage, self.delivered.len() as u32 + 1);
        self.delivered.push(DeliveredHint { payload, seq, chosen, ranked, snapshot: snapshot.clone() });
        self.delivered.last()
    }
}
