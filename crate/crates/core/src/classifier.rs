//! Online associative classification of a growing action stream.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discovery::{AssociationRule, Label, ModelDocument, PerLabel};
use crate::interaction::{
    accumulate, discretize, ActionEvent, ActionKind, DiscreteVector, EventLog, FeatureAccumulator, FeatureVector,
    InteractionError,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifierError {
    #[error("total rule weight is zero")]
    ZeroTotalWeight,
    #[error("satisfied weight {satisfied} exceeds total {total}")]
    WeightOutOfRange { satisfied: u64, total: u64 },
    #[error("held-out corpus is empty")]
    EmptyCorpus,
    #[error(transparent)]
    Interaction(#[from] InteractionError),
}

impl ClassifierError {
    pub fn code(&self) -> &'static str {
        match self {
            ClassifierError::ZeroTotalWeight => "ZeroTotalWeight",
            ClassifierError::WeightOutOfRange { .. } => "WeightOutOfRange",
            ClassifierError::EmptyCorpus => "EmptyCorpus",
            ClassifierError::Interaction(e) => e.code(),
        }
    }
}

/// Fraction of a group's rule weight that is satisfied.
pub fn membership_score(satisfied_weight: u64, total_weight: u64) -> Result<f64, ClassifierError> {
    if total_weight == 0 {
        return Err(ClassifierError::ZeroTotalWeight);
    }
    if satisfied_weight > total_weight {
        return Err(ClassifierError::WeightOutOfRange { satisfied: satisfied_weight, total: total_weight });
    }
    Ok(satisfied_weight as f64 / total_weight as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SatisfiedRule {
    pub id: String,
    pub weight: u32,
}

/// An action type and how often it has been performed so far.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionCount {
    pub action: ActionKind,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSnapshot {
    /// Number of events the snapshot covers.
    pub events: u64,
    pub scores: PerLabel<f64>,
    pub label: Label,
    pub satisfied: PerLabel<Vec<SatisfiedRule>>,
    pub satisfied_weight: PerLabel<u64>,
    pub totals: PerLabel<u64>,
    pub triggering_action: Option<ActionCount>,
    pub counts: [u64; 6],
    pub features: FeatureVector,
    pub discrete: DiscreteVector,
}

impl ClassifierSnapshot {
    pub fn is_satisfied(&self, rule_id: &str) -> bool {
        Label::BOTH.iter().any(|&l| self.satisfied.get(l).iter().any(|r| r.id == rule_id))
    }

    pub fn count(&self, action: ActionKind) -> u64 {
        self.counts[action.index()]
    }
}

/// LLG only if its score is strictly greater; compared by cross-multiplying
/// the integer sums.
fn decide(sat: PerLabel<u64>, totals: PerLabel<u64>) -> Label {
    let hlg = u128::from(sat.hlg) * u128::from(totals.llg);
    let llg = u128::from(sat.llg) * u128::from(totals.hlg);
    if llg > hlg {
        Label::Llg
    } else {
        Label::Hlg
    }
}

/// The feature behind the heaviest satisfied single-condition rule of
/// `label`, else the most recent action.
fn triggering_action(
    rules: &[AssociationRule],
    satisfied: &[SatisfiedRule],
    label: Label,
    counts: &[u64; 6],
    last: Option<ActionKind>,
) -> Option<ActionCount> {
    let mut best: Option<(u32, ActionKind)> = None;
    for s in satisfied {
        let Some(rule) = rules.iter().find(|r| r.id == s.id && r.consequent == label) else {
            continue;
        };
        if let [c] = rule.conditions.as_slice() {
            if let Some(a) = c.feature.action() {
                if best.is_none_or(|(w, _)| rule.weight > w) {
                    best = Some((rule.weight, a));
                }
            }
        }
    }
    best.map(|(_, a)| a).or(last).map(|action| ActionCount { action, count: counts[action.index()] })
}

/// Scores an accumulated stream against every rule of the model.
pub fn evaluate(model: &ModelDocument, acc: &FeatureAccumulator) -> ClassifierSnapshot {
    let features = acc.vector();
    let discrete = discretize(&features, &model.binning);
    let mut satisfied: PerLabel<Vec<SatisfiedRule>> = PerLabel::default();
    let mut sat_w = PerLabel::new(0u64, 0u64);
    for r in &model.rules {
        if r.satisfied_by(&discrete) {
            satisfied.get_mut(r.consequent).push(SatisfiedRule { id: r.id.clone(), weight: r.weight });
            *sat_w.get_mut(r.consequent) += u64::from(r.weight);
        }
    }
    let totals = model.totals;
    let score = |l: Label| membership_score(*sat_w.get(l), *totals.get(l)).unwrap_or(0.0);
    let label = decide(sat_w, totals);
    let counts = acc.counts();
    ClassifierSnapshot {
        events: features.total_actions,
        scores: PerLabel::new(score(Label::Hlg), score(Label::Llg)),
        label,
        triggering_action: triggering_action(&model.rules, satisfied.get(label), label, &counts, acc.last_action()),
        satisfied,
        satisfied_weight: sat_w,
        totals,
        counts,
        features,
        discrete,
    }
}

/// One-shot classification of a whole stream.
pub fn classify_events(model: &ModelDocument, events: &[ActionEvent]) -> ClassifierSnapshot {
    evaluate(model, &accumulate(events))
}

/// Per-session classifier that re-scores after every event.
#[derive(Debug, Clone)]
pub struct ClassifierState {
    model: Arc<ModelDocument>,
    log: EventLog,
    acc: FeatureAccumulator,
    current: ClassifierSnapshot,
}

impl ClassifierState {
    pub fn new(model: Arc<ModelDocument>, session: impl Into<String>) -> Self {
        let acc = FeatureAccumulator::default();
        let current = evaluate(&model, &acc);
        ClassifierState { model, log: EventLog::new(session), acc, current }
    }

    pub fn model(&self) -> &ModelDocument {
        &self.model
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn current(&self) -> &ClassifierSnapshot {
        &self.current
    }

    pub fn update(&mut self, event: ActionEvent) -> Result<&ClassifierSnapshot, ClassifierError> {
        let (action, t) = (event.action, event.timestamp_ms);
        self.log.record_event(event)?;
        self.acc.push(action, t);
        self.current = evaluate(&self.model, &self.acc);
        Ok(&self.current)
    }
}

/// A held-out user's stream with its ground-truth group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledStream {
    pub user: String,
    pub label: Label,
    pub events: Vec<ActionEvent>,
}

/// Fraction of users labeled correctly from the first
/// `floor(prefix_fraction * len)` events of their stream.
pub fn evaluate_accuracy(
    model: &ModelDocument,
    held_out: &[LabeledStream],
    prefix_fraction: f64,
) -> Result<f64, ClassifierError> {
    if held_out.is_empty() {
        return Err(ClassifierError::EmptyCorpus);
    }
    let p = prefix_fraction.clamp(0.0, 1.0);
    let hits = held_out
        .iter()
        .filter(|u| {
            let n = (p * u.events.len() as f64).floor() as usize;
            classify_events(model, &u.events[..n]).label == u.label
        })
        .count();
    Ok(hits as f64 / held_out.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discovery::{Condition, Provenance};
    use crate::interaction::{Bin, BinningModel, Cuts, Feature, FEATURE_COUNT};
    use proptest::prelude::*;

    fn binning() -> BinningModel {
        let mut cuts = vec![Cuts { low: 0.1, high: 0.3 }; FEATURE_COUNT];
        for c in &mut cuts[6..12] {
            *c = Cuts { low: 1000.0, high: 4000.0 };
        }
        cuts[ActionKind::FineStep.index()] = Cuts { low: 0.5, high: 0.7 };
        cuts[12] = Cuts { low: 10.0, high: 30.0 };
        BinningModel { cuts }
    }

    fn rule(id: &str, label: Label, weight: u32, conds: &[(Feature, Bin)]) -> AssociationRule {
        AssociationRule {
            id: id.into(),
            conditions: conds.iter().map(|&(f, b)| Condition::new(f, b)).collect(),
            consequent: label,
            confidence: 0.9,
            support: 0.5,
            weight,
        }
    }

    fn model() -> ModelDocument {
        let reset = Feature::Freq(ActionKind::Reset);
        let auto = Feature::Freq(ActionKind::AutoAC);
        let fine = Feature::Freq(ActionKind::FineStep);
        ModelDocument::from_rules(
            binning(),
            vec![
                rule("HLG-1", Label::Hlg, 60, &[(fine, Bin::High)]),
                rule("HLG-2", Label::Hlg, 40, &[(reset, Bin::Low), (auto, Bin::Low)]),
                rule("LLG-1", Label::Llg, 50, &[(reset, Bin::High)]),
                rule("LLG-2", Label::Llg, 30, &[(auto, Bin::High)]),
                rule("LLG-3", Label::Llg, 20, &[(reset, Bin::High), (auto, Bin::High)]),
            ],
            Provenance { training_users: 0, seed: None, separated: true, p_value: None, description: String::new() },
        )
    }

    fn stream(actions: &[ActionKind]) -> Vec<ActionEvent> {
        actions.iter().enumerate().map(|(i, &a)| ActionEvent::new("s", i as u64 + 1, i as u64 * 2000, a)).collect()
    }

    #[test]
    fn membership_examples() {
        assert!((membership_score(432, 1383).unwrap() - 0.3124).abs() < 5e-4);
        assert_eq!(membership_score(0, 376).unwrap(), 0.0);
        assert_eq!(membership_score(7, 7).unwrap(), 1.0);
        assert_eq!(membership_score(1, 0), Err(ClassifierError::ZeroTotalWeight));
        assert_eq!(membership_score(8, 7).unwrap_err().code(), "WeightOutOfRange");
    }

    #[test]
    fn empty_stream_ties_to_hlg() {
        let m = model();
        let snap = classify_events(&m, &[]);
        // every frequency is 0, which is Low: HLG-2 fires
        assert_eq!(snap.label, Label::Hlg);
        let none = ModelDocument::from_rules(
            binning(),
            vec![
                rule("HLG-1", Label::Hlg, 5, &[(Feature::TotalActions, Bin::High)]),
                rule("LLG-1", Label::Llg, 5, &[(Feature::TotalActions, Bin::High)]),
            ],
            m.provenance.clone(),
        );
        let snap = classify_events(&none, &[]);
        assert_eq!((snap.scores.hlg, snap.scores.llg, snap.label), (0.0, 0.0, Label::Hlg));
        assert_eq!(snap.triggering_action, None);
    }

    #[test]
    fn resets_tip_to_llg_and_dilution_flips_back() {
        use ActionKind::*;
        let m = model();
        let mut actions = vec![Reset, Reset, FineStep, Reset, FineStep];
        let snap = classify_events(&m, &stream(&actions));
        assert_eq!(snap.label, Label::Llg);
        assert_eq!(snap.satisfied_weight.llg, 50);
        assert_eq!(snap.scores.llg, 0.5);
        assert_eq!(snap.triggering_action, Some(ActionCount { action: Reset, count: 3 }));
        // enough fine steps push Reset below its high cut and FineStep above its own
        actions.extend(std::iter::repeat_n(FineStep, 10));
        let snap = classify_events(&m, &stream(&actions));
        assert_eq!(snap.label, Label::Hlg);
        assert!(snap.is_satisfied("HLG-1"));
    }

    #[test]
    fn state_rejects_bad_sequence_and_keeps_snapshot() {
        let m = Arc::new(model());
        let mut st = ClassifierState::new(m, "s");
        st.update(ActionEvent::new("s", 1, 0, ActionKind::Reset)).unwrap();
        let before = st.current().clone();
        let err = st.update(ActionEvent::new("s", 3, 10, ActionKind::Reset)).unwrap_err();
        assert_eq!(err.code(), "SequenceGap");
        assert_eq!(st.current(), &before);
        assert_eq!(st.log().len(), 1);
    }

    #[test]
    fn accuracy_on_prefixes() {
        use ActionKind::*;
        let m = model();
        let users = vec![
            LabeledStream { user: "a".into(), label: Label::Llg, events: stream(&[Reset, Reset, Reset, FineStep]) },
            LabeledStream {
                user: "b".into(),
                label: Label::Hlg,
                events: stream(&[FineStep, FineStep, FineStep, FineStep]),
            },
        ];
        assert_eq!(evaluate_accuracy(&m, &users, 1.0).unwrap(), 1.0);
        // no events: everyone is HLG
        assert_eq!(evaluate_accuracy(&m, &users, 0.0).unwrap(), 0.5);
        assert_eq!(evaluate_accuracy(&m, &[], 1.0), Err(ClassifierError::EmptyCorpus));
    }

    fn arb_actions() -> impl Strategy<Value = Vec<(usize, u64)>> {
        prop::collection::vec((0usize..6, 0u64..6000), 0..80)
    }

    fn to_events(raw: &[(usize, u64)]) -> Vec<ActionEvent> {
        let mut t = 0;
        raw.iter()
            .enumerate()
            .map(|(i, &(a, dt))| {
                t += dt;
                ActionEvent::new("s", i as u64 + 1, t, ActionKind::ALL[a])
            })
            .collect()
    }

    proptest! {
        #[test]
        fn incremental_matches_batch(raw in arb_actions()) {
            let m = Arc::new(model());
            let events = to_events(&raw);
            let mut st = ClassifierState::new(m.clone(), "s");
            for e in &events {
                st.update(e.clone()).unwrap();
            }
            prop_assert_eq!(st.current(), &classify_events(&m, &events));
        }

        #[test]
        fn scaling_weights_keeps_scores(raw in arb_actions(), k in 1u32..4) {
            let m = model();
            let mut scaled = m.clone();
            for r in &mut scaled.rules {
                r.weight *= k;
            }
            scaled.totals = crate::discovery::RuleSet::totals_of(&scaled.rules);
            let events = to_events(&raw);
            let (a, b) = (classify_events(&m, &events), classify_events(&scaled, &events));
            prop_assert_eq!(a.scores, b.scores);
            prop_assert_eq!(a.label, b.label);
            for l in Label::BOTH {
                let s = *a.scores.get(l);
                prop_assert!((0.0..=1.0).contains(&s));
            }
        }
    }
}
