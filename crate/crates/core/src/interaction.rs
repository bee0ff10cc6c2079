//! Interaction logging and behavior features.
//!
//! An action stream reduces to 13 features: the relative frequency of each of
//! the six tool actions, the mean pause (milliseconds until the next event of
//! any type) after each action type, and the total number of actions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::csp::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActionKind {
    FineStep,
    DirectArcClick,
    AutoAC,
    DomainSplit,
    Backtrack,
    Reset,
}

impl ActionKind {
    pub const ALL: [ActionKind; 6] = [
        ActionKind::FineStep,
        ActionKind::DirectArcClick,
        ActionKind::AutoAC,
        ActionKind::DomainSplit,
        ActionKind::Backtrack,
        ActionKind::Reset,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::FineStep => "FineStep",
            ActionKind::DirectArcClick => "DirectArcClick",
            ActionKind::AutoAC => "AutoAC",
            ActionKind::DomainSplit => "DomainSplit",
            ActionKind::Backtrack => "Backtrack",
            ActionKind::Reset => "Reset",
        }
    }

    /// Name as shown to students.
    pub fn display_name(self) -> &'static str {
        match self {
            ActionKind::FineStep => "Fine Step",
            ActionKind::DirectArcClick => "Direct Arc Click",
            ActionKind::AutoAC => "Auto Arc-Consistency",
            ActionKind::DomainSplit => "Domain Splitting",
            ActionKind::Backtrack => "Backtrack",
            ActionKind::Reset => "Reset",
        }
    }
}

impl FromStr for ActionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        ActionKind::ALL.into_iter().find(|a| a.as_str() == s).ok_or_else(|| format!("unknown action `{s}`"))
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What an action was applied to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Target {
    Arc(usize),
    Variable(String),
}

/// One performed tool action; one line of an event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionEvent {
    pub session: String,
    pub seq: u64,
    #[serde(rename = "t_ms")]
    pub timestamp_ms: u64,
    pub action: ActionKind,
    #[serde(default)]
    pub target: Option<Target>,
    /// Values kept by a domain split.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subset: Option<Vec<Value>>,
}

impl ActionEvent {
    pub fn new(session: impl Into<String>, seq: u64, timestamp_ms: u64, action: ActionKind) -> Self {
        ActionEvent { session: session.into(), seq, timestamp_ms, action, target: None, subset: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InteractionError {
    #[error("expected seq {expected}, got {got}")]
    SequenceGap { expected: u64, got: u64 },
    #[error("timestamp {got} precedes previous timestamp {previous}")]
    TimestampRegression { previous: u64, got: u64 },
    #[error("event belongs to session `{got}`, log is `{expected}`")]
    WrongSession { expected: String, got: String },
    #[error("corpus has {0} vectors; at least 3 are required")]
    CorpusTooSmall(usize),
}

impl InteractionError {
    pub fn code(&self) -> &'static str {
        match self {
            InteractionError::SequenceGap { .. } => "SequenceGap",
            InteractionError::TimestampRegression { .. } => "TimestampRegression",
            InteractionError::WrongSession { .. } => "WrongSession",
            InteractionError::CorpusTooSmall(_) => "CorpusTooSmall",
        }
    }
}

/// Append-only action history of one session.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventLog {
    session: String,
    events: Vec<ActionEvent>,
}

impl EventLog {
    pub fn new(session: impl Into<String>) -> Self {
        EventLog { session: session.into(), events: Vec::new() }
    }

    pub fn session(&self) -> &str {
        &self.session
    }

    pub fn events(&self) -> &[ActionEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn last_seq(&self) -> u64 {
        self.events.last().map_or(0, |e| e.seq)
    }

    /// Checks that `event` may follow the current history.
    pub fn check(&self, event: &ActionEvent) -> Result<(), InteractionError> {
        if event.session != self.session {
            return Err(InteractionError::WrongSession { expected: self.session.clone(), got: event.session.clone() });
        }
        let expected = self.last_seq() + 1;
        if event.seq != expected {
            return Err(InteractionError::SequenceGap { expected, got: event.seq });
        }
        if let Some(prev) = self.events.last() {
            if event.timestamp_ms < prev.timestamp_ms {
                return Err(InteractionError::TimestampRegression {
                    previous: prev.timestamp_ms,
                    got: event.timestamp_ms,
                });
            }
        }
        Ok(())
    }

    pub fn record_event(&mut self, event: ActionEvent) -> Result<(), InteractionError> {
        self.check(&event)?;
        self.events.push(event);
        Ok(())
    }
}

/// Identifier of one of the 13 behavior features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Feature {
    Freq(ActionKind),
    Pause(ActionKind),
    TotalActions,
}

pub const FEATURE_COUNT: usize = 13;

impl Feature {
    pub fn all() -> [Feature; FEATURE_COUNT] {
        let mut out = [Feature::TotalActions; FEATURE_COUNT];
        for a in ActionKind::ALL {
            out[a.index()] = Feature::Freq(a);
            out[6 + a.index()] = Feature::Pause(a);
        }
        out
    }

    pub fn index(self) -> usize {
        match self {
            Feature::Freq(a) => a.index(),
            Feature::Pause(a) => 6 + a.index(),
            Feature::TotalActions => 12,
        }
    }

    pub fn from_index(i: usize) -> Option<Feature> {
        Feature::all().get(i).copied()
    }

    /// The action type the feature is about, if any.
    pub fn action(self) -> Option<ActionKind> {
        match self {
            Feature::Freq(a) | Feature::Pause(a) => Some(a),
            Feature::TotalActions => None,
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Feature::Freq(a) => write!(f, "freq:{a}"),
            Feature::Pause(a) => write!(f, "pause:{a}"),
            Feature::TotalActions => f.write_str("total_actions"),
        }
    }
}

impl FromStr for Feature {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "total_actions" {
            return Ok(Feature::TotalActions);
        }
        match s.split_once(':') {
            Some(("freq", a)) => Ok(Feature::Freq(a.parse()?)),
            Some(("pause", a)) => Ok(Feature::Pause(a.parse()?)),
            _ => Err(format!("unknown feature `{s}`")),
        }
    }
}

impl Serialize for Feature {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Feature {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub freq: [f64; 6],
    pub pause: [f64; 6],
    pub total_actions: u64,
}

impl Default for FeatureVector {
    fn default() -> Self {
        FeatureVector { freq: [0.0; 6], pause: [0.0; 6], total_actions: 0 }
    }
}

impl FeatureVector {
    pub fn get(&self, f: Feature) -> f64 {
        match f {
            Feature::Freq(a) => self.freq[a.index()],
            Feature::Pause(a) => self.pause[a.index()],
            Feature::TotalActions => self.total_actions as f64,
        }
    }

    pub fn values(&self) -> [f64; FEATURE_COUNT] {
        let mut out = [0.0; FEATURE_COUNT];
        for f in Feature::all() {
            out[f.index()] = self.get(f);
        }
        out
    }
}

/// Running sums behind a [`FeatureVector`]; all integer, so fold order
/// cannot change the result.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureAccumulator {
    counts: [u64; 6],
    pause_sum: [u64; 6],
    pause_n: [u64; 6],
    last: Option<(ActionKind, u64)>,
    total: u64,
}

impl FeatureAccumulator {
    pub fn push(&mut self, action: ActionKind, timestamp_ms: u64) {
        if let Some((prev, t)) = self.last {
            self.pause_sum[prev.index()] += timestamp_ms.saturating_sub(t);
            self.pause_n[prev.index()] += 1;
        }
        self.counts[action.index()] += 1;
        self.total += 1;
        self.last = Some((action, timestamp_ms));
    }

    pub fn counts(&self) -> [u64; 6] {
        self.counts
    }

    pub fn count(&self, action: ActionKind) -> u64 {
        self.counts[action.index()]
    }

    pub fn last_action(&self) -> Option<ActionKind> {
        self.last.map(|(a, _)| a)
    }

    pub fn vector(&self) -> FeatureVector {
        let mut v = FeatureVector { total_actions: self.total, ..FeatureVector::default() };
        if self.total == 0 {
            return v;
        }
        for i in 0..6 {
            v.freq[i] = self.counts[i] as f64 / self.total as f64;
            if self.pause_n[i] > 0 {
                v.pause[i] = self.pause_sum[i] as f64 / self.pause_n[i] as f64;
            }
        }
        v
    }
}

pub fn accumulate<'a>(events: impl IntoIterator<Item = &'a ActionEvent>) -> FeatureAccumulator {
    let mut acc = FeatureAccumulator::default();
    for e in events {
        acc.push(e.action, e.timestamp_ms);
    }
    acc
}

/// Frequencies and mean pauses of an action stream. The last event has no
/// successor and contributes no pause.
pub fn extract_features(events: &[ActionEvent]) -> FeatureVector {
    accumulate(events).vector()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Bin {
    Low,
    Medium,
    High,
}

/// Two cut points per feature: values below `low` are Low, above `high`
/// are High, anything else (including the boundaries) is Medium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cuts {
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinningModel {
    pub cuts: Vec<Cuts>,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Equal-frequency tertile cut points for every feature.
pub fn fit_binning(corpus: &[FeatureVector]) -> Result<BinningModel, InteractionError> {
    if corpus.len() < 3 {
        return Err(InteractionError::CorpusTooSmall(corpus.len()));
    }
    let cuts = Feature::all()
        .into_iter()
        .map(|f| {
            let mut col: Vec<f64> = corpus.iter().map(|v| v.get(f)).collect();
            col.sort_by(f64::total_cmp);
            Cuts { low: quantile(&col, 1.0 / 3.0), high: quantile(&col, 2.0 / 3.0) }
        })
        .collect();
    Ok(BinningModel { cuts })
}

impl BinningModel {
    pub fn bin(&self, feature: Feature, value: f64) -> Bin {
        let c = self.cuts[feature.index()];
        if value < c.low {
            Bin::Low
        } else if value > c.high {
            Bin::High
        } else {
            Bin::Medium
        }
    }

    pub fn is_valid(&self) -> bool {
        self.cuts.len() == FEATURE_COUNT
            && self.cuts.iter().all(|c| c.low.is_finite() && c.high.is_finite() && c.low <= c.high)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DiscreteVector {
    pub bins: [Bin; FEATURE_COUNT],
}

impl DiscreteVector {
    pub fn get(&self, f: Feature) -> Bin {
        self.bins[f.index()]
    }
}

pub fn discretize(vector: &FeatureVector, binning: &BinningModel) -> DiscreteVector {
    let mut bins = [Bin::Medium; FEATURE_COUNT];
    for f in Feature::all() {
        bins[f.index()] = binning.bin(f, vector.get(f));
    }
    DiscreteVector { bins }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(seq: u64, t: u64, a: ActionKind) -> ActionEvent {
        ActionEvent::new("s", seq, t, a)
    }

    #[test]
    fn record_event_rules() {
        let mut log = EventLog::new("s");
        log.record_event(ev(1, 0, ActionKind::Reset)).unwrap();
        assert_eq!(log.len(), 1);
        for s in 2..=5 {
            log.record_event(ev(s, 10 * s, ActionKind::FineStep)).unwrap();
        }
        assert_eq!(
            log.record_event(ev(7, 100, ActionKind::Reset)),
            Err(InteractionError::SequenceGap { expected: 6, got: 7 })
        );
        assert_eq!(
            log.record_event(ev(6, 1, ActionKind::Reset)),
            Err(InteractionError::TimestampRegression { previous: 50, got: 1 })
        );
        assert_eq!(log.len(), 5);
        assert!(matches!(
            log.record_event(ActionEvent::new("other", 6, 60, ActionKind::Reset)),
            Err(InteractionError::WrongSession { .. })
        ));
    }

    #[test]
    fn frequency_counts() {
        let events: Vec<_> =
            (1..=10).map(|i| ev(i, i * 100, if i <= 4 { ActionKind::Reset } else { ActionKind::FineStep })).collect();
        let v = extract_features(&events);
        assert_eq!(v.freq[ActionKind::Reset.index()], 0.4);
        assert_eq!(v.total_actions, 10);
    }

    #[test]
    fn empty_stream_is_zero() {
        assert_eq!(extract_features(&[]), FeatureVector::default());
    }

    #[test]
    fn pause_excludes_last_event() {
        let events = vec![
            ev(1, 0, ActionKind::DirectArcClick),
            ev(2, 5000, ActionKind::DirectArcClick),
            ev(3, 9000, ActionKind::FineStep),
        ];
        let v = extract_features(&events);
        assert_eq!(v.pause[ActionKind::DirectArcClick.index()], 4500.0);
        assert_eq!(v.pause[ActionKind::FineStep.index()], 0.0);
    }

    fn corpus_on(feature: Feature, values: &[f64]) -> Vec<FeatureVector> {
        values
            .iter()
            .map(|&x| {
                let mut v = FeatureVector::default();
                match feature {
                    Feature::Freq(a) => v.freq[a.index()] = x,
                    Feature::Pause(a) => v.pause[a.index()] = x,
                    Feature::TotalActions => v.total_actions = x as u64,
                }
                v
            })
            .collect()
    }

    #[test]
    fn tertiles_by_index_arithmetic() {
        let values: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        let f = Feature::Freq(ActionKind::AutoAC);
        let b = fit_binning(&corpus_on(f, &values)).unwrap();
        // n = 9: positions (n-1)/3 = 2.667 and 2(n-1)/3 = 5.333 of the sorted column
        let low = values[2] + (8.0 / 3.0 - 2.0) * (values[3] - values[2]);
        let high = values[5] + (16.0 / 3.0 - 5.0) * (values[6] - values[5]);
        let c = b.cuts[f.index()];
        assert!((c.low - low).abs() < 1e-12 && (c.high - high).abs() < 1e-12);
        assert!(c.low > 0.3 && c.low < 0.4 && c.high > 0.6 && c.high < 0.7);
        let bins: Vec<Bin> = values.iter().map(|&x| b.bin(f, x)).collect();
        assert_eq!(bins.iter().filter(|&&x| x == Bin::Low).count(), 3);
        assert_eq!(bins.iter().filter(|&&x| x == Bin::High).count(), 3);
    }

    #[test]
    fn constant_feature_bins_medium() {
        let f = Feature::Pause(ActionKind::Reset);
        let b = fit_binning(&corpus_on(f, &[7.0, 7.0, 7.0, 7.0])).unwrap();
        assert_eq!(b.cuts[f.index()], Cuts { low: 7.0, high: 7.0 });
        assert_eq!(b.bin(f, 7.0), Bin::Medium);
    }

    #[test]
    fn binning_needs_three() {
        let c = vec![FeatureVector::default(); 2];
        assert_eq!(fit_binning(&c), Err(InteractionError::CorpusTooSmall(2)));
    }

    #[test]
    fn discretize_boundaries() {
        let mut cuts = vec![Cuts { low: 0.0, high: 0.0 }; FEATURE_COUNT];
        cuts[0] = Cuts { low: 0.2, high: 0.5 };
        let b = BinningModel { cuts };
        let f = Feature::Freq(ActionKind::FineStep);
        assert_eq!(b.bin(f, 0.1), Bin::Low);
        assert_eq!(b.bin(f, 0.2), Bin::Medium);
        assert_eq!(b.bin(f, 0.5), Bin::Medium);
        assert_eq!(b.bin(f, 0.6), Bin::High);
    }

    #[test]
    fn feature_names_round_trip() {
        for f in Feature::all() {
            assert_eq!(f.to_string().parse::<Feature>().unwrap(), f);
            assert_eq!(Feature::from_index(f.index()), Some(f));
        }
    }

    #[test]
    fn event_line_schema() {
        let mut e = ev(3, 1200, ActionKind::DirectArcClick);
        e.target = Some(Target::Arc(2));
        let line = serde_json::to_string(&e).unwrap();
        assert_eq!(line, r#"{"session":"s","seq":3,"t_ms":1200,"action":"DirectArcClick","target":2}"#);
        let back: ActionEvent = serde_json::from_str(&line).unwrap();
        assert_eq!(back, e);
    }

    fn arb_stream() -> impl Strategy<Value = Vec<(usize, u64)>> {
        prop::collection::vec((0usize..6, 0u64..5000), 0..80)
    }

    fn to_events(spec: &[(usize, u64)]) -> Vec<ActionEvent> {
        let mut t = 0;
        spec.iter()
            .enumerate()
            .map(|(i, &(a, dt))| {
                t += dt;
                ev(i as u64 + 1, t, ActionKind::ALL[a])
            })
            .collect()
    }

    proptest! {
        #[test]
        fn incremental_equals_batch(spec in arb_stream()) {
            let events = to_events(&spec);
            let mut acc = FeatureAccumulator::default();
            for (i, e) in events.iter().enumerate() {
                acc.push(e.action, e.timestamp_ms);
                prop_assert_eq!(acc.vector(), extract_features(&events[..=i]));
            }
        }

        #[test]
        fn frequencies_sum_to_one(spec in arb_stream()) {
            let v = extract_features(&to_events(&spec));
            if v.total_actions > 0 {
                let s: f64 = v.freq.iter().sum();
                prop_assert!((s - 1.0).abs() < 1e-12);
            }
            prop_assert!(v.pause.iter().all(|&p| p >= 0.0));
        }

        #[test]
        fn discretize_is_monotone(values in prop::collection::vec(0.0f64..1.0, 3..30), a in 0.0f64..1.0, d in 0.0f64..0.5) {
            let f = Feature::Freq(ActionKind::Reset);
            let b = fit_binning(&corpus_on(f, &values)).unwrap();
            prop_assert!(b.bin(f, a) <= b.bin(f, a + d));
        }
    }
}
