use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{ExplainError, PageId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExplanationKind {
    Initiation,
    PageAccess,
    PageClosed,
    Feedback,
}

/// One telemetry line. `hint` is the 1-based delivery number.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplanationEvent {
    pub session: String,
    pub kind: ExplanationKind,
    pub hint: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub page: Option<PageId>,
    pub t_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dwell_ms: Option<u64>,
}

impl ExplanationEvent {
    pub fn access(session: &str, hint: u32, page: PageId, t_ms: u64) -> Self {
        ExplanationEvent {
            session: session.to_string(),
            kind: ExplanationKind::PageAccess,
            hint,
            page: Some(page),
            t_ms,
            dwell_ms: None,
        }
    }

    pub fn closed(session: &str, hint: u32, page: PageId, t_ms: u64, dwell_ms: u64) -> Self {
        ExplanationEvent {
            kind: ExplanationKind::PageClosed,
            dwell_ms: Some(dwell_ms),
            ..Self::access(session, hint, page, t_ms)
        }
    }

    pub fn feedback(session: &str, hint: u32, page: PageId, t_ms: u64) -> Self {
        ExplanationEvent { kind: ExplanationKind::Feedback, ..Self::access(session, hint, page, t_ms) }
    }

    pub fn initiation(session: &str, hint: u32, t_ms: u64) -> Self {
        ExplanationEvent {
            kind: ExplanationKind::Initiation,
            page: None,
            ..Self::access(session, hint, PageId::WhyHint, t_ms)
        }
    }
}

/// Append-only explanation usage log of one session.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Telemetry {
    events: Vec<ExplanationEvent>,
    open_hint: Option<u32>,
    open_page: Option<(u32, PageId)>,
}

impl Telemetry {
    pub fn events(&self) -> &[ExplanationEvent] {
        &self.events
    }

    /// Appends `event`; the first page access for a hint opens an initiation
    /// for it. Returns how many lines were appended.
    pub fn record(&mut self, event: ExplanationEvent) -> Result<usize, ExplainError> {
        let bad = |m: String| Err(ExplainError::MalformedNesting(m));
        match event.kind {
            ExplanationKind::Initiation => {
                if self.open_hint == Some(event.hint) {
                    return bad(format!("hint {} is already being explained", event.hint));
                }
                self.open_hint = Some(event.hint);
                self.open_page = None;
                self.events.push(event);
                Ok(1)
            }
            ExplanationKind::PageAccess => {
                let Some(page) = event.page else {
                    return bad("page access without a page".into());
                };
                let mut added = 1;
                if self.open_hint != Some(event.hint) {
                    self.record(ExplanationEvent::initiation(&event.session, event.hint, event.t_ms))?;
                    added += 1;
                }
                self.open_page = Some((event.hint, page));
                self.events.push(event);
                Ok(added)
            }
            ExplanationKind::PageClosed => {
                let page = event.page;
                if page.is_none() || self.open_page != page.map(|p| (event.hint, p)) {
                    return bad(format!("closing {page:?} for hint {}, but it is not open", event.hint));
                }
                self.open_page = None;
                self.events.push(event);
                Ok(1)
            }
            ExplanationKind::Feedback => {
                if event.page.is_none() || self.open_hint != Some(event.hint) {
                    return bad(format!("feedback for hint {} outside its explanation", event.hint));
                }
                self.events.push(event);
                Ok(1)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageReport {
    pub hints_received: u32,
    pub initiations: u32,
    /// Hints delivered before the first one that was explained.
    pub hints_before_first_initiation: Option<u32>,
    pub initiations_per_hint: f64,
    pub page_accesses: u32,
    pub accesses_per_initiation: f64,
    /// Seconds of page dwell per hint received.
    pub attention_per_hint_s: f64,
    pub types_accessed: usize,
    pub type_proportions: BTreeMap<PageId, f64>,
    pub feedback_presses: u32,
}

fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

/// Aggregates telemetry; with no hints every rate is zero.
pub fn compute_usage_stats(telemetry: &Telemetry, hints_received: u32) -> UsageReport {
    let ev = telemetry.events();
    let of = |k: ExplanationKind| ev.iter().filter(move |e| e.kind == k);
    let initiations = of(ExplanationKind::Initiation).count() as u32;
    let accesses: Vec<PageId> = of(ExplanationKind::PageAccess).filter_map(|e| e.page).collect();
    let dwell_ms: u64 = of(ExplanationKind::PageClosed).filter_map(|e| e.dwell_ms).sum();
    let mut per_type: BTreeMap<PageId, u32> = BTreeMap::new();
    for p in &accesses {
        *per_type.entry(*p).or_default() += 1;
    }
    let distinct: BTreeSet<PageId> = accesses.iter().copied().collect();
    let n = accesses.len() as f64;
    UsageReport {
        hints_received,
        initiations,
        hints_before_first_initiation: of(ExplanationKind::Initiation).map(|e| e.hint.saturating_sub(1)).next(),
        initiations_per_hint: ratio(f64::from(initiations), f64::from(hints_received)),
        page_accesses: accesses.len() as u32,
        accesses_per_initiation: ratio(n, f64::from(initiations)),
        attention_per_hint_s: ratio(dwell_ms as f64 / 1000.0, f64::from(hints_received)),
        types_accessed: distinct.len(),
        type_proportions: per_type.into_iter().map(|(p, c)| (p, f64::from(c) / n)).collect(),
        feedback_presses: of(ExplanationKind::Feedback).count() as u32,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_access_opens_an_initiation() {
        let mut t = Telemetry::default();
        assert_eq!(t.record(ExplanationEvent::access("s", 1, PageId::WhyHint, 0)).unwrap(), 2);
        let kinds: Vec<_> = t.events().iter().map(|e| e.kind).collect();
        assert_eq!(kinds, vec![ExplanationKind::Initiation, ExplanationKind::PageAccess]);
    }

    #[test]
    fn counts_accesses_and_types() {
        let mut t = Telemetry::default();
        for (i, p) in [PageId::WhyHint, PageId::WhyLow, PageId::WhyLow].into_iter().enumerate() {
            t.record(ExplanationEvent::access("s", 1, p, i as u64)).unwrap();
        }
        let r = compute_usage_stats(&t, 1);
        assert_eq!((r.initiations, r.page_accesses, r.types_accessed), (1, 3, 2));
        assert_eq!(r.accesses_per_initiation, 3.0);
        assert!((r.type_proportions[&PageId::WhyLow] - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.hints_before_first_initiation, Some(0));
    }

    #[test]
    fn feedback_binds_to_page_and_hint() {
        let mut t = Telemetry::default();
        assert_eq!(
            t.record(ExplanationEvent::feedback("s", 1, PageId::HowHint, 0)).unwrap_err().code(),
            "MalformedNesting"
        );
        t.record(ExplanationEvent::access("s", 1, PageId::HowHint, 0)).unwrap();
        t.record(ExplanationEvent::feedback("s", 1, PageId::HowHint, 5)).unwrap();
        let last = t.events().last().unwrap();
        assert_eq!((last.kind, last.page, last.hint), (ExplanationKind::Feedback, Some(PageId::HowHint), 1));
    }

    #[test]
    fn dwell_and_rates() {
        let mut t = Telemetry::default();
        // three of four hints explained, two pages each
        for h in [2u32, 3, 4] {
            for p in [PageId::WhyHint, PageId::HowScore] {
                t.record(ExplanationEvent::access("s", h, p, 0)).unwrap();
                t.record(ExplanationEvent::closed("s", h, p, 0, 2000)).unwrap();
            }
        }
        let r = compute_usage_stats(&t, 4);
        assert_eq!(r.initiations_per_hint, 0.75);
        assert_eq!(r.accesses_per_initiation, 2.0);
        assert_eq!(r.attention_per_hint_s, 3.0);
        assert_eq!(r.hints_before_first_initiation, Some(1));
        assert_eq!(
            t.record(ExplanationEvent::closed("s", 4, PageId::HowScore, 0, 1)).unwrap_err().code(),
            "MalformedNesting"
        );
    }

    #[test]
    fn empty_report() {
        let r = compute_usage_stats(&Telemetry::default(), 0);
        assert_eq!((r.initiations, r.page_accesses, r.types_accessed), (0, 0, 0));
        assert_eq!((r.initiations_per_hint, r.attention_per_hint_s), (0.0, 0.0));
        assert_eq!(r.hints_before_first_initiation, None);
    }
}
