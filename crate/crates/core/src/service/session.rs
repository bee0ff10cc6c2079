use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ServiceError;
use crate::classifier::{ClassifierSnapshot, ClassifierState};
use crate::csp::{Domain, Network, NetworkSnapshot, NetworkView, StepOutcome, Value};
use crate::discovery::{Label, ModelDocument, PerLabel};
use crate::explain::{
    compute_usage_stats, generate_page, ExplainError, ExplanationEvent, ExplanationKind, PageContent, PageId,
    Telemetry, Templates, UsageReport,
};
use crate::hints::{Catalog, DeliveryState, HintEngine, HintPayload};
use crate::interaction::{ActionEvent, ActionKind, Target};

/// Body of `POST /sessions/{id}/actions`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionRequest {
    pub action: ActionKind,
    #[serde(default)]
    pub target: Option<Target>,
    #[serde(default)]
    pub subset: Option<Vec<Value>>,
    /// Client clock; the server clock is used when absent.
    #[serde(default)]
    pub t_ms: Option<u64>,
}

impl ActionRequest {
    pub fn new(action: ActionKind) -> Self {
        ActionRequest { action, target: None, subset: None, t_ms: None }
    }

    pub fn arc(arc: usize) -> Self {
        ActionRequest { target: Some(Target::Arc(arc)), ..Self::new(ActionKind::DirectArcClick) }
    }

    pub fn split(variable: &str, subset: &[Value]) -> Self {
        ActionRequest {
            target: Some(Target::Variable(variable.to_string())),
            subset: Some(subset.to_vec()),
            ..Self::new(ActionKind::DomainSplit)
        }
    }

    pub fn at(mut self, t_ms: u64) -> Self {
        self.t_ms = Some(t_ms);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionResponse {
    pub seq: u64,
    pub network: NetworkView,
    pub steps: Vec<StepOutcome>,
    pub label: Label,
    pub scores: PerLabel<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hint: Option<HintPayload>,
}

/// One line of an exported session log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LogLine {
    Action(ActionEvent),
    Explanation(ExplanationEvent),
}

/// Per-action record produced by replays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceLine {
    pub seq: u64,
    pub action: ActionKind,
    pub label: Label,
    pub scores: PerLabel<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hint: Option<HintPayload>,
}

/// Everything a session ends up in; hashed into the replay digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalState {
    pub network: NetworkSnapshot,
    pub snapshot: ClassifierSnapshot,
    pub delivery: DeliveryState,
    pub hints: Vec<HintPayload>,
    pub telemetry: Vec<ExplanationEvent>,
    pub stats: UsageReport,
}

impl FinalState {
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("state serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// One tutoring session: the network being solved plus the learner model,
/// hint and explanation state built from its actions.
#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    problem: String,
    model_id: String,
    network: Network,
    classifier: ClassifierState,
    hints: HintEngine,
    telemetry: Telemetry,
    templates: Arc<Templates>,
    lines: Vec<LogLine>,
}

impl Session {
    pub fn new(
        id: impl Into<String>,
        problem: impl Into<String>,
        network: Network,
        model_id: impl Into<String>,
        model: Arc<ModelDocument>,
        catalog: Catalog,
        templates: Arc<Templates>,
    ) -> Self {
        let id = id.into();
        Session {
            classifier: ClassifierState::new(model, id.clone()),
            id,
            problem: problem.into(),
            model_id: model_id.into(),
            network,
            hints: HintEngine::new(catalog),
            telemetry: Telemetry::default(),
            templates,
            lines: Vec::new(),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn problem(&self) -> &str {
        &self.problem
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn snapshot(&self) -> &ClassifierSnapshot {
        self.classifier.current()
    }

    pub fn hints(&self) -> &HintEngine {
        &self.hints
    }

    pub fn telemetry(&self) -> &Telemetry {
        &self.telemetry
    }

    pub fn lines(&self) -> &[LogLine] {
        &self.lines
    }

    fn apply(network: &mut Network, req: &ActionRequest) -> Result<Vec<StepOutcome>, ServiceError> {
        Ok(match req.action {
            ActionKind::FineStep => vec![network.fine_step()?],
            ActionKind::DirectArcClick => match req.target {
                Some(Target::Arc(a)) => vec![network.direct_arc_click(a)?],
                _ => return Err(ServiceError::InvalidRequest("DirectArcClick needs an arc id target".into())),
            },
            ActionKind::AutoAC => network.auto_ac()?,
            ActionKind::DomainSplit => {
                let (Some(Target::Variable(v)), Some(subset)) = (&req.target, &req.subset) else {
                    return Err(ServiceError::InvalidRequest(
                        "DomainSplit needs a variable target and a subset".into(),
                    ));
                };
                let subset: Domain = subset.iter().copied().collect();
                network.domain_split(v, &subset)?;
                Vec::new()
            }
            ActionKind::Backtrack => {
                network.backtrack()?;
                Vec::new()
            }
            ActionKind::Reset => {
                network.reset();
                Vec::new()
            }
        })
    }

    /// Applies one tool action. Nothing changes when it fails.
    pub fn post_action(&mut self, req: &ActionRequest, now_ms: u64) -> Result<ActionResponse, ServiceError> {
        let seq = self.classifier.log().last_seq() + 1;
        let mut event = ActionEvent::new(self.id.clone(), seq, req.t_ms.unwrap_or(now_ms), req.action);
        event.target = req.target.clone();
        event.subset = req.subset.clone();
        self.classifier.log().check(&event)?;
        let mut network = self.network.clone();
        let steps = Self::apply(&mut network, req)?;
        self.network = network;
        self.classifier.update(event.clone())?;
        self.lines.push(LogLine::Action(event));
        let snapshot = self.classifier.current();
        let hint = self
            .hints
            .observe(snapshot, self.classifier.model(), self.classifier.log().events())
            .map(|d| d.payload.clone());
        Ok(ActionResponse {
            seq,
            network: self.network.view(),
            steps,
            label: snapshot.label,
            scores: snapshot.scores,
            hint,
        })
    }

    fn latest_hint(&self) -> Result<u32, ServiceError> {
        self.hints.latest().map(|h| h.payload.hint).ok_or(ServiceError::Explain(ExplainError::NoActiveHint))
    }

    fn record(&mut self, event: ExplanationEvent) -> Result<(), ServiceError> {
        let before = self.telemetry.events().len();
        self.telemetry.record(event)?;
        let added = self.telemetry.events()[before..].to_vec();
        self.lines.extend(added.into_iter().map(LogLine::Explanation));
        Ok(())
    }

    /// Renders `page` for the most recent hint and logs the access.
    pub fn explanation(&mut self, page: PageId, now_ms: u64) -> Result<PageContent, ServiceError> {
        let hint = self.latest_hint()?;
        let content = generate_page(page, self.hints.latest(), self.classifier.model(), &self.templates)?;
        self.record(ExplanationEvent::access(&self.id, hint, page, now_ms))?;
        Ok(content)
    }

    pub fn page_closed(&mut self, page: PageId, dwell_ms: u64, now_ms: u64) -> Result<(), ServiceError> {
        let hint = self.latest_hint()?;
        self.record(ExplanationEvent::closed(&self.id, hint, page, now_ms, dwell_ms))
    }

    pub fn feedback(&mut self, page: PageId, now_ms: u64) -> Result<(), ServiceError> {
        let hint = self.latest_hint()?;
        self.record(ExplanationEvent::feedback(&self.id, hint, page, now_ms))
    }

    pub fn stats(&self) -> UsageReport {
        compute_usage_stats(&self.telemetry, self.hints.delivered().len() as u32)
    }

    /// The session log as JSON Lines.
    pub fn export_log(&self) -> String {
        let mut out = String::new();
        for l in &self.lines {
            out.push_str(&serde_json::to_string(l).expect("log lines serialize"));
            out.push('\n');
        }
        out
    }

    pub fn final_state(&self) -> FinalState {
        FinalState {
            network: self.network.snapshot(),
            snapshot: self.classifier.current().clone(),
            delivery: self.hints.delivery().clone(),
            hints: self.hints.delivered().iter().map(|d| d.payload.clone()).collect(),
            telemetry: self.telemetry.events().to_vec(),
            stats: self.stats(),
        }
    }

    /// Re-applies one logged line.
    pub fn apply_line(&mut self, line: &LogLine) -> Result<Applied, ServiceError> {
        match line {
            LogLine::Action(e) => {
                let expected = self.classifier.log().last_seq() + 1;
                if e.seq != expected {
                    return Err(ServiceError::InvalidRequest(format!("expected seq {expected}, found {}", e.seq)));
                }
                let req = ActionRequest {
                    action: e.action,
                    target: e.target.clone(),
                    subset: e.subset.clone(),
                    t_ms: Some(e.timestamp_ms),
                };
                let r = self.post_action(&req, e.timestamp_ms)?;
                Ok(Applied::Action(TraceLine {
                    seq: r.seq,
                    action: e.action,
                    label: r.label,
                    scores: r.scores,
                    hint: r.hint,
                }))
            }
            LogLine::Explanation(e) => {
                let page = e.page;
                let need_page =
                    || page.ok_or_else(|| ServiceError::InvalidRequest("telemetry line without page".into()));
                match e.kind {
                    ExplanationKind::Initiation => self.record(e.clone())?,
                    ExplanationKind::PageAccess => {
                        return Ok(Applied::Page(Box::new(self.explanation(need_page()?, e.t_ms)?)))
                    }
                    ExplanationKind::PageClosed => self.page_closed(need_page()?, e.dwell_ms.unwrap_or(0), e.t_ms)?,
                    ExplanationKind::Feedback => self.feedback(need_page()?, e.t_ms)?,
                }
                Ok(Applied::Telemetry)
            }
        }
    }
}

/// What re-applying one log line produced.
#[derive(Debug, Clone, PartialEq)]
pub enum Applied {
    Action(TraceLine),
    Page(Box<PageContent>),
    Telemetry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub digest: String,
    pub lines: usize,
    pub trace: Vec<TraceLine>,
    /// Every explanation page the log opened, re-rendered.
    pub pages: Vec<PageContent>,
    pub final_state: FinalState,
}

/// Parses a JSON Lines log; errors name the 1-based line.
pub fn parse_log(text: &str) -> Result<Vec<LogLine>, ServiceError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| ServiceError::BadLogLine { line: i + 1, message: e.to_string() })
        })
        .collect()
}

/// Feeds a log through a fresh session.
pub fn replay(mut session: Session, lines: &[LogLine]) -> Result<ReplayReport, ServiceError> {
    let mut trace = Vec::new();
    let mut pages = Vec::new();
    for line in lines {
        match session.apply_line(line)? {
            Applied::Action(t) => trace.push(t),
            Applied::Page(p) => pages.push(*p),
            Applied::Telemetry => {}
        }
    }
    let final_state = session.final_state();
    Ok(ReplayReport { digest: final_state.digest(), lines: lines.len(), trace, pages, final_state })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::problem::{compile, load_problem};

    fn session() -> Session {
        let spec = load_problem(include_str!("../../data/problems/coloring.json")).unwrap();
        Session::new(
            "s1",
            "coloring",
            compile(&spec),
            "demo",
            Arc::new(fixtures::reset_model()),
            Catalog::default(),
            Arc::new(Templates::default()),
        )
    }

    #[test]
    fn failed_actions_are_not_logged() {
        let mut s = session();
        let err = s.post_action(&ActionRequest::new(ActionKind::Backtrack), 0).unwrap_err();
        assert_eq!(err.code(), "EmptyStack");
        assert!(s.lines().is_empty());
        assert_eq!(s.snapshot().events, 0);
        let err = s.post_action(&ActionRequest::new(ActionKind::DirectArcClick), 0).unwrap_err();
        assert_eq!(err.code(), "InvalidRequest");
        let r = s.post_action(&ActionRequest::new(ActionKind::FineStep), 10).unwrap();
        assert_eq!(r.seq, 1);
        assert_eq!(s.lines().len(), 1);
    }

    #[test]
    fn regressing_client_time_is_rejected() {
        let mut s = session();
        s.post_action(&ActionRequest::new(ActionKind::FineStep).at(500), 0).unwrap();
        let err = s.post_action(&ActionRequest::new(ActionKind::FineStep).at(100), 0).unwrap_err();
        assert_eq!(err.code(), "TimestampRegression");
        assert_eq!(s.network().phase(), crate::csp::Phase::Selected);
    }

    #[test]
    fn explanations_need_a_hint() {
        let mut s = session();
        assert_eq!(s.explanation(PageId::HowRank, 0).unwrap_err().code(), "NoActiveHint");
        assert!(s.telemetry().events().is_empty());
    }

    #[test]
    fn resets_draw_a_hint_and_replay_matches() {
        let mut s = session();
        let mut hint = None;
        for i in 0..30u64 {
            let req =
                if i % 2 == 0 { ActionRequest::new(ActionKind::AutoAC) } else { ActionRequest::new(ActionKind::Reset) };
            let r = s.post_action(&req, i * 500).unwrap();
            if r.hint.is_some() && hint.is_none() {
                hint = r.hint;
            }
        }
        let hint = hint.expect("a hint was delivered");
        assert_eq!(hint.explanation_label, "Why am I delivered this hint?");
        s.explanation(PageId::WhyHint, 20_000).unwrap();
        s.page_closed(PageId::WhyHint, 4000, 24_000).unwrap();
        s.explanation(PageId::WhyLow, 24_000).unwrap();
        s.feedback(PageId::WhyLow, 25_000).unwrap();
        let log = s.export_log();
        let fresh = session();
        let report = replay(fresh, &parse_log(&log).unwrap()).unwrap();
        assert_eq!(report.digest, s.final_state().digest());
        assert_eq!(report.trace.len(), 30);
    }

    #[test]
    fn bad_log_line_is_located() {
        let err =
            parse_log("{\"kind\":\"Initiation\",\"session\":\"s\",\"hint\":1,\"t_ms\":0}\nnot json\n").unwrap_err();
        assert!(matches!(err, ServiceError::BadLogLine { line: 2, .. }));
    }
}
