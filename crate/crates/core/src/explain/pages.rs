use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{available_transitions, ExplainError, PageId, Transition};
use crate::classifier::{ActionCount, ClassifierSnapshot};
use crate::discovery::{AssociationRule, Label, ModelDocument};
use crate::hints::DeliveredHint;

const DEFAULT_TEMPLATES: &str = include_str!("../../data/templates.json");

const MODEL_SLOTS: [&str; 4] = ["provenance", "training_users", "hlg_rules", "llg_rules"];
const USER_SLOTS: [&str; 3] = ["group", "trigger", "hint"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TemplateBlock {
    Text { text: String },
    Diagram { id: String, nodes: Vec<String> },
    SatisfiedRules,
    Score { group: Label, satisfied_label: String, total_label: String, score_label: String },
    RankedHints,
    ContributingRules,
    Summation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageTemplate {
    pub title: String,
    pub blocks: Vec<TemplateBlock>,
}

/// Page copy with `{slot}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Templates {
    pub feedback_label: String,
    pub back_label: String,
    pub pages: BTreeMap<PageId, PageTemplate>,
}

fn slots_in(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find('{') {
        let Some(len) = rest[start..].find('}') else { break };
        out.push(&rest[start + 1..start + len]);
        rest = &rest[start + len + 1..];
    }
    out
}

fn texts(block: &TemplateBlock) -> Vec<&str> {
    match block {
        TemplateBlock::Text { text } => vec![text],
        TemplateBlock::Diagram { nodes, .. } => nodes.iter().map(String::as_str).collect(),
        TemplateBlock::Score { satisfied_label, total_label, score_label, .. } => {
            vec![satisfied_label, total_label, score_label]
        }
        _ => Vec::new(),
    }
}

impl Templates {
    pub fn from_json(text: &str) -> Result<Self, ExplainError> {
        let t: Templates = serde_json::from_str(text).map_err(|e| ExplainError::MalformedTemplates(e.to_string()))?;
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), ExplainError> {
        for page in PageId::ALL {
            let tpl = self
                .pages
                .get(&page)
                .ok_or_else(|| ExplainError::MalformedTemplates(format!("missing page {page}")))?;
            for block in &tpl.blocks {
                for slot in texts(block).into_iter().flat_map(slots_in) {
                    let known = MODEL_SLOTS.contains(&slot) || (page != PageId::WhyRules && USER_SLOTS.contains(&slot));
                    if !known {
                        return Err(ExplainError::MalformedTemplates(format!("unknown slot {{{slot}}} on {page}")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn title(&self, page: PageId) -> &str {
        &self.pages[&page].title
    }
}

impl Default for Templates {
    fn default() -> Self {
        Templates::from_json(DEFAULT_TEMPLATES).expect("bundled templates are valid")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleLine {
    pub id: String,
    pub text: String,
    pub weight: u32,
    /// Raw counts of the actions the rule talks about.
    pub actions: Vec<ActionCount>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedLine {
    pub item: String,
    pub text: String,
    pub rank: u64,
    pub chosen: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Block {
    Text {
        text: String,
    },
    Diagram {
        id: String,
        nodes: Vec<String>,
    },
    RuleList {
        rules: Vec<RuleLine>,
    },
    Score {
        group: Label,
        satisfied_label: String,
        satisfied: u64,
        total_label: String,
        total: u64,
        score_label: String,
        quotient: String,
        score: f64,
    },
    RankedHints {
        hints: Vec<RankedLine>,
    },
    Summation {
        addends: Vec<u64>,
        total: u64,
        text: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageContent {
    pub page: PageId,
    pub hint: u32,
    pub title: String,
    pub blocks: Vec<Block>,
    pub transitions: Vec<Transition>,
    /// Where the back button returns to, on drilled pages.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub back: Option<BackLink>,
    pub feedback_label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackLink {
    pub to: PageId,
    pub label: String,
}

/// "432/1383 = .313": thousandths rounded up, leading zero and trailing
/// zeros dropped.
pub fn format_quotient(numerator: u64, denominator: u64) -> String {
    let value = if numerator == 0 || denominator == 0 {
        "0".to_string()
    } else {
        let k = (1000 * numerator).div_ceil(denominator);
        if k >= 1000 {
            (k / 1000).to_string()
        } else {
            format!(".{k:03}").trim_end_matches('0').to_string()
        }
    };
    format!("{numerator}/{denominator} = {value}")
}

fn times(n: u64) -> &'static str {
    if n == 1 {
        "time"
    } else {
        "times"
    }
}

fn action_counts(rule: &AssociationRule, snapshot: &ClassifierSnapshot) -> Vec<ActionCount> {
    let mut out: Vec<ActionCount> = Vec::new();
    for c in &rule.conditions {
        if let Some(a) = c.feature.action() {
            if !out.iter().any(|x| x.action == a) {
                out.push(ActionCount { action: a, count: snapshot.count(a) });
            }
        }
    }
    out
}

fn rule_line(rule: &AssociationRule, snapshot: &ClassifierSnapshot) -> RuleLine {
    RuleLine {
        id: rule.id.clone(),
        text: format!("{} (rule weight: {})", rule.describe(), rule.weight),
        weight: rule.weight,
        actions: action_counts(rule, snapshot),
    }
}

/// The action named on the WhyHint page: taken from the heaviest
/// single-condition rule behind the chosen hint when there is one.
fn trigger(hint: &DeliveredHint) -> Option<ActionCount> {
    let mut best: Option<&AssociationRule> = None;
    for r in &hint.chosen.contributing_rules {
        if r.conditions.len() == 1
            && r.conditions[0].feature.action().is_some()
            && best.is_none_or(|b| r.weight > b.weight)
        {
            best = Some(r);
        }
    }
    match best {
        Some(r) => {
            let a = r.conditions[0].feature.action()?;
            Some(ActionCount { action: a, count: hint.snapshot.count(a) })
        }
        None => hint.snapshot.triggering_action,
    }
}

struct Slots(Vec<(&'static str, String)>);

impl Slots {
    fn fill(&self, text: &str) -> String {
        let mut out = text.to_string();
        for (k, v) in &self.0 {
            out = out.replace(&format!("{{{k}}}"), v);
        }
        out
    }

    fn with_group(&self, label: Label) -> Slots {
        let mut v: Vec<_> = self.0.iter().filter(|(k, _)| *k != "group").cloned().collect();
        v.push(("group", label.group_name().to_string()));
        Slots(v)
    }
}

/// Renders one page for a delivered hint. Pure in its inputs.
pub fn generate_page(
    page: PageId,
    hint: Option<&DeliveredHint>,
    model: &ModelDocument,
    templates: &Templates,
) -> Result<PageContent, ExplainError> {
    let hint = hint.ok_or(ExplainError::NoActiveHint)?;
    let snap = &hint.snapshot;
    let trigger_text = trigger(hint)
        .map(|t| format!("Using {} {} {}", t.action.display_name(), t.count, times(t.count)))
        .unwrap_or_else(|| "your recent behavior".to_string());
    let slots = Slots(vec![
        ("group", snap.label.group_name().to_string()),
        ("trigger", trigger_text),
        ("hint", hint.chosen.item.list_label.clone()),
        ("provenance", model.provenance.description.clone()),
        ("training_users", model.provenance.training_users.to_string()),
        ("hlg_rules", model.rules.iter().filter(|r| r.consequent == Label::Hlg).count().to_string()),
        ("llg_rules", model.rules.iter().filter(|r| r.consequent == Label::Llg).count().to_string()),
    ]);
    let tpl = templates.pages.get(&page).ok_or_else(|| ExplainError::UnknownPage(page.to_string()))?;
    let mut blocks = Vec::new();
    for b in &tpl.blocks {
        blocks.push(match b {
            TemplateBlock::Text { text } => Block::Text { text: slots.fill(text) },
            TemplateBlock::Diagram { id, nodes } => {
                Block::Diagram { id: id.clone(), nodes: nodes.iter().map(|n| slots.fill(n)).collect() }
            }
            TemplateBlock::SatisfiedRules => Block::RuleList {
                rules: model
                    .rules
                    .iter()
                    .filter(|r| r.consequent == snap.label && snap.is_satisfied(&r.id))
                    .map(|r| rule_line(r, snap))
                    .collect(),
            },
            TemplateBlock::Score { group, satisfied_label, total_label, score_label } => {
                let s = slots.with_group(*group);
                let (sat, total) = (*snap.satisfied_weight.get(*group), *snap.totals.get(*group));
                Block::Score {
                    group: *group,
                    satisfied_label: s.fill(satisfied_label),
                    satisfied: sat,
                    total_label: s.fill(total_label),
                    total,
                    score_label: s.fill(score_label),
                    quotient: format_quotient(sat, total),
                    score: *snap.scores.get(*group),
                }
            }
            TemplateBlock::RankedHints => Block::RankedHints {
                hints: hint
                    .ranked
                    .iter()
                    .map(|r| RankedLine {
                        item: r.item.id.clone(),
                        text: format!("{} (ranking: {})", r.item.list_label, r.rank),
                        rank: r.rank,
                        chosen: r.item.id == hint.chosen.item.id,
                    })
                    .collect(),
            },
            TemplateBlock::ContributingRules => {
                Block::RuleList { rules: hint.chosen.contributing_rules.iter().map(|r| rule_line(r, snap)).collect() }
            }
            TemplateBlock::Summation => {
                let addends: Vec<u64> = hint.chosen.contributing_rules.iter().map(|r| u64::from(r.weight)).collect();
                let total: u64 = addends.iter().sum();
                let terms: Vec<String> = addends.iter().map(u64::to_string).collect();
                Block::Summation { text: format!("{} = {total}", terms.join(" + ")), addends, total }
            }
        });
    }
    let transitions = available_transitions(page)
        .into_iter()
        .map(|(to, kind)| Transition { to, kind, label: templates.title(to).to_string() })
        .collect();
    let back = page.parent().map(|to| BackLink { to, label: templates.back_label.clone() });
    Ok(PageContent {
        page,
        hint: hint.payload.hint,
        title: tpl.title.clone(),
        blocks,
        transitions,
        back,
        feedback_label: templates.feedback_label.clone(),
    })
}
