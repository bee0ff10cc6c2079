//! Why/how explanation pages for a delivered hint, the navigation between
//! them and usage telemetry.

mod pages;
mod telemetry;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use pages::{
    format_quotient, generate_page, BackLink, Block, PageContent, PageTemplate, RankedLine, RuleLine, TemplateBlock,
    Templates,
};
pub use telemetry::{compute_usage_stats, ExplanationEvent, ExplanationKind, Telemetry, UsageReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PageId {
    WhyHint,
    WhyLow,
    WhyRules,
    HowScore,
    HowHint,
    HowRank,
}

impl PageId {
    pub const ALL: [PageId; 6] =
        [PageId::WhyHint, PageId::WhyLow, PageId::WhyRules, PageId::HowScore, PageId::HowHint, PageId::HowRank];

    pub const TABS: [PageId; 3] = [PageId::WhyHint, PageId::WhyLow, PageId::WhyRules];

    pub fn as_str(self) -> &'static str {
        match self {
            PageId::WhyHint => "WhyHint",
            PageId::WhyLow => "WhyLow",
            PageId::WhyRules => "WhyRules",
            PageId::HowScore => "HowScore",
            PageId::HowHint => "HowHint",
            PageId::HowRank => "HowRank",
        }
    }

    pub fn is_tab(self) -> bool {
        Self::TABS.contains(&self)
    }

    /// The page a how-page was drilled into from.
    pub fn parent(self) -> Option<PageId> {
        match self {
            PageId::HowScore | PageId::HowHint => Some(PageId::WhyLow),
            PageId::HowRank => Some(PageId::HowHint),
            _ => None,
        }
    }

    pub fn children(self) -> &'static [PageId] {
        match self {
            PageId::WhyLow => &[PageId::HowScore, PageId::HowHint],
            PageId::HowHint => &[PageId::HowRank],
            _ => &[],
        }
    }
}

impl fmt::Display for PageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PageId {
    type Err = ExplainError;

    fn from_str(s: &str) -> Result<Self, ExplainError> {
        PageId::ALL.into_iter().find(|p| p.as_str() == s).ok_or_else(|| ExplainError::UnknownPage(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TransitionKind {
    Tab,
    Drill,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub to: PageId,
    pub kind: TransitionKind,
    pub label: String,
}

/// The page graph: a tab links to the other tabs and to its drill-downs,
/// a how-page to its own drill-downs only. Returning to a parent is a
/// history move (see [`PageContent::back`]), not an edge.
pub fn available_transitions(page: PageId) -> Vec<(PageId, TransitionKind)> {
    let tabs = PageId::TABS.into_iter().filter(|&t| page.is_tab() && t != page);
    tabs.map(|t| (t, TransitionKind::Tab)).chain(page.children().iter().map(|&c| (c, TransitionKind::Drill))).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExplainError {
    #[error("no hint has been delivered yet")]
    NoActiveHint,
    #[error("unknown page `{0}`")]
    UnknownPage(String),
    #[error("telemetry out of order: {0}")]
    MalformedNesting(String),
    #[error("invalid page templates: {0}")]
    MalformedTemplates(String),
}

impl ExplainError {
    pub fn code(&self) -> &'static str {
        match self {
            ExplainError::NoActiveHint => "NoActiveHint",
            ExplainError::UnknownPage(_) => "UnknownPage",
            ExplainError::MalformedNesting(_) => "MalformedNesting",
            ExplainError::MalformedTemplates(_) => "MalformedTemplates",
        }
    }
}
