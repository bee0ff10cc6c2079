//! AC-3 stepping engine over binary constraint networks.
//!
//! A [`Network`] owns the variables, the binary constraints between them and
//! the two directed arcs each constraint induces. The six interaction tools of
//! the tutor map onto methods here:
//!
//! - [`Network::fine_step`] advances one micro-phase (select, test, revise) of
//!   the arc at the head of the queue.
//! - [`Network::direct_arc_click`] runs all three micro-phases on one arc.
//! - [`Network::auto_ac`] fine-steps until the queue drains.
//! - [`Network::domain_split`] and [`Network::backtrack`] manage the stack of
//!   alternative networks.
//! - [`Network::reset`] restores the freshly loaded problem.
//!
//! The arc queue is FIFO. It starts in constraint order with the arc of the
//! lexicographically smaller endpoint first, and pruning appends stale arcs to
//! the tail unless they are already queued.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problem::ConstraintExpr;

pub type Value = i64;
pub type Domain = BTreeSet<Value>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CspError {
    #[error("arc index {0} is out of range")]
    InvalidArc(usize),
    #[error("network is not in progress")]
    NotInProgress,
    #[error("arc {0} is already consistent")]
    ArcAlreadyConsistent(usize),
    #[error("invalid split subset: {0}")]
    InvalidSubset(String),
    #[error("domain splitting requires an arc-consistent network")]
    NotConsistent,
    #[error("no alternative network to backtrack to")]
    EmptyStack,
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("constraint {index}: {reason}")]
    InvalidConstraint { index: usize, reason: String },
}

impl CspError {
    pub fn code(&self) -> &'static str {
        match self {
            CspError::InvalidArc(_) => "InvalidArc",
            CspError::NotInProgress => "NotInProgress",
            CspError::ArcAlreadyConsistent(_) => "ArcAlreadyConsistent",
            CspError::InvalidSubset(_) => "InvalidSubset",
            CspError::NotConsistent => "NotConsistent",
            CspError::EmptyStack => "EmptyStack",
            CspError::UnknownVariable(_) => "UnknownVariable",
            CspError::DuplicateVariable(_) => "DuplicateVariable",
            CspError::InvalidConstraint { .. } => "InvalidConstraint",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    InProgress,
    Consistent,
    DomainWipeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArcState {
    Untested,
    Consistent,
    Stale,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub domain: Domain,
}

impl Variable {
    pub fn new(name: impl Into<String>, domain: impl IntoIterator<Item = Value>) -> Self {
        Variable { name: name.into(), domain: domain.into_iter().collect() }
    }
}

/// The allowed value pairs of a binary constraint, oriented as `scope`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Extensional(BTreeSet<(Value, Value)>),
    Comparison(ConstraintExpr),
}

impl Relation {
    pub fn allows(&self, first: Value, second: Value) -> bool {
        match self {
            Relation::Extensional(pairs) => pairs.contains(&(first, second)),
            Relation::Comparison(expr) => expr.evaluate(first, second),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    pub scope: (String, String),
    pub relation: Relation,
    /// Display text, e.g. the source expression.
    pub label: String,
}

impl Constraint {
    pub fn extensional(
        first: impl Into<String>,
        second: impl Into<String>,
        pairs: impl IntoIterator<Item = (Value, Value)>,
    ) -> Self {
        let scope = (first.into(), second.into());
        let label = format!("{}-{}", scope.0, scope.1);
        Constraint { scope, relation: Relation::Extensional(pairs.into_iter().collect()), label }
    }

    pub fn comparison(expr: ConstraintExpr) -> Self {
        Constraint {
            scope: (expr.lhs.clone(), expr.rhs.clone()),
            label: expr.to_string(),
            relation: Relation::Comparison(expr),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arc {
    /// Index of the variable whose domain this arc revises.
    pub variable: usize,
    /// Index of the other endpoint.
    pub other: usize,
    pub constraint: usize,
    pub state: ArcState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StepKind {
    ArcSelected,
    ArcTested,
    ValuesRemoved,
    QueueEmpty,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub kind: StepKind,
    pub arc: Option<usize>,
    pub removed: Vec<(String, Value)>,
}

impl StepOutcome {
    fn new(kind: StepKind, arc: Option<usize>) -> Self {
        StepOutcome { kind, arc, removed: Vec::new() }
    }

    fn revised(arc: usize, removed: Vec<(String, Value)>) -> Self {
        let kind = if removed.is_empty() { StepKind::ArcTested } else { StepKind::ValuesRemoved };
        StepOutcome { kind, arc: Some(arc), removed }
    }
}

/// Micro-phase of the arc at the head of the queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Phase {
    #[default]
    Idle,
    Selected,
    Tested,
}

/// An alternative network kept for backtracking.
#[derive(Debug, Clone, PartialEq, Eq)]
struct SplitSnapshot {
    domains: Vec<Domain>,
    arc_states: Vec<ArcState>,
    queue: VecDeque<usize>,
    description: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    name: String,
    variables: Vec<Variable>,
    initial: Vec<Domain>,
    constraints: Vec<Constraint>,
    arcs: Vec<Arc>,
    queue: VecDeque<usize>,
    phase: Phase,
    split_stack: Vec<SplitSnapshot>,
    status: Status,
}

impl Network {
    /// Builds a network and its canonical arc queue.
    ///
    /// Extensional pairs must lie within the cross-product of the initial
    /// domains.
    pub fn new(
        name: impl Into<String>,
        variables: Vec<Variable>,
        constraints: Vec<Constraint>,
    ) -> Result<Self, CspError> {
        for (i, v) in variables.iter().enumerate() {
            if variables[..i].iter().any(|w| w.name == v.name) {
                return Err(CspError::DuplicateVariable(v.name.clone()));
            }
        }
        let index_of = |n: &str| variables.iter().position(|v| v.name == n);
        let mut arcs = Vec::with_capacity(constraints.len() * 2);
        for (ci, c) in constraints.iter().enumerate() {
            let a = index_of(&c.scope.0).ok_or_else(|| CspError::UnknownVariable(c.scope.0.clone()))?;
            let b = index_of(&c.scope.1).ok_or_else(|| CspError::UnknownVariable(c.scope.1.clone()))?;
            if a == b {
                return Err(CspError::InvalidConstraint {
                    index: ci,
                    reason: format!("scope names one variable twice (`{}`)", c.scope.0),
                });
            }
            if let Relation::Extensional(pairs) = &c.relation {
                if let Some((x, y)) =
                    pairs.iter().find(|(x, y)| !variables[a].domain.contains(x) || !variables[b].domain.contains(y))
                {
                    return Err(CspError::InvalidConstraint {
                        index: ci,
                        reason: format!("pair ({x}, {y}) lies outside the declared domains"),
                    });
                }
            }
            let (first, second) = if variables[a].name <= variables[b].name { (a, b) } else { (b, a) };
            for (variable, other) in [(first, second), (second, first)] {
                arcs.push(Arc { variable, other, constraint: ci, state: ArcState::Untested });
            }
        }
        let initial = variables.iter().map(|v| v.domain.clone()).collect();
        let mut net = Network {
            name: name.into(),
            queue: (0..arcs.len()).collect(),
            variables,
            initial,
            constraints,
            arcs,
            phase: Phase::Idle,
            split_stack: Vec::new(),
            status: Status::InProgress,
        };
        net.refresh_wipeout();
        Ok(net)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn queue(&self) -> impl Iterator<Item = usize> + '_ {
        self.queue.iter().copied()
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn split_depth(&self) -> usize {
        self.split_stack.len()
    }

    pub fn initial_domain(&self, variable: usize) -> &Domain {
        &self.initial[variable]
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn domain(&self, name: &str) -> Option<&Domain> {
        self.variable_index(name).map(|i| &self.variables[i].domain)
    }

    pub fn domains(&self) -> Vec<Domain> {
        self.variables.iter().map(|v| v.domain.clone()).collect()
    }

    /// Whether `value` of the arc's variable and `other_value` of the other
    /// endpoint satisfy the arc's constraint.
    pub fn arc_allows(&self, arc: usize, value: Value, other_value: Value) -> bool {
        let a = &self.arcs[arc];
        let c = &self.constraints[a.constraint];
        if self.variables[a.variable].name == c.scope.0 {
            c.relation.allows(value, other_value)
        } else {
            c.relation.allows(other_value, value)
        }
    }

    /// Replaces the queue with a permutation of its current contents.
    pub fn reorder_queue(&mut self, order: &[usize]) -> Result<(), CspError> {
        let mut current: Vec<usize> = self.queue.iter().copied().collect();
        let mut proposed = order.to_vec();
        current.sort_unstable();
        proposed.sort_unstable();
        if current != proposed {
            return Err(CspError::InvalidArc(
                order.iter().copied().find(|i| !self.queue.contains(i)).unwrap_or(usize::MAX),
            ));
        }
        self.queue = order.iter().copied().collect();
        self.phase = Phase::Idle;
        Ok(())
    }

    fn refresh_wipeout(&mut self) {
        if self.variables.iter().any(|v| v.domain.is_empty()) {
            self.status = Status::DomainWipeout;
        }
    }

    fn arcs_touching(&self, variable: usize) -> Vec<usize> {
        (0..self.arcs.len()).filter(|&i| self.arcs[i].variable == variable || self.arcs[i].other == variable).collect()
    }

    fn enqueue(&mut self, arc: usize) {
        if !self.queue.contains(&arc) {
            self.queue.push_back(arc);
        }
    }

    /// Removes every value of the arc's variable that has no support in the
    /// other endpoint's current domain.
    ///
    /// When something is removed, arcs of other constraints that point at the
    /// revised variable become stale and are appended to the queue. The
    /// revised arc itself is marked consistent; its queue position is left
    /// alone.
    pub fn revise(&mut self, arc: usize) -> Result<Vec<(String, Value)>, CspError> {
        let (variable, other, constraint) = {
            let a = self.arcs.get(arc).ok_or(CspError::InvalidArc(arc))?;
            (a.variable, a.other, a.constraint)
        };
        let unsupported: Vec<Value> = self.variables[variable]
            .domain
            .iter()
            .copied()
            .filter(|&v| !self.variables[other].domain.iter().any(|&w| self.arc_allows(arc, v, w)))
            .collect();
        let name = self.variables[variable].name.clone();
        for v in &unsupported {
            self.variables[variable].domain.remove(v);
        }
        self.arcs[arc].state = ArcState::Consistent;
        if !unsupported.is_empty() {
            let stale: Vec<usize> = (0..self.arcs.len())
                .filter(|&i| self.arcs[i].other == variable && self.arcs[i].constraint != constraint)
                .collect();
            for i in stale {
                self.arcs[i].state = ArcState::Stale;
                self.enqueue(i);
            }
            self.refresh_wipeout();
        }
        Ok(unsupported.into_iter().map(|v| (name.clone(), v)).collect())
    }

    /// Advances one micro-phase of the arc at the head of the queue.
    pub fn fine_step(&mut self) -> Result<StepOutcome, CspError> {
        if self.status != Status::InProgress {
            return Err(CspError::NotInProgress);
        }
        let Some(&head) = self.queue.front() else {
            self.status = Status::Consistent;
            return Ok(StepOutcome::new(StepKind::QueueEmpty, None));
        };
        match self.phase {
            Phase::Idle => {
                self.phase = Phase::Selected;
                Ok(StepOutcome::new(StepKind::ArcSelected, Some(head)))
            }
            Phase::Selected => {
                self.phase = Phase::Tested;
                Ok(StepOutcome::new(StepKind::ArcTested, Some(head)))
            }
            Phase::Tested => {
                self.queue.pop_front();
                self.phase = Phase::Idle;
                let removed = self.revise(head)?;
                Ok(StepOutcome::revised(head, removed))
            }
        }
    }

    /// Selects, tests and revises `arc` in one call.
    pub fn direct_arc_click(&mut self, arc: usize) -> Result<StepOutcome, CspError> {
        if self.status != Status::InProgress {
            return Err(CspError::NotInProgress);
        }
        let state = self.arcs.get(arc).ok_or(CspError::InvalidArc(arc))?.state;
        let position = self.queue.iter().position(|&i| i == arc);
        if state == ArcState::Consistent && position.is_none() {
            return Err(CspError::ArcAlreadyConsistent(arc));
        }
        if let Some(p) = position {
            self.queue.remove(p);
            if p == 0 {
                self.phase = Phase::Idle;
            }
        }
        let removed = self.revise(arc)?;
        Ok(StepOutcome::revised(arc, removed))
    }

    /// Fine-steps until the queue drains or a domain empties; returns the
    /// step stream.
    pub fn auto_ac(&mut self) -> Result<Vec<StepOutcome>, CspError> {
        if self.status != Status::InProgress {
            return Err(CspError::NotInProgress);
        }
        let mut steps = Vec::new();
        while self.status == Status::InProgress {
            let step = self.fine_step()?;
            let done = step.kind == StepKind::QueueEmpty;
            steps.push(step);
            if done {
                break;
            }
        }
        Ok(steps)
    }

    /// Restricts `variable` to `subset` and keeps the complement on the
    /// backtrack stack.
    pub fn domain_split(&mut self, variable: &str, subset: &Domain) -> Result<(), CspError> {
        if self.status != Status::Consistent {
            return Err(CspError::NotConsistent);
        }
        let vi = self.variable_index(variable).ok_or_else(|| CspError::UnknownVariable(variable.to_string()))?;
        let domain = &self.variables[vi].domain;
        if subset.is_empty() {
            return Err(CspError::InvalidSubset("subset is empty".into()));
        }
        if let Some(v) = subset.iter().find(|v| !domain.contains(v)) {
            return Err(CspError::InvalidSubset(format!("{v} is not in the domain of {variable}")));
        }
        if subset.len() == domain.len() {
            return Err(CspError::InvalidSubset("subset equals the whole domain".into()));
        }
        let complement: Domain = domain.difference(subset).copied().collect();
        let touching = self.arcs_touching(vi);

        let mut alt_domains = self.domains();
        alt_domains[vi] = complement.clone();
        let mut alt_states: Vec<ArcState> = self.arcs.iter().map(|a| a.state).collect();
        for &i in &touching {
            alt_states[i] = ArcState::Stale;
        }
        self.split_stack.push(SplitSnapshot {
            domains: alt_domains,
            arc_states: alt_states,
            queue: touching.iter().copied().collect(),
            description: format!("{variable} in {}", format_domain(&complement)),
        });

        self.variables[vi].domain = subset.clone();
        self.queue.clear();
        for &i in &touching {
            self.arcs[i].state = ArcState::Stale;
            self.queue.push_back(i);
        }
        self.phase = Phase::Idle;
        self.status = Status::InProgress;
        Ok(())
    }

    /// Makes the most recently stored alternative network active.
    pub fn backtrack(&mut self) -> Result<(), CspError> {
        let snap = self.split_stack.pop().ok_or(CspError::EmptyStack)?;
        for (var, dom) in self.variables.iter_mut().zip(snap.domains) {
            var.domain = dom;
        }
        for (arc, state) in self.arcs.iter_mut().zip(snap.arc_states) {
            arc.state = state;
        }
        self.queue = snap.queue;
        self.phase = Phase::Idle;
        self.status = Status::InProgress;
        self.refresh_wipeout();
        Ok(())
    }

    /// Descriptions of the stacked alternatives, bottom first.
    pub fn alternatives(&self) -> Vec<&str> {
        self.split_stack.iter().map(|s| s.description.as_str()).collect()
    }

    pub fn reset(&mut self) {
        for (var, dom) in self.variables.iter_mut().zip(&self.initial) {
            var.domain = dom.clone();
        }
        for arc in &mut self.arcs {
            arc.state = ArcState::Untested;
        }
        self.queue = (0..self.arcs.len()).collect();
        self.phase = Phase::Idle;
        self.split_stack.clear();
        self.status = Status::InProgress;
        self.refresh_wipeout();
    }

    pub fn snapshot(&self) -> NetworkSnapshot {
        NetworkSnapshot {
            domains: self
                .variables
                .iter()
                .map(|v| NamedDomain { name: v.name.clone(), domain: v.domain.iter().copied().collect() })
                .collect(),
            arc_states: self.arcs.iter().map(|a| a.state).collect(),
            queue: self.queue.iter().copied().collect(),
            split_depth: self.split_stack.len(),
            status: self.status,
        }
    }

    pub fn view(&self) -> NetworkView {
        let head = self.queue.front().copied();
        NetworkView {
            name: self.name.clone(),
            status: self.status,
            variables: self
                .variables
                .iter()
                .zip(&self.initial)
                .map(|(v, init)| VariableView {
                    name: v.name.clone(),
                    domain: v.domain.iter().copied().collect(),
                    removed: init.difference(&v.domain).copied().collect(),
                })
                .collect(),
            arcs: self
                .arcs
                .iter()
                .enumerate()
                .map(|(i, a)| ArcView {
                    id: i,
                    variable: self.variables[a.variable].name.clone(),
                    other: self.variables[a.other].name.clone(),
                    constraint: self.constraints[a.constraint].label.clone(),
                    state: a.state,
                    queued: self.queue.contains(&i),
                })
                .collect(),
            queue: self.queue.iter().copied().collect(),
            selected: head.filter(|_| self.phase != Phase::Idle),
            phase: self.phase,
            alternatives: self.alternatives().into_iter().map(String::from).collect(),
        }
    }
}

pub fn format_domain(domain: &Domain) -> String {
    let items: Vec<String> = domain.iter().map(|v| v.to_string()).collect();
    format!("{{{}}}", items.join(", "))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedDomain {
    pub name: String,
    pub domain: Vec<Value>,
}

/// Serializable state of a network: the snapshot document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSnapshot {
    pub domains: Vec<NamedDomain>,
    pub arc_states: Vec<ArcState>,
    pub queue: Vec<usize>,
    pub split_depth: usize,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableView {
    pub name: String,
    pub domain: Vec<Value>,
    pub removed: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArcView {
    pub id: usize,
    pub variable: String,
    pub other: String,
    pub constraint: String,
    pub state: ArcState,
    pub queued: bool,
}

/// What a client needs to draw the network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkView {
    pub name: String,
    pub status: Status,
    pub variables: Vec<VariableView>,
    pub arcs: Vec<ArcView>,
    pub queue: Vec<usize>,
    pub selected: Option<usize>,
    pub phase: Phase,
    pub alternatives: Vec<String>,
}

impl fmt::Display for Network {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> =
            self.variables.iter().map(|v| format!("{}={}", v.name, format_domain(&v.domain))).collect();
        write!(f, "{} [{:?}] {}", self.name, self.status, parts.join(" "))
    }
}
