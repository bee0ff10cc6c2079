//! Problem files, constraint expressions and network lowering.
//!
//! Problem documents are JSON:
//!
//! ```json
//! {
//!   "name": "chain",
//!   "variables": [{"name": "A", "domain": [1, 2, 3]}, {"name": "B", "domain": [1, 2, 3]}],
//!   "constraints": [{"expr": "A < B"}, {"scope": ["A", "B"], "pairs": [[1, 2]]}]
//! }
//! ```
//!
//! Expressions follow `VAR op VAR (("+"|"-") INT)?` with `op` one of
//! `< <= > >= = !=`. The offset applies to the right-hand variable, so
//! `A != B + 1` holds for `(a, b)` iff `a != b + 1`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::csp::{Constraint, Network, Relation, Value, Variable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
}

impl Comparator {
    pub const ALL: [Comparator; 6] =
        [Comparator::Lt, Comparator::Le, Comparator::Gt, Comparator::Ge, Comparator::Eq, Comparator::Ne];

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
            Comparator::Eq => "=",
            Comparator::Ne => "!=",
        }
    }

    pub fn holds(self, a: Value, b: Value) -> bool {
        match self {
            Comparator::Lt => a < b,
            Comparator::Le => a <= b,
            Comparator::Gt => a > b,
            Comparator::Ge => a >= b,
            Comparator::Eq => a == b,
            Comparator::Ne => a != b,
        }
    }
}

impl FromStr for Comparator {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Comparator::ALL.into_iter().find(|c| c.symbol() == s).ok_or(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConstraintExpr {
    pub lhs: String,
    pub op: Comparator,
    pub rhs: String,
    pub offset: Value,
}

impl ConstraintExpr {
    pub fn new(lhs: impl Into<String>, op: Comparator, rhs: impl Into<String>, offset: Value) -> Self {
        ConstraintExpr { lhs: lhs.into(), op, rhs: rhs.into(), offset }
    }

    /// `lhs op rhs + offset` for the given values.
    pub fn evaluate(&self, lhs: Value, rhs: Value) -> bool {
        self.op.holds(lhs, rhs + self.offset)
    }
}

impl fmt::Display for ConstraintExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.op.symbol(), self.rhs)?;
        match self.offset {
            0 => Ok(()),
            o if o > 0 => write!(f, " + {o}"),
            o => write!(f, " - {}", o.unsigned_abs()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    SyntaxError { offset: usize, message: String },
    #[error("unknown operator `{operator}` at byte {offset}")]
    UnknownOperator { offset: usize, operator: String },
    #[error("`{0}` is compared with itself")]
    SelfReference(String),
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        while let Some(c) = self.text[self.pos..].chars().next() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> &'a str {
        let start = self.pos;
        while let Some(c) = self.text[self.pos..].chars().next() {
            if !pred(c) {
                break;
            }
            self.pos += c.len_utf8();
        }
        &self.text[start..self.pos]
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn error(&self, message: impl Into<String>) -> ExprError {
        ExprError::SyntaxError { offset: self.pos, message: message.into() }
    }

    fn identifier(&mut self) -> Result<&'a str, ExprError> {
        self.skip_ws();
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {
                Ok(self.take_while(|c| c.is_ascii_alphanumeric() || c == '_'))
            }
            Some(c) => Err(self.error(format!("expected a variable name, found `{c}`"))),
            None => Err(self.error("expected a variable name, found end of input")),
        }
    }
}

/// Parses `VAR op VAR (("+"|"-") INT)?`.
pub fn parse_expression(text: &str) -> Result<ConstraintExpr, ExprError> {
    let mut cur = Cursor { text, pos: 0 };
    let lhs = cur.identifier()?;
    cur.skip_ws();
    let op_start = cur.pos;
    let op_text = cur.take_while(|c| matches!(c, '<' | '>' | '=' | '!'));
    if op_text.is_empty() {
        return Err(cur.error("expected a comparison operator"));
    }
    let op = op_text
        .parse::<Comparator>()
        .map_err(|_| ExprError::UnknownOperator { offset: op_start, operator: op_text.to_string() })?;
    let rhs = cur.identifier()?;
    cur.skip_ws();
    let offset = match cur.peek() {
        None => 0,
        Some(sign @ ('+' | '-')) => {
            cur.pos += 1;
            cur.skip_ws();
            let digits_at = cur.pos;
            let digits = cur.take_while(|c| c.is_ascii_digit());
            if digits.is_empty() {
                return Err(cur.error("expected an integer offset"));
            }
            let magnitude: Value = digits.parse().map_err(|_| ExprError::SyntaxError {
                offset: digits_at,
                message: "offset does not fit in 64 bits".into(),
            })?;
            if sign == '-' {
                -magnitude
            } else {
                magnitude
            }
        }
        Some(c) => return Err(cur.error(format!("unexpected `{c}`"))),
    };
    cur.skip_ws();
    if let Some(c) = cur.peek() {
        return Err(cur.error(format!("unexpected trailing `{c}`")));
    }
    if lhs == rhs {
        return Err(ExprError::SelfReference(lhs.to_string()));
    }
    Ok(ConstraintExpr::new(lhs, op, rhs, offset))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProblemError {
    #[error("malformed problem document: {0}")]
    MalformedDocument(String),
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{0}` has an empty domain")]
    EmptyDomain(String),
    #[error("constraint {index}: {source}")]
    Expression { index: usize, source: ExprError },
    #[error("constraint {index}: {reason}")]
    InvalidConstraint { index: usize, reason: String },
}

impl ProblemError {
    pub fn code(&self) -> &'static str {
        match self {
            ProblemError::MalformedDocument(_) => "MalformedDocument",
            ProblemError::DuplicateVariable(_) => "DuplicateVariable",
            ProblemError::UnknownVariable(_) => "UnknownVariable",
            ProblemError::EmptyDomain(_) => "EmptyDomain",
            ProblemError::Expression { source, .. } => match source {
                ExprError::SyntaxError { .. } => "SyntaxError",
                ExprError::UnknownOperator { .. } => "UnknownOperator",
                ExprError::SelfReference(_) => "SelfReference",
            },
            ProblemError::InvalidConstraint { .. } => "InvalidConstraint",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub domain: Vec<Value>,
}

/// Constraint as written in a problem document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConstraintDoc {
    Expr { expr: String },
    Pairs { scope: [String; 2], pairs: Vec<[Value; 2]> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemDocument {
    pub name: String,
    pub variables: Vec<VariableSpec>,
    pub constraints: Vec<ConstraintDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConstraintSpec {
    Expression(ConstraintExpr),
    Extensional { scope: (String, String), pairs: BTreeSet<(Value, Value)> },
}

impl ConstraintSpec {
    pub fn scope(&self) -> (&str, &str) {
        match self {
            ConstraintSpec::Expression(e) => (&e.lhs, &e.rhs),
            ConstraintSpec::Extensional { scope, .. } => (&scope.0, &scope.1),
        }
    }
}

/// A validated problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProblemSpec {
    pub name: String,
    pub variables: Vec<VariableSpec>,
    pub constraints: Vec<ConstraintSpec>,
}

impl ProblemSpec {
    pub fn from_document(doc: ProblemDocument) -> Result<Self, ProblemError> {
        for (i, v) in doc.variables.iter().enumerate() {
            if doc.variables[..i].iter().any(|w| w.name == v.name) {
                return Err(ProblemError::DuplicateVariable(v.name.clone()));
            }
            if v.domain.is_empty() {
                return Err(ProblemError::EmptyDomain(v.name.clone()));
            }
        }
        let domain_of = |name: &str| {
            doc.variables
                .iter()
                .find(|v| v.name == name)
                .map(|v| &v.domain)
                .ok_or_else(|| ProblemError::UnknownVariable(name.to_string()))
        };
        let mut constraints = Vec::with_capacity(doc.constraints.len());
        for (index, c) in doc.constraints.iter().enumerate() {
            let spec = match c {
                ConstraintDoc::Expr { expr } => ConstraintSpec::Expression(
                    parse_expression(expr).map_err(|source| ProblemError::Expression { index, source })?,
                ),
                ConstraintDoc::Pairs { scope, pairs } => {
                    if scope[0] == scope[1] {
                        return Err(ProblemError::InvalidConstraint {
                            index,
                            reason: format!("scope names `{}` twice", scope[0]),
                        });
                    }
                    let (da, db) = (domain_of(&scope[0])?, domain_of(&scope[1])?);
                    if let Some([a, b]) = pairs.iter().find(|[a, b]| !da.contains(a) || !db.contains(b)) {
                        return Err(ProblemError::InvalidConstraint {
                            index,
                            reason: format!("pair ({a}, {b}) lies outside the declared domains"),
                        });
                    }
                    ConstraintSpec::Extensional {
                        scope: (scope[0].clone(), scope[1].clone()),
                        pairs: pairs.iter().map(|[a, b]| (*a, *b)).collect(),
                    }
                }
            };
            let (a, b) = spec.scope();
            domain_of(a)?;
            domain_of(b)?;
            constraints.push(spec);
        }
        Ok(ProblemSpec { name: doc.name, variables: doc.variables, constraints })
    }

    pub fn to_document(&self) -> ProblemDocument {
        ProblemDocument {
            name: self.name.clone(),
            variables: self.variables.clone(),
            constraints: self
                .constraints
                .iter()
                .map(|c| match c {
                    ConstraintSpec::Expression(e) => ConstraintDoc::Expr { expr: e.to_string() },
                    ConstraintSpec::Extensional { scope, pairs } => ConstraintDoc::Pairs {
                        scope: [scope.0.clone(), scope.1.clone()],
                        pairs: pairs.iter().map(|&(a, b)| [a, b]).collect(),
                    },
                })
                .collect(),
        }
    }
}

/// Parses and validates a problem document.
pub fn load_problem(text: &str) -> Result<ProblemSpec, ProblemError> {
    let doc: ProblemDocument =
        serde_json::from_str(text).map_err(|e| ProblemError::MalformedDocument(e.to_string()))?;
    ProblemSpec::from_document(doc)
}

/// Every pair of the two domains accepted by `expr`.
pub fn lower(expr: &ConstraintExpr, lhs: &[Value], rhs: &[Value]) -> BTreeSet<(Value, Value)> {
    lhs.iter().flat_map(|&a| rhs.iter().map(move |&b| (a, b))).filter(|&(a, b)| expr.evaluate(a, b)).collect()
}

/// Lowers every constraint to its allowed pairs and builds the network.
pub fn compile(spec: &ProblemSpec) -> Network {
    let domain_of = |name: &str| -> &[Value] {
        &spec.variables.iter().find(|v| v.name == name).expect("validated problem references declared variables").domain
    };
    let variables = spec.variables.iter().map(|v| Variable::new(v.name.clone(), v.domain.iter().copied())).collect();
    let constraints = spec
        .constraints
        .iter()
        .map(|c| match c {
            ConstraintSpec::Expression(e) => Constraint {
                scope: (e.lhs.clone(), e.rhs.clone()),
                relation: Relation::Extensional(lower(e, domain_of(&e.lhs), domain_of(&e.rhs))),
                label: e.to_string(),
            },
            ConstraintSpec::Extensional { scope, pairs } => {
                Constraint::extensional(scope.0.clone(), scope.1.clone(), pairs.iter().copied())
            }
        })
        .collect();
    Network::new(spec.name.clone(), variables, constraints).expect("validated problem compiles")
}

/// Writes a network back out as a problem document over its initial
/// domains, with every constraint in extensional form.
pub fn network_to_document(net: &Network) -> ProblemDocument {
    let all = |c: &Constraint, a: &BTreeSet<Value>, b: &BTreeSet<Value>| -> Vec<[Value; 2]> {
        a.iter()
            .flat_map(|&x| b.iter().map(move |&y| (x, y)))
            .filter(|&(x, y)| c.relation.allows(x, y))
            .map(|(x, y)| [x, y])
            .collect()
    };
    ProblemDocument {
        name: net.name().to_string(),
        variables: net
            .variables()
            .iter()
            .enumerate()
            .map(|(i, v)| VariableSpec {
                name: v.name.clone(),
                domain: net.initial_domain(i).iter().copied().collect(),
            })
            .collect(),
        constraints: net
            .constraints()
            .iter()
            .map(|c| {
                let a = net.initial_domain(net.variable_index(&c.scope.0).unwrap());
                let b = net.initial_domain(net.variable_index(&c.scope.1).unwrap());
                ConstraintDoc::Pairs { scope: [c.scope.0.clone(), c.scope.1.clone()], pairs: all(c, a, b) }
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_grammar_instances() {
        assert_eq!(parse_expression("A < B").unwrap(), ConstraintExpr::new("A", Comparator::Lt, "B", 0));
        assert_eq!(parse_expression("A != B + 1").unwrap(), ConstraintExpr::new("A", Comparator::Ne, "B", 1));
        assert_eq!(parse_expression("  x_1>=y2-3 ").unwrap(), ConstraintExpr::new("x_1", Comparator::Ge, "y2", -3));
        assert_eq!(parse_expression("A=B").unwrap().op, Comparator::Eq);
    }

    #[test]
    fn expression_errors() {
        assert_eq!(parse_expression("A < A"), Err(ExprError::SelfReference("A".into())));
        assert_eq!(parse_expression("A <> B"), Err(ExprError::UnknownOperator { offset: 2, operator: "<>".into() }));
        assert!(matches!(parse_expression("A B"), Err(ExprError::SyntaxError { offset: 2, .. })));
        assert!(matches!(parse_expression("A < B +"), Err(ExprError::SyntaxError { offset: 7, .. })));
        assert!(matches!(parse_expression("A < 3"), Err(ExprError::SyntaxError { offset: 4, .. })));
        assert!(matches!(parse_expression("A < B * 2"), Err(ExprError::SyntaxError { offset: 6, .. })));
    }

    #[test]
    fn display_round_trips() {
        for text in ["A < B", "A != B + 1", "A >= B - 2"] {
            assert_eq!(parse_expression(text).unwrap().to_string(), text);
        }
    }

    const TWO: &str = r#"{"name":"two","variables":[{"name":"A","domain":[1,2]},{"name":"B","domain":[1,2]}],
        "constraints":[{"expr":"A < B"}]}"#;

    #[test]
    fn loads_and_compiles() {
        let spec = load_problem(TWO).unwrap();
        assert_eq!(spec.constraints.len(), 1);
        let net = compile(&spec);
        assert_eq!(net.arcs().len(), 2);
        assert_eq!(net.constraints()[0].relation, Relation::Extensional([(1, 2)].into_iter().collect()));
    }

    #[test]
    fn lowering_not_equal() {
        let e = parse_expression("A != B").unwrap();
        let expected: BTreeSet<_> = [(1, 1), (1, 2), (2, 1), (2, 2)].into_iter().filter(|(a, b)| a != b).collect();
        assert_eq!(lower(&e, &[1, 2], &[1, 2]), expected);
        assert_eq!(expected, [(1, 2), (2, 1)].into_iter().collect());
    }

    #[test]
    fn extensional_passes_through() {
        let doc = r#"{"name":"p","variables":[{"name":"A","domain":[1,2]},{"name":"B","domain":[1,2]}],
            "constraints":[{"scope":["A","B"],"pairs":[[1,1],[2,1]]}]}"#;
        let net = compile(&load_problem(doc).unwrap());
        assert_eq!(net.constraints()[0].relation, Relation::Extensional([(1, 1), (2, 1)].into_iter().collect()));
    }

    #[test]
    fn load_errors() {
        let unknown = r#"{"name":"p","variables":[{"name":"A","domain":[1]},{"name":"B","domain":[1]}],
            "constraints":[{"expr":"A < C"}]}"#;
        assert_eq!(load_problem(unknown), Err(ProblemError::UnknownVariable("C".into())));
        let empty = r#"{"name":"p","variables":[{"name":"A","domain":[]}],"constraints":[]}"#;
        assert_eq!(load_problem(empty), Err(ProblemError::EmptyDomain("A".into())));
        let dup = r#"{"name":"p","variables":[{"name":"A","domain":[1]},{"name":"A","domain":[2]}],"constraints":[]}"#;
        assert_eq!(load_problem(dup), Err(ProblemError::DuplicateVariable("A".into())));
        assert_eq!(load_problem("{").unwrap_err().code(), "MalformedDocument");
        let self_ref = r#"{"name":"p","variables":[{"name":"A","domain":[1]}],"constraints":[{"expr":"A < A"}]}"#;
        assert_eq!(load_problem(self_ref).unwrap_err().code(), "SelfReference");
        let out = r#"{"name":"p","variables":[{"name":"A","domain":[1]},{"name":"B","domain":[1]}],
            "constraints":[{"scope":["A","B"],"pairs":[[1,5]]}]}"#;
        assert_eq!(load_problem(out).unwrap_err().code(), "InvalidConstraint");
    }
}
