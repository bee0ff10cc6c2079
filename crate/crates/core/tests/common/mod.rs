#![allow(dead_code)]

use axum::body::Body;
use axum::http::{Method, Request};
use axum::Router;
use http_body_util::BodyExt;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

use acsp::csp::{Constraint, Network, Value as Val, Variable};
use acsp::interaction::{ActionEvent, ActionKind};
use acsp::problem::{Comparator, ConstraintExpr};

/// One in-process request; returns the status and the body (JSON when it
/// parses, otherwise a string).
pub async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (u16, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status().as_u16();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let value =
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into_owned()));
    (status, value)
}

// Test-side semantics, kept apart from the engine's own comparator code.
pub fn allowed(op: Comparator, offset: Val, a: Val, b: Val) -> bool {
    let b = b + offset;
    match op {
        Comparator::Lt => a < b,
        Comparator::Le => a <= b,
        Comparator::Gt => a > b,
        Comparator::Ge => a >= b,
        Comparator::Eq => a == b,
        Comparator::Ne => a != b,
    }
}

pub struct RandomCsp {
    pub domains: Vec<Vec<Val>>,
    // (lhs, rhs, op, offset)
    pub constraints: Vec<(usize, usize, Comparator, Val)>,
}

impl RandomCsp {
    pub fn generate(rng: &mut ChaCha8Rng) -> Self {
        let n = rng.random_range(2..=4);
        let domains = (0..n)
            .map(|_| {
                let mut pool: Vec<Val> = (0..6).collect();
                pool.shuffle(rng);
                let mut d: Vec<Val> = pool[..rng.random_range(1..=4)].to_vec();
                d.sort_unstable();
                d
            })
            .collect();
        let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        pairs.shuffle(rng);
        let m = rng.random_range(1..=pairs.len());
        let constraints = pairs[..m]
            .iter()
            .map(|&(a, b)| {
                let (a, b) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
                (a, b, Comparator::ALL[rng.random_range(0..6)], rng.random_range(-1..=1))
            })
            .collect();
        RandomCsp { domains, constraints }
    }

    pub fn name(i: usize) -> String {
        format!("V{i}")
    }

    pub fn network(&self) -> Network {
        let vars =
            self.domains.iter().enumerate().map(|(i, d)| Variable::new(Self::name(i), d.iter().copied())).collect();
        let cons = self
            .constraints
            .iter()
            .map(|&(a, b, op, off)| Constraint::comparison(ConstraintExpr::new(Self::name(a), op, Self::name(b), off)))
            .collect();
        Network::new("random", vars, cons).unwrap()
    }

    /// The same problem as a problem document, constraints as expressions.
    pub fn document(&self) -> String {
        let vars: Vec<Value> =
            self.domains.iter().enumerate().map(|(i, d)| json!({"name": Self::name(i), "domain": d})).collect();
        let cons: Vec<Value> = self
            .constraints
            .iter()
            .map(|&(a, b, op, off)| json!({"expr": ConstraintExpr::new(Self::name(a), op, Self::name(b), off).to_string()}))
            .collect();
        json!({"name": "random", "variables": vars, "constraints": cons}).to_string()
    }

    pub fn solutions(&self) -> Vec<Vec<Val>> {
        let mut out = Vec::new();
        let mut cur = Vec::new();
        self.extend(&mut cur, &mut out);
        out
    }

    fn extend(&self, cur: &mut Vec<Val>, out: &mut Vec<Vec<Val>>) {
        if cur.len() == self.domains.len() {
            if self.constraints.iter().all(|&(a, b, op, off)| allowed(op, off, cur[a], cur[b])) {
                out.push(cur.clone());
            }
            return;
        }
        for &v in &self.domains[cur.len()] {
            cur.push(v);
            self.extend(cur, out);
            cur.pop();
        }
    }

    /// Every value of both endpoints of every constraint has a partner.
    pub fn supported(&self, domains: &[Vec<Val>]) -> bool {
        self.constraints.iter().all(|&(a, b, op, off)| {
            domains[a].iter().all(|&x| domains[b].iter().any(|&y| allowed(op, off, x, y)))
                && domains[b].iter().all(|&y| domains[a].iter().any(|&x| allowed(op, off, x, y)))
        })
    }
}

/// Random action mix and pace, fixed per stream.
pub fn random_stream(rng: &mut ChaCha8Rng, session: &str, len: usize) -> Vec<ActionEvent> {
    let weights: Vec<f64> = (0..6).map(|_| rng.random::<f64>().powi(2)).collect();
    let total: f64 = weights.iter().sum();
    let base_pause = rng.random_range(200..6000u64);
    let mut t = 0;
    (0..len)
        .map(|i| {
            let mut u = rng.random::<f64>() * total;
            let mut action = ActionKind::Reset;
            for (k, w) in weights.iter().enumerate() {
                if u < *w {
                    action = ActionKind::ALL[k];
                    break;
                }
                u -= w;
            }
            let e = ActionEvent::new(session, i as u64 + 1, t, action);
            t += rng.random_range(0..=2 * base_pause);
            e
        })
        .collect()
}
