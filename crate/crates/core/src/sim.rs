//! Synthetic learners with a planted group structure, and the batch
//! train/evaluate pipeline run over them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Dirichlet, Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::classifier::{evaluate_accuracy, ClassifierError, LabeledStream};
use crate::discovery::{
    cluster_users, export_model, mine_rules, DiscoveryError, Label, LabeledUser, MiningParams, ModelDocument, PerLabel,
};
use crate::interaction::{extract_features, ActionEvent, ActionKind};

/// Behavior profile users of one planted group are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchetypeSpec {
    pub name: String,
    pub label: Label,
    /// Mean action mix, in `ActionKind::ALL` order; normalized on use.
    pub action_mix: [f64; 6],
    /// How tightly individual users follow the mix (Dirichlet scale).
    pub concentration: f64,
    /// Median pause after each action type, in ms.
    pub pause_median_ms: [f64; 6],
    /// Spread of the log-pause.
    pub pause_sigma: f64,
    pub plg_mean: f64,
    pub plg_sd: f64,
}

impl ArchetypeSpec {
    /// Steps through arcs and pauses to look at the result.
    pub fn hlg_like() -> Self {
        ArchetypeSpec {
            name: "HLG-like".into(),
            label: Label::Hlg,
            action_mix: [0.35, 0.35, 0.08, 0.12, 0.06, 0.04],
            concentration: 80.0,
            pause_median_ms: [4000.0, 5000.0, 3000.0, 6000.0, 3500.0, 4000.0],
            pause_sigma: 0.5,
            plg_mean: 0.65,
            plg_sd: 0.08,
        }
    }

    /// Leans on auto-solving and resets, with little time between actions.
    pub fn llg_like() -> Self {
        ArchetypeSpec {
            name: "LLG-like".into(),
            label: Label::Llg,
            action_mix: [0.2, 0.08, 0.32, 0.08, 0.08, 0.24],
            concentration: 80.0,
            pause_median_ms: [1200.0, 1500.0, 900.0, 1500.0, 1000.0, 800.0],
            pause_sigma: 0.5,
            plg_mean: 0.35,
            plg_sd: 0.08,
        }
    }

    /// The default pair with the learning-gain means `gap` apart around 0.5.
    pub fn pair(gap: f64) -> [ArchetypeSpec; 2] {
        let mut h = Self::hlg_like();
        let mut l = Self::llg_like();
        h.plg_mean = 0.5 + gap / 2.0;
        l.plg_mean = 0.5 - gap / 2.0;
        [h, l]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedUser {
    pub user: String,
    /// Planted group; ground truth for evaluation only.
    pub archetype: Label,
    pub plg: f64,
    pub events: Vec<ActionEvent>,
}

impl GeneratedUser {
    pub fn labeled(&self) -> LabeledUser {
        LabeledUser { user: self.user.clone(), features: extract_features(&self.events), plg: self.plg }
    }

    pub fn stream(&self) -> LabeledStream {
        LabeledStream { user: self.user.clone(), label: self.archetype, events: self.events.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub seed: u64,
    pub archetypes: Vec<ArchetypeSpec>,
    pub users: Vec<GeneratedUser>,
}

impl Corpus {
    pub fn labeled(&self) -> Vec<LabeledUser> {
        self.users.iter().map(GeneratedUser::labeled).collect()
    }

    pub fn streams(&self) -> Vec<LabeledStream> {
        self.users.iter().map(GeneratedUser::stream).collect()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("need at least 6 users, got {0}")]
    TooFewUsers(usize),
    #[error("need at least one archetype")]
    NoArchetypes,
    #[error("archetype `{0}` has an invalid action mix or pause profile")]
    InvalidArchetype(String),
    #[error(transparent)]
    Discovery(#[from] DiscoveryError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}

impl SimError {
    pub fn code(&self) -> &'static str {
        match self {
            SimError::TooFewUsers(_) => "TooFewUsers",
            SimError::NoArchetypes => "NoArchetypes",
            SimError::InvalidArchetype(_) => "InvalidArchetype",
            SimError::Discovery(e) => e.code(),
            SimError::Classifier(e) => e.code(),
        }
    }
}

fn generate_user(spec: &ArchetypeSpec, index: usize, seed: u64) -> Result<GeneratedUser, SimError> {
    let bad = || SimError::InvalidArchetype(spec.name.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let total: f64 = spec.action_mix.iter().sum();
    let alpha = spec.action_mix.map(|w| spec.concentration * w / total);
    let mix: [f64; 6] = Dirichlet::new(alpha).map_err(|_| bad())?.sample(&mut rng);
    let pauses: Vec<LogNormal<f64>> = spec
        .pause_median_ms
        .iter()
        .map(|m| LogNormal::new(m.ln(), spec.pause_sigma))
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let len = rng.random_range(50..=200);
    let mut t = 0u64;
    let mut events = Vec::with_capacity(len);
    for i in 0..len {
        let mut u: f64 = rng.random();
        let mut action = ActionKind::Reset;
        for (k, p) in mix.iter().enumerate() {
            if u < *p {
                action = ActionKind::ALL[k];
                break;
            }
            u -= p;
        }
        events.push(ActionEvent::new(format!("u{index}"), i as u64 + 1, t, action));
        t += pauses[action.index()].sample(&mut rng).round() as u64;
    }
    let plg = Normal::new(spec.plg_mean, spec.plg_sd).map_err(|_| bad())?.sample(&mut rng).clamp(0.0, 1.0);
    Ok(GeneratedUser { user: format!("u{index}"), archetype: spec.label, plg, events })
}

/// Users are dealt to archetypes round-robin; user `i` draws from its own
/// stream of the seeded generator.
pub fn generate_corpus(archetypes: &[ArchetypeSpec], n_users: usize, seed: u64) -> Result<Corpus, SimError> {
    if n_users < 6 {
        return Err(SimError::TooFewUsers(n_users));
    }
    if archetypes.is_empty() {
        return Err(SimError::NoArchetypes);
    }
    let users =
        (0..n_users).map(|i| generate_user(&archetypes[i % archetypes.len()], i, seed)).collect::<Result<_, _>>()?;
    Ok(Corpus { seed, archetypes: archetypes.to_vec(), users })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub users: usize,
    pub cluster_sizes: PerLabel<usize>,
    pub mean_plg: PerLabel<f64>,
    pub separated: bool,
    pub p_value: f64,
    pub rule_counts: PerLabel<usize>,
    pub min_weight: u32,
    pub max_weight: u32,
    /// Share of users whose cluster's majority archetype matches their own.
    pub purity: f64,
    pub iterations: usize,
}

pub fn run_pipeline(
    corpus: &Corpus,
    params: MiningParams,
    seed: u64,
) -> Result<(ModelDocument, PipelineReport), SimError> {
    let users = corpus.labeled();
    let model = cluster_users(&users, 2, seed)?;
    let rules = mine_rules(&model, &users, params)?;
    let doc = export_model(&model, &rules, Some(seed));

    let mut table = [[0usize; 2]; 2];
    for (u, g) in users.iter().zip(&corpus.users) {
        let c = model.assign(&u.features);
        table[c][usize::from(g.archetype == Label::Llg)] += 1;
    }
    let majority: usize = table.iter().map(|row| row[0].max(row[1])).sum();
    let mut sizes = PerLabel::new(0, 0);
    let mut plg = PerLabel::new(0.0, 0.0);
    for c in 0..2 {
        *sizes.get_mut(model.labels[c]) = model.sizes[c];
        *plg.get_mut(model.labels[c]) = model.mean_plg[c];
    }
    let report = PipelineReport {
        users: users.len(),
        cluster_sizes: sizes,
        mean_plg: plg,
        separated: model.separated,
        p_value: model.separation.p_value,
        rule_counts: PerLabel::new(rules.count(Label::Hlg), rules.count(Label::Llg)),
        min_weight: rules.rules.iter().map(|r| r.weight).min().unwrap_or(0),
        max_weight: rules.rules.iter().map(|r| r.weight).max().unwrap_or(0),
        purity: majority as f64 / users.len() as f64,
        iterations: model.iterations,
    };
    Ok((doc, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub prefix: f64,
    pub accuracy: f64,
}

/// Accuracy at each prefix fraction of the held-out streams.
pub fn eval(model: &ModelDocument, held_out: &Corpus, prefixes: &[f64]) -> Result<Vec<AccuracyRow>, SimError> {
    let streams = held_out.streams();
    prefixes.iter().map(|&p| Ok(AccuracyRow { prefix: p, accuracy: evaluate_accuracy(model, &streams, p)? })).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_deterministic() {
        let a = generate_corpus(&ArchetypeSpec::pair(0.3), 12, 1).unwrap();
        let b = generate_corpus(&ArchetypeSpec::pair(0.3), 12, 1).unwrap();
        assert_eq!(a, b);
        let c = generate_corpus(&ArchetypeSpec::pair(0.3), 12, 2).unwrap();
        assert_ne!(a, c);
        for u in &a.users {
            assert!((50..=200).contains(&u.events.len()));
            assert!((0.0..=1.0).contains(&u.plg));
        }
    }

    #[test]
    fn rejects_tiny_corpora() {
        assert_eq!(generate_corpus(&ArchetypeSpec::pair(0.3), 5, 1), Err(SimError::TooFewUsers(5)));
        assert_eq!(generate_corpus(&[], 10, 1), Err(SimError::NoArchetypes));
    }

    #[test]
    fn pipeline_recovers_archetypes() {
        let corpus = generate_corpus(&ArchetypeSpec::pair(0.3), 60, 4).unwrap();
        let (doc, report) = run_pipeline(&corpus, MiningParams::default(), 4).unwrap();
        assert!(report.purity >= 0.95, "purity {}", report.purity);
        assert!(report.separated);
        assert!(report.rule_counts.hlg >= 1 && report.rule_counts.llg >= 1);
        assert!(report.min_weight >= 1 && report.max_weight <= 100);
        doc.validate().unwrap();
        let held_out = generate_corpus(&ArchetypeSpec::pair(0.3), 40, 5).unwrap();
        let table = eval(&doc, &held_out, &[1.0]).unwrap();
        assert!(table[0].accuracy >= 0.85, "accuracy {}", table[0].accuracy);
    }
}
