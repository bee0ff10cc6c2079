use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{ClusterModel, DiscoveryError, Label, LabeledUser, PerLabel};
use crate::interaction::{discretize, ActionKind, Bin, DiscreteVector, Feature, FEATURE_COUNT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Condition {
    pub feature: Feature,
    pub bin: Bin,
}

impl Condition {
    pub fn new(feature: Feature, bin: Bin) -> Self {
        Condition { feature, bin }
    }

    fn item(self) -> u8 {
        (self.feature.index() * 3 + self.bin as usize) as u8
    }

    fn from_item(item: u8) -> Self {
        let bin = match item % 3 {
            0 => Bin::Low,
            1 => Bin::Medium,
            _ => Bin::High,
        };
        Condition { feature: Feature::from_index(item as usize / 3).expect("item in range"), bin }
    }

    pub fn holds(&self, v: &DiscreteVector) -> bool {
        v.get(self.feature) == self.bin
    }

    /// Student-facing phrase, e.g. "using Reset frequently".
    pub fn describe(&self) -> String {
        match (self.feature, self.bin) {
            (Feature::Freq(a), Bin::High) => format!("using {} frequently", a.display_name()),
            (Feature::Freq(a), Bin::Low) => format!("using {} infrequently", a.display_name()),
            (Feature::Freq(a), Bin::Medium) => format!("using {} moderately often", a.display_name()),
            (Feature::Pause(a), Bin::High) => format!("pausing for reflection after performing {}", pause_name(a)),
            (Feature::Pause(a), Bin::Low) => format!("short pausing after performing {}", pause_name(a)),
            (Feature::Pause(a), Bin::Medium) => format!("regularly pausing after performing {}", pause_name(a)),
            (Feature::TotalActions, Bin::High) => "performing many actions".to_string(),
            (Feature::TotalActions, Bin::Low) => "performing few actions".to_string(),
            (Feature::TotalActions, Bin::Medium) => "performing a moderate number of actions".to_string(),
        }
    }
}

fn pause_name(a: ActionKind) -> &'static str {
    a.display_name()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationRule {
    pub id: String,
    pub conditions: Vec<Condition>,
    pub consequent: Label,
    pub confidence: f64,
    pub support: f64,
    pub weight: u32,
}

impl AssociationRule {
    pub fn satisfied_by(&self, v: &DiscreteVector) -> bool {
        self.conditions.iter().all(|c| c.holds(v))
    }

    pub fn mentions(&self, feature: Feature) -> bool {
        self.conditions.iter().any(|c| c.feature == feature)
    }

    /// Conditions joined into one sentence-case phrase.
    pub fn describe(&self) -> String {
        let text = self.conditions.iter().map(Condition::describe).collect::<Vec<_>>().join(" and ");
        let mut chars = text.chars();
        match chars.next() {
            Some(c) => c.to_uppercase().chain(chars).collect(),
            None => text,
        }
    }
}

/// round(100 * confidence * support) with confidence = in_cluster / matching
/// and support = in_cluster / cluster_size, in exact integer arithmetic.
pub(crate) fn rule_weight(in_cluster: u64, matching: u64, cluster_size: u64) -> u32 {
    let num = 100 * in_cluster * in_cluster;
    let den = matching * cluster_size;
    (((2 * num + den) / (2 * den)) as u32).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSet {
    pub rules: Vec<AssociationRule>,
    pub totals: PerLabel<u64>,
}

impl RuleSet {
    /// Builds a rule set, computing per-group weight totals.
    pub fn new(rules: Vec<AssociationRule>) -> Self {
        let totals = Self::totals_of(&rules);
        RuleSet { rules, totals }
    }

    pub fn totals_of(rules: &[AssociationRule]) -> PerLabel<u64> {
        let mut totals = PerLabel::new(0, 0);
        for r in rules {
            *totals.get_mut(r.consequent) += u64::from(r.weight);
        }
        totals
    }

    pub fn for_label(&self, label: Label) -> impl Iterator<Item = &AssociationRule> + '_ {
        self.rules.iter().filter(move |r| r.consequent == label)
    }

    pub fn count(&self, label: Label) -> usize {
        self.for_label(label).count()
    }

    pub fn get(&self, id: &str) -> Option<&AssociationRule> {
        self.rules.iter().find(|r| r.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiningParams {
    pub min_support: f64,
    pub min_confidence: f64,
    pub max_len: usize,
}

impl Default for MiningParams {
    fn default() -> Self {
        MiningParams { min_support: 0.3, min_confidence: 0.8, max_len: 3 }
    }
}

type Itemset = Vec<u8>;

fn transactions(model: &ClusterModel, corpus: &[LabeledUser]) -> Vec<(Label, [u8; FEATURE_COUNT])> {
    corpus
        .iter()
        .map(|u| {
            let d = discretize(&u.features, &model.binning);
            let mut items = [0u8; FEATURE_COUNT];
            for f in Feature::all() {
                items[f.index()] = Condition::new(f, d.get(f)).item();
            }
            (model.label_of(&u.features), items)
        })
        .collect()
}

fn contains_all(tx: &[u8; FEATURE_COUNT], set: &[u8]) -> bool {
    // one item per feature at position item / 3
    set.iter().all(|&i| tx[i as usize / 3] == i)
}

/// Level-wise frequent itemsets within one cluster.
fn frequent_itemsets(members: &[&[u8; FEATURE_COUNT]], min_count: u64, max_len: usize) -> Vec<(Itemset, u64)> {
    let count = |set: &[u8]| members.iter().filter(|tx| contains_all(tx, set)).count() as u64;
    let mut out = Vec::new();
    let mut level: Vec<Itemset> =
        (0..(FEATURE_COUNT * 3) as u8).map(|i| vec![i]).filter(|s| count(s) >= min_count).collect();
    for len in 1..=max_len {
        for s in &level {
            out.push((s.clone(), count(s)));
        }
        if len == max_len {
            break;
        }
        let known: BTreeSet<&Itemset> = level.iter().collect();
        let mut next = Vec::new();
        for (i, a) in level.iter().enumerate() {
            for b in &level[i + 1..] {
                if a[..len - 1] != b[..len - 1] {
                    continue;
                }
                let (x, y) = (a[len - 1], b[len - 1]);
                if x / 3 == y / 3 {
                    continue;
                }
                // levels are sorted, so x < y
                let mut cand = a.clone();
                cand.push(y);
                let all_subsets_frequent = (0..cand.len()).all(|skip| {
                    let sub: Itemset = cand.iter().enumerate().filter(|&(j, _)| j != skip).map(|(_, &v)| v).collect();
                    known.contains(&sub)
                });
                if all_subsets_frequent && count(&cand) >= min_count {
                    next.push(cand);
                }
            }
        }
        next.sort();
        next.dedup();
        level = next;
    }
    out
}

/// Mines class association rules for each cluster.
///
/// Support is measured within the rule's cluster, confidence over the whole
/// corpus. A rule whose antecedent extends an accepted antecedent without
/// improving confidence is dropped.
pub fn mine_rules(
    model: &ClusterModel,
    corpus: &[LabeledUser],
    params: MiningParams,
) -> Result<RuleSet, DiscoveryError> {
    let txs = transactions(model, corpus);
    let mut rules = Vec::new();
    for label in Label::BOTH {
        let members: Vec<&[u8; FEATURE_COUNT]> = txs.iter().filter(|(l, _)| *l == label).map(|(_, t)| t).collect();
        let size = members.len() as u64;
        if size == 0 {
            return Err(DiscoveryError::NoRulesForCluster(label));
        }
        let min_count = ((params.min_support * size as f64 - 1e-9).ceil() as u64).max(1);
        let mut accepted: Vec<(Itemset, f64)> = Vec::new();
        let mut candidates = frequent_itemsets(&members, min_count, params.max_len.max(1));
        candidates.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.0.cmp(&b.0)));
        let mut per_label = Vec::new();
        for (set, in_cluster) in candidates {
            let matching = txs.iter().filter(|(_, t)| contains_all(t, &set)).count() as u64;
            let confidence = in_cluster as f64 / matching as f64;
            if confidence < params.min_confidence - 1e-12 {
                continue;
            }
            let redundant =
                accepted.iter().any(|(sub, conf)| *conf >= confidence && sub.iter().all(|i| set.contains(i)));
            if redundant {
                continue;
            }
            accepted.push((set.clone(), confidence));
            per_label.push(AssociationRule {
                id: String::new(),
                conditions: set.iter().map(|&i| Condition::from_item(i)).collect(),
                consequent: label,
                confidence,
                support: in_cluster as f64 / size as f64,
                weight: rule_weight(in_cluster, matching, size),
            });
        }
        if per_label.is_empty() {
            return Err(DiscoveryError::NoRulesForCluster(label));
        }
        for (i, r) in per_label.iter_mut().enumerate() {
            r.id = format!("{}-{}", label, i + 1);
        }
        rules.extend(per_label);
    }
    Ok(RuleSet::new(rules))
}

/// Rule counts per feature, for reporting.
pub fn feature_histogram(rules: &RuleSet) -> BTreeMap<Feature, usize> {
    let mut out = BTreeMap::new();
    for r in &rules.rules {
        for c in &r.conditions {
            *out.entry(c.feature).or_insert(0) += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discovery::cluster_users;
    use crate::interaction::FeatureVector;

    #[test]
    fn weight_formula() {
        assert_eq!(rule_weight(10, 10, 10), 100);
        // confidence 0.8, support 0.5 -> 40
        assert_eq!(rule_weight(8, 10, 16), 40);
        // confidence 1, support 0.3 -> 30
        assert_eq!(rule_weight(3, 3, 10), 30);
        // rounding half up: 100 * 1/8 = 12.5 -> 13
        assert_eq!(rule_weight(1, 1, 8), 13);
        assert_eq!(rule_weight(1, 50, 50), 1);
    }

    #[test]
    fn weight_is_monotone_in_confidence_and_support() {
        for size in 1..12u64 {
            for in_c in 1..=size {
                for matching in in_c..=(size + 6) {
                    let w = rule_weight(in_c, matching, size);
                    assert!((1..=100).contains(&w));
                    if matching > in_c {
                        assert!(rule_weight(in_c, matching - 1, size) >= w);
                    }
                }
            }
        }
    }

    #[test]
    fn describes_conditions() {
        let r = AssociationRule {
            id: "LLG-1".into(),
            conditions: vec![
                Condition::new(Feature::Freq(ActionKind::Reset), Bin::High),
                Condition::new(Feature::Pause(ActionKind::DomainSplit), Bin::Medium),
            ],
            consequent: Label::Llg,
            confidence: 1.0,
            support: 0.5,
            weight: 19,
        };
        assert_eq!(r.describe(), "Using Reset frequently and regularly pausing after performing Domain Splitting");
    }

    fn separator_corpus(n_hlg: usize, n_llg: usize) -> Vec<LabeledUser> {
        // AutoAC frequency separates the groups; Reset is noise shared by both
        (0..n_hlg + n_llg)
            .map(|i| {
                let mut f = FeatureVector::default();
                let llg = i >= n_hlg;
                let spread = 0.005 * (i % n_hlg.max(n_llg)) as f64;
                f.freq[ActionKind::AutoAC.index()] = if llg { 0.5 + spread } else { 0.01 + spread };
                f.freq[ActionKind::Reset.index()] = (i % 5) as f64 * 0.02;
                f.freq[ActionKind::FineStep.index()] = 1.0 - f.freq[2] - f.freq[5];
                f.total_actions = 100;
                LabeledUser { user: format!("u{i}"), features: f, plg: if llg { 0.2 } else { 0.7 } }
            })
            .collect()
    }

    #[test]
    fn perfect_separator_gets_full_weight() {
        let corpus = separator_corpus(20, 10);
        let model = cluster_users(&corpus, 2, 5).unwrap();
        let rules = mine_rules(&model, &corpus, MiningParams::default()).unwrap();
        let high_auto = vec![Condition::new(Feature::Freq(ActionKind::AutoAC), Bin::High)];
        let r = rules.rules.iter().find(|r| r.conditions == high_auto).expect("separator rule");
        assert_eq!(r.consequent, Label::Llg);
        assert_eq!((r.confidence, r.support, r.weight), (1.0, 1.0, 100));
        // its supersets add nothing and are pruned
        assert!(!rules.rules.iter().any(|r| r.conditions.len() > 1 && r.conditions.contains(&high_auto[0])));
    }

    #[test]
    fn rules_meet_support_by_recount() {
        let corpus = separator_corpus(15, 15);
        let model = cluster_users(&corpus, 2, 9).unwrap();
        let params = MiningParams::default();
        let rules = mine_rules(&model, &corpus, params).unwrap();
        for r in &rules.rules {
            let members: Vec<_> = corpus.iter().filter(|u| model.label_of(&u.features) == r.consequent).collect();
            let hits = members.iter().filter(|u| r.satisfied_by(&discretize(&u.features, &model.binning))).count();
            let needed = (params.min_support * members.len() as f64 - 1e-9).ceil() as usize;
            assert!(hits >= needed, "{} has {hits} < {needed}", r.id);
        }
    }

    #[test]
    fn recovers_perfect_separator_and_respects_thresholds() {
        let corpus = separator_corpus(15, 15);
        let model = cluster_users(&corpus, 2, 11).unwrap();
        let rules = mine_rules(&model, &corpus, MiningParams::default()).unwrap();
        assert!(rules.count(Label::Hlg) > 0 && rules.count(Label::Llg) > 0);
        for r in &rules.rules {
            assert!(r.confidence >= 0.8 && r.support >= 0.3 - 1e-12);
            assert!((1..=100).contains(&r.weight));
            assert!(!r.conditions.is_empty() && r.conditions.len() <= 3);
        }
        // no rule on the Reset noise reaches 0.8 confidence alone
        assert!(!rules
            .rules
            .iter()
            .any(|r| r.conditions == vec![Condition::new(Feature::Freq(ActionKind::Reset), Bin::Low)]));
        for label in Label::BOTH {
            let total: u64 = rules.for_label(label).map(|r| u64::from(r.weight)).sum();
            assert_eq!(total, *rules.totals.get(label));
        }
    }

    #[test]
    fn impossible_thresholds_yield_no_rules() {
        let corpus = separator_corpus(15, 15);
        let model = cluster_users(&corpus, 2, 11).unwrap();
        let err = mine_rules(&model, &corpus, MiningParams { min_support: 1.0, min_confidence: 1.0, max_len: 3 })
            .unwrap_err();
        assert_eq!(err.code(), "NoRulesForCluster");
    }
}
