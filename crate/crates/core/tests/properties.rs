mod common;

use std::sync::Arc;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use acsp::classifier::{classify_events, membership_score, SatisfiedRule};
use acsp::csp::{Constraint, Domain, Network, Status, Variable};
use acsp::discovery::{Label, MiningParams};
use acsp::explain::{available_transitions, generate_page, Block, PageId, Templates};
use acsp::fixtures;
use acsp::hints::{score_hints, Catalog, HintEngine};
use acsp::problem::{compile, load_problem, lower, network_to_document};
use acsp::sim::{generate_corpus, run_pipeline, ArchetypeSpec};

use common::{allowed, random_stream, RandomCsp};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Rebuilds a network over `domains` with the same constraints.
fn with_domains(net: &Network, domains: &[Domain]) -> Network {
    let vars =
        net.variables().iter().zip(domains).map(|(v, d)| Variable::new(v.name.clone(), d.iter().copied())).collect();
    Network::new(net.name(), vars, net.constraints().to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn auto_ac_is_a_fixpoint(seed in any::<u64>()) {
        let csp = RandomCsp::generate(&mut rng(seed));
        let mut net = csp.network();
        net.auto_ac().unwrap();
        prop_assume!(net.status() == Status::Consistent);
        let mut again = with_domains(&net, &net.domains());
        again.auto_ac().unwrap();
        prop_assert_eq!(again.domains(), net.domains());
    }

    #[test]
    fn split_then_backtrack_restores_the_complement(seed in any::<u64>()) {
        let mut r = rng(seed);
        let csp = RandomCsp::generate(&mut r);
        let mut net = csp.network();
        net.auto_ac().unwrap();
        prop_assume!(net.status() == Status::Consistent);
        let before = net.domains();
        let wide: Vec<usize> = (0..before.len()).filter(|&i| before[i].len() >= 2).collect();
        prop_assume!(!wide.is_empty());
        let v = wide[r.random_range(0..wide.len())];
        let mut values: Vec<i64> = before[v].iter().copied().collect();
        values.shuffle(&mut r);
        let subset: Domain = values[..r.random_range(1..values.len())].iter().copied().collect();
        net.domain_split(&RandomCsp::name(v), &subset).unwrap();
        net.backtrack().unwrap();
        let after = net.domains();
        for i in 0..before.len() {
            if i == v {
                prop_assert_eq!(&after[i], &before[i].difference(&subset).copied().collect::<Domain>());
            } else {
                prop_assert_eq!(&after[i], &before[i]);
            }
        }
    }

    #[test]
    fn problem_documents_round_trip(seed in any::<u64>()) {
        let csp = RandomCsp::generate(&mut rng(seed));
        let net = compile(&load_problem(&csp.document()).unwrap());
        let direct = csp.network();
        prop_assert_eq!(net.domains(), direct.domains());
        prop_assert_eq!(net.queue().collect::<Vec<_>>(), direct.queue().collect::<Vec<_>>());

        let text = serde_json::to_string(&network_to_document(&net)).unwrap();
        let back = compile(&load_problem(&text).unwrap());
        prop_assert_eq!(back.domains(), net.domains());
        prop_assert_eq!(back.queue().collect::<Vec<_>>(), net.queue().collect::<Vec<_>>());
        prop_assert_eq!(back.arcs().len(), net.arcs().len());
        for a in 0..net.arcs().len() {
            let (x, y) = (net.arcs()[a].variable, net.arcs()[a].other);
            for &v in net.initial_domain(x) {
                for &w in net.initial_domain(y) {
                    prop_assert_eq!(back.arc_allows(a, v, w), net.arc_allows(a, v, w));
                }
            }
        }
    }

    #[test]
    fn lowering_matches_direct_evaluation(seed in any::<u64>()) {
        let csp = RandomCsp::generate(&mut rng(seed));
        let net = csp.network();
        for (c, &(a, b, op, off)) in net.constraints().iter().zip(&csp.constraints) {
            let acsp::csp::Relation::Comparison(expr) = &c.relation else { unreachable!() };
            let pairs = lower(expr, &csp.domains[a], &csp.domains[b]);
            for &x in &csp.domains[a] {
                for &y in &csp.domains[b] {
                    prop_assert_eq!(pairs.contains(&(x, y)), allowed(op, off, x, y));
                }
            }
        }
    }

    #[test]
    fn scores_are_exact_bounded_fractions(seed in any::<u64>()) {
        let mut r = rng(seed);
        let model = fixtures::reset_model();
        let len = r.random_range(0..150);
        let snap = classify_events(&model, &random_stream(&mut r, "p", len));
        for label in Label::BOTH {
            let expected: u64 = model
                .rules
                .iter()
                .filter(|rule| rule.consequent == label)
                .filter(|rule| rule.conditions.iter().all(|c| snap.discrete.get(c.feature) == c.bin))
                .map(|rule| u64::from(rule.weight))
                .sum();
            prop_assert_eq!(*snap.satisfied_weight.get(label), expected);
            let score = *snap.scores.get(label);
            prop_assert!((0.0..=1.0).contains(&score));
            prop_assert_eq!(score, expected as f64 / *snap.totals.get(label) as f64);
        }
    }

    #[test]
    fn satisfying_another_rule_never_lowers_a_score(sat in 0u64..1000, extra in 1u64..100, slack in 0u64..1000) {
        let total = sat + extra + slack;
        prop_assert!(membership_score(sat + extra, total).unwrap() >= membership_score(sat, total).unwrap());
    }

    #[test]
    fn ranks_are_exact_and_monotone(seed in any::<u64>()) {
        let mut r = rng(seed);
        let model = fixtures::reset_model();
        let catalog = Catalog::default();
        let mut snap = classify_events(&model, &fixtures::reset_stream());
        let llg: Vec<_> = model.rules.iter().filter(|x| x.consequent == Label::Llg).collect();
        let mut chosen: Vec<_> = llg.iter().filter(|_| r.random_bool(0.4)).collect();
        snap.satisfied.llg = chosen.iter().map(|x| SatisfiedRule { id: x.id.clone(), weight: x.weight }).collect();
        let before = score_hints(&snap, &model, &catalog);
        for h in &before {
            let resum: u64 = chosen
                .iter()
                .filter(|x| x.conditions.iter().any(|c| c.feature == h.item.target.feature))
                .map(|x| u64::from(x.weight))
                .sum();
            prop_assert_eq!(h.rank, resum);
            prop_assert!(h.rank > 0);
        }
        for w in before.windows(2) {
            prop_assert!(w[0].rank >= w[1].rank);
        }
        let extra = llg[r.random_range(0..llg.len())];
        chosen.push(&extra);
        snap.satisfied.llg.push(SatisfiedRule { id: extra.id.clone(), weight: extra.weight });
        let after = score_hints(&snap, &model, &catalog);
        for h in &before {
            let now = after.iter().find(|a| a.item.id == h.item.id).map_or(0, |a| a.rank);
            prop_assert!(now >= h.rank);
        }
    }
}

fn check_pages(engine: &HintEngine, model: &acsp::discovery::ModelDocument, templates: &Templates) {
    let hint = engine.latest().unwrap();
    for page in PageId::ALL {
        let a = generate_page(page, Some(hint), model, templates).unwrap();
        let b = generate_page(page, Some(hint), model, templates).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        for block in &a.blocks {
            match block {
                Block::Score { group, satisfied, total, quotient, score, .. } => {
                    let (frac, shown) = quotient.split_once(" = ").unwrap();
                    assert_eq!(frac, format!("{satisfied}/{total}"));
                    let shown: f64 = if shown.starts_with('.') {
                        format!("0{shown}").parse().unwrap()
                    } else {
                        shown.parse().unwrap()
                    };
                    let exact = *satisfied as f64 / *total as f64;
                    assert!(shown >= exact - 1e-12 && shown - exact < 0.001, "{quotient}");
                    assert_eq!(*score, *hint.snapshot.scores.get(*group));
                }
                Block::Summation { addends, total, text } => {
                    let (lhs, rhs) = text.split_once(" = ").unwrap();
                    let parsed: Vec<u64> = lhs.split(" + ").map(|x| x.parse().unwrap()).collect();
                    assert_eq!(&parsed, addends);
                    assert_eq!(parsed.iter().sum::<u64>(), *total);
                    assert_eq!(rhs.parse::<u64>().unwrap(), *total);
                    assert_eq!(*total, hint.chosen.rank);
                }
                Block::RankedHints { hints } => {
                    let top = hints.iter().find(|h| h.chosen).unwrap();
                    assert_eq!(top.rank, hint.chosen.rank);
                    assert_eq!(top.rank, hints.iter().map(|h| h.rank).max().unwrap());
                }
                _ => {}
            }
        }
    }
}

#[test]
fn page_arithmetic_is_sound_on_random_sessions() {
    let corpus = generate_corpus(&ArchetypeSpec::pair(0.3), 40, 12).unwrap();
    let (trained, _) = run_pipeline(&corpus, MiningParams::default(), 12).unwrap();
    let templates = Templates::default();
    let mut pages_checked = 0;
    for (i, model) in [Arc::new(fixtures::reset_model()), Arc::new(trained)].iter().cycle().take(400).enumerate() {
        let mut r = rng(i as u64);
        let len = r.random_range(1..200);
        let events = random_stream(&mut r, "p", len);
        let mut engine = HintEngine::new(Catalog::default());
        for n in 1..=events.len() {
            let snap = classify_events(model, &events[..n]);
            if engine.observe(&snap, model, &events[..n]).is_some() {
                check_pages(&engine, model, &templates);
                pages_checked += 6;
            }
        }
    }
    assert!(pages_checked > 0);
}

#[test]
fn every_page_is_reachable_from_every_tab() {
    for start in PageId::TABS {
        let mut seen = vec![start];
        let mut i = 0;
        while i < seen.len() {
            for (to, _) in available_transitions(seen[i]) {
                if !seen.contains(&to) {
                    seen.push(to);
                }
            }
            i += 1;
        }
        seen.sort();
        assert_eq!(seen, PageId::ALL.to_vec());
    }
    let into_rank: Vec<PageId> = PageId::ALL
        .into_iter()
        .filter(|&p| available_transitions(p).iter().any(|(to, _)| *to == PageId::HowRank))
        .collect();
    assert_eq!(into_rank, vec![PageId::HowHint]);
}

#[test]
fn extensional_constraints_keep_orientation() {
    let c = Constraint::extensional("B", "A", [(1, 2)]);
    let net = Network::new("o", vec![Variable::new("A", [1, 2]), Variable::new("B", [1, 2])], vec![c]).unwrap();
    let mut net2 = net.clone();
    net2.auto_ac().unwrap();
    assert_eq!(net2.domain("A"), Some(&Domain::from([2])));
    assert_eq!(net2.domain("B"), Some(&Domain::from([1])));
}
