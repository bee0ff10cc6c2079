//! A small hand-built model and a matching 20-action stream whose scores,
//! ranks and explanation arithmetic are easy to check by hand.
//!
//! The stream satisfies nine LLG rules worth 432 of 1383 and none of the
//! four HLG rules (376). Four of the satisfied rules mention Reset
//! frequency, with weights 18, 21, 19 and 40.

use crate::discovery::{AssociationRule, Condition, Label, ModelDocument, Provenance};
use crate::interaction::{ActionEvent, ActionKind, Bin, BinningModel, Cuts, Feature, FEATURE_COUNT};

use ActionKind::*;
use Bin::*;

fn freq(a: ActionKind) -> Feature {
    Feature::Freq(a)
}

fn pause(a: ActionKind) -> Feature {
    Feature::Pause(a)
}

/// Frequencies split at 0.05 / 0.15, pauses at 1 s / 4 s, totals at 8 / 16.
pub fn reset_binning() -> BinningModel {
    let mut cuts = vec![Cuts { low: 0.05, high: 0.15 }; FEATURE_COUNT];
    for c in &mut cuts[6..12] {
        *c = Cuts { low: 1000.0, high: 4000.0 };
    }
    cuts[12] = Cuts { low: 8.0, high: 16.0 };
    BinningModel { cuts }
}

fn rule(label: Label, n: usize, weight: u32, conds: &[(Feature, Bin)]) -> AssociationRule {
    AssociationRule {
        id: format!("{label}-{n}"),
        conditions: conds.iter().map(|&(f, b)| Condition::new(f, b)).collect(),
        consequent: label,
        confidence: 0.9,
        support: f64::from(weight) / 90.0,
        weight,
    }
}

pub fn reset_rules() -> Vec<AssociationRule> {
    let llg = |n, w, c: &[(Feature, Bin)]| rule(Label::Llg, n, w, c);
    let hlg = |n, w, c: &[(Feature, Bin)]| rule(Label::Hlg, n, w, c);
    vec![
        hlg(1, 100, &[(freq(DirectArcClick), High)]),
        hlg(2, 96, &[(pause(FineStep), High)]),
        hlg(3, 90, &[(freq(Reset), Low), (freq(AutoAC), Low)]),
        hlg(4, 90, &[(pause(DirectArcClick), High)]),
        // satisfied by the stream
        llg(1, 18, &[(freq(Reset), High), (pause(FineStep), Low)]),
        llg(2, 21, &[(freq(AutoAC), High), (freq(Reset), High)]),
        llg(3, 19, &[(freq(Reset), High), (pause(DomainSplit), Medium)]),
        llg(4, 40, &[(freq(Reset), High)]),
        llg(5, 66, &[(freq(AutoAC), High)]),
        llg(6, 70, &[(Feature::TotalActions, High)]),
        llg(7, 72, &[(pause(AutoAC), Low)]),
        llg(8, 60, &[(pause(Backtrack), Low), (Feature::TotalActions, High)]),
        llg(9, 66, &[(pause(DomainSplit), Medium), (pause(AutoAC), Low)]),
        // not satisfied
        llg(10, 100, &[(freq(Reset), Low)]),
        llg(11, 99, &[(freq(DirectArcClick), High)]),
        llg(12, 98, &[(freq(FineStep), Low)]),
        llg(13, 97, &[(pause(DirectArcClick), Low)]),
        llg(14, 96, &[(pause(Reset), High)]),
        llg(15, 95, &[(freq(Backtrack), High), (pause(AutoAC), Low)]),
        llg(16, 94, &[(freq(DomainSplit), High)]),
        llg(17, 93, &[(Feature::TotalActions, Low)]),
        llg(18, 92, &[(pause(FineStep), High), (freq(Reset), High)]),
        llg(19, 87, &[(freq(AutoAC), Low), (pause(Backtrack), High)]),
    ]
}

pub fn reset_model() -> ModelDocument {
    ModelDocument::from_rules(
        reset_binning(),
        reset_rules(),
        Provenance {
            training_users: 110,
            seed: None,
            separated: true,
            p_value: None,
            description: "behavior logs of previous students using this system".into(),
        },
    )
}

/// 6 Fine Steps, 2 arc clicks, 6 Auto AC, 1 split, 1 backtrack, 4 resets.
pub fn reset_stream() -> Vec<ActionEvent> {
    let order = [
        FineStep,
        AutoAC,
        Reset,
        FineStep,
        DirectArcClick,
        AutoAC,
        Reset,
        DomainSplit,
        FineStep,
        AutoAC,
        Backtrack,
        Reset,
        AutoAC,
        FineStep,
        DirectArcClick,
        AutoAC,
        Reset,
        AutoAC,
        FineStep,
        FineStep,
    ];
    let pause_after = |a: ActionKind| match a {
        DomainSplit => 2500,
        Reset => 3000,
        DirectArcClick => 2000,
        _ => 500,
    };
    let mut t = 0;
    order
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let e = ActionEvent::new("fixture", i as u64 + 1, t, a);
            t += pause_after(a);
            e
        })
        .collect()
}
