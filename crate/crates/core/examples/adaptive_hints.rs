//! Ranks the hint catalog for the demo learner, then keeps ignoring the
//! advice to show the reaction window, the escalation to strong guidance
//! and the move to the next hint once one is used up.

use acsp::classifier::classify_events;
use acsp::fixtures;
use acsp::hints::{score_hints, Catalog, HintEngine, REACTION_WINDOW};
use acsp::interaction::{ActionEvent, ActionKind};

fn main() {
    let model = fixtures::reset_model();
    let catalog = Catalog::default();
    let mut events = fixtures::reset_stream();

    let snap = classify_events(&model, &events);
    for r in score_hints(&snap, &model, &catalog).iter().take(4) {
        println!("{:<16} rank {:>3}  ({} rules)", r.item.id, r.rank, r.contributing_rules.len());
    }
    println!("reaction window: {REACTION_WINDOW} actions");

    let mut engine = HintEngine::new(catalog);
    let mut t = events.last().map_or(0, |e| e.timestamp_ms);
    let mut seen = 0;
    while events.len() < 200 {
        let snap = classify_events(&model, &events);
        engine.observe(&snap, &model, &events);
        if engine.delivered().len() > seen {
            seen = engine.delivered().len();
            let d = engine.latest().unwrap();
            println!("seq {:>3}: hint #{} {} [{:?}]", d.seq, d.payload.hint, d.payload.item, d.payload.stage);
            if !d.payload.highlight.is_empty() {
                println!("         highlight {:?}", d.payload.highlight);
            }
        }
        // ignore whatever was suggested: keep auto-solving and resetting
        t += 800;
        let seq = events.len() as u64 + 1;
        let action = if seq.is_multiple_of(2) { ActionKind::Reset } else { ActionKind::AutoAC };
        events.push(ActionEvent::new("fixture", seq, t, action));
    }
    for (item, h) in &engine.delivery().history {
        let followed = h.outcomes.iter().filter(|o| o.followed).count();
        println!("{item}: {} deliveries, {followed} followed, exhausted {}", h.deliveries, h.exhausted);
    }
}
