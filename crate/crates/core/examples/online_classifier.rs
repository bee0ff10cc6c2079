//! Classifies a session action by action with the bundled demo model and
//! shows the membership scores settling.

use std::sync::Arc;

use acsp::classifier::ClassifierState;
use acsp::fixtures;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = Arc::new(fixtures::reset_model());
    let mut state = ClassifierState::new(model, "fixture");
    for event in fixtures::reset_stream() {
        let action = event.action;
        let snap = state.update(event)?;
        println!(
            "{:>2} {:<16} HLG {:.3}  LLG {:.3}  -> {}",
            snap.events,
            action.to_string(),
            snap.scores.hlg,
            snap.scores.llg,
            snap.label
        );
    }
    let snap = state.current();
    println!(
        "satisfied LLG weight {} of {}; triggering action {:?}",
        snap.satisfied_weight.llg, snap.totals.llg, snap.triggering_action
    );
    Ok(())
}
