//! Turns an action stream into the 13 behavior features, fits tertile cuts
//! over a small corpus and discretizes each user.

use acsp::interaction::{discretize, extract_features, fit_binning, ActionEvent, ActionKind, Feature};

fn stream(user: &str, pattern: &[(ActionKind, u64)]) -> Vec<ActionEvent> {
    let mut t = 0;
    pattern
        .iter()
        .cycle()
        .take(30)
        .enumerate()
        .map(|(i, &(a, pause))| {
            let e = ActionEvent::new(user, i as u64 + 1, t, a);
            t += pause;
            e
        })
        .collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    use ActionKind::*;
    let users = [
        stream("careful", &[(FineStep, 4000), (DirectArcClick, 5000)]),
        stream("mixed", &[(FineStep, 2000), (AutoAC, 1500), (DomainSplit, 3000)]),
        stream("hasty", &[(AutoAC, 600), (Reset, 400)]),
    ];
    let vectors: Vec<_> = users.iter().map(|s| extract_features(s)).collect();
    let binning = fit_binning(&vectors)?;

    for (events, v) in users.iter().zip(&vectors) {
        let d = discretize(v, &binning);
        println!("{} ({} actions)", events[0].session, events.len());
        for f in Feature::all() {
            println!("  {:<22} {:>9.3}  {:?}", f.to_string(), v.get(f), d.get(f));
        }
    }
    Ok(())
}
