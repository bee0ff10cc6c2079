//! Steps AC-3 by hand over map coloring: fine steps, a direct arc click,
//! auto-solve, a domain split and a backtrack.

use acsp::csp::{Constraint, Domain, Network, Variable};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let vars = ["WA", "NT", "SA"].map(|n| Variable::new(n, 1..=3));
    let ne = |a: &str, b: &str| {
        let pairs = (1..=3).flat_map(|x| (1..=3).map(move |y| (x, y))).filter(|(x, y)| x != y);
        Constraint::extensional(a, b, pairs)
    };
    let mut net = Network::new("triangle", vars.to_vec(), vec![ne("WA", "NT"), ne("WA", "SA"), ne("NT", "SA")])?;
    println!("{net}");

    for _ in 0..3 {
        let step = net.fine_step()?;
        println!("fine step: {:?} on arc {:?}", step.kind, step.arc);
    }
    let click = net.direct_arc_click(2)?;
    println!("clicked arc 2: {:?}, removed {:?}", click.kind, click.removed);

    let steps = net.auto_ac()?;
    println!("auto AC ran {} micro-steps -> {net}", steps.len());

    net.domain_split("WA", &Domain::from([1]))?;
    println!("split WA={{1}}, alternatives {:?}", net.alternatives());
    net.auto_ac()?;
    println!("after propagation: {net}");

    net.backtrack()?;
    println!("backtracked to {net}");
    net.reset();
    println!("reset: {net}");
    Ok(())
}
