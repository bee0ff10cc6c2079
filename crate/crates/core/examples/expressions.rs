//! Loads a problem document with comparison constraints and lowers one
//! expression to its allowed pairs.

use acsp::problem::{compile, load_problem, lower, parse_expression};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let expr = parse_expression("Eat >= Cook + 1")?;
    println!("parsed: {expr}");
    let pairs = lower(&expr, &[1, 2, 3], &[1, 2, 3]);
    println!("allowed (Eat, Cook) pairs: {pairs:?}");

    let spec = load_problem(include_str!("../data/problems/scheduling.json"))?;
    let mut net = compile(&spec);
    for c in net.constraints() {
        println!("constraint {}", c.label);
    }
    net.auto_ac()?;
    println!("{net}");

    for bad in ["A >", "A ~ B", "A >= A"] {
        match parse_expression(bad) {
            Ok(e) => println!("{bad:?} parsed as {e}"),
            Err(e) => println!("{bad:?} rejected: {e}"),
        }
    }
    Ok(())
}
