//! Delivers a hint for the demo learner and renders all six explanation
//! pages, with their navigation edges.

use acsp::classifier::classify_events;
use acsp::explain::{generate_page, Block, PageId, Templates};
use acsp::fixtures;
use acsp::hints::{Catalog, HintEngine};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = fixtures::reset_model();
    let events = fixtures::reset_stream();
    let mut engine = HintEngine::new(Catalog::default());
    engine.observe(&classify_events(&model, &events), &model, &events);
    let templates = Templates::default();

    for page in PageId::ALL {
        let content = generate_page(page, engine.latest(), &model, &templates)?;
        println!("== {} ({page})", content.title);
        for block in &content.blocks {
            match block {
                Block::Text { text } => println!("{text}"),
                Block::Diagram { nodes, .. } => println!("[diagram] {}", nodes.join(" -> ")),
                Block::RuleList { rules } => rules.iter().for_each(|r| println!("  * {}", r.text)),
                Block::Score { group, quotient, .. } => println!("  {group}: {quotient}"),
                Block::RankedHints { hints } => {
                    hints.iter().for_each(|h| println!("  {} {}", if h.chosen { ">" } else { " " }, h.text))
                }
                Block::Summation { text, .. } => println!("  {text}"),
            }
        }
        let links: Vec<String> = content.transitions.iter().map(|t| format!("{} ({:?})", t.to, t.kind)).collect();
        println!("-> {}\n", links.join(", "));
    }
    Ok(())
}
