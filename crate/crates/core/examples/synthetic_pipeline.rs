//! Generates a training and a held-out cohort, trains a model and prints
//! accuracy as more of each held-out stream is seen.

use acsp::discovery::MiningParams;
use acsp::sim::{eval, generate_corpus, run_pipeline, ArchetypeSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let archetypes = ArchetypeSpec::pair(0.3);
    let train = generate_corpus(&archetypes, 100, 1)?;
    let held_out = generate_corpus(&archetypes, 100, 2)?;
    let (model, report) = run_pipeline(&train, MiningParams::default(), 1)?;
    println!(
        "purity {:.2}, {} HLG / {} LLG rules, weights {}..={}",
        report.purity, report.rule_counts.hlg, report.rule_counts.llg, report.min_weight, report.max_weight
    );
    for row in eval(&model, &held_out, &[0.1, 0.25, 0.5, 1.0])? {
        println!("prefix {:.2}: accuracy {:.3}", row.prefix, row.accuracy);
    }
    Ok(())
}
