//! Clusters a synthetic cohort, checks the groups differ in learning gain,
//! mines class association rules and prints the exported model.

use acsp::discovery::{cluster_users, export_model, mine_rules, Label, MiningParams};
use acsp::sim::{generate_corpus, ArchetypeSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = generate_corpus(&ArchetypeSpec::pair(0.3), 80, 11)?;
    let users = corpus.labeled();
    let clusters = cluster_users(&users, 2, 11)?;
    for c in 0..clusters.k {
        println!(
            "cluster {c}: {} users, mean gain {:.3} -> {}",
            clusters.sizes[c], clusters.mean_plg[c], clusters.labels[c]
        );
    }
    println!(
        "Welch t = {:.2}, p = {:.2e}, separated: {}",
        clusters.separation.t, clusters.separation.p_value, clusters.separated
    );

    let rules = mine_rules(&clusters, &users, MiningParams::default())?;
    for label in Label::BOTH {
        println!("{label}: {} rules, total weight {}", rules.count(label), rules.totals.get(label));
        for r in rules.for_label(label).take(3) {
            println!("  {} {} (rule weight: {})", r.id, r.describe(), r.weight);
        }
    }

    let doc = export_model(&clusters, &rules, Some(11));
    doc.validate()?;
    println!("model document: {} bytes", doc.to_json().len());
    Ok(())
}
