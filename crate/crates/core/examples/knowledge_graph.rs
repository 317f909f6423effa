//! Generate the synthetic movie graph, save it and walk a shortest path.

use lstp::datagen::{gen_kg, GenConfig};
use lstp::kg::KnowledgeGraph;

fn main() -> anyhow::Result<()> {
    let g = gen_kg(&GenConfig::desk())?;
    println!("{} entities, {} relations, {} triples, {} items", g.num_entities(), g.num_relations(), g.num_triples(), g.items().len());
    for t in g.triples().iter().take(5) {
        println!("  ({}, {}, {})", g.name(t.head), g.relation_name(t.rel), g.name(t.tail));
    }

    let dir = tempfile::tempdir()?;
    let files = g.save_dir(dir.path())?;
    println!("saved {} files; reload equal: {}", files.len(), KnowledgeGraph::load_dir(dir.path())?.triples() == g.triples());

    let (from, to) = (g.items()[0], g.items()[g.items().len() - 1]);
    let mut path = vec![from];
    let mut at = from;
    while let Some(next) = g.next_hop(at, to)? {
        path.push(next);
        at = next;
        if at == to {
            break;
        }
    }
    let names: Vec<&str> = path.iter().map(|&e| g.name(e)).collect();
    println!("path: {}", names.join(" -> "));
    Ok(())
}
