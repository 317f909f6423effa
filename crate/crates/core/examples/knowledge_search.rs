//! Collect the triples that connect two groundings and render a response.

use lstp::dialog::{knowledge_search, render, ActionKind};
use lstp::kg::{EntityKind, GraphBuilder};

fn main() -> anyhow::Result<()> {
    let mut b = GraphBuilder::new();
    let heat = b.add_entity("Heat", EntityKind::Item)?;
    let ronin = b.add_entity("Ronin", EntityKind::Item)?;
    let de_niro = b.add_entity("Robert De Niro", EntityKind::Attribute)?;
    let crime = b.add_entity("Crime", EntityKind::Attribute)?;
    let actors = b.add_relation("The main actors of")?;
    let genre = b.add_relation("The type of")?;
    b.add_triple(heat, actors, de_niro)?;
    b.add_triple(ronin, actors, de_niro)?;
    b.add_triple(heat, genre, crime)?;
    b.add_triple(ronin, genre, crime)?;
    let g = b.build();

    let k = knowledge_search(&g, Some(heat), ronin)?;
    for t in &k {
        println!("({}, {}, {})", g.name(t.head), g.relation_name(t.rel), g.name(t.tail));
    }
    println!("{}", render(&g, ActionKind::Recommend, ronin, Some(heat), &k));
    println!("{}", render(&g, ActionKind::Ground, de_niro, Some(heat), &knowledge_search(&g, Some(heat), de_niro)?));
    Ok(())
}
