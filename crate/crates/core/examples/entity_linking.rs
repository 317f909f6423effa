//! Train the utterance-to-entity linker and link a few sentences.

use lstp::datagen::{gen_corpus, gen_kg, GenConfig, Split};
use lstp::kge::{train_kge, KgeConfig};
use lstp::stp::{link_entities, retrieval_accuracy, train_linker, LinkerConfig};

fn main() -> anyhow::Result<()> {
    let cfg = GenConfig {
        n_users: 200,
        n_dialogs: 300,
        ..GenConfig::desk()
    };
    let g = gen_kg(&cfg)?;
    let emb = train_kge(&g, &KgeConfig::desk())?;
    let corpus = gen_corpus(&g, &emb, &cfg)?;
    let lcfg = LinkerConfig { epochs: 5, ..LinkerConfig::default() };
    let (linker, _) = train_linker(&g, &emb, &corpus.link_pairs(Split::Train), &corpus.link_pairs(Split::Valid), &lcfg)?;
    println!("test acc@{}: {:.3}", linker.top_k, retrieval_accuracy(&linker, &emb, &corpus.link_pairs(Split::Test), linker.top_k)?);

    let items = g.items();
    let texts = [
        format!("I really liked {} last week", g.name(items[0])),
        format!("anything like {} or {}?", g.name(items[1]), g.name(items[2])),
        "not sure what I want tonight".to_string(),
    ];
    for text in &texts {
        let linked: Vec<&str> = link_entities(&linker, &emb, text, linker.top_k).iter().map(|&e| g.name(e)).collect();
        println!("{text:?} -> {linked:?}");
    }
    Ok(())
}
