//! Generate user profiles and knowledge-grounded dialogs, then print one.

use lstp::data::Speaker;
use lstp::datagen::{gen_corpus, gen_kg, GenConfig, Split};
use lstp::kge::{train_kge, KgeConfig};

fn main() -> anyhow::Result<()> {
    let cfg = GenConfig {
        n_users: 200,
        n_dialogs: 200,
        ..GenConfig::desk()
    };
    let g = gen_kg(&cfg)?;
    let emb = train_kge(&g, &KgeConfig::desk())?;
    let corpus = gen_corpus(&g, &emb, &cfg)?;
    for s in Split::ALL {
        println!("{}: {} dialogs", s.name(), corpus.split_ids(s).len());
    }

    let d = &corpus.dialogs[0];
    let profile = corpus.profile(&d.user_id)?;
    let history: Vec<&str> = profile.interactions.iter().map(|&(e, _)| g.name(e)).collect();
    println!("\n{} watched: {}", d.user_id, history.join(", "));
    println!("target: {}", g.name(d.target()?));
    for t in &d.turns {
        let who = match t.speaker {
            Speaker::User => "user ",
            Speaker::Agent if t.is_recommendation => "agent*",
            Speaker::Agent => "agent",
        };
        println!("{who:6} {}", t.text);
    }
    Ok(())
}
