//! Simulated-user evaluation of an oracle-planned engine against random grounding.

use std::collections::HashMap;
use std::sync::Arc;

use lstp::datagen::{gen_kg, gen_profiles, GenConfig};
use lstp::dialog::{Engine, LexicalLinker, OracleGrounding, OracleTarget, RandomGrounding};
use lstp::eval::{episodes, eval_interactive, run_episode, InteractiveConfig};
use lstp::kge::{train_kge, KgeConfig};

fn main() -> anyhow::Result<()> {
    let g = Arc::new(gen_kg(&GenConfig::desk())?);
    let emb = Arc::new(train_kge(&g, &KgeConfig::desk())?);
    let cfg = InteractiveConfig { n_users: 50, ..InteractiveConfig::default() };
    let profiles = gen_profiles(&g, &GenConfig { n_users: cfg.n_users, ..GenConfig::desk() })?;
    let eps = episodes(&g, &emb, &profiles, &cfg)?;

    let targets: HashMap<String, _> = eps.iter().map(|e| (e.profile.user_id.clone(), e.target)).collect();
    let linker = Arc::new(LexicalLinker::new(&g, emb.dim()));
    let oracle = Engine::new(g.clone(), emb.clone(), linker, Arc::new(OracleTarget { targets }), Arc::new(OracleGrounding))?;
    let random = Engine {
        stp: Arc::new(RandomGrounding { seed: 0 }),
        ..oracle.clone()
    };
    for (name, engine) in [("oracle", &oracle), ("random grounding", &random)] {
        let r = eval_interactive(engine, &eps, &cfg)?;
        println!("{name}: {}", serde_json::to_string(&r.metrics)?);
    }

    let out = run_episode(&oracle, &eps[0], &cfg, 0)?;
    println!("\nepisode 0 (target {}):", g.name(eps[0].target));
    for t in &out.state.turns {
        println!("  {:?}: {}", t.speaker, t.text);
    }
    Ok(())
}
