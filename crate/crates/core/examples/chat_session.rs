//! Drive a dialog session turn by turn and dump its trace.

use std::collections::HashMap;
use std::sync::Arc;

use lstp::datagen::{gen_kg, GenConfig};
use lstp::data::UserProfile;
use lstp::dialog::{DialogState, Engine, LexicalLinker, OracleGrounding, OracleTarget};
use lstp::kge::{train_kge, KgeConfig};

fn main() -> anyhow::Result<()> {
    let g = Arc::new(gen_kg(&GenConfig::desk())?);
    let emb = Arc::new(train_kge(&g, &KgeConfig::desk())?);
    let items = g.items();
    let target = items[items.len() / 2];
    let targets = HashMap::from([("alice".to_string(), target)]);
    let engine = Engine::new(
        g.clone(),
        emb.clone(),
        Arc::new(LexicalLinker::new(&g, emb.dim())),
        Arc::new(OracleTarget { targets }),
        Arc::new(OracleGrounding),
    )?;

    let profile = UserProfile::new("alice", vec![(items[0], 100), (items[1], 250)]);
    let mut state = DialogState::new("demo", profile);
    let first = format!("I watched {} recently", g.name(items[0]));
    for text in [first.as_str(), "tell me more", "go on", "what else?", "and then?"] {
        let out = engine.step(&mut state, text)?;
        println!("user:  {text}");
        println!("agent: {}  [{:?} {}]", out.action.response_text, out.action.kind, g.name(out.action.entity));
        if out.action.entity == target {
            break;
        }
    }
    let mut trace = Vec::new();
    state.write_trace(&mut trace)?;
    println!("\n{}", String::from_utf8(trace)?);
    Ok(())
}
