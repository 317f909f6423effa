use std::collections::HashMap;
use std::sync::Arc;

use lstp::data::Speaker;
use lstp::datagen::{gen_corpus, gen_kg, GenConfig, Split};
use lstp::dialog::{ActionKind, DialogState, Engine, EngineOptions, LexicalLinker, LongTermPlanner, OracleGrounding, OracleTarget, RandomTarget};
use lstp::kge::{train_kge, KgeConfig};

#[test]
fn recommend_fires_exactly_when_the_planners_agree() {
    let cfg = GenConfig { n_dialogs: 80, ..GenConfig::desk() };
    let g = Arc::new(gen_kg(&cfg).unwrap());
    let emb = Arc::new(train_kge(&g, &KgeConfig { epochs: 10, ..KgeConfig::desk() }).unwrap());
    let corpus = gen_corpus(&g, &emb, &cfg).unwrap();
    let dialogs = corpus.dialogs_in(Split::Test);
    let targets: HashMap<String, _> = dialogs.iter().map(|d| (d.user_id.clone(), d.target().unwrap())).collect();
    let ltps: [Arc<dyn LongTermPlanner>; 2] = [Arc::new(OracleTarget { targets }), Arc::new(RandomTarget { seed: 4 })];

    let (mut agree, mut turns) = (0, 0);
    for ltp in ltps {
        for mask_rejected in [false, true] {
            let engine = Engine::new(g.clone(), emb.clone(), Arc::new(LexicalLinker::new(&g, emb.dim())), ltp.clone(), Arc::new(OracleGrounding))
                .unwrap()
                .with_options(EngineOptions { mask_rejected });
            for d in &dialogs {
                let mut state = DialogState::new(&d.dialog_id, corpus.profile(&d.user_id).unwrap().clone());
                for t in d.turns.iter().filter(|t| t.speaker == Speaker::User) {
                    let out = engine.step(&mut state, &t.text).unwrap();
                    let agrees = out.stp_top == out.ltp_target;
                    assert_eq!(out.action.kind == ActionKind::Recommend, agrees, "{} turn {}", d.dialog_id, state.trace.len());
                    assert_eq!(out.action.entity, out.stp_top);
                    let rec = state.trace.last().unwrap();
                    assert_eq!((rec.action, rec.stp_top, rec.ltp_target), (out.action.kind, out.stp_top, out.ltp_target));
                    agree += usize::from(agrees);
                    turns += 1;
                }
            }
        }
    }
    assert!(agree > 0 && agree < turns, "{agree} of {turns} turns agreed");
}
