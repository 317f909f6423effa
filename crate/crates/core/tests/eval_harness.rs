use std::collections::HashMap;
use std::sync::Arc;

use lstp::datagen::{gen_corpus, gen_kg, Corpus, GenConfig, Split};
use lstp::dialog::{Engine, LexicalLinker, OracleGrounding, OracleTarget};
use lstp::eval::{episodes, eval_cases, eval_grounding, eval_interactive, eval_recommendation, EvalCase, GroundingPrediction, InteractiveConfig};
use lstp::kg::{EntityId, KnowledgeGraph};
use lstp::kge::{train_kge, EmbeddingTable, KgeConfig};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn setup(n_dialogs: usize) -> (KnowledgeGraph, EmbeddingTable, Corpus) {
    let cfg = GenConfig { n_dialogs, ..GenConfig::desk() };
    let g = gen_kg(&cfg).unwrap();
    let emb = train_kge(&g, &KgeConfig { epochs: 20, ..KgeConfig::desk() }).unwrap();
    let c = gen_corpus(&g, &emb, &cfg).unwrap();
    (g, emb, c)
}

fn gold_first(universe: &[EntityId], gold: EntityId) -> Vec<EntityId> {
    let mut r = vec![gold];
    r.extend(universe.iter().copied().filter(|&e| e != gold));
    r
}

#[test]
fn oracle_stub_scores_one_on_every_rank_metric() {
    let (g, _, c) = setup(60);
    let cases = eval_cases(&c, Split::Test).unwrap();
    let all: Vec<EntityId> = g.entities().iter().map(|e| e.id).collect();
    let rec = eval_recommendation(&cases, |c: &EvalCase| Ok(gold_first(g.items(), c.turn.grounding))).unwrap();
    assert!(rec.metrics.values().all(|&v| v == 1.0), "{:?}", rec.metrics);
    let gr = eval_grounding(&cases, |c: &EvalCase| {
        Ok(GroundingPrediction {
            ranking: gold_first(&all, c.turn.grounding),
            target: c.target,
        })
    })
    .unwrap();
    assert!(gr.metrics.values().all(|&v| v == 1.0), "{:?}", gr.metrics);
}

#[test]
fn random_stub_hits_match_the_binomial_expectation() {
    let (g, _, c) = setup(1500);
    let cases: Vec<EvalCase> = Split::ALL.iter().flat_map(|&s| eval_cases(&c, s).unwrap()).collect();
    let all: Vec<EntityId> = g.entities().iter().map(|e| e.id).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let report = eval_grounding(&cases, |c: &EvalCase| {
        let mut ranking = all.clone();
        ranking.shuffle(&mut rng);
        Ok(GroundingPrediction { ranking, target: c.target })
    })
    .unwrap();
    assert!(report.n >= 5000, "only {} turns", report.n);
    for k in [1usize, 3, 5] {
        let p = k as f64 / all.len() as f64;
        let sigma = (p * (1.0 - p) / report.n as f64).sqrt();
        let got = report.metric(&format!("hit@{k}")).unwrap();
        assert!((got - p).abs() <= 3.0 * sigma, "hit@{k} = {got}, expected {p} ± {}", 3.0 * sigma);
    }
}

fn oracle_engine(g: &KnowledgeGraph, emb: &EmbeddingTable, eps: &[lstp::eval::Episode]) -> Engine {
    let targets: HashMap<String, EntityId> = eps.iter().map(|e| (e.profile.user_id.clone(), e.target)).collect();
    Engine::new(
        Arc::new(g.clone()),
        Arc::new(emb.clone()),
        Arc::new(LexicalLinker::new(g, emb.dim())),
        Arc::new(OracleTarget { targets }),
        Arc::new(OracleGrounding),
    )
    .unwrap()
}

#[test]
fn oracle_engine_always_succeeds_and_zero_turns_never_does() {
    let (g, emb, c) = setup(10);
    let cfg = InteractiveConfig {
        n_users: 50,
        max_turns: 12,
        chattiness: 0.0,
        ..InteractiveConfig::default()
    };
    let eps = episodes(&g, &emb, &c.profiles, &cfg).unwrap();
    let engine = oracle_engine(&g, &emb, &eps);
    let r = eval_interactive(&engine, &eps, &cfg).unwrap();
    assert_eq!(r.metric("success_rate").unwrap(), 1.0);
    assert_eq!(r.metric("rec_precision").unwrap(), 1.0);
    assert_eq!(r, eval_interactive(&engine, &eps, &cfg).unwrap());
    let zero = InteractiveConfig { max_turns: 0, ..cfg };
    let r0 = eval_interactive(&engine, &eps, &zero).unwrap();
    assert_eq!(r0.metric("success_rate").unwrap(), 0.0);
    assert_eq!(r0.metric("mean_turns").unwrap(), 0.0);
}
