//! Train the short-term planner and inspect its grounding ranking on a test turn.

use lstp::datagen::{gen_corpus, gen_kg, GenConfig, Split};
use lstp::eval::{eval_cases, eval_grounding, Pipeline, TargetSource};
use lstp::kge::{train_kge, KgeConfig};
use lstp::ltp::{train_ltp, LtpConfig};
use lstp::stp::{stp_predict, train_stp, StpConfig, StpQuery};

fn main() -> anyhow::Result<()> {
    let cfg = GenConfig {
        n_users: 300,
        n_dialogs: 400,
        ..GenConfig::desk()
    };
    let g = gen_kg(&cfg)?;
    let emb = train_kge(&g, &KgeConfig::desk())?;
    let corpus = gen_corpus(&g, &emb, &cfg)?;
    let (examples, histories) = corpus.stp_examples(Split::Train)?;
    let (stp, _) = train_stp(&g, &emb, &examples, &histories, &StpConfig { epochs: 10, ..StpConfig::default() })?;
    let (ltp, _) = train_ltp(&g, &emb, &corpus.ltp_examples(Split::Train)?, &LtpConfig { epochs: 2, ..LtpConfig::desk() })?;

    let cases = eval_cases(&corpus, Split::Test)?;
    let c = &cases[1];
    let q = StpQuery {
        utterance: &c.turn.utterance,
        context: &c.turn.context,
        history: &[],
        target: c.target,
    };
    let (_, ranking) = stp_predict(&stp, &g, &emb, &q)?;
    let top: Vec<&str> = ranking.iter().take(5).map(|&e| g.name(e)).collect();
    println!("user: {}", c.turn.utterance);
    println!("target {}, gold grounding {}", g.name(c.target), g.name(c.turn.grounding));
    println!("top 5: {}", top.join(", "));

    let p = Pipeline {
        graph: &g,
        emb: &emb,
        ltp: &ltp,
        stp: &stp,
        target: TargetSource::Gold,
    };
    let report = eval_grounding(&cases, |c| p.grounding(c))?;
    println!("{}", serde_json::to_string_pretty(&report.metrics)?);
    Ok(())
}
