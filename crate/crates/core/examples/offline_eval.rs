//! Train a small pipeline into a checkpoint and run every offline evaluation.

use lstp::checkpoint::Checkpoint;
use lstp::datagen::{gen_corpus, gen_kg, GenConfig, Split};
use lstp::dialog::ShortTermPlanner;
use lstp::eval::{eval_ablation, eval_cases, eval_generation, eval_grounding, eval_recommendation, Pipeline, TargetSource};
use lstp::kge::{train_kge, KgeConfig};
use lstp::ltp::{train_ltp, LtpConfig};
use lstp::stp::{train_stp, StpConfig, StpModel, StpVariant};

fn main() -> anyhow::Result<()> {
    let cfg = GenConfig {
        n_users: 300,
        n_dialogs: 400,
        ..GenConfig::desk()
    };
    let g = gen_kg(&cfg)?;
    let emb = train_kge(&g, &KgeConfig::desk())?;
    let corpus = gen_corpus(&g, &emb, &cfg)?;
    let (ltp, _) = train_ltp(&g, &emb, &corpus.ltp_examples(Split::Train)?, &LtpConfig { epochs: 3, ..LtpConfig::desk() })?;
    let (examples, histories) = corpus.stp_examples(Split::Train)?;
    let stp = |variant| -> anyhow::Result<StpModel> {
        let cfg = StpConfig { epochs: 8, variant, ..StpConfig::default() };
        Ok(train_stp(&g, &emb, &examples, &histories, &cfg)?.0)
    };
    let (full, without_lt) = (stp(StpVariant::Full)?, stp(StpVariant::WithoutLongTerm)?);

    let dir = tempfile::tempdir()?;
    let ck = Checkpoint::new(dir.path());
    ltp.save(&ck.ltp())?;
    full.save(&ck.stp(StpVariant::Full))?;
    println!("saved {} and {}", ck.ltp().display(), ck.stp(StpVariant::Full).display());

    let cases = eval_cases(&corpus, Split::Test)?;
    let p = Pipeline {
        graph: &g,
        emb: &emb,
        ltp: &ltp,
        stp: &full,
        target: TargetSource::Predicted,
    };
    let reports = [
        eval_recommendation(&cases, |c| p.item_ranking(c))?,
        eval_grounding(&cases, |c| Pipeline { target: TargetSource::Gold, ..p }.grounding(c))?,
        eval_generation(&g, &cases)?,
        eval_ablation(
            &g,
            &emb,
            &ltp,
            &[(StpVariant::Full, &full as &dyn ShortTermPlanner), (StpVariant::WithoutLongTerm, &without_lt)],
            &cases,
            TargetSource::Predicted,
        )?,
    ];
    for r in &reports {
        println!("{} over {} turns", r.mode, r.n);
        for (k, v) in &r.metrics {
            println!("  {k:32} {v:.4}");
        }
    }
    Ok(())
}
