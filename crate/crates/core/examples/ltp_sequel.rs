//! Learn the "watch the sequel next" rule with the long-term planner.

use lstp::data::UserProfile;
use lstp::datagen::{gen_sequel_corpus, SequelConfig};
use lstp::kge::{train_kge, KgeConfig};
use lstp::ltp::{ltp_predict, train_ltp, LtpConfig};

fn main() -> anyhow::Result<()> {
    let c = gen_sequel_corpus(&SequelConfig::default())?;
    let emb = train_kge(&c.graph, &KgeConfig::desk())?;
    let cfg = LtpConfig { epochs: 20, ..LtpConfig::default() };
    let (model, losses) = train_ltp(&c.graph, &emb, &c.train, &cfg)?;
    println!("{} training users, loss {:.3} -> {:.3}", c.train.len(), losses[0], losses[losses.len() - 1]);

    let mut hits = 0;
    for ex in &c.test {
        let seq = model.sequence(&c.graph, &UserProfile::new(ex.user_id.clone(), ex.profile.clone()), &[])?;
        hits += usize::from(ltp_predict(&model, &c.graph, &emb, &seq)?.0 == ex.target);
    }
    println!("held-out HIT@1: {:.3} over {} users", hits as f64 / c.test.len() as f64, c.test.len());

    let ex = &c.test[0];
    let seq = model.sequence(&c.graph, &UserProfile::new(ex.user_id.clone(), ex.profile.clone()), &[])?;
    let (top, _) = ltp_predict(&model, &c.graph, &emb, &seq)?;
    let last = ex.profile.last().expect("non-empty profile").0;
    println!("last watched {}, predicted {}, sequel {}", c.graph.name(last), c.graph.name(top), c.graph.name(ex.target));
    Ok(())
}
