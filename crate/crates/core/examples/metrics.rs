//! Ranking and generation metrics on small hand-made inputs.

use lstp::eval::{bleu_n, dist_n, f1_tokens, hit_at_k, metric_tokens, mrr, ndcg_at_k, RankResult};
use lstp::kg::EntityId;

fn main() -> anyhow::Result<()> {
    let r = RankResult::new(EntityId(7), [3, 9, 7, 1].map(EntityId).to_vec());
    println!("gold at rank {}", r.rank()?);
    println!("ndcg@10 {:.4}  hit@1 {}  hit@3 {}  mrr {:.4}", ndcg_at_k(&r, 10)?, hit_at_k(&r, 1)?, hit_at_k(&r, 3)?, mrr(&r)?);

    let reference = metric_tokens("Heat is a crime film starring Robert De Niro.");
    let candidate = metric_tokens("Heat is a crime film with Robert De Niro.");
    for n in 1..=4 {
        println!("bleu@{n} {:.4}", bleu_n(&candidate, &reference, n));
    }
    println!("f1 {:.4}", f1_tokens(&candidate, &reference));
    let corpus = vec![candidate.clone(), reference.clone()];
    println!("dist@1 {:.4}  dist@2 {:.4}", dist_n(&corpus, 1), dist_n(&corpus, 2));
    Ok(())
}
