//! Train TransE embeddings and report filtered HIT@10 on held-out triples.

use lstp::datagen::{gen_kg, GenConfig};
use lstp::kge::{corruption_accuracy, filtered_tail_hits, train_kge_on, KgeConfig};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> anyhow::Result<()> {
    let g = gen_kg(&GenConfig::desk())?;
    let mut triples = g.triples().to_vec();
    triples.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
    let (test, train) = triples.split_at(triples.len() / 10);

    let cfg = KgeConfig::desk();
    let (emb, losses) = train_kge_on(&g, train, &cfg)?;
    println!("d = {}, {} epochs, loss {:.3} -> {:.3}", emb.dim(), losses.len(), losses[0], losses[losses.len() - 1]);
    println!("held-out filtered HIT@10: {:.3}", filtered_tail_hits(&emb, g.triples(), test, 10)?);
    println!("train triple beats a corrupted one: {:.3}", corruption_accuracy(&emb, &g, train, 2)?);
    Ok(())
}
