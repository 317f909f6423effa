//! Ranking and generation metrics.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::EntityId;

/// One ranked prediction against a single relevant entity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankResult {
    pub gold: EntityId,
    pub ranking: Vec<EntityId>,
}

impl RankResult {
    pub fn new(gold: EntityId, ranking: Vec<EntityId>) -> Self {
        RankResult { gold, ranking }
    }

    /// 1-based position of the gold entity.
    pub fn rank(&self) -> Result<usize> {
        self.ranking
            .iter()
            .position(|&e| e == self.gold)
            .map(|p| p + 1)
            .ok_or_else(|| Error::domain(format!("gold entity {} is not in the ranking", self.gold)))
    }
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::domain("k must be at least 1"));
    }
    Ok(())
}

pub fn ndcg_at_k(r: &RankResult, k: usize) -> Result<f64> {
    check_k(k)?;
    let rank = r.rank()?;
    Ok(if rank <= k { 1.0 / (1.0 + rank as f64).log2() } else { 0.0 })
}

pub fn hit_at_k(r: &RankResult, k: usize) -> Result<f64> {
    check_k(k)?;
    Ok(if r.rank()? <= k { 1.0 } else { 0.0 })
}

pub fn mrr(r: &RankResult) -> Result<f64> {
    Ok(1.0 / r.rank()? as f64)
}

fn ngrams<T: AsRef<str>>(tokens: &[T], n: usize) -> Vec<Vec<&str>> {
    if n == 0 || tokens.len() < n {
        return Vec::new();
    }
    tokens.windows(n).map(|w| w.iter().map(AsRef::as_ref).collect()).collect()
}

/// Clipped n-gram precision of order exactly `n` times the brevity penalty.
pub fn bleu_n<T: AsRef<str>>(candidate: &[T], reference: &[T], n: usize) -> f64 {
    let cand = ngrams(candidate, n);
    if cand.is_empty() {
        return 0.0;
    }
    let mut ref_counts: HashMap<Vec<&str>, usize> = HashMap::new();
    for g in ngrams(reference, n) {
        *ref_counts.entry(g).or_default() += 1;
    }
    let mut cand_counts: HashMap<&Vec<&str>, usize> = HashMap::new();
    for g in &cand {
        *cand_counts.entry(g).or_default() += 1;
    }
    let clipped: usize = cand_counts
        .iter()
        .map(|(g, &c)| c.min(ref_counts.get(*g).copied().unwrap_or(0)))
        .sum();
    let precision = clipped as f64 / cand.len() as f64;
    let (c, r) = (candidate.len() as f64, reference.len() as f64);
    let bp = (1.0 - r / c).exp().min(1.0);
    precision * bp
}

/// Distinct n-grams over total n-grams across the corpus; 0 when there are none.
pub fn dist_n<T: AsRef<str>>(corpus: &[Vec<T>], n: usize) -> f64 {
    let mut total = 0usize;
    let mut seen: HashSet<Vec<&str>> = HashSet::new();
    for s in corpus {
        for g in ngrams(s, n) {
            total += 1;
            seen.insert(g);
        }
    }
    if total == 0 {
        0.0
    } else {
        seen.len() as f64 / total as f64
    }
}

/// Multiset token-overlap F1.
pub fn f1_tokens<T: AsRef<str>>(candidate: &[T], reference: &[T]) -> f64 {
    if candidate.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in reference {
        *counts.entry(t.as_ref()).or_default() += 1;
    }
    let mut overlap = 0usize;
    for t in candidate {
        if let Some(c) = counts.get_mut(t.as_ref()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / candidate.len() as f64;
    let r = overlap as f64 / reference.len() as f64;
    2.0 * p * r / (p + r)
}

/// Lower-cased whitespace/punctuation tokenisation used for generation metrics.
pub fn metric_tokens(text: &str) -> Vec<String> {
    crate::text::tokenize(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rr(gold: u32, n: u32) -> RankResult {
        RankResult::new(EntityId(gold), (0..n).map(EntityId).collect())
    }

    fn toks(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn rank_metric_examples() {
        assert_eq!(ndcg_at_k(&rr(0, 20), 7).unwrap(), 1.0);
        assert!((ndcg_at_k(&rr(2, 20), 10).unwrap() - 0.5).abs() < 1e-9);
        assert_eq!(ndcg_at_k(&rr(10, 20), 10).unwrap(), 0.0);
        let r4 = rr(3, 20);
        assert_eq!(hit_at_k(&r4, 10).unwrap(), 1.0);
        assert_eq!(hit_at_k(&r4, 3).unwrap(), 0.0);
        assert_eq!(mrr(&r4).unwrap(), 0.25);
        let r1 = rr(0, 5);
        assert_eq!((hit_at_k(&r1, 1).unwrap(), mrr(&r1).unwrap(), ndcg_at_k(&r1, 1).unwrap()), (1.0, 1.0, 1.0));
    }

    #[test]
    fn missing_gold_and_zero_k_are_errors() {
        assert!(mrr(&rr(9, 3)).is_err());
        assert!(hit_at_k(&rr(0, 3), 0).is_err());
    }

    #[test]
    fn bleu_examples() {
        let s = toks("a b c d e");
        for n in 1..=4 {
            assert_eq!(bleu_n(&s, &s, n), 1.0);
        }
        assert!((bleu_n(&toks("the the the"), &toks("the cat"), 1) - 1.0 / 3.0).abs() < 1e-9);
        assert_eq!(bleu_n(&toks("a b"), &toks("a b c"), 3), 0.0);
        // brevity: c = 2, r = 4 → BP = e^{-1}
        assert!((bleu_n(&toks("a b"), &toks("a b c d"), 1) - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn dist_and_f1_examples() {
        assert!((dist_n(&[toks("a b a b")], 2) - 2.0 / 3.0).abs() < 1e-9);
        assert_eq!(dist_n(&[toks("a b c d")], 1), 1.0);
        assert_eq!(dist_n::<&str>(&[], 1), 0.0);
        assert!((f1_tokens(&toks("a b c"), &toks("b c d")) - 2.0 / 3.0).abs() < 1e-9);
        assert_eq!(f1_tokens(&toks("x y"), &toks("x y")), 1.0);
        assert_eq!(f1_tokens(&toks("x y"), &toks("z w")), 0.0);
        assert_eq!(f1_tokens::<&str>(&[], &toks("z")), 0.0);
    }

    proptest! {
        #[test]
        fn rank_metrics_agree_with_index_scan(perm in Just((0u32..30).collect::<Vec<_>>()).prop_shuffle(), gold in 0u32..30, k in 1usize..40) {
            let r = RankResult::new(EntityId(gold), perm.iter().copied().map(EntityId).collect());
            let mut rank = 0;
            for (i, &e) in perm.iter().enumerate() {
                if e == gold { rank = i + 1; }
            }
            let hit = hit_at_k(&r, k).unwrap();
            let nd = ndcg_at_k(&r, k).unwrap();
            let m = mrr(&r).unwrap();
            prop_assert_eq!(hit, if rank <= k { 1.0 } else { 0.0 });
            prop_assert!((m - 1.0 / rank as f64).abs() < 1e-12);
            prop_assert!(nd <= hit && (0.0..=1.0).contains(&nd));
            prop_assert!(hit_at_k(&r, k + 1).unwrap() >= hit);
        }

        #[test]
        fn bleu_self_is_one_and_f1_symmetric(a in proptest::collection::vec("[a-d]", 4..10), b in proptest::collection::vec("[a-d]", 4..10)) {
            for n in 1..=4 { prop_assert_eq!(bleu_n(&a, &a, n), 1.0); }
            if a.len() == b.len() {
                prop_assert!((f1_tokens(&a, &b) - f1_tokens(&b, &a)).abs() < 1e-12);
            }
            let d = dist_n(&[a.clone()], 1);
            prop_assert!(d > 0.0 && d <= 1.0);
        }
    }
}
