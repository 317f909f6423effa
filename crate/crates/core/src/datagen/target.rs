//! Recommendation targets from clustered user histories.

use crate::data::UserProfile;
use crate::error::{Error, Result};
use crate::kg::EntityId;
use crate::kge::EmbeddingTable;

#[derive(Clone, Debug, PartialEq)]
pub struct Cluster {
    pub medoid: EntityId,
    /// Distinct member items, ascending id.
    pub members: Vec<EntityId>,
    /// Recency-weighted mass `Σ exp(−(t_now − t_i)/τ)` over member interactions.
    pub significance: f64,
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Deterministic PAM k-medoids over `points` (ascending by id). Returns the
/// medoid indices and each point's assigned medoid index.
pub fn k_medoids(points: &[(EntityId, &[f64])], k: usize) -> (Vec<usize>, Vec<usize>) {
    let n = points.len();
    let dist: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| euclid(points[i].1, points[j].1)).collect())
        .collect();
    let k = k.min(n);
    let cost = |meds: &[usize]| -> f64 {
        (0..n)
            .map(|i| meds.iter().map(|&m| dist[i][m]).fold(f64::INFINITY, f64::min))
            .sum()
    };
    // BUILD: greedily add the point that lowers the total cost most.
    let mut meds: Vec<usize> = Vec::with_capacity(k);
    while meds.len() < k {
        let mut best: Option<(f64, usize)> = None;
        for c in (0..n).filter(|c| !meds.contains(c)) {
            let mut trial = meds.clone();
            trial.push(c);
            let v = cost(&trial);
            if best.is_none_or(|(b, _)| v < b - 1e-12) {
                best = Some((v, c));
            }
        }
        meds.push(best.expect("k ≤ n").1);
    }
    // SWAP: apply the best strictly improving exchange until none remains.
    let mut current = cost(&meds);
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for mi in 0..meds.len() {
            for o in (0..n).filter(|o| !meds.contains(o)) {
                let mut trial = meds.clone();
                trial[mi] = o;
                let v = cost(&trial);
                if v < current - 1e-12 && best.is_none_or(|(b, _, _)| v < b - 1e-12) {
                    best = Some((v, mi, o));
                }
            }
        }
        match best {
            Some((v, mi, o)) => {
                meds[mi] = o;
                current = v;
            }
            None => break,
        }
    }
    meds.sort_unstable();
    let assign = (0..n)
        .map(|i| {
            let mut best = meds[0];
            for &m in &meds[1..] {
                if dist[i][m] < dist[i][best] - 1e-12 {
                    best = m;
                }
            }
            best
        })
        .collect();
    (meds, assign)
}

/// Clusters the profile's items and ranks clusters by recency-weighted mass.
/// Clusters are returned most significant first (ties by ascending medoid id).
pub fn cluster_profile(profile: &UserProfile, emb: &EmbeddingTable, k: usize, tau_rec: f64, t_now: u64) -> Result<Vec<Cluster>> {
    if profile.is_empty() {
        return Err(Error::domain(format!("profile of {} is empty", profile.user_id)));
    }
    if k == 0 || !(tau_rec > 0.0) {
        return Err(Error::domain("k and tau_rec must be positive"));
    }
    let mut items: Vec<EntityId> = profile.interactions.iter().map(|&(e, _)| e).collect();
    items.sort_unstable();
    items.dedup();
    let points = items.iter().map(|&e| Ok((e, emb.entity(e)?))).collect::<Result<Vec<_>>>()?;
    let (meds, assign) = k_medoids(&points, k);
    let mut clusters: Vec<Cluster> = meds
        .iter()
        .map(|&m| Cluster {
            medoid: items[m],
            members: items.iter().zip(&assign).filter(|(_, &a)| a == m).map(|(&e, _)| e).collect(),
            significance: 0.0,
        })
        .collect();
    for &(e, t) in &profile.interactions {
        let p = items.binary_search(&e).expect("present");
        let c = meds.iter().position(|&m| m == assign[p]).expect("assigned");
        let age = t_now.saturating_sub(t) as f64;
        clusters[c].significance += (-age / tau_rec).exp();
    }
    clusters.sort_by(|a, b| b.significance.total_cmp(&a.significance).then(a.medoid.cmp(&b.medoid)));
    Ok(clusters)
}

/// Medoid of the most significant cluster of the profile's items.
pub fn select_target(profile: &UserProfile, emb: &EmbeddingTable, k: usize, tau_rec: f64, t_now: u64) -> Result<EntityId> {
    Ok(cluster_profile(profile, emb, k, tau_rec, t_now)?[0].medoid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kge::NormKind;
    use crate::nn::tensor::Tensor2;
    use rand::SeedableRng;

    fn table(rows: Vec<Vec<f64>>) -> EmbeddingTable {
        EmbeddingTable::new(Tensor2::from_rows(&rows).unwrap(), Tensor2::zeros(1, rows[0].len()), NormKind::L2).unwrap()
    }

    #[test]
    fn identical_embeddings_give_lowest_id() {
        let emb = table(vec![vec![1.0, 0.0]; 6]);
        let p = UserProfile::new("u", vec![(EntityId(4), 1), (EntityId(2), 2), (EntityId(5), 3)]);
        assert_eq!(select_target(&p, &emb, 3, 10.0, 4).unwrap(), EntityId(2));
    }

    #[test]
    fn recent_cluster_wins_with_small_tau() {
        // ids 0..5 old cluster near (0,0); ids 5..9 recent cluster near (10,10)
        let mut rows = Vec::new();
        for i in 0..5 {
            rows.push(vec![0.1 * i as f64, 0.0]);
        }
        for i in 0..4 {
            rows.push(vec![10.0, 10.0 + 0.1 * i as f64]);
        }
        let emb = table(rows);
        let mut inter: Vec<(EntityId, u64)> = (0..5).map(|i| (EntityId(i), 10 + i as u64)).collect();
        inter.extend((5..9).map(|i| (EntityId(i), 1000 + i as u64)));
        let p = UserProfile::new("u", inter);
        let clusters = cluster_profile(&p, &emb, 2, 5.0, 1010).unwrap();
        // hand computation: old weights ≈ e^{-200}, recent weights e^{-(1010-1005..1008)/5}
        let recent: f64 = (5..9).map(|i| (-((1010 - (1000 + i)) as f64) / 5.0).exp()).sum();
        assert!((clusters[0].significance - recent).abs() < 1e-12);
        assert_eq!(clusters[0].members, (5..9).map(EntityId).collect::<Vec<_>>());
        assert!([EntityId(6), EntityId(7)].contains(&clusters[0].medoid));
        // the old cluster is larger, so a long memory flips the choice
        let slow = cluster_profile(&p, &emb, 2, 1e9, 1010).unwrap();
        assert!(slow[0].members.contains(&EntityId(0)));
    }

    #[test]
    fn k1_is_brute_force_medoid() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let t = Tensor2::randn(12, 3, 1.0, &mut rng);
        let rows: Vec<Vec<f64>> = (0..12).map(|i| t.row(i).to_vec()).collect();
        let emb = table(rows.clone());
        let p = UserProfile::new("u", (0..12).map(|i| (EntityId(i), i as u64)).collect());
        let brute = (0..12)
            .min_by(|&a, &b| {
                let ca: f64 = (0..12).map(|j| euclid(&rows[a], &rows[j])).sum();
                let cb: f64 = (0..12).map(|j| euclid(&rows[b], &rows[j])).sum();
                ca.total_cmp(&cb)
            })
            .unwrap();
        assert_eq!(select_target(&p, &emb, 1, 1.0, 20).unwrap(), EntityId(brute as u32));
    }

    #[test]
    fn empty_profile_is_domain_error() {
        let emb = table(vec![vec![0.0, 0.0]]);
        assert!(matches!(select_target(&UserProfile::default(), &emb, 1, 1.0, 0), Err(Error::Domain(_))));
    }
}
