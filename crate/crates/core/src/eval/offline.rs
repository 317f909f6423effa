use std::collections::BTreeMap;

use super::metrics::{bleu_n, dist_n, f1_tokens, hit_at_k, metric_tokens, mrr, ndcg_at_k, RankResult};
use super::report::{EvalReport, Means};
use crate::data::{AgentTurnContext, UserProfile};
use crate::datagen::{Corpus, Split};
use crate::dialog::{knowledge_search, render, ActionKind, LongTermPlanner, ShortTermPlanner};
use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph};
use crate::kge::EmbeddingTable;
use crate::stp::{StpQuery, StpVariant};

/// One teacher-forced agent turn of a recorded dialog.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalCase {
    pub dialog_id: String,
    pub profile: UserProfile,
    pub turn: AgentTurnContext,
    /// The dialog's recommended item.
    pub target: EntityId,
}

/// Every agent turn of the dialogs in `split`.
pub fn eval_cases(corpus: &Corpus, split: Split) -> Result<Vec<EvalCase>> {
    let mut out = Vec::new();
    for d in corpus.dialogs_in(split) {
        let target = d.target()?;
        let profile = corpus.profile(&d.user_id)?;
        for turn in d.agent_contexts()? {
            out.push(EvalCase {
                dialog_id: d.dialog_id.clone(),
                profile: profile.clone(),
                turn,
                target,
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RankMetric {
    Ndcg(usize),
    Hit(usize),
    Mrr,
}

impl RankMetric {
    pub fn name(self) -> String {
        match self {
            RankMetric::Ndcg(k) => format!("ndcg@{k}"),
            RankMetric::Hit(k) => format!("hit@{k}"),
            RankMetric::Mrr => "mrr".into(),
        }
    }

    pub fn eval(self, r: &RankResult) -> Result<f64> {
        match self {
            RankMetric::Ndcg(k) => ndcg_at_k(r, k),
            RankMetric::Hit(k) => hit_at_k(r, k),
            RankMetric::Mrr => mrr(r),
        }
    }
}

pub const RECOMMENDATION_METRICS: [RankMetric; 6] = [
    RankMetric::Ndcg(1),
    RankMetric::Ndcg(10),
    RankMetric::Ndcg(50),
    RankMetric::Hit(10),
    RankMetric::Hit(50),
    RankMetric::Mrr,
];

pub const GROUNDING_METRICS: [RankMetric; 4] = [RankMetric::Hit(1), RankMetric::Hit(3), RankMetric::Hit(5), RankMetric::Mrr];

/// Mean of each metric over the results.
pub fn rank_metrics(results: &[RankResult], metrics: &[RankMetric]) -> Result<BTreeMap<String, f64>> {
    let mut m = Means::default();
    for r in results {
        for &metric in metrics {
            m.add(metric.name(), metric.eval(r)?);
        }
    }
    Ok(m.finish())
}

fn non_empty(n: usize, what: &str) -> Result<()> {
    if n == 0 {
        return Err(Error::domain(format!("no {what} to evaluate")));
    }
    Ok(())
}

/// Ranks items at the gold recommendation turns.
pub fn eval_recommendation(cases: &[EvalCase], mut rank: impl FnMut(&EvalCase) -> Result<Vec<EntityId>>) -> Result<EvalReport> {
    let mut results = Vec::new();
    for c in cases.iter().filter(|c| c.turn.is_recommendation) {
        results.push(RankResult::new(c.turn.grounding, rank(c)?));
    }
    non_empty(results.len(), "recommendation turns")?;
    EvalReport::new("recommendation", rank_metrics(&results, &RECOMMENDATION_METRICS)?, results.len())
}

/// A grounding ranking together with the long-term target it was conditioned on.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundingPrediction {
    pub ranking: Vec<EntityId>,
    pub target: EntityId,
}

/// Ranks all entities at the non-recommendation turns and scores the
/// recommend-or-ground decision against the gold labels on every turn.
pub fn eval_grounding(cases: &[EvalCase], mut predict: impl FnMut(&EvalCase) -> Result<GroundingPrediction>) -> Result<EvalReport> {
    let mut results = Vec::new();
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for c in cases {
        let p = predict(c)?;
        let top = *p.ranking.first().ok_or_else(|| Error::domain("empty ranking"))?;
        let fired = top == p.target;
        match (fired, c.turn.is_recommendation) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
        if !c.turn.is_recommendation {
            results.push(RankResult::new(c.turn.grounding, p.ranking));
        }
    }
    non_empty(results.len(), "grounding turns")?;
    let mut metrics = rank_metrics(&results, &GROUNDING_METRICS)?;
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    metrics.insert("decision_precision".into(), ratio(tp, tp + fp));
    metrics.insert("decision_recall".into(), ratio(tp, tp + fneg));
    EvalReport::new("grounding", metrics, results.len())
}

/// Renders a response at every gold grounding and compares it with the
/// recorded text, with and without the knowledge search (`wo_ks.*`).
pub fn eval_generation(g: &KnowledgeGraph, cases: &[EvalCase]) -> Result<EvalReport> {
    non_empty(cases.len(), "agent turns")?;
    let mut m = Means::default();
    let mut outputs: [Vec<Vec<String>>; 2] = [Vec::new(), Vec::new()];
    for c in cases {
        let kind = if c.turn.is_recommendation { ActionKind::Recommend } else { ActionKind::Ground };
        let reference = metric_tokens(&c.turn.reference);
        let knowledge = knowledge_search(g, c.turn.prev_grounding, c.turn.grounding)?;
        for (slot, (prefix, facts)) in [("", &knowledge[..]), ("wo_ks.", &[][..])].into_iter().enumerate() {
            let cand = metric_tokens(&render(g, kind, c.turn.grounding, c.turn.prev_grounding, facts));
            for n in 1..=4 {
                m.add(format!("{prefix}bleu@{n}"), bleu_n(&cand, &reference, n));
            }
            m.add(format!("{prefix}f1"), f1_tokens(&cand, &reference));
            outputs[slot].push(cand);
        }
    }
    let mut metrics = m.finish();
    for (prefix, out) in ["", "wo_ks."].into_iter().zip(&outputs) {
        for n in 1..=4 {
            metrics.insert(format!("{prefix}dist@{n}"), dist_n(out, n));
        }
    }
    EvalReport::new("generation", metrics, cases.len())
}

/// Where the short-term planner's target comes from during offline evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TargetSource {
    Gold,
    Predicted,
}

/// The long-term then short-term ranking pipeline over teacher-forced context.
pub struct Pipeline<'a> {
    pub graph: &'a KnowledgeGraph,
    pub emb: &'a EmbeddingTable,
    pub ltp: &'a dyn LongTermPlanner,
    pub stp: &'a dyn ShortTermPlanner,
    pub target: TargetSource,
}

impl Pipeline<'_> {
    pub fn target(&self, c: &EvalCase) -> Result<EntityId> {
        match self.target {
            TargetSource::Gold => Ok(c.target),
            TargetSource::Predicted => self
                .ltp
                .rank_items(self.graph, self.emb, &c.profile, &c.turn.context)?
                .first()
                .copied()
                .ok_or_else(|| Error::domain("long-term planner returned no items")),
        }
    }

    pub fn grounding(&self, c: &EvalCase) -> Result<GroundingPrediction> {
        let target = self.target(c)?;
        let history: Vec<EntityId> = c.profile.interactions.iter().map(|&(e, _)| e).collect();
        let q = StpQuery {
            utterance: &c.turn.utterance,
            context: &c.turn.context,
            history: &history,
            target,
        };
        Ok(GroundingPrediction {
            ranking: self.stp.rank_entities(self.graph, self.emb, &q)?,
            target,
        })
    }

    /// The grounding ranking restricted to items.
    pub fn item_ranking(&self, c: &EvalCase) -> Result<Vec<EntityId>> {
        Ok(self.grounding(c)?.ranking.into_iter().filter(|&e| self.graph.is_item(e)).collect())
    }
}

/// Top-1 grounding accuracy of each short-term variant over all turns
/// (`overall`), recommendation turns (`rec`) and the rest (`conv`).
pub fn eval_ablation(
    graph: &KnowledgeGraph,
    emb: &EmbeddingTable,
    ltp: &dyn LongTermPlanner,
    variants: &[(StpVariant, &dyn ShortTermPlanner)],
    cases: &[EvalCase],
    target: TargetSource,
) -> Result<EvalReport> {
    non_empty(cases.len(), "agent turns")?;
    let mut m = Means::default();
    for &(variant, stp) in variants {
        let p = Pipeline { graph, emb, ltp, stp, target };
        for c in cases {
            let top = p.grounding(c)?.ranking.first().copied();
            let hit = if top == Some(c.turn.grounding) { 1.0 } else { 0.0 };
            let subset = if c.turn.is_recommendation { "rec" } else { "conv" };
            m.add(format!("{}.overall_hit@1", variant.name()), hit);
            m.add(format!("{}.{subset}_hit@1", variant.name()), hit);
        }
    }
    EvalReport::new("ablation", m.finish(), cases.len())
}
