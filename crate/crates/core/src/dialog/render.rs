use serde::{Deserialize, Serialize};

use crate::kg::{EntityId, KnowledgeGraph, Triple};

/// Facts included in a rendered response.
pub const MAX_FACTS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    Recommend,
    Ground,
}

/// Sentence pattern for a relation, with `{head}` and `{tail}` placeholders.
pub fn surface_pattern(relation: &str) -> Option<&'static str> {
    Some(match relation {
        "The main actors of" => "{tail} is one of the main actors of {head}",
        "Star" => "{head} stars in {tail}",
        "The director of" => "{head} is directed by {tail}",
        "The screenwriter of" => "{head} was written by {tail}",
        "The type of" => "{head} is a {tail} movie",
        "The key words of" => "{head} is about {tail}",
        "The country of" => "{head} was made in {tail}",
        "The release date of" => "{head} was released on {tail}",
        "The score of" => "{head} is rated {tail}",
        "The popularity of" => "{head} has a popularity of {tail}",
        "The sequel of" => "{tail} is the sequel of {head}",
        "The representative works of" => "{tail} is a representative work of {head}",
        "The birthplace of" => "{head} was born in {tail}",
        "The birth date of" => "{head} was born on {tail}",
        "The profession of" => "{head} works as {tail}",
        "The constellation of" | "The Constellation of" => "{head} is a {tail}",
        "The award records of" => "{head} received {tail}",
        "The relative of" => "{head} is a relative of {tail}",
        "Collaborate with" => "{head} has worked with {tail}",
        _ => return None,
    })
}

/// One triple as an English sentence (without final punctuation).
pub fn realize_fact(g: &KnowledgeGraph, t: &Triple) -> String {
    let (h, r, tl) = (g.name(t.head), g.relation_name(t.rel), g.name(t.tail));
    match surface_pattern(r) {
        Some(p) => p.replace("{head}", h).replace("{tail}", tl),
        None if r.starts_with("The ") => format!("{r} {h} is {tl}"),
        None => format!("{h} {} {tl}", r.to_lowercase()),
    }
}

/// Up to [`MAX_FACTS`] realised facts, each ending in a full stop.
pub fn fact_sentences(g: &KnowledgeGraph, knowledge: &[Triple]) -> Vec<String> {
    knowledge
        .iter()
        .take(MAX_FACTS)
        .map(|t| {
            let mut s = realize_fact(g, t);
            if let Some(c) = s.get_mut(0..1) {
                c.make_ascii_uppercase();
            }
            s.push('.');
            s
        })
        .collect()
}

/// Deterministic response text for an agent action.
pub fn render(g: &KnowledgeGraph, kind: ActionKind, entity: EntityId, prev: Option<EntityId>, knowledge: &[Triple]) -> String {
    let name = g.name(entity);
    let mut parts = vec![match kind {
        ActionKind::Recommend => format!("I recommend {name}."),
        ActionKind::Ground => {
            let topic = prev.map_or("movies", |p| g.name(p));
            format!("Speaking of {topic}, what about {name}?")
        }
    }];
    parts.extend(fact_sentences(g, knowledge));
    parts.join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{EntityKind, GraphBuilder};

    fn graph() -> (KnowledgeGraph, EntityId, EntityId) {
        let mut b = GraphBuilder::new();
        let m = b.add_entity("M1", EntityKind::Item).unwrap();
        let s = b.add_entity("S1", EntityKind::Attribute).unwrap();
        let r = b.add_relation("The main actors of").unwrap();
        let q = b.add_relation("Owned by").unwrap();
        let p = b.add_relation("The weight of").unwrap();
        b.add_triple(m, r, s).unwrap();
        b.add_triple(m, q, s).unwrap();
        b.add_triple(m, p, s).unwrap();
        (b.build(), m, s)
    }

    #[test]
    fn recommend_without_facts() {
        let (g, m, _) = graph();
        assert_eq!(render(&g, ActionKind::Recommend, m, None, &[]), "I recommend M1.");
    }

    #[test]
    fn ground_mentions_fact_entities() {
        let (g, m, s) = graph();
        let t = g.triples()[0];
        let text = render(&g, ActionKind::Ground, s, None, &[t]);
        assert!(text.contains("S1") && text.contains("M1"), "{text}");
        assert_eq!(text, render(&g, ActionKind::Ground, s, None, &[t]));
        let text = render(&g, ActionKind::Ground, s, Some(m), &[t]);
        assert_eq!(text, "Speaking of M1, what about S1? S1 is one of the main actors of M1.");
    }

    #[test]
    fn fallback_patterns_and_fact_cap() {
        let (g, _, _) = graph();
        let ts = g.triples();
        assert_eq!(realize_fact(&g, &ts[1]), "M1 owned by S1");
        assert_eq!(realize_fact(&g, &ts[2]), "The weight of M1 is S1");
        let many = [ts[0], ts[1], ts[2], ts[0]];
        assert_eq!(fact_sentences(&g, &many).len(), MAX_FACTS);
    }
}
