use crate::error::Result;
use crate::kg::{EntityId, KnowledgeGraph, Triple};

/// Maximum number of triples returned by [`knowledge_search`].
pub const KNOWLEDGE_LIMIT: usize = 20;

/// Grounding knowledge linking the previous agent grounding to the next one.
///
/// Triples are scanned in graph order and kept when, in priority order,
/// 1. they run `prev → next` directly,
/// 2. they leave `prev` towards an entity that itself has an edge into `next`, or
/// 3. they leave `next` or arrive at `prev`.
///
/// Without a previous grounding only `head = next` qualifies. The first
/// [`KNOWLEDGE_LIMIT`] matches are returned.
pub fn knowledge_search(g: &KnowledgeGraph, prev: Option<EntityId>, next: EntityId) -> Result<Vec<Triple>> {
    g.check_entity(next)?;
    if let Some(p) = prev {
        g.check_entity(p)?;
    }
    let mut out = Vec::new();
    for t in g.triples() {
        let keep = match prev {
            Some(p) => {
                (t.head == p && t.tail == next)
                    || (t.head == p && g.outgoing(t.tail).iter().any(|&q| g.triples()[q].tail == next))
                    || t.head == next
                    || t.tail == p
            }
            None => t.head == next,
        };
        if keep {
            out.push(*t);
            if out.len() == KNOWLEDGE_LIMIT {
                break;
            }
        }
    }
    Ok(out)
}
