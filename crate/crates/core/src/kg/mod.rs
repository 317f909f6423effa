//! Knowledge-graph data model.
//!
//! Entities are either recommendable [`EntityKind::Item`]s or
//! [`EntityKind::Attribute`]s (stars, genres, keywords, ...). Triples keep the
//! order in which they were added or read from disk; every ordered output in
//! this module follows that order.

mod io;

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{ENTITIES_FILE, RELATIONS_FILE, TRIPLES_FILE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationId(pub u32);

impl EntityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Item,
    Attribute,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    pub name: String,
    pub kind: EntityKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub id: RelationId,
    pub name: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityId,
    pub rel: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: EntityId, rel: RelationId, tail: EntityId) -> Self {
        Triple { head, rel, tail }
    }
}

/// Immutable knowledge graph with head/tail adjacency indexes.
#[derive(Clone, Debug)]
pub struct KnowledgeGraph {
    entities: Vec<Entity>,
    relations: Vec<Relation>,
    triples: Vec<Triple>,
    out_index: Vec<Vec<usize>>,
    in_index: Vec<Vec<usize>>,
    triple_set: HashSet<Triple>,
    items: Vec<EntityId>,
}

impl PartialEq for KnowledgeGraph {
    fn eq(&self, other: &Self) -> bool {
        self.entities == other.entities
            && self.relations == other.relations
            && self.triples == other.triples
    }
}

impl KnowledgeGraph {
    /// Builds a graph from already-resolved parts.
    ///
    /// Entity and relation ids must equal their position in the given lists.
    pub fn new(entities: Vec<Entity>, relations: Vec<Relation>, triples: Vec<Triple>) -> Result<Self> {
        let mut builder = GraphBuilder::default();
        for (i, e) in entities.into_iter().enumerate() {
            if e.id.index() != i {
                return Err(Error::domain(format!("entity ids must be dense: found {} at position {i}", e.id.0)));
            }
            builder.add_entity(e.name, e.kind)?;
        }
        for (i, r) in relations.into_iter().enumerate() {
            if r.id.index() != i {
                return Err(Error::domain(format!("relation ids must be dense: found {} at position {i}", r.id.0)));
            }
            builder.add_relation(r.name)?;
        }
        for t in triples {
            if !builder.add_triple(t.head, t.rel, t.tail)? {
                return Err(Error::domain(format!("duplicate triple ({}, {}, {})", t.head.0, t.rel.0, t.tail.0)));
            }
        }
        Ok(builder.build())
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn num_triples(&self) -> usize {
        self.triples.len()
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    /// Item ids in ascending order.
    pub fn items(&self) -> &[EntityId] {
        &self.items
    }

    pub fn entity(&self, id: EntityId) -> Result<&Entity> {
        self.entities
            .get(id.index())
            .ok_or_else(|| Error::domain(format!("entity id {} out of range (|V| = {})", id.0, self.entities.len())))
    }

    pub fn relation(&self, id: RelationId) -> Result<&Relation> {
        self.relations
            .get(id.index())
            .ok_or_else(|| Error::domain(format!("relation id {} out of range", id.0)))
    }

    pub fn check_entity(&self, id: EntityId) -> Result<()> {
        self.entity(id).map(|_| ())
    }

    pub fn is_item(&self, id: EntityId) -> bool {
        self.entities.get(id.index()).is_some_and(|e| e.kind == EntityKind::Item)
    }

    pub fn name(&self, id: EntityId) -> &str {
        &self.entities[id.index()].name
    }

    pub fn relation_name(&self, id: RelationId) -> &str {
        &self.relations[id.index()].name
    }

    pub fn relation_by_name(&self, name: &str) -> Option<RelationId> {
        self.relations.iter().find(|r| r.name == name).map(|r| r.id)
    }

    pub fn entity_by_name(&self, name: &str) -> Option<EntityId> {
        self.entities.iter().find(|e| e.name == name).map(|e| e.id)
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.triple_set.contains(t)
    }

    /// Positions of triples whose head is `e`, in graph order.
    pub fn outgoing(&self, e: EntityId) -> &[usize] {
        &self.out_index[e.index()]
    }

    /// Positions of triples whose tail is `e`, in graph order.
    pub fn incoming(&self, e: EntityId) -> &[usize] {
        &self.in_index[e.index()]
    }

    /// All triples with head `a` and tail `b`, in graph order.
    pub fn edges_between(&self, a: EntityId, b: EntityId) -> Result<Vec<Triple>> {
        self.check_entity(a)?;
        self.check_entity(b)?;
        Ok(self.out_index[a.index()]
            .iter()
            .map(|&p| self.triples[p])
            .filter(|t| t.tail == b)
            .collect())
    }

    /// True if some triple links `a` to `b` in either direction.
    pub fn adjacent(&self, a: EntityId, b: EntityId) -> bool {
        self.out_index[a.index()].iter().any(|&p| self.triples[p].tail == b)
            || self.in_index[a.index()].iter().any(|&p| self.triples[p].head == b)
    }

    /// Undirected neighbourhood of `e`, ascending by entity id.
    ///
    /// Each neighbour is paired with the first triple (in graph order) that
    /// connects it to `e`.
    pub fn neighbors(&self, e: EntityId) -> Result<Vec<(EntityId, usize)>> {
        self.check_entity(e)?;
        let mut first: HashMap<EntityId, usize> = HashMap::new();
        for &p in self.out_index[e.index()].iter().chain(&self.in_index[e.index()]) {
            let t = &self.triples[p];
            let other = if t.head == e { t.tail } else { t.head };
            if other == e {
                continue;
            }
            first
                .entry(other)
                .and_modify(|q| *q = (*q).min(p))
                .or_insert(p);
        }
        let mut out: Vec<_> = first.into_iter().collect();
        out.sort_unstable();
        Ok(out)
    }

    /// Triples touching `e` (as head or tail), in graph order.
    pub fn incident_triples(&self, e: EntityId) -> Result<Vec<Triple>> {
        self.check_entity(e)?;
        let mut positions: Vec<usize> = self.out_index[e.index()]
            .iter()
            .chain(&self.in_index[e.index()])
            .copied()
            .collect();
        positions.sort_unstable();
        positions.dedup();
        Ok(positions.into_iter().map(|p| self.triples[p]).collect())
    }

    /// Undirected hop distance from `source` to every entity (`None` if unreachable).
    pub fn bfs_distances(&self, source: EntityId) -> Result<Vec<Option<usize>>> {
        self.check_entity(source)?;
        let mut dist = vec![None; self.entities.len()];
        let mut queue = VecDeque::new();
        dist[source.index()] = Some(0);
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let d = dist[u.index()].unwrap_or(0);
            for (v, _) in self.neighbors(u)? {
                if dist[v.index()].is_none() {
                    dist[v.index()] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        Ok(dist)
    }

    /// Next hop from `from` along a shortest undirected path to `to`.
    ///
    /// Among equally short continuations the lowest entity id wins. Returns
    /// `None` when `from == to` or `to` is unreachable.
    pub fn next_hop(&self, from: EntityId, to: EntityId) -> Result<Option<EntityId>> {
        let dist = self.bfs_distances(to)?;
        self.next_hop_with(&dist, from)
    }

    /// As [`next_hop`](Self::next_hop) with precomputed distances to the goal.
    pub fn next_hop_with(&self, dist_to_goal: &[Option<usize>], from: EntityId) -> Result<Option<EntityId>> {
        let Some(d) = dist_to_goal[from.index()] else {
            return Ok(None);
        };
        if d == 0 {
            return Ok(None);
        }
        Ok(self
            .neighbors(from)?
            .into_iter()
            .map(|(v, _)| v)
            .find(|v| dist_to_goal[v.index()] == Some(d - 1)))
    }
}

/// Incremental constructor used by loaders, generators and tests.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    entities: Vec<Entity>,
    relations: Vec<Relation>,
    triples: Vec<Triple>,
    triple_set: HashSet<Triple>,
    names: HashSet<(EntityKind, String)>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_entity(&mut self, name: impl Into<String>, kind: EntityKind) -> Result<EntityId> {
        let name = name.into();
        if !self.names.insert((kind, name.clone())) {
            return Err(Error::domain(format!("duplicate entity name `{name}` for kind {kind:?}")));
        }
        let id = EntityId(self.entities.len() as u32);
        self.entities.push(Entity { id, name, kind });
        Ok(id)
    }

    pub fn add_relation(&mut self, name: impl Into<String>) -> Result<RelationId> {
        let name = name.into();
        if self.relations.iter().any(|r| r.name == name) {
            return Err(Error::domain(format!("duplicate relation name `{name}`")));
        }
        let id = RelationId(self.relations.len() as u32);
        self.relations.push(Relation { id, name });
        Ok(id)
    }

    /// Appends a triple; returns `false` (and leaves the graph unchanged) if it already exists.
    pub fn add_triple(&mut self, head: EntityId, rel: RelationId, tail: EntityId) -> Result<bool> {
        if head.index() >= self.entities.len() || tail.index() >= self.entities.len() {
            return Err(Error::domain(format!("triple references unknown entity ({}, {})", head.0, tail.0)));
        }
        if rel.index() >= self.relations.len() {
            return Err(Error::domain(format!("triple references unknown relation {}", rel.0)));
        }
        let t = Triple { head, rel, tail };
        if !self.triple_set.insert(t) {
            return Ok(false);
        }
        self.triples.push(t);
        Ok(true)
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.triple_set.contains(t)
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn build(self) -> KnowledgeGraph {
        let n = self.entities.len();
        let mut out_index = vec![Vec::new(); n];
        let mut in_index = vec![Vec::new(); n];
        for (p, t) in self.triples.iter().enumerate() {
            out_index[t.head.index()].push(p);
            in_index[t.tail.index()].push(p);
        }
        let items = self
            .entities
            .iter()
            .filter(|e| e.kind == EntityKind::Item)
            .map(|e| e.id)
            .collect();
        KnowledgeGraph {
            entities: self.entities,
            relations: self.relations,
            triples: self.triples,
            out_index,
            in_index,
            triple_set: self.triple_set,
            items,
        }
    }
}
