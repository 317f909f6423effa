//! Graph files: JSON-lines entity and relation tables plus a TSV triple list.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EntityId, EntityKind, GraphBuilder, KnowledgeGraph, RelationId};
use crate::error::{Error, Result};

pub const ENTITIES_FILE: &str = "entities.jsonl";
pub const RELATIONS_FILE: &str = "relations.jsonl";
pub const TRIPLES_FILE: &str = "triples.tsv";

#[derive(Serialize, Deserialize)]
struct EntityRecord {
    id: u32,
    name: String,
    kind: EntityKind,
}

#[derive(Serialize, Deserialize)]
struct RelationRecord {
    id: u32,
    name: String,
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Reads JSON-lines records, reporting 1-based line numbers on failure.
fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<(usize, T)>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(line).map_err(|e| parse_err(path, i + 1, e.to_string()))?;
        out.push((i + 1, rec));
    }
    Ok(out)
}

fn dense_order<T>(path: &Path, mut recs: Vec<(usize, u32, T)>) -> Result<Vec<T>> {
    recs.sort_by_key(|(_, id, _)| *id);
    for (expected, (line, id, _)) in recs.iter().enumerate() {
        if *id as usize != expected {
            return Err(parse_err(path, *line, format!("ids must be dense in [0, {}); found {id}", recs.len())));
        }
    }
    Ok(recs.into_iter().map(|(_, _, t)| t).collect())
}

impl KnowledgeGraph {
    /// Loads a graph from its three files. Triple order is file order.
    pub fn load(entities_path: &Path, relations_path: &Path, triples_path: &Path) -> Result<Self> {
        let ents: Vec<(usize, EntityRecord)> = read_jsonl(entities_path)?;
        let ents = dense_order(entities_path, ents.into_iter().map(|(l, r)| (l, r.id, (l, r))).collect())?;
        let rels: Vec<(usize, RelationRecord)> = read_jsonl(relations_path)?;
        let rels = dense_order(relations_path, rels.into_iter().map(|(l, r)| (l, r.id, (l, r))).collect())?;

        let mut builder = GraphBuilder::new();
        let mut by_name: HashMap<String, Vec<EntityId>> = HashMap::new();
        for (line, rec) in ents {
            let id = builder
                .add_entity(rec.name.clone(), rec.kind)
                .map_err(|e| parse_err(entities_path, line, e.to_string()))?;
            by_name.entry(rec.name).or_default().push(id);
        }
        let mut rel_by_name: HashMap<String, RelationId> = HashMap::new();
        for (line, rec) in rels {
            let id = builder
                .add_relation(rec.name.clone())
                .map_err(|e| parse_err(relations_path, line, e.to_string()))?;
            rel_by_name.insert(rec.name, id);
        }

        let text = fs::read_to_string(triples_path)?;
        let resolve = |name: &str, line: usize| -> Result<EntityId> {
            match by_name.get(name).map(Vec::as_slice) {
                Some([id]) => Ok(*id),
                Some(_) => Err(Error::Reference {
                    path: triples_path.to_path_buf(),
                    line,
                    what: "entity (ambiguous across kinds)",
                    name: name.to_string(),
                }),
                None => Err(Error::Reference {
                    path: triples_path.to_path_buf(),
                    line,
                    what: "entity",
                    name: name.to_string(),
                }),
            }
        };
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = raw.split('\t').collect();
            if cols.len() != 3 {
                return Err(parse_err(triples_path, line, format!("expected 3 tab-separated columns, found {}", cols.len())));
            }
            let head = resolve(cols[0], line)?;
            let tail = resolve(cols[2], line)?;
            let rel = *rel_by_name.get(cols[1]).ok_or_else(|| Error::Reference {
                path: triples_path.to_path_buf(),
                line,
                what: "relation",
                name: cols[1].to_string(),
            })?;
            if !builder.add_triple(head, rel, tail)? {
                return Err(Error::Duplicate {
                    path: triples_path.to_path_buf(),
                    line,
                    what: format!("triple ({}, {}, {})", cols[0], cols[1], cols[2]),
                });
            }
        }
        Ok(builder.build())
    }

    /// Loads `entities.jsonl`, `relations.jsonl` and `triples.tsv` from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        Self::load(&dir.join(ENTITIES_FILE), &dir.join(RELATIONS_FILE), &dir.join(TRIPLES_FILE))
    }

    /// Writes the graph in the layout read by [`load_dir`](Self::load_dir).
    pub fn save_dir(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let paths = [dir.join(ENTITIES_FILE), dir.join(RELATIONS_FILE), dir.join(TRIPLES_FILE)];

        let mut f = fs::File::create(&paths[0])?;
        for e in &self.entities {
            let rec = EntityRecord {
                id: e.id.0,
                name: e.name.clone(),
                kind: e.kind,
            };
            writeln!(f, "{}", serde_json::to_string(&rec)?)?;
        }
        let mut f = fs::File::create(&paths[1])?;
        for r in &self.relations {
            let rec = RelationRecord {
                id: r.id.0,
                name: r.name.clone(),
            };
            writeln!(f, "{}", serde_json::to_string(&rec)?)?;
        }
        let mut f = fs::File::create(&paths[2])?;
        writeln!(f, "# head\trelation\ttail")?;
        for t in &self.triples {
            writeln!(f, "{}\t{}\t{}", self.name(t.head), self.relation_name(t.rel), self.name(t.tail))?;
        }
        Ok(paths.to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::tests::random_graph;
    use crate::kg::Triple;

    fn write(dir: &Path, ents: &str, rels: &str, triples: &str) {
        fs::write(dir.join(ENTITIES_FILE), ents).unwrap();
        fs::write(dir.join(RELATIONS_FILE), rels).unwrap();
        fs::write(dir.join(TRIPLES_FILE), triples).unwrap();
    }

    const ENTS: &str = "{\"id\":0,\"name\":\"A\",\"kind\":\"item\"}\n{\"id\":1,\"name\":\"B\",\"kind\":\"item\"}\n";
    const RELS: &str = "{\"id\":0,\"name\":\"r1\"}\n";

    #[test]
    fn loads_minimal_graph() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), ENTS, RELS, "# comment\nA\tr1\tB\n");
        let g = KnowledgeGraph::load_dir(dir.path()).unwrap();
        assert_eq!(g.num_entities(), 2);
        assert_eq!(g.num_triples(), 1);
        assert_eq!(g.triples()[0], Triple::new(EntityId(0), RelationId(0), EntityId(1)));
        assert_eq!(g.items(), &[EntityId(0), EntityId(1)]);
    }

    #[test]
    fn bad_column_count_names_line() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), ENTS, RELS, "A\tr1\tB\nA\tr1\n");
        match KnowledgeGraph::load_dir(dir.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_names_are_reference_errors() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), ENTS, RELS, "A\tr1\tZ\n");
        assert!(matches!(KnowledgeGraph::load_dir(dir.path()), Err(Error::Reference { what: "entity", .. })));
        write(dir.path(), ENTS, RELS, "A\tr9\tB\n");
        assert!(matches!(KnowledgeGraph::load_dir(dir.path()), Err(Error::Reference { what: "relation", .. })));
    }

    #[test]
    fn duplicate_triple_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), ENTS, RELS, "A\tr1\tB\nA\tr1\tB\n");
        assert!(matches!(KnowledgeGraph::load_dir(dir.path()), Err(Error::Duplicate { line: 2, .. })));
    }

    #[test]
    fn malformed_entity_json_names_line() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "{\"id\":0,\"name\":\"A\",\"kind\":\"item\"}\n{oops\n", RELS, "");
        assert!(matches!(KnowledgeGraph::load_dir(dir.path()), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn save_load_round_trip() {
        let g = random_graph(25, 3, 40, 3);
        let dir = tempfile::tempdir().unwrap();
        g.save_dir(dir.path()).unwrap();
        let back = KnowledgeGraph::load_dir(dir.path()).unwrap();
        assert_eq!(g, back);
    }
}
