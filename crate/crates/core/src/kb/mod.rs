//! In-memory knowledge base: entities with typed attributes, qualified
//! relations and a concept hierarchy, plus the lookup indexes the aligner and
//! executor need.
//!
//! A [`KnowledgeBase`] is immutable once built. Entity and concept ids are
//! dense indexes assigned in document order, so iterating entities by id is
//! the deterministic "load order" used throughout the crate.

pub mod document;
pub mod random;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::text::normalize;
use crate::value::{parse_date, Quantity, TypedValue};

pub use document::KbDocument;
use document::{DirectionDoc, ValueDoc, ValueKindDoc};

#[derive(Debug, Error)]
pub enum KbError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed knowledge base: {0}")]
    Parse(String),
    #[error("integrity error at {id}: {reason}")]
    Integrity { id: String, reason: String },
}

impl KbError {
    fn integrity(id: impl Into<String>, reason: impl Into<String>) -> Self {
        KbError::Integrity {
            id: id.into(),
            reason: reason.into(),
        }
    }

    /// The identifier an integrity error points at.
    pub fn offending_id(&self) -> Option<&str> {
        match self {
            KbError::Integrity { id, .. } => Some(id),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct EntityId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ConceptId(pub u32);

impl EntityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl ConceptId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn parse(s: &str) -> Option<Direction> {
        match normalize(s).as_str() {
            "forward" => Some(Direction::Forward),
            "backward" => Some(Direction::Backward),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A qualifier annotation. Keys may repeat on one fact.
#[derive(Debug, Clone, PartialEq)]
pub struct Qualifier {
    pub key: String,
    pub value: TypedValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeFact {
    pub key: String,
    pub value: TypedValue,
    pub qualifiers: Vec<Qualifier>,
    key_norm: String,
}

impl AttributeFact {
    pub fn has_key(&self, normalized_key: &str) -> bool {
        self.key_norm == normalized_key
    }
}

/// A stored relation edge. `Forward` reads owner → object, `Backward` reads
/// object → owner.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationFact {
    pub predicate: String,
    pub object: EntityId,
    pub direction: Direction,
    pub qualifiers: Vec<Qualifier>,
    predicate_norm: String,
}

impl RelationFact {
    pub fn has_predicate(&self, normalized_predicate: &str) -> bool {
        self.predicate_norm == normalized_predicate
    }
}

#[derive(Debug, Clone)]
pub struct Entity {
    pub id: String,
    pub name: String,
    pub concepts: Vec<ConceptId>,
    pub attributes: Vec<AttributeFact>,
    pub relations: Vec<RelationFact>,
}

#[derive(Debug, Clone)]
pub struct Concept {
    pub id: String,
    pub name: String,
    pub parents: Vec<ConceptId>,
}

/// Handle to a stored fact. Orders by owner, then attributes before relations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FactRef {
    Attribute { owner: EntityId, index: u32 },
    Relation { owner: EntityId, index: u32 },
}

impl FactRef {
    pub fn owner(self) -> EntityId {
        match self {
            FactRef::Attribute { owner, .. } | FactRef::Relation { owner, .. } => owner,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Fact<'a> {
    Attribute(&'a AttributeFact),
    Relation(&'a RelationFact),
}

impl<'a> Fact<'a> {
    pub fn qualifiers(&self) -> &'a [Qualifier] {
        match self {
            Fact::Attribute(a) => &a.qualifiers,
            Fact::Relation(r) => &r.qualifiers,
        }
    }

    /// Attribute key or relation predicate.
    pub fn label(&self) -> &'a str {
        match self {
            Fact::Attribute(a) => &a.key,
            Fact::Relation(r) => &r.predicate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct KbStats {
    pub entities: usize,
    pub concepts: usize,
    pub attribute_facts: usize,
    pub relation_facts: usize,
}

impl KbStats {
    pub fn facts(&self) -> usize {
        self.attribute_facts + self.relation_facts
    }
}

#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    entities: Vec<Entity>,
    concepts: Vec<Concept>,
    entity_ids: HashMap<String, EntityId>,
    name_index: HashMap<String, Vec<EntityId>>,
    concept_name_index: HashMap<String, Vec<ConceptId>>,
    /// Reflexive-transitive descendants of each concept, sorted.
    concept_closure: Vec<Vec<ConceptId>>,
    /// Entities whose concepts fall inside each concept's closure, sorted.
    concept_members: Vec<Vec<EntityId>>,
    /// Relation facts stored on other entities whose object is this entity.
    incoming: Vec<Vec<FactRef>>,
    /// Distinct entity names, sorted; the global pool for `Find` alignment.
    name_pool: Vec<String>,
}

impl KnowledgeBase {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, KbError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|source| KbError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_slice(&bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, KbError> {
        let doc: KbDocument =
            serde_json::from_slice(bytes).map_err(|e| KbError::Parse(e.to_string()))?;
        Self::from_document(doc)
    }

    pub fn from_document(doc: KbDocument) -> Result<Self, KbError> {
        let concept_ids: HashMap<String, ConceptId> = doc
            .concepts
            .keys()
            .enumerate()
            .map(|(i, k)| (k.clone(), ConceptId(i as u32)))
            .collect();
        let entity_ids: HashMap<String, EntityId> = doc
            .entities
            .keys()
            .enumerate()
            .map(|(i, k)| (k.clone(), EntityId(i as u32)))
            .collect();

        let mut concepts = Vec::with_capacity(doc.concepts.len());
        for (id, c) in &doc.concepts {
            let parents = c
                .parents
                .iter()
                .map(|p| {
                    concept_ids.get(p).copied().ok_or_else(|| {
                        KbError::integrity(p, format!("unknown parent concept of {id}"))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            concepts.push(Concept {
                id: id.clone(),
                name: c.name.clone(),
                parents,
            });
        }

        let mut entities = Vec::with_capacity(doc.entities.len());
        for (id, e) in doc.entities {
            let concepts_of = e
                .concepts
                .iter()
                .map(|c| {
                    concept_ids.get(c).copied().ok_or_else(|| {
                        KbError::integrity(c, format!("unknown concept of entity {id}"))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let mut attributes = Vec::with_capacity(e.attributes.len());
            for a in e.attributes {
                let ctx = format!("{id}/{}", a.key);
                attributes.push(AttributeFact {
                    key_norm: normalize(&a.key),
                    value: convert_value(&a.value, &ctx)?,
                    qualifiers: convert_qualifiers(&a.qualifiers, &ctx)?,
                    key: a.key,
                });
            }
            let mut relations = Vec::with_capacity(e.relations.len());
            for r in e.relations {
                let ctx = format!("{id}/{}", r.predicate);
                let object = *entity_ids.get(&r.object).ok_or_else(|| {
                    KbError::integrity(&r.object, format!("dangling relation object of {ctx}"))
                })?;
                relations.push(RelationFact {
                    predicate_norm: normalize(&r.predicate),
                    object,
                    direction: match r.direction {
                        DirectionDoc::Forward => Direction::Forward,
                        DirectionDoc::Backward => Direction::Backward,
                    },
                    qualifiers: convert_qualifiers(&r.qualifiers, &ctx)?,
                    predicate: r.predicate,
                });
            }
            entities.push(Entity {
                id,
                name: e.name,
                concepts: concepts_of,
                attributes,
                relations,
            });
        }

        let ancestors = concept_ancestors(&concepts)?;
        let mut concept_closure = vec![Vec::new(); concepts.len()];
        for (d, anc) in ancestors.iter().enumerate() {
            for a in anc {
                concept_closure[a.index()].push(ConceptId(d as u32));
            }
        }

        let mut member_sets = vec![BTreeSet::new(); concepts.len()];
        let mut name_index: HashMap<String, Vec<EntityId>> = HashMap::new();
        let mut incoming = vec![Vec::new(); entities.len()];
        for (i, e) in entities.iter().enumerate() {
            let eid = EntityId(i as u32);
            for c in &e.concepts {
                for a in &ancestors[c.index()] {
                    member_sets[a.index()].insert(eid);
                }
            }
            name_index.entry(normalize(&e.name)).or_default().push(eid);
            for (j, r) in e.relations.iter().enumerate() {
                incoming[r.object.index()].push(FactRef::Relation {
                    owner: eid,
                    index: j as u32,
                });
            }
        }

        let mut concept_name_index: HashMap<String, Vec<ConceptId>> = HashMap::new();
        for (i, c) in concepts.iter().enumerate() {
            concept_name_index
                .entry(normalize(&c.name))
                .or_default()
                .push(ConceptId(i as u32));
        }

        let name_pool: BTreeSet<String> = entities
            .iter()
            .map(|e| e.name.trim())
            .filter(|n| crate::program::reserved_token_in(n).is_none())
            .map(str::to_string)
            .collect();

        Ok(KnowledgeBase {
            entities,
            concepts,
            entity_ids,
            name_index,
            concept_name_index,
            concept_closure,
            concept_members: member_sets
                .into_iter()
                .map(|s| s.into_iter().collect())
                .collect(),
            incoming,
            name_pool: name_pool.into_iter().collect(),
        })
    }

    pub fn stats(&self) -> KbStats {
        KbStats {
            entities: self.entities.len(),
            concepts: self.concepts.len(),
            attribute_facts: self.entities.iter().map(|e| e.attributes.len()).sum(),
            relation_facts: self.entities.iter().map(|e| e.relations.len()).sum(),
        }
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn concepts(&self) -> &[Concept] {
        &self.concepts
    }

    pub fn entity_ids(&self) -> impl Iterator<Item = EntityId> + '_ {
        (0..self.entities.len() as u32).map(EntityId)
    }

    pub fn entity(&self, id: EntityId) -> &Entity {
        &self.entities[id.index()]
    }

    pub fn concept(&self, id: ConceptId) -> &Concept {
        &self.concepts[id.index()]
    }

    pub fn name(&self, id: EntityId) -> &str {
        &self.entities[id.index()].name
    }

    pub fn lookup_entity(&self, external_id: &str) -> Option<EntityId> {
        self.entity_ids.get(external_id).copied()
    }

    pub fn fact(&self, r: FactRef) -> Fact<'_> {
        match r {
            FactRef::Attribute { owner, index } => {
                Fact::Attribute(&self.entities[owner.index()].attributes[index as usize])
            }
            FactRef::Relation { owner, index } => {
                Fact::Relation(&self.entities[owner.index()].relations[index as usize])
            }
        }
    }

    /// Exact lookup after name normalization.
    pub fn entities_by_name(&self, name: &str) -> &[EntityId] {
        self.name_index
            .get(&normalize(name))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Members of every concept called `concept_name`, including members of
    /// their subclasses. Sorted by id.
    pub fn concept_members(&self, concept_name: &str) -> Vec<EntityId> {
        let Some(ids) = self.concept_name_index.get(&normalize(concept_name)) else {
            return Vec::new();
        };
        if let [only] = ids.as_slice() {
            return self.concept_members[only.index()].clone();
        }
        let mut all: BTreeSet<EntityId> = BTreeSet::new();
        for c in ids {
            all.extend(self.concept_members[c.index()].iter().copied());
        }
        all.into_iter().collect()
    }

    /// Sorted member list of one concept (closure-expanded).
    pub fn members_of(&self, concept: ConceptId) -> &[EntityId] {
        &self.concept_members[concept.index()]
    }

    /// Reflexive-transitive descendants of a concept.
    pub fn concept_closure(&self, concept: ConceptId) -> &[ConceptId] {
        &self.concept_closure[concept.index()]
    }

    pub fn concepts_by_name(&self, name: &str) -> &[ConceptId] {
        self.concept_name_index
            .get(&normalize(name))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Relation facts stored on other entities that point at `id`.
    pub fn incoming(&self, id: EntityId) -> &[FactRef] {
        &self.incoming[id.index()]
    }

    /// Distinct entity names in lexicographic order, trimmed, excluding any
    /// that contain a reserved program token.
    pub fn name_pool(&self) -> &[String] {
        &self.name_pool
    }

    /// Concept ids reachable upward from `c`, including `c`.
    pub fn ancestors(&self, c: ConceptId) -> Vec<ConceptId> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![c];
        while let Some(x) = stack.pop() {
            if seen.insert(x) {
                stack.extend(self.concepts[x.index()].parents.iter().copied());
            }
        }
        seen.into_iter().collect()
    }

    /// Rebuild the document this knowledge base was loaded from.
    pub fn to_document(&self) -> KbDocument {
        use document::{AttributeDoc, ConceptDoc, EntityDoc, RelationDoc};
        let mut doc = KbDocument::default();
        for c in &self.concepts {
            doc.concepts.insert(
                c.id.clone(),
                ConceptDoc {
                    name: c.name.clone(),
                    parents: c
                        .parents
                        .iter()
                        .map(|p| self.concept(*p).id.clone())
                        .collect(),
                },
            );
        }
        for e in &self.entities {
            doc.entities.insert(
                e.id.clone(),
                EntityDoc {
                    name: e.name.clone(),
                    concepts: e
                        .concepts
                        .iter()
                        .map(|c| self.concept(*c).id.clone())
                        .collect(),
                    attributes: e
                        .attributes
                        .iter()
                        .map(|a| AttributeDoc {
                            key: a.key.clone(),
                            value: value_doc(&a.value),
                            qualifiers: qualifier_docs(&a.qualifiers),
                        })
                        .collect(),
                    relations: e
                        .relations
                        .iter()
                        .map(|r| RelationDoc {
                            predicate: r.predicate.clone(),
                            object: self.entity(r.object).id.clone(),
                            direction: match r.direction {
                                Direction::Forward => DirectionDoc::Forward,
                                Direction::Backward => DirectionDoc::Backward,
                            },
                            qualifiers: qualifier_docs(&r.qualifiers),
                        })
                        .collect(),
                },
            );
        }
        doc
    }
}

/// Upward closure per concept, failing on the first cycle found.
fn concept_ancestors(concepts: &[Concept]) -> Result<Vec<Vec<ConceptId>>, KbError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    fn visit(
        c: usize,
        concepts: &[Concept],
        marks: &mut [Mark],
        out: &mut [Vec<ConceptId>],
    ) -> Result<(), KbError> {
        match marks[c] {
            Mark::Done => return Ok(()),
            Mark::Active => {
                return Err(KbError::integrity(
                    &concepts[c].id,
                    "concept hierarchy cycle",
                ))
            }
            Mark::New => {}
        }
        marks[c] = Mark::Active;
        let mut acc: BTreeSet<ConceptId> = BTreeSet::new();
        acc.insert(ConceptId(c as u32));
        for p in &concepts[c].parents {
            visit(p.index(), concepts, marks, out)?;
            acc.extend(out[p.index()].iter().copied());
        }
        out[c] = acc.into_iter().collect();
        marks[c] = Mark::Done;
        Ok(())
    }

    let mut marks = vec![Mark::New; concepts.len()];
    let mut out = vec![Vec::new(); concepts.len()];
    for c in 0..concepts.len() {
        visit(c, concepts, &mut marks, &mut out)?;
    }
    Ok(out)
}

fn convert_value(v: &ValueDoc, ctx: &str) -> Result<TypedValue, KbError> {
    use serde_json::Value as J;
    let bad = || KbError::Parse(format!("bad {:?} value {} at {ctx}", v.kind, v.value));
    let text = || match &v.value {
        J::String(s) => Some(s.trim().to_string()),
        J::Number(n) => Some(n.to_string()),
        _ => None,
    };
    match v.kind {
        ValueKindDoc::String => match &v.value {
            J::String(s) => Ok(TypedValue::String(s.clone())),
            J::Number(n) => Ok(TypedValue::String(n.to_string())),
            _ => Err(bad()),
        },
        ValueKindDoc::Quantity => {
            let number = match &v.value {
                J::Number(n) => n.as_f64(),
                J::String(s) => s.trim().parse::<f64>().ok(),
                _ => None,
            }
            .filter(|x| x.is_finite())
            .ok_or_else(bad)?;
            Ok(TypedValue::Quantity(Quantity::new(
                number,
                v.unit.clone().unwrap_or_default(),
            )))
        }
        ValueKindDoc::Year => text()
            .and_then(|t| t.parse::<i32>().ok())
            .map(TypedValue::Year)
            .ok_or_else(bad),
        ValueKindDoc::Date => text()
            .and_then(|t| parse_date(&t))
            .map(TypedValue::Date)
            .ok_or_else(bad),
    }
}

fn convert_qualifiers(
    q: &indexmap::IndexMap<String, Vec<ValueDoc>>,
    ctx: &str,
) -> Result<Vec<Qualifier>, KbError> {
    let mut out = Vec::new();
    for (key, values) in q {
        for v in values {
            out.push(Qualifier {
                key: key.clone(),
                value: convert_value(v, &format!("{ctx}/{key}"))?,
            });
        }
    }
    Ok(out)
}

fn value_doc(v: &TypedValue) -> ValueDoc {
    use serde_json::json;
    match v {
        TypedValue::String(s) => ValueDoc {
            kind: ValueKindDoc::String,
            value: json!(s),
            unit: None,
        },
        TypedValue::Quantity(q) => ValueDoc {
            kind: ValueKindDoc::Quantity,
            value: json!(q.value),
            unit: Some(q.unit.clone()),
        },
        TypedValue::Year(y) => ValueDoc {
            kind: ValueKindDoc::Year,
            value: json!(y),
            unit: None,
        },
        TypedValue::Date(_) => ValueDoc {
            kind: ValueKindDoc::Date,
            value: json!(v.to_string()),
            unit: None,
        },
    }
}

fn qualifier_docs(q: &[Qualifier]) -> indexmap::IndexMap<String, Vec<ValueDoc>> {
    let mut out: indexmap::IndexMap<String, Vec<ValueDoc>> = indexmap::IndexMap::new();
    for x in q {
        out.entry(x.key.clone())
            .or_default()
            .push(value_doc(&x.value));
    }
    out
}
