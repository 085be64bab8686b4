//! Seeded synthetic knowledge bases for differential and property tests.
//!
//! Vocabularies are deliberately tiny so that names, keys and predicates
//! collide across entities and every executor branch gets exercised.

use indexmap::IndexMap;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::document::{
    AttributeDoc, ConceptDoc, DirectionDoc, EntityDoc, KbDocument, RelationDoc, ValueDoc,
    ValueKindDoc,
};
use super::KnowledgeBase;

const NAME_HEADS: &[&str] = &[
    "Quincy", "Boston", "Adams", "Salem", "Franklin", "Lincoln", "Dover", "Avon",
];
const NAME_TAILS: &[&str] = &["", "", "City", "County", "Hill", "Jr"];
const CONCEPTS: &[&str] = &[
    "city",
    "town",
    "human",
    "politician",
    "state",
    "country",
    "river",
    "organization",
];
const STRING_KEYS: &[&str] = &["nick name", "official name", "motto", "native label"];
const QUANTITY_KEYS: &[&str] = &["population", "area", "height", "elevation above sea level"];
const YEAR_KEYS: &[&str] = &["inception", "year of founding"];
const DATE_KEYS: &[&str] = &["date of birth", "date of death", "inception"];
const UNITS: &[&str] = &["1", "1", "metre", "square kilometre"];
const STRINGS: &[&str] = &[
    "City of Presidents",
    "Old Town",
    "Big Apple",
    "Land of Lakes",
    "Golden Gate",
    "River City",
];
const PREDICATES: &[&str] = &[
    "part of",
    "place of birth",
    "located in",
    "member of",
    "sibling",
    "capital of",
    "shares border with",
];
const QUALIFIER_KEYS: &[&str] = &[
    "point in time",
    "start time",
    "end time",
    "determination method",
    "rank",
];

fn string_value(s: &str) -> ValueDoc {
    ValueDoc {
        kind: ValueKindDoc::String,
        value: json!(s),
        unit: None,
    }
}

fn random_quantity(rng: &mut ChaCha8Rng) -> ValueDoc {
    let v: f64 = if rng.random_bool(0.7) {
        rng.random_range(0..2_000_000) as f64
    } else {
        rng.random_range(0..4000) as f64 / 4.0
    };
    ValueDoc {
        kind: ValueKindDoc::Quantity,
        value: json!(v),
        unit: Some(UNITS.choose(rng).unwrap().to_string()),
    }
}

fn random_year(rng: &mut ChaCha8Rng) -> ValueDoc {
    ValueDoc {
        kind: ValueKindDoc::Year,
        value: json!(rng.random_range(1750..2021)),
        unit: None,
    }
}

fn random_date(rng: &mut ChaCha8Rng) -> ValueDoc {
    let date = format!(
        "{:04}-{:02}-{:02}",
        rng.random_range(1750..2021),
        rng.random_range(1..13),
        rng.random_range(1..29)
    );
    ValueDoc {
        kind: ValueKindDoc::Date,
        value: json!(date),
        unit: None,
    }
}

fn random_qualifiers(rng: &mut ChaCha8Rng) -> IndexMap<String, Vec<ValueDoc>> {
    let mut q: IndexMap<String, Vec<ValueDoc>> = IndexMap::new();
    for _ in 0..rng.random_range(0..3) {
        let key = *QUALIFIER_KEYS.choose(rng).unwrap();
        let value = match key {
            "point in time" if rng.random_bool(0.5) => random_year(rng),
            "point in time" | "start time" | "end time" => random_date(rng),
            "rank" => random_quantity(rng),
            _ => string_value(STRINGS.choose(rng).unwrap()),
        };
        q.entry(key.to_string()).or_default().push(value);
    }
    q
}

/// Build the document for a random knowledge base with `n_entities`
/// entities. Identical seeds give identical documents.
pub fn random_kb_document(seed: u64, n_entities: usize) -> KbDocument {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut doc = KbDocument::default();

    let n_concepts = rng.random_range(4..8);
    for i in 0..n_concepts {
        let parents = if i > 0 && rng.random_bool(0.5) {
            vec![format!("C{}", rng.random_range(0..i))]
        } else {
            Vec::new()
        };
        doc.concepts.insert(
            format!("C{i}"),
            ConceptDoc {
                name: CONCEPTS.choose(&mut rng).unwrap().to_string(),
                parents,
            },
        );
    }

    let mut relations: Vec<Vec<RelationDoc>> = vec![Vec::new(); n_entities];
    for i in 0..n_entities {
        for _ in 0..rng.random_range(0..4) {
            if n_entities == 0 {
                break;
            }
            let object = rng.random_range(0..n_entities);
            let predicate = PREDICATES.choose(&mut rng).unwrap().to_string();
            let direction = if rng.random_bool(0.25) {
                DirectionDoc::Backward
            } else {
                DirectionDoc::Forward
            };
            let qualifiers = random_qualifiers(&mut rng);
            // Sometimes store the mirrored edge on the object as well, the way
            // KQA Pro lists each relation on both endpoints.
            if rng.random_bool(0.3) {
                relations[object].push(RelationDoc {
                    predicate: predicate.clone(),
                    object: format!("E{i}"),
                    direction: match direction {
                        DirectionDoc::Forward => DirectionDoc::Backward,
                        DirectionDoc::Backward => DirectionDoc::Forward,
                    },
                    qualifiers: qualifiers.clone(),
                });
            }
            relations[i].push(RelationDoc {
                predicate,
                object: format!("E{object}"),
                direction,
                qualifiers,
            });
        }
    }

    for (i, rels) in relations.into_iter().enumerate() {
        let head = NAME_HEADS.choose(&mut rng).unwrap();
        let tail = NAME_TAILS.choose(&mut rng).unwrap();
        let name = if tail.is_empty() {
            head.to_string()
        } else {
            format!("{head} {tail}")
        };
        let concepts = (0..rng.random_range(1..3))
            .map(|_| format!("C{}", rng.random_range(0..n_concepts)))
            .collect();
        let mut attributes = Vec::new();
        for _ in 0..rng.random_range(0..5) {
            let (key, value) = match rng.random_range(0..4) {
                0 => (
                    STRING_KEYS.choose(&mut rng).unwrap(),
                    string_value(STRINGS.choose(&mut rng).unwrap()),
                ),
                1 => (
                    QUANTITY_KEYS.choose(&mut rng).unwrap(),
                    random_quantity(&mut rng),
                ),
                2 => (YEAR_KEYS.choose(&mut rng).unwrap(), random_year(&mut rng)),
                _ => (DATE_KEYS.choose(&mut rng).unwrap(), random_date(&mut rng)),
            };
            attributes.push(AttributeDoc {
                key: key.to_string(),
                value,
                qualifiers: random_qualifiers(&mut rng),
            });
        }
        doc.entities.insert(
            format!("E{i}"),
            EntityDoc {
                name,
                concepts,
                attributes,
                relations: rels,
            },
        );
    }
    doc
}

pub fn random_kb(seed: u64, n_entities: usize) -> KnowledgeBase {
    KnowledgeBase::from_document(random_kb_document(seed, n_entities))
        .expect("generated documents are well-formed")
}
