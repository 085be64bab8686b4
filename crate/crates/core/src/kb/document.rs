//! On-disk JSON layout of a knowledge base.
//!
//! Field names follow the KQA Pro `kb.json` release, so that file loads as-is:
//! concept parents may be spelled `subclassOf` or `instanceOf`, and relation
//! labels `predicate` or `relation`.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct KbDocument {
    #[serde(default)]
    pub concepts: IndexMap<String, ConceptDoc>,
    #[serde(default)]
    pub entities: IndexMap<String, EntityDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConceptDoc {
    pub name: String,
    #[serde(default, rename = "subclassOf", alias = "instanceOf")]
    pub parents: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntityDoc {
    pub name: String,
    #[serde(default, rename = "instanceOf")]
    pub concepts: Vec<String>,
    #[serde(default)]
    pub attributes: Vec<AttributeDoc>,
    #[serde(default)]
    pub relations: Vec<RelationDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttributeDoc {
    pub key: String,
    pub value: ValueDoc,
    #[serde(default)]
    pub qualifiers: IndexMap<String, Vec<ValueDoc>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelationDoc {
    #[serde(alias = "relation")]
    pub predicate: String,
    pub object: String,
    pub direction: DirectionDoc,
    #[serde(default)]
    pub qualifiers: IndexMap<String, Vec<ValueDoc>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionDoc {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKindDoc {
    String,
    Quantity,
    Year,
    Date,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValueDoc {
    #[serde(rename = "type")]
    pub kind: ValueKindDoc,
    pub value: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}
