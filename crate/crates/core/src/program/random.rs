//! Seeded generator of stack-valid programs over a knowledge base's
//! vocabulary. Some alignable arguments are corrupted on purpose so the
//! aligner has something to repair.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{reserved_token_in, ArgRole, Function, Program, ProgramStep};
use crate::kb::{Fact, KnowledgeBase};
use crate::value::{TypedValue, ValueKind};

const CORRUPTION_RATE: f64 = 0.15;
const BAD_LITERAL_RATE: f64 = 0.02;
const JUNK: &[&str] = &["location", "official", "main", "total", "former", "zzyzx"];
const FALLBACK: &[&str] = &["unknown", "thing"];

#[derive(Debug, Default)]
struct Vocab {
    names: Vec<String>,
    concepts: Vec<String>,
    keys: BTreeMap<ValueKind, Vec<String>>,
    all_keys: Vec<String>,
    strings: Vec<String>,
    rendered: BTreeMap<ValueKind, Vec<String>>,
    predicates: Vec<String>,
    qkeys: BTreeMap<ValueKind, Vec<String>>,
    all_qkeys: Vec<String>,
    qstrings: Vec<String>,
    qrendered: Vec<String>,
}

fn usable(s: &str) -> Option<String> {
    let t = s.trim();
    (reserved_token_in(t).is_none()).then(|| t.to_string())
}

fn finish(set: BTreeSet<String>) -> Vec<String> {
    set.into_iter().collect()
}

impl Vocab {
    fn collect(kb: &KnowledgeBase) -> Self {
        let mut concepts = BTreeSet::new();
        let mut keys: BTreeMap<ValueKind, BTreeSet<String>> = BTreeMap::new();
        let mut strings = BTreeSet::new();
        let mut rendered: BTreeMap<ValueKind, BTreeSet<String>> = BTreeMap::new();
        let mut predicates = BTreeSet::new();
        let mut qkeys: BTreeMap<ValueKind, BTreeSet<String>> = BTreeMap::new();
        let mut qstrings = BTreeSet::new();
        let mut qrendered = BTreeSet::new();

        for c in kb.concepts() {
            concepts.extend(usable(&c.name));
        }
        let mut note_qualifiers = |fact: Fact<'_>| {
            for q in fact.qualifiers() {
                if let Some(k) = usable(&q.key) {
                    qkeys.entry(q.value.kind()).or_default().insert(k);
                }
                if let TypedValue::String(s) = &q.value {
                    qstrings.extend(usable(s));
                }
                qrendered.extend(usable(&q.value.to_string()));
            }
        };
        for e in kb.entities() {
            for a in &e.attributes {
                if let Some(k) = usable(&a.key) {
                    keys.entry(a.value.kind()).or_default().insert(k);
                }
                if let TypedValue::String(s) = &a.value {
                    strings.extend(usable(s));
                }
                if let Some(y) = a.value.as_year() {
                    rendered
                        .entry(ValueKind::Year)
                        .or_default()
                        .insert(y.to_string());
                }
                if let Some(r) = usable(&a.value.to_string()) {
                    rendered.entry(a.value.kind()).or_default().insert(r);
                }
                note_qualifiers(Fact::Attribute(a));
            }
            for r in &e.relations {
                predicates.extend(usable(&r.predicate));
                note_qualifiers(Fact::Relation(r));
            }
        }
        let all_keys = keys.values().flatten().cloned().collect::<BTreeSet<_>>();
        let all_qkeys = qkeys.values().flatten().cloned().collect::<BTreeSet<_>>();
        Vocab {
            names: kb.name_pool().iter().filter_map(|n| usable(n)).collect(),
            concepts: finish(concepts),
            keys: keys.into_iter().map(|(k, v)| (k, finish(v))).collect(),
            all_keys: finish(all_keys),
            strings: finish(strings),
            rendered: rendered.into_iter().map(|(k, v)| (k, finish(v))).collect(),
            predicates: finish(predicates),
            qkeys: qkeys.into_iter().map(|(k, v)| (k, finish(v))).collect(),
            all_qkeys: finish(all_qkeys),
            qstrings: finish(qstrings),
            qrendered: finish(qrendered),
        }
    }
}

struct Gen<'a> {
    rng: ChaCha8Rng,
    vocab: &'a Vocab,
    steps: Vec<ProgramStep>,
}

impl Gen<'_> {
    fn pick(&mut self, pool: &[String]) -> String {
        match pool.choose(&mut self.rng) {
            Some(s) => s.clone(),
            None => FALLBACK.choose(&mut self.rng).unwrap().to_string(),
        }
    }

    fn corrupt(&mut self, s: String) -> String {
        if !self.rng.random_bool(CORRUPTION_RATE) {
            return s;
        }
        let mut words: Vec<String> = s.split_whitespace().map(str::to_string).collect();
        let junk = JUNK.choose(&mut self.rng).unwrap().to_string();
        match self.rng.random_range(0..5) {
            0 if !words.is_empty() => {
                let i = self.rng.random_range(0..words.len());
                words[i] = junk;
            }
            1 if words.len() > 1 => {
                let i = self.rng.random_range(0..words.len());
                words.remove(i);
            }
            2 => words.push(junk),
            3 => return s.to_uppercase(),
            _ => return format!("{junk} qqq"),
        }
        words.join(" ")
    }

    fn literal(&mut self, kind: ValueKind) -> String {
        if self.rng.random_bool(BAD_LITERAL_RATE) {
            return "unknown".to_string();
        }
        let pool = self.vocab.rendered.get(&kind).cloned().unwrap_or_default();
        if !pool.is_empty() && self.rng.random_bool(0.7) {
            return self.pick(&pool);
        }
        match kind {
            ValueKind::Quantity => self.rng.random_range(0..2_000_000).to_string(),
            ValueKind::Year => self.rng.random_range(1750..2021).to_string(),
            ValueKind::Date => format!(
                "{:04}-{:02}-{:02}",
                self.rng.random_range(1750..2021),
                self.rng.random_range(1..13),
                self.rng.random_range(1..29)
            ),
            ValueKind::String => self.pick(&self.vocab.strings.clone()),
        }
    }

    fn key_of(&mut self, kind: Option<ValueKind>, qualifier: bool) -> String {
        let (by_kind, all) = if qualifier {
            (&self.vocab.qkeys, &self.vocab.all_qkeys)
        } else {
            (&self.vocab.keys, &self.vocab.all_keys)
        };
        let pool = kind
            .and_then(|k| by_kind.get(&k))
            .filter(|p| !p.is_empty())
            .unwrap_or(all)
            .clone();
        let k = self.pick(&pool);
        self.corrupt(k)
    }

    /// Produce the argument for `role`; `kind` hints typed literals and keys.
    fn arg(&mut self, role: ArgRole, kind: Option<ValueKind>) -> String {
        let v = self.vocab;
        match role {
            ArgRole::EntityName => {
                let s = self.pick(&v.names);
                self.corrupt(s)
            }
            ArgRole::ConceptName => {
                let s = self.pick(&v.concepts);
                self.corrupt(s)
            }
            ArgRole::AttributeKey => self.key_of(kind, false),
            ArgRole::QualifierKey => self.key_of(kind, true),
            ArgRole::Predicate => {
                let s = self.pick(&v.predicates);
                self.corrupt(s)
            }
            ArgRole::StringValue => {
                let s = self.pick(&v.strings);
                self.corrupt(s)
            }
            ArgRole::QualifierStringValue => {
                let s = self.pick(&v.qstrings);
                self.corrupt(s)
            }
            ArgRole::AnyValue => {
                let all: Vec<String> = v.rendered.values().flatten().cloned().collect();
                self.pick(&all)
            }
            ArgRole::QualifierAnyValue => self.pick(&v.qrendered),
            ArgRole::QuantityLiteral => self.literal(ValueKind::Quantity),
            ArgRole::YearLiteral => self.literal(ValueKind::Year),
            ArgRole::DateLiteral => self.literal(ValueKind::Date),
            ArgRole::Comparison => ["=", "!=", "<", ">"]
                .choose(&mut self.rng)
                .unwrap()
                .to_string(),
            ArgRole::Direction => ["forward", "backward"]
                .choose(&mut self.rng)
                .unwrap()
                .to_string(),
            ArgRole::BetweenOp => ["less", "greater"]
                .choose(&mut self.rng)
                .unwrap()
                .to_string(),
            ArgRole::AmongOp => ["smallest", "largest"]
                .choose(&mut self.rng)
                .unwrap()
                .to_string(),
        }
    }

    fn emit(&mut self, f: Function, kind: Option<ValueKind>) {
        let args: Vec<String> = f.arg_roles().iter().map(|r| self.arg(*r, kind)).collect();
        let step = ProgramStep::new(f, &args).expect("generated arguments are valid");
        self.steps.push(step);
    }

    fn leaf(&mut self) -> usize {
        if self.rng.random_bool(0.25) {
            self.emit(Function::FindAll, None);
        } else {
            self.emit(Function::Find, None);
        }
        1
    }

    /// Emit an entity-set expression in at most `budget` steps.
    fn entity(&mut self, budget: usize, depth: usize) -> usize {
        if budget <= 1 || depth > 4 {
            return self.leaf();
        }
        match self.rng.random_range(0..6) {
            0 => self.leaf(),
            1 | 2 => {
                let used = self.entity(budget - 1, depth + 1);
                let (f, kind) = *[
                    (Function::FilterConcept, None),
                    (Function::FilterStr, Some(ValueKind::String)),
                    (Function::FilterNum, Some(ValueKind::Quantity)),
                    (Function::FilterYear, Some(ValueKind::Year)),
                    (Function::FilterDate, Some(ValueKind::Date)),
                    (Function::Relate, None),
                ]
                .choose(&mut self.rng)
                .unwrap();
                self.emit(f, kind);
                used + 1
            }
            3 if budget >= 3 => {
                let used = self.entity(budget - 2, depth + 1);
                let (source, kind) = *[
                    (Function::Relate, None),
                    (Function::FilterNum, Some(ValueKind::Quantity)),
                    (Function::FilterStr, Some(ValueKind::String)),
                    (Function::FilterYear, Some(ValueKind::Year)),
                ]
                .choose(&mut self.rng)
                .unwrap();
                self.emit(source, kind);
                let (f, qkind) = *[
                    (Function::QFilterStr, Some(ValueKind::String)),
                    (Function::QFilterNum, Some(ValueKind::Quantity)),
                    (Function::QFilterYear, Some(ValueKind::Year)),
                    (Function::QFilterDate, Some(ValueKind::Date)),
                ]
                .choose(&mut self.rng)
                .unwrap();
                self.emit(f, qkind);
                used + 2
            }
            4 | 5 if budget >= 3 => {
                let used = self.pair(budget - 1, depth);
                let f = if self.rng.random_bool(0.5) {
                    Function::And
                } else {
                    Function::Or
                };
                self.emit(f, None);
                used + 1
            }
            _ => self.leaf(),
        }
    }

    /// Two entity expressions sharing `avail` ≥ 2 steps.
    fn pair(&mut self, avail: usize, depth: usize) -> usize {
        let left_budget = self.rng.random_range(1..avail);
        let left = self.entity(left_budget, depth + 1);
        let right = self.entity(avail - left, depth + 1);
        left + right
    }

    fn program(&mut self, max_steps: usize) {
        let form = if max_steps >= 3 {
            self.rng.random_range(0..4)
        } else {
            self.rng.random_range(0..2)
        };
        match form {
            0 => {
                self.entity(max_steps, 0);
            }
            1 => {
                self.entity(max_steps - 1, 0);
                let f = *[
                    Function::QueryName,
                    Function::Count,
                    Function::QueryAttr,
                    Function::SelectAmong,
                    Function::QueryAttrUnderCondition,
                    Function::QueryAttrQualifier,
                ]
                .choose(&mut self.rng)
                .unwrap();
                let kind = (f == Function::SelectAmong).then_some(ValueKind::Quantity);
                self.emit(f, kind);
            }
            2 => {
                self.pair(max_steps - 1, 0);
                let f = *[
                    Function::QueryRelation,
                    Function::SelectBetween,
                    Function::QueryRelationQualifier,
                ]
                .choose(&mut self.rng)
                .unwrap();
                let kind = (f == Function::SelectBetween).then_some(ValueKind::Quantity);
                self.emit(f, kind);
            }
            _ => {
                self.entity(max_steps - 2, 0);
                let (verify, kind) = *[
                    (Function::VerifyStr, ValueKind::String),
                    (Function::VerifyNum, ValueKind::Quantity),
                    (Function::VerifyYear, ValueKind::Year),
                    (Function::VerifyDate, ValueKind::Date),
                ]
                .choose(&mut self.rng)
                .unwrap();
                self.emit(Function::QueryAttr, Some(kind));
                self.emit(verify, Some(kind));
            }
        }
    }
}

/// A stack-valid program of at most `max_steps` steps, deterministic in
/// `seed` and `kb`.
///
/// # Panics
/// If `max_steps < 2`.
pub fn random_program(seed: u64, kb: &KnowledgeBase, max_steps: usize) -> Program {
    assert!(max_steps >= 2, "max_steps must be at least 2");
    let vocab = Vocab::collect(kb);
    random_program_with(seed, &vocab, max_steps)
}

/// Generator bound to one knowledge base; amortizes vocabulary collection
/// over many programs.
pub struct ProgramSampler {
    vocab: Vocab,
}

impl ProgramSampler {
    pub fn new(kb: &KnowledgeBase) -> Self {
        ProgramSampler {
            vocab: Vocab::collect(kb),
        }
    }

    pub fn sample(&self, seed: u64, max_steps: usize) -> Program {
        assert!(max_steps >= 2, "max_steps must be at least 2");
        random_program_with(seed, &self.vocab, max_steps)
    }
}

fn random_program_with(seed: u64, vocab: &Vocab, max_steps: usize) -> Program {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        vocab,
        steps: Vec::new(),
    };
    g.program(max_steps);
    debug_assert!(g.steps.len() <= max_steps);
    Program::new(g.steps).expect("generator keeps the stack balanced")
}
