//! Argument repair by Jaccard similarity.
//!
//! Every alignable argument of a step is compared against a pool of strings
//! drawn from the facts of the step's working entities, and replaced by the
//! best-scoring pool member. An argument that already names a pool member is
//! kept as written.

use std::borrow::Cow;
use std::collections::{BTreeSet, HashSet};
use std::fmt;

use num_rational::Ratio;

use crate::kb::{EntityId, Fact, FactRef, KnowledgeBase};
use crate::program::{reserved_token_in, ArgRole, Function, ProgramStep};
use crate::text::{normalize, word_tokens};
use crate::value::TypedValue;

/// Exact Jaccard coefficient.
pub type Score = Ratio<usize>;

/// Jaccard coefficient over lowercased word-token sets. Two token-less
/// strings score 1; exactly one token-less string scores 0.
pub fn jaccard(a: &str, b: &str) -> Score {
    jaccard_sets(&word_tokens(a), &word_tokens(b))
}

fn jaccard_sets(a: &BTreeSet<String>, b: &BTreeSet<String>) -> Score {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => Ratio::from_integer(1),
        (true, false) | (false, true) => Ratio::from_integer(0),
        (false, false) => {
            let inter = a.intersection(b).count();
            Ratio::new(inter, a.len() + b.len() - inter)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PoolKind {
    EntityNames,
    ConceptNames,
    AttributeKeys,
    AttributeValues,
    Predicates,
    QualifierKeys,
    QualifierValues,
    /// Operators, directions and typed literals: never aligned.
    None,
}

impl PoolKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PoolKind::EntityNames => "entity_names",
            PoolKind::ConceptNames => "concept_names",
            PoolKind::AttributeKeys => "attribute_keys",
            PoolKind::AttributeValues => "attribute_values",
            PoolKind::Predicates => "predicates",
            PoolKind::QualifierKeys => "qualifier_keys",
            PoolKind::QualifierValues => "qualifier_values",
            PoolKind::None => "none",
        }
    }
}

impl fmt::Display for PoolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The entities (and the facts they were matched through) a step operates
/// on. For a scalar input produced by an attribute query, these are the
/// queried facts and their owner.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WorkingSet {
    pub entities: Vec<EntityId>,
    pub facts: Vec<FactRef>,
}

impl WorkingSet {
    pub fn of_entities(entities: impl IntoIterator<Item = EntityId>) -> Self {
        WorkingSet {
            entities: entities.into_iter().collect(),
            facts: Vec::new(),
        }
    }
}

/// Sorted, deduplicated candidates for one argument.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePool<'kb> {
    pub step_index: usize,
    pub argument_index: usize,
    pub kind: PoolKind,
    pub candidates: Cow<'kb, [String]>,
}

impl CandidatePool<'_> {
    pub fn contains_normalized(&self, arg: &str) -> bool {
        let arg = normalize(arg);
        self.candidates.iter().any(|c| normalize(c) == arg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignFlag {
    /// No candidates: argument left as generated.
    EmptyPool,
    /// Every candidate scored 0: argument left as generated.
    NoOverlap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentRecord {
    pub step: usize,
    pub argument: usize,
    pub original: String,
    pub aligned: String,
    /// `jaccard(original, aligned)`.
    pub score: Score,
    /// Best score over the pool; `None` for empty or unaligned pools.
    pub best_score: Option<Score>,
    pub pool_kind: PoolKind,
    pub changed: bool,
    pub flag: Option<AlignFlag>,
    /// The pool itself, kept only on request.
    pub pool: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AlignmentReport {
    pub records: Vec<AlignmentRecord>,
}

impl AlignmentReport {
    pub fn changed(&self) -> impl Iterator<Item = &AlignmentRecord> {
        self.records.iter().filter(|r| r.changed)
    }

    /// One row per argument, tab separated, with a header line.
    pub fn to_table(&self) -> String {
        let mut out = String::from("step\targ\tpool\toriginal\taligned\tscore\tchanged\tflag\n");
        for r in &self.records {
            let flag = match r.flag {
                Some(AlignFlag::EmptyPool) => "empty_pool",
                Some(AlignFlag::NoOverlap) => "no_overlap",
                None => "-",
            };
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                r.step, r.argument, r.pool_kind, r.original, r.aligned, r.score, r.changed, flag
            ));
        }
        out
    }
}

fn sorted_pool(items: BTreeSet<String>) -> Vec<String> {
    items.into_iter().collect()
}

fn insert_candidate(set: &mut BTreeSet<String>, s: &str) {
    let t = s.trim();
    if reserved_token_in(t).is_none() {
        set.insert(t.to_string());
    }
}

/// Attribute facts of the working entities whose key matches `key`.
fn keyed_attributes<'a>(
    kb: &'a KnowledgeBase,
    working: &'a WorkingSet,
    key: &str,
) -> impl Iterator<Item = &'a crate::kb::AttributeFact> + 'a {
    let key = normalize(key);
    working
        .entities
        .iter()
        .flat_map(move |e| kb.entity(*e).attributes.iter())
        .filter(move |a| a.has_key(&key))
}

/// Candidate pool for argument `argument_index` of `step`. Arguments to the
/// left of `argument_index` are taken as already aligned.
pub fn build_pool<'kb>(
    kb: &'kb KnowledgeBase,
    step: &ProgramStep,
    step_index: usize,
    argument_index: usize,
    working: &WorkingSet,
) -> CandidatePool<'kb> {
    let role = step.function().arg_roles()[argument_index];
    let mut set = BTreeSet::new();
    let kind = match role {
        ArgRole::EntityName => {
            return CandidatePool {
                step_index,
                argument_index,
                kind: PoolKind::EntityNames,
                candidates: Cow::Borrowed(kb.name_pool()),
            };
        }
        ArgRole::ConceptName => {
            let mut seen = BTreeSet::new();
            for e in &working.entities {
                for c in &kb.entity(*e).concepts {
                    seen.extend(kb.ancestors(*c));
                }
            }
            for c in seen {
                insert_candidate(&mut set, &kb.concept(c).name);
            }
            PoolKind::ConceptNames
        }
        ArgRole::AttributeKey => {
            for e in &working.entities {
                for a in &kb.entity(*e).attributes {
                    insert_candidate(&mut set, &a.key);
                }
            }
            PoolKind::AttributeKeys
        }
        ArgRole::StringValue if step.function() == Function::VerifyStr => {
            for f in &working.facts {
                if let Fact::Attribute(a) = kb.fact(*f) {
                    if let TypedValue::String(s) = &a.value {
                        insert_candidate(&mut set, s);
                    }
                }
            }
            PoolKind::AttributeValues
        }
        ArgRole::StringValue => {
            for a in keyed_attributes(kb, working, step.argument(0)) {
                if let TypedValue::String(s) = &a.value {
                    insert_candidate(&mut set, s);
                }
            }
            PoolKind::AttributeValues
        }
        ArgRole::AnyValue => {
            for a in keyed_attributes(kb, working, step.argument(0)) {
                insert_candidate(&mut set, &a.value.to_string());
            }
            PoolKind::AttributeValues
        }
        ArgRole::Predicate => {
            for e in &working.entities {
                for r in &kb.entity(*e).relations {
                    insert_candidate(&mut set, &r.predicate);
                }
                for f in kb.incoming(*e) {
                    insert_candidate(&mut set, kb.fact(*f).label());
                }
            }
            PoolKind::Predicates
        }
        ArgRole::QualifierKey => {
            match step.function() {
                Function::QueryAttrUnderCondition => {
                    for a in keyed_attributes(kb, working, step.argument(0)) {
                        for q in &a.qualifiers {
                            insert_candidate(&mut set, &q.key);
                        }
                    }
                }
                Function::QueryAttrQualifier => {
                    let value = step.argument(1);
                    for a in keyed_attributes(kb, working, step.argument(0)) {
                        if a.value.matches_text(value) {
                            for q in &a.qualifiers {
                                insert_candidate(&mut set, &q.key);
                            }
                        }
                    }
                }
                Function::QueryRelationQualifier => {
                    let pred = normalize(step.argument(0));
                    for e in &working.entities {
                        for r in &kb.entity(*e).relations {
                            if r.has_predicate(&pred) {
                                for q in &r.qualifiers {
                                    insert_candidate(&mut set, &q.key);
                                }
                            }
                        }
                    }
                }
                // QFilter family: qualifiers of the matched facts.
                _ => {
                    for f in &working.facts {
                        for q in kb.fact(*f).qualifiers() {
                            insert_candidate(&mut set, &q.key);
                        }
                    }
                }
            }
            PoolKind::QualifierKeys
        }
        ArgRole::QualifierStringValue => {
            let qkey = normalize(step.argument(0));
            for f in &working.facts {
                for q in kb.fact(*f).qualifiers() {
                    if let TypedValue::String(s) = &q.value {
                        if normalize(&q.key) == qkey {
                            insert_candidate(&mut set, s);
                        }
                    }
                }
            }
            PoolKind::QualifierValues
        }
        ArgRole::QualifierAnyValue => {
            let qkey = normalize(step.argument(1));
            for a in keyed_attributes(kb, working, step.argument(0)) {
                for q in &a.qualifiers {
                    if normalize(&q.key) == qkey {
                        insert_candidate(&mut set, &q.value.to_string());
                    }
                }
            }
            PoolKind::QualifierValues
        }
        ArgRole::QuantityLiteral
        | ArgRole::YearLiteral
        | ArgRole::DateLiteral
        | ArgRole::Comparison
        | ArgRole::Direction
        | ArgRole::BetweenOp
        | ArgRole::AmongOp => PoolKind::None,
    };
    CandidatePool {
        step_index,
        argument_index,
        kind,
        candidates: Cow::Owned(sorted_pool(set)),
    }
}

/// Decide one argument against its pool.
pub fn align_argument(
    original: &str,
    pool: &CandidatePool<'_>,
    kb: &KnowledgeBase,
) -> AlignmentRecord {
    let unchanged = |best_score: Option<Score>, flag: Option<AlignFlag>| AlignmentRecord {
        step: pool.step_index,
        argument: pool.argument_index,
        original: original.to_string(),
        aligned: original.to_string(),
        score: jaccard(original, original),
        best_score,
        pool_kind: pool.kind,
        changed: false,
        flag,
        pool: None,
    };
    if pool.kind == PoolKind::None {
        return unchanged(None, None);
    }
    if pool.candidates.is_empty() {
        return unchanged(None, Some(AlignFlag::EmptyPool));
    }
    let in_pool = if pool.kind == PoolKind::EntityNames {
        !kb.entities_by_name(original).is_empty()
    } else {
        let norm = normalize(original);
        let set: HashSet<String> = pool.candidates.iter().map(|c| normalize(c)).collect();
        set.contains(&norm)
    };
    if in_pool {
        return unchanged(Some(Ratio::from_integer(1)), None);
    }

    let tokens = word_tokens(original);
    let mut best: Option<(Score, &String)> = None;
    for c in pool.candidates.iter() {
        let s = jaccard_sets(&tokens, &word_tokens(c));
        // Candidates are sorted, so keeping the first maximum breaks ties
        // towards the lexicographically smallest string.
        if best.as_ref().is_none_or(|(b, _)| s > *b) {
            best = Some((s, c));
        }
    }
    let (best_score, winner) = best.expect("pool is non-empty");
    if best_score == Ratio::from_integer(0) {
        return unchanged(Some(best_score), Some(AlignFlag::NoOverlap));
    }
    AlignmentRecord {
        step: pool.step_index,
        argument: pool.argument_index,
        original: original.to_string(),
        aligned: winner.clone(),
        score: best_score,
        best_score: Some(best_score),
        pool_kind: pool.kind,
        changed: winner != original,
        flag: None,
        pool: None,
    }
}

/// Align every argument of `step` left to right; later pools see earlier
/// aligned arguments.
pub fn align_step(
    kb: &KnowledgeBase,
    step: &ProgramStep,
    step_index: usize,
    working: &WorkingSet,
    keep_pools: bool,
) -> (ProgramStep, Vec<AlignmentRecord>) {
    let mut aligned = step.clone();
    let mut records = Vec::with_capacity(step.arguments().len());
    for i in 0..step.arguments().len() {
        let pool = build_pool(kb, &aligned, step_index, i, working);
        let mut record = align_argument(step.argument(i), &pool, kb);
        if record.changed {
            aligned.set_argument(i, record.aligned.clone());
        }
        if keep_pools {
            record.pool = Some(pool.candidates.into_owned());
        }
        records.push(record);
    }
    (aligned, records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::KnowledgeBase;
    use crate::program::Function;
    use proptest::prelude::*;

    fn fixture() -> KnowledgeBase {
        KnowledgeBase::from_slice(include_bytes!("../tests/data/fixture_a.json")).unwrap()
    }

    fn e(kb: &KnowledgeBase, id: &str) -> EntityId {
        kb.lookup_entity(id).unwrap()
    }

    #[test]
    fn jaccard_spot_values() {
        assert_eq!(jaccard("official name", "nick name"), Ratio::new(1, 3));
        assert_eq!(
            jaccard("location of birth", "place of birth"),
            Ratio::new(1, 2)
        );
        assert_eq!(jaccard("population", "population"), Ratio::from_integer(1));
        assert_eq!(jaccard("", ""), Ratio::from_integer(1));
        assert_eq!(jaccard("", "x"), Ratio::from_integer(0));
        assert_eq!(
            jaccard("Place-of-Birth", "place of birth"),
            Ratio::from_integer(1)
        );
    }

    #[test]
    fn filter_str_key_pool() {
        let kb = fixture();
        let step = ProgramStep::new(Function::FilterStr, &["official name", "x"]).unwrap();
        let pool = build_pool(&kb, &step, 1, 0, &WorkingSet::of_entities([e(&kb, "E1")]));
        assert_eq!(pool.kind, PoolKind::AttributeKeys);
        assert_eq!(pool.candidates.as_ref(), ["nick name", "population"]);
    }

    #[test]
    fn filter_str_value_pool_uses_aligned_key() {
        let kb = fixture();
        let step = ProgramStep::new(Function::FilterStr, &["nick name", "x"]).unwrap();
        let all = WorkingSet::of_entities(kb.entity_ids());
        let pool = build_pool(&kb, &step, 0, 1, &all);
        assert_eq!(pool.kind, PoolKind::AttributeValues);
        assert_eq!(pool.candidates.as_ref(), ["City of Presidents"]);
    }

    #[test]
    fn relate_predicate_pool() {
        let kb = fixture();
        let step = ProgramStep::new(Function::Relate, &["location of birth", "forward"]).unwrap();
        let pool = build_pool(&kb, &step, 0, 0, &WorkingSet::of_entities([e(&kb, "E2")]));
        assert_eq!(pool.kind, PoolKind::Predicates);
        assert_eq!(pool.candidates.as_ref(), ["place of birth"]);
        // Incoming edges count for the object side.
        let pool = build_pool(&kb, &step, 0, 0, &WorkingSet::of_entities([e(&kb, "E1")]));
        assert_eq!(pool.candidates.as_ref(), ["part of", "place of birth"]);
    }

    #[test]
    fn operators_are_never_pooled() {
        let kb = fixture();
        let step = ProgramStep::new(Function::FilterNum, &["population", "5", "<"]).unwrap();
        let w = WorkingSet::of_entities(kb.entity_ids());
        assert_eq!(build_pool(&kb, &step, 0, 1, &w).kind, PoolKind::None);
        assert_eq!(build_pool(&kb, &step, 0, 2, &w).kind, PoolKind::None);
    }

    #[test]
    fn concept_pool_includes_superclasses() {
        let kb = fixture();
        let step = ProgramStep::new(Function::FilterConcept, &["town"]).unwrap();
        let pool = build_pool(&kb, &step, 0, 0, &WorkingSet::of_entities([e(&kb, "E1")]));
        assert_eq!(pool.candidates.as_ref(), ["city", "municipality"]);
    }

    #[test]
    fn mismatched_key_and_predicate_are_repaired() {
        let kb = fixture();
        let step = ProgramStep::new(
            Function::FilterStr,
            &["official name", "City of Presidents"],
        )
        .unwrap();
        let (aligned, recs) = align_step(
            &kb,
            &step,
            0,
            &WorkingSet::of_entities([e(&kb, "E1")]),
            false,
        );
        assert_eq!(aligned.argument(0), "nick name");
        assert_eq!(recs[0].score, Ratio::new(1, 3));
        assert!(recs[0].changed);
        assert_eq!(aligned.argument(1), "City of Presidents");
        assert!(!recs[1].changed);

        let step = ProgramStep::new(Function::Relate, &["location of birth", "backward"]).unwrap();
        let (aligned, recs) = align_step(
            &kb,
            &step,
            0,
            &WorkingSet::of_entities([e(&kb, "E2")]),
            false,
        );
        assert_eq!(aligned.argument(0), "place of birth");
        assert_eq!(recs[0].score, Ratio::new(1, 2));
        assert_eq!(recs[1].pool_kind, PoolKind::None);
    }

    #[test]
    fn find_aligns_with_itself() {
        let kb = fixture();
        let step = ProgramStep::new(Function::Find, &["Quincy"]).unwrap();
        let (aligned, recs) = align_step(&kb, &step, 0, &WorkingSet::default(), false);
        assert_eq!(aligned, step);
        assert_eq!(recs[0].score, Ratio::from_integer(1));
        assert!(!recs[0].changed);
        // Case differences stay as written; lookups normalize anyway.
        let step = ProgramStep::new(Function::Find, &["QUINCY"]).unwrap();
        let (aligned, _) = align_step(&kb, &step, 0, &WorkingSet::default(), false);
        assert_eq!(aligned.argument(0), "QUINCY");
    }

    #[test]
    fn zero_overlap_and_empty_pool_keep_original() {
        let kb = fixture();
        let step = ProgramStep::new(Function::QueryAttr, &["zzyzx"]).unwrap();
        let (_, recs) = align_step(
            &kb,
            &step,
            0,
            &WorkingSet::of_entities([e(&kb, "E1")]),
            false,
        );
        assert_eq!(recs[0].flag, Some(AlignFlag::NoOverlap));
        assert!(!recs[0].changed);
        let (_, recs) = align_step(&kb, &step, 0, &WorkingSet::default(), false);
        assert_eq!(recs[0].flag, Some(AlignFlag::EmptyPool));
    }

    #[test]
    fn ties_break_lexicographically() {
        let doc = r#"{"entities":{"E1":{"name":"a","attributes":[
            {"key":"b c","value":{"type":"string","value":"v"}},
            {"key":"a c","value":{"type":"string","value":"v"}}]}}}"#;
        let kb = KnowledgeBase::from_slice(doc.as_bytes()).unwrap();
        let step = ProgramStep::new(Function::QueryAttr, &["c d"]).unwrap();
        let (aligned, _) = align_step(
            &kb,
            &step,
            0,
            &WorkingSet::of_entities(kb.entity_ids()),
            false,
        );
        assert_eq!(aligned.argument(0), "a c");
    }

    #[test]
    fn table_has_one_row_per_argument() {
        let kb = fixture();
        let step = ProgramStep::new(Function::Relate, &["location of birth", "backward"]).unwrap();
        let (_, recs) = align_step(
            &kb,
            &step,
            0,
            &WorkingSet::of_entities([e(&kb, "E1")]),
            false,
        );
        let t = AlignmentReport { records: recs }.to_table();
        assert_eq!(t.lines().count(), 3);
        assert!(t.contains("location of birth\tplace of birth\t1/2\ttrue"));
    }

    fn phrase() -> impl Strategy<Value = String> {
        prop::collection::vec(
            prop::sample::select(vec!["a", "b", "c", "of", "name", "X"]),
            0..5,
        )
        .prop_map(|w| w.join(" "))
    }

    proptest! {
        #[test]
        fn jaccard_is_symmetric_and_bounded(a in phrase(), b in phrase()) {
            let s = jaccard(&a, &b);
            prop_assert_eq!(s, jaccard(&b, &a));
            prop_assert!(s >= Ratio::from_integer(0) && s <= Ratio::from_integer(1));
            prop_assert_eq!(jaccard(&a, &a), Ratio::from_integer(1));
        }

        #[test]
        fn alignment_is_idempotent(seed in 0u64..200, arg in phrase()) {
            let kb = crate::kb::random::random_kb(seed, 12);
            let step = ProgramStep::new(Function::QueryAttr, &[arg]).unwrap();
            let w = WorkingSet::of_entities(kb.entity_ids());
            let (once, recs) = align_step(&kb, &step, 0, &w, true);
            let (twice, again) = align_step(&kb, &once, 0, &w, false);
            prop_assert_eq!(&once, &twice);
            prop_assert!(again.iter().all(|r| !r.changed));
            let r = &recs[0];
            if r.changed {
                let pool = r.pool.as_ref().unwrap();
                prop_assert!(pool.contains(&r.aligned));
                for c in pool {
                    prop_assert!(jaccard(&r.original, c) <= r.score);
                }
            }
        }
    }
}
