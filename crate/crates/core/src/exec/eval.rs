//! Per-function semantics, using the knowledge-base indexes.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use super::{EntitySet, ExecError, Member, Slot, StepResult, VALUE_SEPARATOR};
use crate::kb::{Direction, EntityId, Fact, FactRef, KnowledgeBase, Qualifier};
use crate::program::{Function, ProgramStep};
use crate::text::{normalize, same_text};
use crate::value::{CmpOp, TypedValue, ValueKind};

type StepOutput = Result<(StepResult, Vec<FactRef>), ExecError>;

struct Ctx<'a> {
    index: usize,
    step: &'a ProgramStep,
    join_all: bool,
}

impl<'a> Ctx<'a> {
    fn arg(&self, i: usize) -> &'a str {
        self.step.argument(i)
    }

    fn set<'s>(&self, slot: &'s Slot) -> Result<&'s EntitySet, ExecError> {
        slot.result.entities().ok_or(ExecError::TypeMismatch {
            step: self.index,
            function: self.step.function(),
            expected: "entity set",
        })
    }

    fn scalar<'s>(&self, slot: &'s Slot) -> Result<&'s str, ExecError> {
        slot.result.scalar().ok_or(ExecError::TypeMismatch {
            step: self.index,
            function: self.step.function(),
            expected: "scalar",
        })
    }

    fn literal(&self, i: usize, kind: ValueKind) -> Result<TypedValue, ExecError> {
        TypedValue::parse_as(kind, self.arg(i)).ok_or_else(|| ExecError::LiteralParse {
            step: self.index,
            literal: self.arg(i).to_string(),
            kind,
        })
    }

    fn op(&self, i: usize) -> CmpOp {
        CmpOp::parse(self.arg(i)).expect("operators are validated at parse time")
    }

    /// First value, or every value joined when `join_all` is set.
    fn pick(&self, values: Vec<String>) -> StepResult {
        if self.join_all {
            let mut seen = Vec::new();
            for v in values {
                if !seen.contains(&v) {
                    seen.push(v);
                }
            }
            StepResult::Scalar(seen.join(VALUE_SEPARATOR))
        } else {
            StepResult::Scalar(values.into_iter().next().unwrap_or_default())
        }
    }

    /// Entities a query reads: the first one, or all under `join_all`.
    fn query_targets<'s>(&self, set: &'s EntitySet) -> &'s [Member] {
        let members = set.members();
        if self.join_all {
            members
        } else {
            &members[..members.len().min(1)]
        }
    }
}

fn scalar(s: impl Into<String>) -> StepOutput {
    Ok((StepResult::Scalar(s.into()), Vec::new()))
}

fn entities(set: EntitySet) -> StepOutput {
    Ok((StepResult::Entities(set), Vec::new()))
}

fn verdict(b: bool) -> StepOutput {
    scalar(if b { "yes" } else { "no" })
}

/// Keep members whose attribute facts under `key` satisfy `test`; the
/// satisfying facts become the member's matched facts.
fn filter_attributes(
    kb: &KnowledgeBase,
    input: &EntitySet,
    key: &str,
    test: impl Fn(&TypedValue) -> bool,
) -> EntitySet {
    let key = normalize(key);
    let mut out = Vec::new();
    for m in input.members() {
        let facts: Vec<FactRef> = kb
            .entity(m.entity)
            .attributes
            .iter()
            .enumerate()
            .filter(|(_, a)| a.has_key(&key) && test(&a.value))
            .map(|(i, _)| FactRef::Attribute {
                owner: m.entity,
                index: i as u32,
            })
            .collect();
        if !facts.is_empty() {
            out.push(Member {
                entity: m.entity,
                facts,
            });
        }
    }
    EntitySet::from_members(out)
}

/// Keep matched facts that carry a qualifier under `qkey` satisfying `test`.
fn filter_qualifiers(
    kb: &KnowledgeBase,
    input: &EntitySet,
    qkey: &str,
    test: impl Fn(&TypedValue) -> bool,
) -> EntitySet {
    let qkey = normalize(qkey);
    let hit = |q: &Qualifier| normalize(&q.key) == qkey && test(&q.value);
    let mut out = Vec::new();
    for m in input.members() {
        let facts: Vec<FactRef> = m
            .facts
            .iter()
            .copied()
            .filter(|f| kb.fact(*f).qualifiers().iter().any(hit))
            .collect();
        if !facts.is_empty() {
            out.push(Member {
                entity: m.entity,
                facts,
            });
        }
    }
    EntitySet::from_members(out)
}

fn relate(kb: &KnowledgeBase, input: &EntitySet, predicate: &str, dir: Direction) -> EntitySet {
    let pred = normalize(predicate);
    let opposite = match dir {
        Direction::Forward => Direction::Backward,
        Direction::Backward => Direction::Forward,
    };
    let mut targets: BTreeMap<EntityId, Vec<FactRef>> = BTreeMap::new();
    for e in input.ids() {
        for (j, r) in kb.entity(e).relations.iter().enumerate() {
            if r.direction == dir && r.has_predicate(&pred) {
                targets
                    .entry(r.object)
                    .or_default()
                    .push(FactRef::Relation {
                        owner: e,
                        index: j as u32,
                    });
            }
        }
        for f in kb.incoming(e) {
            if let Fact::Relation(r) = kb.fact(*f) {
                if r.direction == opposite && r.has_predicate(&pred) {
                    targets.entry(f.owner()).or_default().push(*f);
                }
            }
        }
    }
    EntitySet::from_members(
        targets
            .into_iter()
            .map(|(entity, facts)| Member { entity, facts })
            .collect(),
    )
}

fn merge(a: &EntitySet, b: &EntitySet, keep: impl Fn(bool, bool) -> bool) -> EntitySet {
    let mut out = Vec::new();
    let (xs, ys) = (a.members(), b.members());
    let (mut i, mut j) = (0, 0);
    while i < xs.len() || j < ys.len() {
        let ord = match (xs.get(i), ys.get(j)) {
            (Some(x), Some(y)) => x.entity.cmp(&y.entity),
            (Some(_), None) => Ordering::Less,
            _ => Ordering::Greater,
        };
        match ord {
            Ordering::Less => {
                if keep(true, false) {
                    out.push(xs[i].clone());
                }
                i += 1;
            }
            Ordering::Greater => {
                if keep(false, true) {
                    out.push(ys[j].clone());
                }
                j += 1;
            }
            Ordering::Equal => {
                let mut facts = xs[i].facts.clone();
                facts.extend_from_slice(&ys[j].facts);
                out.push(Member {
                    entity: xs[i].entity,
                    facts,
                });
                i += 1;
                j += 1;
            }
        }
    }
    EntitySet::from_members(out)
}

/// First attribute value under `key` that can be ordered.
fn orderable_value<'a>(kb: &'a KnowledgeBase, e: EntityId, key: &str) -> Option<&'a TypedValue> {
    let key = normalize(key);
    kb.entity(e)
        .attributes
        .iter()
        .find(|a| a.has_key(&key) && a.value.kind() != ValueKind::String)
        .map(|a| &a.value)
}

/// Relation facts linking `a` to `b` under `pred` (any predicate if `None`),
/// stored on either side: forward facts on `a`, then backward facts on `b`.
fn links<'a>(
    kb: &'a KnowledgeBase,
    a: EntityId,
    b: EntityId,
    pred: Option<&str>,
) -> Vec<&'a crate::kb::RelationFact> {
    let pred = pred.map(normalize);
    let ok = |r: &crate::kb::RelationFact| pred.as_deref().is_none_or(|p| r.has_predicate(p));
    let forward = kb
        .entity(a)
        .relations
        .iter()
        .filter(|r| r.direction == Direction::Forward && r.object == b && ok(r));
    let backward = kb
        .entity(b)
        .relations
        .iter()
        .filter(|r| r.direction == Direction::Backward && r.object == a && ok(r));
    forward.chain(backward).collect()
}

pub(super) fn eval_step(
    kb: &KnowledgeBase,
    index: usize,
    step: &ProgramStep,
    inputs: &[Slot],
    join_all: bool,
) -> StepOutput {
    let cx = Ctx {
        index,
        step,
        join_all,
    };
    use Function::*;
    match step.function() {
        FindAll => entities(EntitySet::from_ids(kb.entity_ids())),
        Find => entities(EntitySet::from_ids(
            kb.entities_by_name(cx.arg(0)).iter().copied(),
        )),
        FilterConcept => {
            let input = cx.set(&inputs[0])?;
            let members = kb.concept_members(cx.arg(0));
            let kept = input
                .members()
                .iter()
                .filter(|m| members.binary_search(&m.entity).is_ok())
                .cloned()
                .collect();
            entities(EntitySet::from_members(kept))
        }
        FilterStr => {
            let input = cx.set(&inputs[0])?;
            let want = cx.arg(1);
            entities(filter_attributes(
                kb,
                input,
                cx.arg(0),
                |v| matches!(v, TypedValue::String(s) if same_text(s, want)),
            ))
        }
        FilterNum | FilterYear | FilterDate => {
            let input = cx.set(&inputs[0])?;
            let kind = match step.function() {
                FilterNum => ValueKind::Quantity,
                FilterYear => ValueKind::Year,
                _ => ValueKind::Date,
            };
            let lit = cx.literal(1, kind)?;
            let op = cx.op(2);
            entities(filter_attributes(kb, input, cx.arg(0), |v| {
                typed_test(kind, v, op, &lit)
            }))
        }
        QFilterStr | QFilterNum | QFilterYear | QFilterDate => {
            let input = cx.set(&inputs[0])?;
            let (kind, lit, op) = match step.function() {
                QFilterStr => (
                    ValueKind::String,
                    TypedValue::String(cx.arg(1).to_string()),
                    CmpOp::Eq,
                ),
                QFilterNum => (
                    ValueKind::Quantity,
                    cx.literal(1, ValueKind::Quantity)?,
                    cx.op(2),
                ),
                QFilterYear => (ValueKind::Year, cx.literal(1, ValueKind::Year)?, cx.op(2)),
                _ => (ValueKind::Date, cx.literal(1, ValueKind::Date)?, cx.op(2)),
            };
            if !input.is_empty() && !input.has_facts() {
                return Err(ExecError::MissingFacts { step: index });
            }
            entities(filter_qualifiers(kb, input, cx.arg(0), |v| {
                typed_test(kind, v, op, &lit)
            }))
        }
        Relate => {
            let input = cx.set(&inputs[0])?;
            let dir = Direction::parse(cx.arg(1)).expect("directions are validated at parse time");
            entities(relate(kb, input, cx.arg(0), dir))
        }
        And | Or => {
            let a = cx.set(&inputs[0])?;
            let b = cx.set(&inputs[1])?;
            let and = step.function() == And;
            entities(merge(
                a,
                b,
                |in_a, in_b| if and { in_a && in_b } else { in_a || in_b },
            ))
        }
        QueryName => {
            let input = cx.set(&inputs[0])?;
            let names = cx
                .query_targets(input)
                .iter()
                .map(|m| kb.name(m.entity).to_string())
                .collect();
            Ok((cx.pick(names), Vec::new()))
        }
        Count => {
            let input = cx.set(&inputs[0])?;
            scalar(input.len().to_string())
        }
        QueryAttr | QueryAttrUnderCondition => {
            let input = cx.set(&inputs[0])?;
            let key = normalize(cx.arg(0));
            let condition = (step.function() == QueryAttrUnderCondition)
                .then(|| (normalize(cx.arg(1)), cx.arg(2)));
            let mut values = Vec::new();
            let mut origin = Vec::new();
            for m in cx.query_targets(input) {
                for (i, a) in kb.entity(m.entity).attributes.iter().enumerate() {
                    if !a.has_key(&key) {
                        continue;
                    }
                    if let Some((qkey, qvalue)) = &condition {
                        let hit = a
                            .qualifiers
                            .iter()
                            .any(|q| normalize(&q.key) == *qkey && q.value.matches_text(qvalue));
                        if !hit {
                            continue;
                        }
                    }
                    values.push(a.value.to_string());
                    origin.push(FactRef::Attribute {
                        owner: m.entity,
                        index: i as u32,
                    });
                }
            }
            Ok((cx.pick(values), origin))
        }
        QueryAttrQualifier => {
            let input = cx.set(&inputs[0])?;
            let key = normalize(cx.arg(0));
            let qkey = normalize(cx.arg(2));
            let mut values = Vec::new();
            for m in cx.query_targets(input) {
                for a in &kb.entity(m.entity).attributes {
                    if a.has_key(&key) && a.value.matches_text(cx.arg(1)) {
                        values.extend(
                            a.qualifiers
                                .iter()
                                .filter(|q| normalize(&q.key) == qkey)
                                .map(|q| q.value.to_string()),
                        );
                    }
                }
            }
            Ok((cx.pick(values), Vec::new()))
        }
        QueryRelation | QueryRelationQualifier => {
            let a = cx.set(&inputs[0])?;
            let b = cx.set(&inputs[1])?;
            let (Some(ea), Some(eb)) = (a.first(), b.first()) else {
                return scalar("");
            };
            let values = if step.function() == QueryRelation {
                links(kb, ea.entity, eb.entity, None)
                    .into_iter()
                    .map(|r| r.predicate.clone())
                    .collect()
            } else {
                let qkey = normalize(cx.arg(1));
                links(kb, ea.entity, eb.entity, Some(cx.arg(0)))
                    .into_iter()
                    .flat_map(|r| r.qualifiers.iter())
                    .filter(|q| normalize(&q.key) == qkey)
                    .map(|q| q.value.to_string())
                    .collect()
            };
            Ok((cx.pick(values), Vec::new()))
        }
        SelectBetween => {
            let a = cx.set(&inputs[0])?;
            let b = cx.set(&inputs[1])?;
            let key = cx.arg(0);
            let side = |s: &EntitySet| {
                s.first()
                    .and_then(|m| orderable_value(kb, m.entity, key).map(|v| (m.entity, v)))
            };
            let winner = match (side(a), side(b)) {
                (None, None) => None,
                (Some((e, _)), None) | (None, Some((e, _))) => Some(e),
                (Some((ea, va)), Some((eb, vb))) => va.compare(vb).map(|ord| {
                    let a_wins = if cx.arg(1) == "greater" {
                        ord != Ordering::Less
                    } else {
                        ord != Ordering::Greater
                    };
                    if a_wins {
                        ea
                    } else {
                        eb
                    }
                }),
            };
            scalar(winner.map(|e| kb.name(e)).unwrap_or_default())
        }
        SelectAmong => {
            let input = cx.set(&inputs[0])?;
            let largest = cx.arg(1) == "largest";
            let mut best: Option<(EntityId, &TypedValue)> = None;
            for e in input.ids() {
                let Some(v) = orderable_value(kb, e, cx.arg(0)) else {
                    continue;
                };
                best = match best {
                    None => Some((e, v)),
                    Some((be, bv)) => match v.compare(bv) {
                        Some(Ordering::Greater) if largest => Some((e, v)),
                        Some(Ordering::Less) if !largest => Some((e, v)),
                        _ => Some((be, bv)),
                    },
                };
            }
            scalar(best.map(|(e, _)| kb.name(e)).unwrap_or_default())
        }
        VerifyStr => {
            let s = cx.scalar(&inputs[0])?;
            verdict(same_text(s, cx.arg(0)))
        }
        VerifyNum | VerifyYear | VerifyDate => {
            let s = cx.scalar(&inputs[0])?;
            let kind = match step.function() {
                VerifyNum => ValueKind::Quantity,
                VerifyYear => ValueKind::Year,
                _ => ValueKind::Date,
            };
            verdict(verify(kind, s, cx.arg(0), cx.op(1)))
        }
    }
}

/// Typed comparison of a stored value against a parsed literal. Year
/// filters read dates by their year; other kinds must match exactly.
pub(crate) fn typed_test(kind: ValueKind, value: &TypedValue, op: CmpOp, lit: &TypedValue) -> bool {
    match kind {
        ValueKind::Year => value
            .as_year()
            .is_some_and(|y| op.test(&TypedValue::Year(y), lit)),
        _ => value.kind() == kind && op.test(value, lit),
    }
}

/// `scalar op literal`, both read as `kind`; anything unreadable is "no".
pub(crate) fn verify(kind: ValueKind, scalar: &str, literal: &str, op: CmpOp) -> bool {
    let read = |s: &str| match kind {
        ValueKind::Year => TypedValue::parse_as(ValueKind::Year, s).or_else(|| {
            TypedValue::parse_as(ValueKind::Date, s)
                .and_then(|d| d.as_year())
                .map(TypedValue::Year)
        }),
        _ => TypedValue::parse_as(kind, s),
    };
    match (read(scalar), read(literal)) {
        (Some(a), Some(b)) => op.test(&a, &b),
        _ => false,
    }
}
