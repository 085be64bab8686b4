//! A deliberately naive executor used as a test oracle.
//!
//! Every step is answered by scanning the whole knowledge base: no name
//! index, no concept closure, no incoming-edge index. It never aligns. On any
//! program it must agree exactly with `execute(kb, program, false)`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use super::{EntitySet, ExecError, ExecutionTrace, Member, StepResult, TraceStatus};
use crate::align::AlignmentReport;
use crate::kb::{ConceptId, Direction, EntityId, FactRef, KnowledgeBase, Qualifier};
use crate::program::{Function, Program, ProgramStep};
use crate::text::normalize;
use crate::value::{CmpOp, TypedValue, ValueKind};

type Set = BTreeMap<EntityId, BTreeSet<FactRef>>;

enum Val {
    Set(Set),
    Text(String),
}

fn to_result(v: &Val) -> StepResult {
    match v {
        Val::Text(s) => StepResult::Scalar(s.clone()),
        Val::Set(s) => StepResult::Entities(EntitySet::from_members(
            s.iter()
                .map(|(e, f)| Member {
                    entity: *e,
                    facts: f.iter().copied().collect(),
                })
                .collect(),
        )),
    }
}

fn all_ids(kb: &KnowledgeBase) -> impl Iterator<Item = EntityId> {
    (0..kb.entities().len() as u32).map(EntityId)
}

fn is_subconcept(kb: &KnowledgeBase, c: ConceptId, target: &str) -> bool {
    let mut seen = BTreeSet::new();
    let mut todo = vec![c];
    while let Some(x) = todo.pop() {
        if !seen.insert(x) {
            continue;
        }
        let concept = &kb.concepts()[x.0 as usize];
        if normalize(&concept.name) == target {
            return true;
        }
        todo.extend(concept.parents.iter().copied());
    }
    false
}

fn parse_literal(step: usize, kind: ValueKind, text: &str) -> Result<TypedValue, ExecError> {
    TypedValue::parse_as(kind, text).ok_or_else(|| ExecError::LiteralParse {
        step,
        literal: text.to_string(),
        kind,
    })
}

fn satisfies(kind: ValueKind, v: &TypedValue, op: CmpOp, lit: &TypedValue) -> bool {
    let v = match (kind, v) {
        (ValueKind::Year, TypedValue::Date(d)) => TypedValue::Year(chrono::Datelike::year(d)),
        _ => v.clone(),
    };
    if v.kind() != kind {
        return false;
    }
    match v.compare(lit) {
        None => false,
        Some(o) => match op {
            CmpOp::Eq => o == Ordering::Equal,
            CmpOp::Ne => o != Ordering::Equal,
            CmpOp::Lt => o == Ordering::Less,
            CmpOp::Gt => o == Ordering::Greater,
        },
    }
}

fn string_eq(a: &str, b: &str) -> bool {
    normalize(a) == normalize(b)
}

fn first_attr_value(
    kb: &KnowledgeBase,
    e: EntityId,
    key: &str,
    pred: impl Fn(&TypedValue) -> bool,
) -> Option<TypedValue> {
    kb.entities()[e.0 as usize]
        .attributes
        .iter()
        .find(|a| normalize(&a.key) == key && pred(&a.value))
        .map(|a| a.value.clone())
}

fn qualifier_values(qs: &[Qualifier], qkey: &str) -> Vec<String> {
    qs.iter()
        .filter(|q| normalize(&q.key) == qkey)
        .map(|q| q.value.to_string())
        .collect()
}

fn step(kb: &KnowledgeBase, i: usize, s: &ProgramStep, inputs: &[Val]) -> Result<Val, ExecError> {
    use Function::*;
    let f = s.function();
    let arg = |k: usize| s.argument(k);
    let want_set = |v: &Val| -> Result<Set, ExecError> {
        match v {
            Val::Set(x) => Ok(x.clone()),
            Val::Text(_) => Err(ExecError::TypeMismatch {
                step: i,
                function: f,
                expected: "entity set",
            }),
        }
    };
    let want_text = |v: &Val| -> Result<String, ExecError> {
        match v {
            Val::Text(x) => Ok(x.clone()),
            Val::Set(_) => Err(ExecError::TypeMismatch {
                step: i,
                function: f,
                expected: "scalar",
            }),
        }
    };
    let op_at = |k: usize| CmpOp::parse(s.argument(k)).unwrap();
    let first = |set: &Set| set.keys().next().copied();

    Ok(match f {
        FindAll => Val::Set(all_ids(kb).map(|e| (e, BTreeSet::new())).collect()),
        Find => {
            let name = normalize(arg(0));
            Val::Set(
                all_ids(kb)
                    .filter(|e| normalize(&kb.entities()[e.0 as usize].name) == name)
                    .map(|e| (e, BTreeSet::new()))
                    .collect(),
            )
        }
        FilterConcept => {
            let input = want_set(&inputs[0])?;
            let target = normalize(arg(0));
            Val::Set(
                input
                    .into_iter()
                    .filter(|(e, _)| {
                        kb.entities()[e.0 as usize]
                            .concepts
                            .iter()
                            .any(|c| is_subconcept(kb, *c, &target))
                    })
                    .collect(),
            )
        }
        FilterStr | FilterNum | FilterYear | FilterDate => {
            let input = want_set(&inputs[0])?;
            let key = normalize(arg(0));
            let test: Box<dyn Fn(&TypedValue) -> bool> = if f == FilterStr {
                let want = arg(1).to_string();
                Box::new(move |v| matches!(v, TypedValue::String(x) if string_eq(x, &want)))
            } else {
                let kind = match f {
                    FilterNum => ValueKind::Quantity,
                    FilterYear => ValueKind::Year,
                    _ => ValueKind::Date,
                };
                let lit = parse_literal(i, kind, arg(1))?;
                let op = op_at(2);
                Box::new(move |v| satisfies(kind, v, op, &lit))
            };
            let mut out = Set::new();
            for (e, _) in input {
                for (j, a) in kb.entities()[e.0 as usize].attributes.iter().enumerate() {
                    if normalize(&a.key) == key && test(&a.value) {
                        out.entry(e).or_default().insert(FactRef::Attribute {
                            owner: e,
                            index: j as u32,
                        });
                    }
                }
            }
            Val::Set(out)
        }
        QFilterStr | QFilterNum | QFilterYear | QFilterDate => {
            let input = want_set(&inputs[0])?;
            let (kind, lit, op) = match f {
                QFilterStr => (
                    ValueKind::String,
                    TypedValue::String(arg(1).to_string()),
                    CmpOp::Eq,
                ),
                QFilterNum => (
                    ValueKind::Quantity,
                    parse_literal(i, ValueKind::Quantity, arg(1))?,
                    op_at(2),
                ),
                QFilterYear => (
                    ValueKind::Year,
                    parse_literal(i, ValueKind::Year, arg(1))?,
                    op_at(2),
                ),
                _ => (
                    ValueKind::Date,
                    parse_literal(i, ValueKind::Date, arg(1))?,
                    op_at(2),
                ),
            };
            if !input.is_empty() && input.values().all(BTreeSet::is_empty) {
                return Err(ExecError::MissingFacts { step: i });
            }
            let qkey = normalize(arg(0));
            let mut out = Set::new();
            for (e, facts) in input {
                for fr in facts {
                    let qs = match fr {
                        FactRef::Attribute { owner, index } => {
                            &kb.entities()[owner.0 as usize].attributes[index as usize].qualifiers
                        }
                        FactRef::Relation { owner, index } => {
                            &kb.entities()[owner.0 as usize].relations[index as usize].qualifiers
                        }
                    };
                    if qs
                        .iter()
                        .any(|q| normalize(&q.key) == qkey && satisfies(kind, &q.value, op, &lit))
                    {
                        out.entry(e).or_default().insert(fr);
                    }
                }
            }
            Val::Set(out)
        }
        Relate => {
            let input = want_set(&inputs[0])?;
            let pred = normalize(arg(0));
            let dir = Direction::parse(arg(1)).unwrap();
            let mut out = Set::new();
            for owner in all_ids(kb) {
                for (j, r) in kb.entities()[owner.0 as usize].relations.iter().enumerate() {
                    if normalize(&r.predicate) != pred {
                        continue;
                    }
                    let fr = FactRef::Relation {
                        owner,
                        index: j as u32,
                    };
                    // Read the edge as source -> target.
                    let (src, dst) = match r.direction {
                        Direction::Forward => (owner, r.object),
                        Direction::Backward => (r.object, owner),
                    };
                    let (from, to) = match dir {
                        Direction::Forward => (src, dst),
                        Direction::Backward => (dst, src),
                    };
                    // The fact must be reached from the entity that stores it
                    // or from the one it points at, never both ways.
                    let stored_here = from == owner && r.direction == dir;
                    let incoming = from == r.object && r.direction != dir;
                    if input.contains_key(&from) && (stored_here || incoming) {
                        out.entry(to).or_default().insert(fr);
                    }
                }
            }
            Val::Set(out)
        }
        And | Or => {
            let a = want_set(&inputs[0])?;
            let b = want_set(&inputs[1])?;
            let mut out = Set::new();
            let keys: BTreeSet<EntityId> = a.keys().chain(b.keys()).copied().collect();
            for e in keys {
                let both = a.contains_key(&e) && b.contains_key(&e);
                if f == Or || both {
                    let mut facts = a.get(&e).cloned().unwrap_or_default();
                    facts.extend(b.get(&e).into_iter().flatten().copied());
                    out.insert(e, facts);
                }
            }
            Val::Set(out)
        }
        QueryName => {
            let input = want_set(&inputs[0])?;
            Val::Text(
                first(&input)
                    .map(|e| kb.entities()[e.0 as usize].name.clone())
                    .unwrap_or_default(),
            )
        }
        Count => Val::Text(want_set(&inputs[0])?.len().to_string()),
        QueryAttr => {
            let input = want_set(&inputs[0])?;
            let key = normalize(arg(0));
            Val::Text(
                first(&input)
                    .and_then(|e| first_attr_value(kb, e, &key, |_| true))
                    .map(|v| v.to_string())
                    .unwrap_or_default(),
            )
        }
        QueryAttrUnderCondition => {
            let input = want_set(&inputs[0])?;
            let key = normalize(arg(0));
            let qkey = normalize(arg(1));
            let qvalue = arg(2);
            let mut found = String::new();
            if let Some(e) = first(&input) {
                for a in &kb.entities()[e.0 as usize].attributes {
                    let hit = a.qualifiers.iter().any(|q| {
                        normalize(&q.key) == qkey
                            && TypedValue::parse_as(q.value.kind(), qvalue)
                                .and_then(|lit| q.value.compare(&lit))
                                == Some(Ordering::Equal)
                    });
                    if normalize(&a.key) == key && hit {
                        found = a.value.to_string();
                        break;
                    }
                }
            }
            Val::Text(found)
        }
        QueryAttrQualifier => {
            let input = want_set(&inputs[0])?;
            let key = normalize(arg(0));
            let qkey = normalize(arg(2));
            let mut found = String::new();
            if let Some(e) = first(&input) {
                for a in &kb.entities()[e.0 as usize].attributes {
                    let value_hit = TypedValue::parse_as(a.value.kind(), arg(1))
                        .and_then(|lit| a.value.compare(&lit))
                        == Some(Ordering::Equal);
                    if normalize(&a.key) == key && value_hit {
                        if let Some(v) = qualifier_values(&a.qualifiers, &qkey).into_iter().next() {
                            found = v;
                            break;
                        }
                    }
                }
            }
            Val::Text(found)
        }
        QueryRelation | QueryRelationQualifier => {
            let a = want_set(&inputs[0])?;
            let b = want_set(&inputs[1])?;
            let mut found = String::new();
            if let (Some(ea), Some(eb)) = (first(&a), first(&b)) {
                let pred = (f == QueryRelationQualifier).then(|| normalize(arg(0)));
                let qkey = (f == QueryRelationQualifier).then(|| normalize(arg(1)));
                // Forward facts on `ea` first, then backward facts on `eb`.
                let candidates = [(ea, eb, Direction::Forward), (eb, ea, Direction::Backward)];
                'outer: for (owner, object, d) in candidates {
                    for r in &kb.entities()[owner.0 as usize].relations {
                        if r.object != object || r.direction != d {
                            continue;
                        }
                        if pred.as_ref().is_some_and(|p| normalize(&r.predicate) != *p) {
                            continue;
                        }
                        match &qkey {
                            None => {
                                found = r.predicate.clone();
                                break 'outer;
                            }
                            Some(k) => {
                                if let Some(v) =
                                    qualifier_values(&r.qualifiers, k).into_iter().next()
                                {
                                    found = v;
                                    break 'outer;
                                }
                            }
                        }
                    }
                }
            }
            Val::Text(found)
        }
        SelectBetween => {
            let a = want_set(&inputs[0])?;
            let b = want_set(&inputs[1])?;
            let key = normalize(arg(0));
            let orderable = |v: &TypedValue| v.kind() != ValueKind::String;
            let va =
                first(&a).and_then(|e| first_attr_value(kb, e, &key, orderable).map(|v| (e, v)));
            let vb =
                first(&b).and_then(|e| first_attr_value(kb, e, &key, orderable).map(|v| (e, v)));
            let winner = match (va, vb) {
                (Some((ea, x)), Some((eb, y))) => match x.compare(&y) {
                    None => None,
                    Some(Ordering::Equal) => Some(ea),
                    Some(Ordering::Greater) => Some(if arg(1) == "greater" { ea } else { eb }),
                    Some(Ordering::Less) => Some(if arg(1) == "greater" { eb } else { ea }),
                },
                (Some((e, _)), None) | (None, Some((e, _))) => Some(e),
                (None, None) => None,
            };
            Val::Text(
                winner
                    .map(|e| kb.entities()[e.0 as usize].name.clone())
                    .unwrap_or_default(),
            )
        }
        SelectAmong => {
            let input = want_set(&inputs[0])?;
            let key = normalize(arg(0));
            let want = if arg(1) == "largest" {
                Ordering::Greater
            } else {
                Ordering::Less
            };
            let mut best: Option<(EntityId, TypedValue)> = None;
            for e in input.keys() {
                let Some(v) = first_attr_value(kb, *e, &key, |v| v.kind() != ValueKind::String)
                else {
                    continue;
                };
                let better = match &best {
                    None => true,
                    Some((_, bv)) => v.compare(bv) == Some(want),
                };
                if better {
                    best = Some((*e, v));
                }
            }
            Val::Text(
                best.map(|(e, _)| kb.entities()[e.0 as usize].name.clone())
                    .unwrap_or_default(),
            )
        }
        VerifyStr => {
            let x = want_text(&inputs[0])?;
            Val::Text(yes_no(string_eq(&x, arg(0))))
        }
        VerifyNum | VerifyYear | VerifyDate => {
            let x = want_text(&inputs[0])?;
            let op = op_at(1);
            let read = |t: &str| -> Option<TypedValue> {
                match f {
                    VerifyNum => TypedValue::parse_as(ValueKind::Quantity, t),
                    VerifyDate => TypedValue::parse_as(ValueKind::Date, t),
                    _ => TypedValue::parse_as(ValueKind::Year, t).or_else(|| {
                        crate::value::parse_date(t)
                            .map(|d| TypedValue::Year(chrono::Datelike::year(&d)))
                    }),
                }
            };
            let ok = match (read(&x), read(arg(0))) {
                (Some(v), Some(lit)) => {
                    let kind = v.kind();
                    satisfies(kind, &v, op, &lit)
                }
                _ => false,
            };
            Val::Text(yes_no(ok))
        }
    })
}

fn yes_no(b: bool) -> String {
    if b { "yes" } else { "no" }.to_string()
}

/// Execute without alignment by exhaustive scanning.
pub fn brute_force_execute(kb: &KnowledgeBase, program: &Program) -> ExecutionTrace {
    let mut stack: Vec<Val> = Vec::new();
    let mut results = Vec::new();
    let mut status = TraceStatus::Ok;
    for (i, s) in program.steps().iter().enumerate() {
        let n = s.function().input_arity();
        let inputs = stack.split_off(stack.len() - n);
        match step(kb, i, s, &inputs) {
            Ok(v) => {
                results.push(to_result(&v));
                stack.push(v);
            }
            Err(error) => {
                status = TraceStatus::Failed { step: i, error };
                break;
            }
        }
    }
    ExecutionTrace {
        program: program.clone(),
        results,
        alignment: AlignmentReport::default(),
        status,
    }
}
