//! Program execution over a knowledge base.
//!
//! [`execute`] runs a program step by step under stack semantics, optionally
//! aligning each step's arguments against its working entities first, and
//! records every intermediate result. Empty entity sets propagate; only type
//! mismatches, unparseable filter literals and qualifier filters without
//! matched facts stop a run, and those are recorded in the trace status.

mod eval;
pub mod reference;

use std::fmt;

use thiserror::Error;

use crate::align::{align_step, AlignmentReport, WorkingSet};
use crate::kb::{EntityId, FactRef, KnowledgeBase};
use crate::program::{Function, Program};
use crate::value::ValueKind;

pub use reference::brute_force_execute;

/// Separator between entity names or joined scalar values.
pub const VALUE_SEPARATOR: &str = " | ";

/// An entity in a result set with the facts it was matched through.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Member {
    pub entity: EntityId,
    /// Sorted, deduplicated.
    pub facts: Vec<FactRef>,
}

/// Entities ordered by id (knowledge-base load order), each at most once.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EntitySet {
    members: Vec<Member>,
}

impl EntitySet {
    /// Normalizes order and merges duplicate entities.
    pub fn from_members(mut members: Vec<Member>) -> Self {
        members.sort_by_key(|m| m.entity);
        let mut out: Vec<Member> = Vec::with_capacity(members.len());
        for m in members {
            match out.last_mut() {
                Some(last) if last.entity == m.entity => last.facts.extend(m.facts),
                _ => out.push(m),
            }
        }
        for m in &mut out {
            m.facts.sort();
            m.facts.dedup();
        }
        EntitySet { members: out }
    }

    pub fn from_ids(ids: impl IntoIterator<Item = EntityId>) -> Self {
        Self::from_members(
            ids.into_iter()
                .map(|entity| Member {
                    entity,
                    facts: Vec::new(),
                })
                .collect(),
        )
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn ids(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.members.iter().map(|m| m.entity)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn first(&self) -> Option<&Member> {
        self.members.first()
    }

    pub fn get(&self, id: EntityId) -> Option<&Member> {
        self.members
            .binary_search_by_key(&id, |m| m.entity)
            .ok()
            .map(|i| &self.members[i])
    }

    pub fn has_facts(&self) -> bool {
        self.members.iter().any(|m| !m.facts.is_empty())
    }
}

/// Output of one step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepResult {
    Entities(EntitySet),
    /// Names, counts, verdicts and attribute values in canonical text form.
    Scalar(String),
}

impl StepResult {
    pub fn entities(&self) -> Option<&EntitySet> {
        match self {
            StepResult::Entities(s) => Some(s),
            StepResult::Scalar(_) => None,
        }
    }

    pub fn scalar(&self) -> Option<&str> {
        match self {
            StepResult::Scalar(s) => Some(s),
            StepResult::Entities(_) => None,
        }
    }

    /// Full rendering: every entity name, or the scalar text.
    pub fn render(&self, kb: &KnowledgeBase) -> String {
        match self {
            StepResult::Scalar(s) => s.clone(),
            StepResult::Entities(set) => set
                .ids()
                .map(|e| kb.name(e))
                .collect::<Vec<_>>()
                .join(VALUE_SEPARATOR),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("step {step}: {function} expects {expected} input")]
    TypeMismatch {
        step: usize,
        function: Function,
        expected: &'static str,
    },
    #[error("step {step}: cannot read {literal:?} as a {kind} literal")]
    LiteralParse {
        step: usize,
        literal: String,
        kind: ValueKind,
    },
    #[error("step {step}: qualifier filter input carries no matched facts")]
    MissingFacts { step: usize },
}

impl ExecError {
    pub fn step(&self) -> usize {
        match self {
            ExecError::TypeMismatch { step, .. }
            | ExecError::LiteralParse { step, .. }
            | ExecError::MissingFacts { step } => *step,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceStatus {
    Ok,
    Failed { step: usize, error: ExecError },
}

impl fmt::Display for TraceStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceStatus::Ok => f.write_str("ok"),
            TraceStatus::Failed { error, .. } => write!(f, "failed: {error}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionTrace {
    /// The program as executed, i.e. after alignment.
    pub program: Program,
    /// One result per executed step; stops short of a failing step.
    pub results: Vec<StepResult>,
    pub alignment: AlignmentReport,
    pub status: TraceStatus,
}

impl ExecutionTrace {
    pub fn is_ok(&self) -> bool {
        self.status == TraceStatus::Ok
    }

    pub fn final_result(&self) -> Option<&StepResult> {
        if self.is_ok() {
            self.results.last()
        } else {
            None
        }
    }

    /// The final answer text; empty when the run failed or found nothing.
    pub fn answer(&self, kb: &KnowledgeBase) -> String {
        self.final_result()
            .map(|r| r.render(kb))
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExecOptions {
    pub align: bool,
    /// Query functions report values of every input entity joined by
    /// `" | "` instead of only the first entity's.
    pub join_all: bool,
    /// Keep candidate pools in the alignment report.
    pub keep_pools: bool,
}

pub fn execute(kb: &KnowledgeBase, program: &Program, align: bool) -> ExecutionTrace {
    execute_with(
        kb,
        program,
        &ExecOptions {
            align,
            ..ExecOptions::default()
        },
    )
}

/// A stack entry: the result plus, for attribute queries, the facts read.
#[derive(Debug, Clone)]
struct Slot {
    result: StepResult,
    origin: Vec<FactRef>,
}

fn working_set(inputs: &[Slot]) -> WorkingSet {
    let mut entities = Vec::new();
    let mut facts = Vec::new();
    for slot in inputs {
        match &slot.result {
            StepResult::Entities(set) => {
                for m in set.members() {
                    entities.push(m.entity);
                    facts.extend_from_slice(&m.facts);
                }
            }
            StepResult::Scalar(_) => {
                entities.extend(slot.origin.iter().map(|f| f.owner()));
                facts.extend_from_slice(&slot.origin);
            }
        }
    }
    entities.sort();
    entities.dedup();
    facts.sort();
    facts.dedup();
    WorkingSet { entities, facts }
}

pub fn execute_with(kb: &KnowledgeBase, program: &Program, opts: &ExecOptions) -> ExecutionTrace {
    let mut steps = program.steps().to_vec();
    let mut stack: Vec<Slot> = Vec::new();
    let mut results = Vec::with_capacity(steps.len());
    let mut alignment = AlignmentReport::default();
    let mut status = TraceStatus::Ok;

    for (i, step) in steps.iter_mut().enumerate() {
        let arity = step.function().input_arity();
        let inputs = stack.split_off(stack.len() - arity);
        if opts.align && !step.arguments().is_empty() {
            let working = working_set(&inputs);
            let (aligned, records) = align_step(kb, step, i, &working, opts.keep_pools);
            *step = aligned;
            alignment.records.extend(records);
        }
        match eval::eval_step(kb, i, step, &inputs, opts.join_all) {
            Ok((result, origin)) => {
                results.push(result.clone());
                stack.push(Slot { result, origin });
            }
            Err(error) => {
                status = TraceStatus::Failed {
                    step: error.step(),
                    error,
                };
                break;
            }
        }
    }

    ExecutionTrace {
        program: Program::from_validated(steps),
        results,
        alignment,
        status,
    }
}
