//! Per-record processing shared by the batch and recall commands: execute a
//! dataset record with alignment, build its context record, and score it.

use serde::Serialize;
use thiserror::Error;

use crate::context::{
    answer_in_context, build_inference_record, build_training_record, render_input, ContextConfig,
    ContextRecord,
};
use crate::dataset::DatasetRecord;
use crate::exec::execute;
use crate::kb::KnowledgeBase;
use crate::text::normalize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Gold answers as targets, final payload masked at random.
    Train,
    /// Never masked, no target.
    Infer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", content = "detail", rename_all = "snake_case")]
pub enum RecordStatus {
    Ok,
    ProgramError(String),
    ExecutionFailed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Processed {
    pub record: ContextRecord,
    /// The executed answer; empty when nothing executed.
    pub predicted: String,
    pub status: RecordStatus,
}

/// Answers agree when their normalized forms are equal.
pub fn answers_match(predicted: &str, gold: &str) -> bool {
    normalize(predicted) == normalize(gold)
}

/// Execute one record (aligned) and build its context record. A program
/// that failed to parse yields an empty context.
pub fn process_record(
    kb: &KnowledgeBase,
    rec: &DatasetRecord,
    index: u64,
    cfg: &ContextConfig,
    mode: Mode,
) -> Processed {
    let gold = rec.answer.as_deref().unwrap_or("");
    let program = match &rec.program {
        Ok(p) => p,
        Err(e) => {
            return Processed {
                record: ContextRecord {
                    question: rec.question.clone(),
                    context: String::new(),
                    input: render_input(&rec.question, ""),
                    answer: if mode == Mode::Train {
                        gold.to_string()
                    } else {
                        String::new()
                    },
                    masked: false,
                },
                predicted: String::new(),
                status: RecordStatus::ProgramError(e.to_string()),
            }
        }
    };
    let trace = execute(kb, program, true);
    let record = match mode {
        Mode::Train => build_training_record(kb, &rec.question, &trace, gold, cfg, index),
        Mode::Infer => build_inference_record(kb, &rec.question, &trace, cfg),
    };
    let status = if trace.is_ok() {
        RecordStatus::Ok
    } else {
        RecordStatus::ExecutionFailed(trace.status.to_string())
    };
    Processed {
        record,
        predicted: trace.answer(kb),
        status,
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RecallError {
    #[error("dataset is empty")]
    Empty,
    #[error("no record carries a gold answer")]
    NoGold,
}

/// Both recall figures over the records that carry a gold answer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RecallReport {
    pub records: usize,
    pub scored: usize,
    /// Executed answer equals gold.
    pub executed_correct: usize,
    /// Gold answer readable from question plus context.
    pub in_context: usize,
}

impl RecallReport {
    pub fn execution_recall(&self) -> f64 {
        ratio(self.executed_correct, self.scored)
    }

    pub fn context_recall(&self) -> f64 {
        ratio(self.in_context, self.scored)
    }

    pub fn add(&mut self, processed: &Processed, gold: Option<&str>) {
        self.records += 1;
        let Some(gold) = gold else { return };
        self.scored += 1;
        self.executed_correct += answers_match(&processed.predicted, gold) as usize;
        self.in_context += answer_in_context(&processed.record, gold) as usize;
    }
}

fn ratio(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

pub fn recall(
    kb: &KnowledgeBase,
    records: &[DatasetRecord],
    cfg: &ContextConfig,
) -> Result<RecallReport, RecallError> {
    if records.is_empty() {
        return Err(RecallError::Empty);
    }
    let mut report = RecallReport::default();
    for (i, rec) in records.iter().enumerate() {
        let processed = process_record(kb, rec, i as u64, cfg, Mode::Infer);
        report.add(&processed, rec.answer.as_deref());
    }
    if report.scored == 0 {
        return Err(RecallError::NoGold);
    }
    Ok(report)
}
