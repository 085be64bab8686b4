//! Execution contexts: a trace serialized as a step-by-step reasoning path,
//! and the question/context records built from it.
//!
//! Each step renders as `Fn <arg> a1 <arg> a2 <return> payload`, steps are
//! joined by ` <func> `. Entity payloads list at most
//! `max_entities_per_return` names; larger sets are sampled uniformly.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{ExecutionTrace, StepResult, VALUE_SEPARATOR};
use crate::kb::KnowledgeBase;
use crate::program::{
    self, Program, ProgramError, ARG_TOKEN, FUNC_TOKEN, MASK_TOKEN, RETURN_TOKEN,
};
use crate::text::normalize;

pub const DEFAULT_MAX_ENTITIES: usize = 5;
pub const DEFAULT_MASK_PROBABILITY: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextConfig {
    pub max_entities_per_return: usize,
    pub mask_probability: f64,
    pub rng_seed: u64,
    pub mask_token: String,
}

impl Default for ContextConfig {
    fn default() -> Self {
        ContextConfig {
            max_entities_per_return: DEFAULT_MAX_ENTITIES,
            mask_probability: DEFAULT_MASK_PROBABILITY,
            rng_seed: 0,
            mask_token: MASK_TOKEN.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("mask probability must lie in [0, 1], got {0}")]
    Probability(f64),
    #[error("mask token must be non-empty and free of program tokens, got {0:?}")]
    MaskToken(String),
}

impl ContextConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.mask_probability) {
            return Err(ConfigError::Probability(self.mask_probability));
        }
        let token = self.mask_token.trim();
        if token.is_empty()
            || [FUNC_TOKEN, ARG_TOKEN, RETURN_TOKEN]
                .iter()
                .any(|t| token.contains(t))
        {
            return Err(ConfigError::MaskToken(self.mask_token.clone()));
        }
        Ok(())
    }
}

/// One refinement example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextRecord {
    pub question: String,
    pub context: String,
    pub input: String,
    pub answer: String,
    pub masked: bool,
}

/// Deterministic generator for the record at `index` of a batch seeded with
/// `seed`. Independent of processing order.
pub fn record_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn payload<R: Rng + ?Sized>(
    kb: &KnowledgeBase,
    result: &StepResult,
    cap: usize,
    rng: &mut R,
) -> String {
    match result {
        StepResult::Scalar(s) => s.clone(),
        StepResult::Entities(set) => {
            let ids: Vec<_> = set.ids().collect();
            let chosen: Vec<_> = if ids.len() > cap {
                let mut picks = sample(rng, ids.len(), cap).into_vec();
                picks.sort_unstable();
                picks.into_iter().map(|i| ids[i]).collect()
            } else {
                ids
            };
            chosen
                .into_iter()
                .map(|e| kb.name(e))
                .collect::<Vec<_>>()
                .join(VALUE_SEPARATOR)
        }
    }
}

fn render(
    kb: &KnowledgeBase,
    trace: &ExecutionTrace,
    cfg: &ContextConfig,
    mask: bool,
    rng: &mut impl Rng,
) -> String {
    let steps = trace.program.steps();
    let mut out = String::new();
    for (i, step) in steps.iter().enumerate() {
        if i > 0 {
            out.push(' ');
            out.push_str(FUNC_TOKEN);
            out.push(' ');
        }
        program::write_step(&mut out, step);
        out.push(' ');
        out.push_str(RETURN_TOKEN);
        let text = if mask && i + 1 == steps.len() {
            cfg.mask_token.clone()
        } else {
            trace
                .results
                .get(i)
                .map(|r| payload(kb, r, cfg.max_entities_per_return, rng))
                .unwrap_or_default()
        };
        if !text.is_empty() {
            out.push(' ');
            out.push_str(&text);
        }
    }
    out
}

/// Serialize a trace. Steps after a failure keep their slot with an empty
/// payload, so the segment count always equals the step count.
pub fn build_context<R: Rng>(
    kb: &KnowledgeBase,
    trace: &ExecutionTrace,
    cfg: &ContextConfig,
    rng: &mut R,
) -> String {
    render(kb, trace, cfg, false, rng)
}

pub fn render_input(question: &str, context: &str) -> String {
    format!("Question: {question}\nContext: {context}\nThe answer is: ")
}

/// A training example. The mask is drawn before any sampling, from the
/// record's own generator.
pub fn build_training_record(
    kb: &KnowledgeBase,
    question: &str,
    trace: &ExecutionTrace,
    gold_answer: &str,
    cfg: &ContextConfig,
    record_index: u64,
) -> ContextRecord {
    let mut rng = record_rng(cfg.rng_seed, record_index);
    let masked = !trace.program.is_empty() && rng.random_bool(cfg.mask_probability);
    let context = render(kb, trace, cfg, masked, &mut rng);
    ContextRecord {
        question: question.to_string(),
        input: render_input(question, &context),
        context,
        answer: gold_answer.to_string(),
        masked,
    }
}

/// An inference input: never masked, no answer. Sampling uses a generator
/// seeded from the config alone, so the output depends only on the inputs.
pub fn build_inference_record(
    kb: &KnowledgeBase,
    question: &str,
    trace: &ExecutionTrace,
    cfg: &ContextConfig,
) -> ContextRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let context = build_context(kb, trace, cfg, &mut rng);
    ContextRecord {
        question: question.to_string(),
        input: render_input(question, &context),
        context,
        answer: String::new(),
        masked: false,
    }
}

/// Whether the gold answer can be read off the question or context.
/// Yes/no answers always count.
pub fn answer_in_context(record: &ContextRecord, gold_answer: &str) -> bool {
    let gold = normalize(gold_answer);
    if gold == "yes" || gold == "no" {
        return true;
    }
    if gold.is_empty() {
        return false;
    }
    normalize(&format!("{} {}", record.question, record.context)).contains(&gold)
}

/// The payload of every step, in order.
pub fn return_payloads(context: &str) -> Vec<&str> {
    context
        .split(FUNC_TOKEN)
        .filter_map(|seg| seg.split_once(RETURN_TOKEN).map(|(_, p)| p.trim()))
        .collect()
}

/// Re-parse the function/argument skeleton of a context, ignoring payloads.
pub fn context_skeleton(context: &str) -> Result<Program, ProgramError> {
    let text = context
        .split(FUNC_TOKEN)
        .map(|seg| {
            seg.split_once(RETURN_TOKEN)
                .map_or(seg, |(head, _)| head)
                .trim()
        })
        .collect::<Vec<_>>()
        .join(&format!(" {FUNC_TOKEN} "));
    program::parse_program(&text)
}
