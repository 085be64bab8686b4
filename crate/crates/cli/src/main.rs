//! `kopl`: validate knowledge bases, run programs, build context datasets
//! and measure answer recall.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use kopl_core::context::{build_inference_record, ContextConfig, DEFAULT_MASK_PROBABILITY};
use kopl_core::dataset::load_dataset;
use kopl_core::exec::{execute_with, ExecOptions};
use kopl_core::pipeline::{answers_match, process_record, recall, Mode, RecordStatus};
use kopl_core::{parse_program, KnowledgeBase};

#[derive(Parser)]
#[command(
    name = "kopl",
    version,
    about = "Execute KoPL programs over a knowledge base"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct KbArg {
    /// Knowledge-base JSON file.
    #[arg(long, env = "KOPL_KB")]
    kb: PathBuf,
}

#[derive(Args)]
struct ContextArgs {
    /// Seed for entity sampling and masking.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Most entity names listed per `<return>` segment.
    #[arg(long, default_value_t = 5)]
    max_entities: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Train,
    Infer,
}

#[derive(Subcommand)]
enum Command {
    /// Load a knowledge base and report its size and integrity.
    Validate {
        #[command(flatten)]
        kb: KbArg,
    },
    /// Execute one linearized program and print its answer.
    Run {
        #[command(flatten)]
        kb: KbArg,
        /// Program text (`Fn <arg> a <func> ...`); `-` reads standard input.
        program: String,
        /// Repair arguments against the knowledge base before each step.
        #[arg(long, value_enum, default_value = "on")]
        align: Switch,
        /// Print the execution context, and the alignment table on stderr.
        #[arg(long)]
        trace: bool,
        /// Query functions report every input entity's values.
        #[arg(long)]
        join_all: bool,
        #[command(flatten)]
        context: ContextArgs,
    },
    /// Build context records for every record of a dataset.
    Batch {
        #[command(flatten)]
        kb: KbArg,
        /// Dataset: JSON array or JSON lines.
        dataset: PathBuf,
        /// Output JSON-lines file.
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MASK_PROBABILITY, value_parser = probability)]
        mask_prob: f64,
        #[arg(long, value_enum, default_value = "train")]
        mode: ModeArg,
        #[command(flatten)]
        context: ContextArgs,
    },
    /// Fraction of gold answers reached by execution and present in contexts.
    Recall {
        #[command(flatten)]
        kb: KbArg,
        dataset: PathBuf,
        #[command(flatten)]
        context: ContextArgs,
    },
}

fn probability(s: &str) -> Result<f64, String> {
    let p: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(format!("{p} is not in [0, 1]"))
    }
}

fn load_kb(arg: &KbArg) -> Result<KnowledgeBase> {
    KnowledgeBase::load(&arg.kb).with_context(|| format!("loading {}", arg.kb.display()))
}

fn config(args: &ContextArgs, mask_probability: f64) -> ContextConfig {
    ContextConfig {
        max_entities_per_return: args.max_entities,
        mask_probability,
        rng_seed: args.seed,
        ..ContextConfig::default()
    }
}

fn validate(kb: &KbArg) -> Result<ExitCode> {
    let stats = load_kb(kb)?.stats();
    println!(
        "{} entities, {} concepts, {} facts, ok",
        stats.entities,
        stats.concepts,
        stats.facts()
    );
    Ok(ExitCode::SUCCESS)
}

fn run(
    kb: &KbArg,
    program: &str,
    align: Switch,
    trace: bool,
    join_all: bool,
    context: &ContextArgs,
) -> Result<ExitCode> {
    let kb = load_kb(kb)?;
    let text = if program == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        s
    } else {
        program.to_string()
    };
    let program = parse_program(text.trim()).context("parsing program")?;
    let opts = ExecOptions {
        align: matches!(align, Switch::On),
        join_all,
        keep_pools: false,
    };
    let result = execute_with(&kb, &program, &opts);
    if trace {
        let cfg = config(context, 0.0);
        eprint!("{}", result.alignment.to_table());
        println!("{}", build_inference_record(&kb, "", &result, &cfg).context);
    }
    println!("{}", result.answer(&kb));
    if !result.is_ok() {
        bail!("execution {}", result.status);
    }
    Ok(ExitCode::SUCCESS)
}

fn batch(
    kb: &KbArg,
    dataset: &PathBuf,
    out: &PathBuf,
    mask_prob: f64,
    mode: ModeArg,
    context: &ContextArgs,
) -> Result<ExitCode> {
    let kb = load_kb(kb)?;
    let records = load_dataset(dataset)?;
    let cfg = config(context, mask_prob);
    let mode = match mode {
        ModeArg::Train => Mode::Train,
        ModeArg::Infer => Mode::Infer,
    };
    let processed: Vec<_> = records
        .par_iter()
        .enumerate()
        .map(|(i, rec)| process_record(&kb, rec, i as u64, &cfg, mode))
        .collect();

    let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    let mut w = BufWriter::new(file);
    let (mut masked, mut program_errors, mut failures, mut scored, mut correct) = (0, 0, 0, 0, 0);
    for (i, (p, rec)) in processed.iter().zip(&records).enumerate() {
        serde_json::to_writer(&mut w, &p.record)?;
        w.write_all(b"\n")?;
        masked += p.record.masked as usize;
        match &p.status {
            RecordStatus::Ok => {}
            RecordStatus::ProgramError(e) => {
                program_errors += 1;
                eprintln!("record {i}: program error: {e}");
            }
            RecordStatus::ExecutionFailed(e) => {
                failures += 1;
                eprintln!("record {i}: {e}");
            }
        }
        if let Some(gold) = &rec.answer {
            scored += 1;
            correct += answers_match(&p.predicted, gold) as usize;
        }
    }
    w.flush()?;

    let n = records.len();
    println!("records: {n}");
    println!("program errors: {program_errors}");
    println!("execution failures: {failures}");
    println!("masked: {masked} ({:.4})", rate(masked, n));
    if scored > 0 {
        println!(
            "executed-answer accuracy: {:.4} ({correct}/{scored})",
            rate(correct, scored)
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn rate(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

fn recall_cmd(kb: &KbArg, dataset: &PathBuf, context: &ContextArgs) -> Result<ExitCode> {
    let kb = load_kb(kb)?;
    let records = load_dataset(dataset)?;
    let r = recall(&kb, &records, &config(context, 0.0))?;
    println!(
        "executed answer recall: {:.4} ({}/{})",
        r.execution_recall(),
        r.executed_correct,
        r.scored
    );
    println!(
        "question+context recall: {:.4} ({}/{})",
        r.context_recall(),
        r.in_context,
        r.scored
    );
    Ok(ExitCode::SUCCESS)
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Validate { kb } => validate(kb),
        Command::Run {
            kb,
            program,
            align,
            trace,
            join_all,
            context,
        } => run(kb, program, *align, *trace, *join_all, context),
        Command::Batch {
            kb,
            dataset,
            out,
            mask_prob,
            mode,
            context,
        } => batch(kb, dataset, out, *mask_prob, *mode, context),
        Command::Recall {
            kb,
            dataset,
            context,
        } => recall_cmd(kb, dataset, context),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
