//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any attainable criterion fails.
//!
//! Run with `cargo test -p kopl-core --test acceptance`.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use kopl_core::align::{AlignFlag, PoolKind};
use kopl_core::context::{
    build_context, build_training_record, record_rng, return_payloads, ContextConfig,
};
use kopl_core::dataset::load_dataset;
use kopl_core::exec::{
    brute_force_execute, execute, execute_with, ExecOptions, ExecutionTrace, StepResult,
};
use kopl_core::kb::random::random_kb;
use kopl_core::kb::KnowledgeBase;
use kopl_core::pipeline::answers_match;
use kopl_core::program::random::ProgramSampler;
use kopl_core::program::{parse_program, print_program, Program};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const ROUND_TRIP_PROGRAMS: usize = 10_000;
const ROUND_TRIP_BUDGET: Duration = Duration::from_secs(10);
const ORACLE_KBS: u64 = 20;
const ORACLE_PROGRAMS_PER_KB: u64 = 500;
const ORACLE_KB_SIZE: usize = 50;
const ORACLE_BUDGET: Duration = Duration::from_secs(60);
const MAX_STEPS: usize = 10;
const SEGMENT_CAP: usize = 5;
const MASK_RECORDS: u64 = 10_000;
const MASK_PROBABILITY: f64 = 0.6;
const MASK_BAND: (f64, f64) = (0.58, 0.62);
const MASK_SEED: u64 = 2024;
const SMOKE_SAMPLE: usize = 500;

struct Outcome {
    name: &'static str,
    status: Status,
    detail: String,
}

enum Status {
    Pass,
    Fail,
    Skip,
    /// Cannot be measured with what ships here; reported, not gated.
    Unattainable,
}

fn fixture_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/fixture_a.json")
}

fn check(name: &'static str, ok: bool, detail: String) -> Outcome {
    Outcome {
        name,
        status: if ok { Status::Pass } else { Status::Fail },
        detail,
    }
}

/// The random corpus shared by the oracle, alignment and context criteria.
fn corpus() -> Vec<(KnowledgeBase, Vec<Program>)> {
    (0..ORACLE_KBS)
        .map(|k| {
            let kb = random_kb(1000 + k, ORACLE_KB_SIZE);
            let sampler = ProgramSampler::new(&kb);
            let programs = (0..ORACLE_PROGRAMS_PER_KB)
                .map(|i| sampler.sample(k * 1_000_000 + i, MAX_STEPS))
                .collect();
            (kb, programs)
        })
        .collect()
}

fn round_trip() -> Outcome {
    let kbs: Vec<_> = (0..10).map(|s| random_kb(s, 40)).collect();
    let samplers: Vec<_> = kbs.iter().map(ProgramSampler::new).collect();
    let start = Instant::now();
    let mut mismatches = 0;
    for i in 0..ROUND_TRIP_PROGRAMS {
        let p = samplers[i % samplers.len()].sample(i as u64, MAX_STEPS);
        let text = print_program(&p);
        if parse_program(&text).as_ref() != Ok(&p) {
            mismatches += 1;
        }
    }
    let took = start.elapsed();
    check(
        "round-trip",
        mismatches == 0 && took < ROUND_TRIP_BUDGET,
        format!("{ROUND_TRIP_PROGRAMS} programs, {mismatches} mismatches, {took:.2?} (budget {ROUND_TRIP_BUDGET:?})"),
    )
}

fn oracle(corpus: &[(KnowledgeBase, Vec<Program>)]) -> Outcome {
    let start = Instant::now();
    let mut mismatches = 0;
    let mut total = 0;
    for (kb, programs) in corpus {
        for p in programs {
            total += 1;
            if execute(kb, p, false) != brute_force_execute(kb, p) {
                mismatches += 1;
            }
        }
    }
    let took = start.elapsed();
    check(
        "oracle-equivalence",
        mismatches == 0 && took < ORACLE_BUDGET,
        format!("{total} traces, {mismatches} mismatches, {took:.2?} (budget {ORACLE_BUDGET:?})"),
    )
}

/// Word tokens, written independently of the library: lowercase, split on
/// anything that is not a letter or digit.
fn tokens(s: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut cur = String::new();
    for ch in s.chars() {
        if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase());
        } else if !cur.is_empty() {
            out.insert(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.insert(cur);
    }
    out
}

/// Jaccard as an unreduced (intersection, union) pair.
fn jaccard_pair(a: &str, b: &str) -> (u64, u64) {
    let (x, y) = (tokens(a), tokens(b));
    if x.is_empty() && y.is_empty() {
        return (1, 1);
    }
    (
        x.intersection(&y).count() as u64,
        x.union(&y).count() as u64,
    )
}

fn frac_cmp(a: (u64, u64), b: (u64, u64)) -> std::cmp::Ordering {
    (a.0 * b.1).cmp(&(b.0 * a.1))
}

fn squash(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

fn alignment(corpus: &[(KnowledgeBase, Vec<Program>)]) -> Outcome {
    let opts = ExecOptions {
        align: true,
        keep_pools: true,
        ..ExecOptions::default()
    };
    let (mut checked, mut changed, mut violations) = (0usize, 0usize, Vec::new());
    for (kb, programs) in corpus {
        for p in programs {
            let trace = execute_with(kb, p, &opts);
            for r in &trace.alignment.records {
                if r.pool_kind == PoolKind::None {
                    continue;
                }
                checked += 1;
                let pool = r.pool.clone().unwrap_or_default();
                let best = pool
                    .iter()
                    .map(|c| jaccard_pair(&r.original, c))
                    .max_by(|a, b| frac_cmp(*a, *b));
                let in_pool = pool.iter().any(|c| squash(c) == squash(&r.original));
                let ok = if r.changed {
                    changed += 1;
                    let best = best.expect("a changed argument has a pool");
                    let mine = jaccard_pair(&r.original, &r.aligned);
                    let smallest_best = pool
                        .iter()
                        .filter(|c| frac_cmp(jaccard_pair(&r.original, c), best).is_eq())
                        .min();
                    pool.contains(&r.aligned)
                        && frac_cmp(mine, best).is_eq()
                        && best.0 > 0
                        && smallest_best == Some(&r.aligned)
                        && trace.program.steps()[r.step].argument(r.argument) == r.aligned
                } else {
                    let zero = best.is_none_or(|b| b.0 == 0);
                    r.aligned == r.original
                        && (in_pool || zero)
                        && (r.flag != Some(AlignFlag::EmptyPool) || pool.is_empty())
                };
                if !ok && violations.len() < 3 {
                    violations.push(format!("{r:?}"));
                }
            }
        }
    }
    check(
        "alignment-identity-membership",
        violations.is_empty() && changed > 0,
        format!(
            "{checked} arguments checked by exhaustive pool scan, {changed} repaired, violations: {violations:?}"
        ),
    )
}

fn worked_example() -> Outcome {
    let kb = KnowledgeBase::load(fixture_path()).expect("fixture loads");
    let p = parse_program(
        "Find <arg> Quincy <func> Relate <arg> location of birth <arg> backward <func> QueryName",
    )
    .expect("program parses");
    let off = execute(&kb, &p, false).answer(&kb);
    let on = execute(&kb, &p, true).answer(&kb);
    check(
        "worked-example",
        off.is_empty() && on == "John Quincy Adams",
        format!("align off -> {off:?}, align on -> {on:?}"),
    )
}

fn jaccard_spots() -> Outcome {
    // By hand: {official, name} vs {nick, name} share 1 of 3 words;
    // {location, of, birth} vs {place, of, birth} share 2 of 4.
    let cases = [
        ("official name", "nick name", (1u64, 3u64)),
        ("location of birth", "place of birth", (1, 2)),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for (a, b, want) in cases {
        let lib = kopl_core::align::jaccard(a, b);
        let lib = (*lib.numer() as u64, *lib.denom() as u64);
        let ind = jaccard_pair(a, b);
        ok &= lib == want && frac_cmp(ind, want).is_eq();
        detail.push(format!("J({a:?}, {b:?}) = {}/{}", lib.0, lib.1));
    }
    check("jaccard-spot-values", ok, detail.join(", "))
}

fn context_format(corpus: &[(KnowledgeBase, Vec<Program>)]) -> Outcome {
    let cfg = ContextConfig::default();
    let (mut traces, mut capped, mut bad) = (0usize, 0usize, 0usize);
    for (k, (kb, programs)) in corpus.iter().enumerate() {
        for (i, p) in programs.iter().enumerate() {
            let trace: ExecutionTrace = execute(kb, p, true);
            let ctx = build_context(kb, &trace, &cfg, &mut record_rng(k as u64, i as u64));
            traces += 1;
            let payloads = return_payloads(&ctx);
            let returns = ctx.matches("<return>").count();
            let mut ok = returns == p.len() && payloads.len() == p.len();
            for (j, payload) in payloads.iter().enumerate() {
                let n = if payload.is_empty() {
                    0
                } else {
                    payload.split(" | ").count()
                };
                ok &= n <= SEGMENT_CAP;
                if let Some(StepResult::Entities(s)) = trace.results.get(j) {
                    if s.len() > SEGMENT_CAP {
                        capped += 1;
                        ok &= n == SEGMENT_CAP;
                    }
                }
            }
            bad += !ok as usize;
        }
    }
    check(
        "context-format",
        bad == 0 && capped > 0,
        format!(
            "{traces} contexts, {capped} segments sampled down to {SEGMENT_CAP}, {bad} malformed"
        ),
    )
}

fn mask_statistics() -> Outcome {
    let kb = KnowledgeBase::load(fixture_path()).expect("fixture loads");
    let p = parse_program("FindAll <func> Count").unwrap();
    let trace = execute(&kb, &p, true);
    let cfg = ContextConfig {
        mask_probability: MASK_PROBABILITY,
        rng_seed: MASK_SEED,
        ..ContextConfig::default()
    };
    let masked = (0..MASK_RECORDS)
        .filter(|&i| build_training_record(&kb, "q", &trace, "3", &cfg, i).masked)
        .count();
    let rate = masked as f64 / MASK_RECORDS as f64;
    check(
        "mask-statistics",
        (MASK_BAND.0..=MASK_BAND.1).contains(&rate),
        format!("{masked}/{MASK_RECORDS} masked = {rate:.4} at p={MASK_PROBABILITY}, band {MASK_BAND:?}"),
    )
}

/// Gold programs on real data. Needs `KOPL_KQA_DIR` pointing at a directory
/// with `kb.json` and `train.json`.
fn dataset_smoke() -> Outcome {
    let name = "dataset-smoke";
    let Some(dir) = std::env::var_os("KOPL_KQA_DIR").map(PathBuf::from) else {
        return Outcome {
            name,
            status: Status::Skip,
            detail: "KOPL_KQA_DIR not set".into(),
        };
    };
    let kb = match KnowledgeBase::load(dir.join("kb.json")) {
        Ok(kb) => kb,
        Err(e) => return check(name, false, format!("knowledge base: {e}")),
    };
    let records = match load_dataset(dir.join("train.json")) {
        Ok(r) => r,
        Err(e) => return check(name, false, format!("dataset: {e}")),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let picks = sample(&mut rng, records.len(), SMOKE_SAMPLE.min(records.len()));
    let (mut correct, mut parsed) = (0, 0);
    for i in picks.iter() {
        let rec = &records[i];
        let (Ok(p), Some(gold)) = (&rec.program, &rec.answer) else {
            continue;
        };
        parsed += 1;
        correct += answers_match(&execute(&kb, p, true).answer(&kb), gold) as usize;
    }
    // No bar is set: report the rate.
    Outcome {
        name,
        status: Status::Pass,
        detail: format!(
            "{correct}/{} sampled gold programs reach the gold answer ({parsed} parsed)",
            picks.len()
        ),
    }
}

fn main() {
    let corpus = corpus();
    let outcomes = vec![
        round_trip(),
        oracle(&corpus),
        alignment(&corpus),
        worked_example(),
        jaccard_spots(),
        context_format(&corpus),
        mask_statistics(),
        dataset_smoke(),
        Outcome {
            name: "model-accuracy",
            status: Status::Unattainable,
            detail: "end-to-end accuracy needs trained parse and refinement models, which are not part of this workspace".into(),
        },
        Outcome {
            name: "model-recall",
            status: Status::Unattainable,
            detail: "absolute recall figures need predicted programs from a trained parser; `kopl recall` computes them given such a file".into(),
        },
    ];
    let mut failed = 0;
    for o in &outcomes {
        let tag = match o.status {
            Status::Pass => "PASS",
            Status::Fail => {
                failed += 1;
                "FAIL"
            }
            Status::Skip => "SKIP",
            Status::Unattainable => "FAIL (unattainable, not gated)",
        };
        println!("{tag:<5} {:<30} {}", o.name, o.detail);
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
