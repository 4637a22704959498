//! Subcommand implementations: thin orchestration over the library crate.
//! Every data command prints a single JSON summary line on stdout; `report`
//! prints the aligned metric table instead.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tripwright_core::eval::{
    batch_report, evaluate_response, percent, undelivered_report, write_batch_csv, AggregateRates,
    BatchReport, EvalReport,
};
use tripwright_core::mas::backend::{HttpChatBackend, HttpChatConfig, ScriptedBackend};
use tripwright_core::mas::oracle::oracle_backends;
use tripwright_core::mas::{generate_dataset, run_mas, AgentRole, DatasetSummary, MasBackends, MasTrace};
use tripwright_core::query_gen::{
    generate_queries, load_queries, query_id, save_queries, Level, Query, ReferenceInformation,
};
use tripwright_core::reward::{compute_reward_with, RewardBreakdown};
use tripwright_core::sandbox::{generate_sandbox, load_sandbox, save_sandbox, Sandbox, SizeProfile};
use tripwright_core::train::grpo_train_demo;

use crate::config::{BackendKind, PipelineConfig};

fn print_summary(value: &serde_json::Value) {
    println!("{value}");
}

/// Output path resolution: explicit flag, else `[io] out_dir` plus the
/// command's default file name.
fn resolve_out(
    flag: Option<PathBuf>,
    config: &PipelineConfig,
    default_name: &str,
) -> Result<PathBuf> {
    if let Some(path) = flag {
        return Ok(path);
    }
    if let Some(dir) = &config.io.out_dir {
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        return Ok(dir.join(default_name));
    }
    bail!("no output path: pass --out or set [io] out_dir in the config")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn effective_jobs(config: &PipelineConfig, flag: Option<usize>) -> usize {
    let jobs = flag.unwrap_or(config.io.jobs).max(1);
    // Scripted replies are consumed in call order; parallel consumption
    // would scramble the pairing between queries and canned replies.
    if config.backend.kind == BackendKind::Scripted {
        1
    } else {
        jobs
    }
}

/// Canned replies for the scripted backend, one list per agent seat.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReplyScript {
    #[serde(default)]
    reasoner: Vec<String>,
    #[serde(default)]
    judge_a: Vec<String>,
    #[serde(default)]
    judge_b: Vec<String>,
    #[serde(default)]
    reflector: Vec<String>,
}

fn build_backends(
    config: &PipelineConfig,
    sandbox: &Sandbox,
    pairs: &[(Query, ReferenceInformation)],
) -> Result<MasBackends> {
    match config.backend.kind {
        BackendKind::Oracle => Ok(oracle_backends(sandbox, pairs)),
        BackendKind::Scripted => {
            let path = config.backend.script.as_ref().expect("validated on load");
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read reply script {}", path.display()))?;
            let script: ReplyScript = serde_json::from_str(&text)
                .with_context(|| format!("cannot parse reply script {}", path.display()))?;
            Ok(MasBackends {
                reasoner: Box::new(ScriptedBackend::sequence(
                    AgentRole::Reasoner,
                    script.reasoner,
                )),
                judges: [
                    Box::new(ScriptedBackend::sequence(AgentRole::Judge, script.judge_a)),
                    Box::new(ScriptedBackend::sequence(AgentRole::Judge, script.judge_b)),
                ],
                reflector: Box::new(ScriptedBackend::sequence(
                    AgentRole::Reflector,
                    script.reflector,
                )),
            })
        }
        BackendKind::Http => {
            let endpoint = config.backend.endpoint.as_ref().expect("validated on load");
            let model = config.backend.model.as_ref().expect("validated on load");
            let mut http = HttpChatConfig::new(endpoint, model);
            if let Some(var) = &config.backend.api_key_env {
                let key = std::env::var(var)
                    .map_err(|_| anyhow!("credential environment variable {var} is not set"))?;
                http.api_key = Some(key);
            }
            Ok(MasBackends {
                reasoner: Box::new(HttpChatBackend::new(AgentRole::Reasoner, http.clone())),
                judges: [
                    Box::new(HttpChatBackend::new(AgentRole::Judge, http.clone())),
                    Box::new(HttpChatBackend::new(AgentRole::Judge, http.clone())),
                ],
                reflector: Box::new(HttpChatBackend::new(AgentRole::Reflector, http)),
            })
        }
    }
}

pub fn cmd_gen_sandbox(
    config: &PipelineConfig,
    seed: Option<u64>,
    profile: Option<SizeProfile>,
    out: Option<PathBuf>,
) -> Result<()> {
    let seed = seed.unwrap_or(config.sandbox.seed);
    let profile = profile.unwrap_or(config.sandbox.profile);
    let out = resolve_out(out, config, "sandbox.json")?;
    let sandbox = generate_sandbox(seed, profile);
    save_sandbox(&sandbox, &out)?;
    print_summary(&json!({
        "sandbox": out.display().to_string(),
        "seed": seed,
        "profile": profile,
        "cities": sandbox.cities.len(),
    }));
    Ok(())
}

pub fn cmd_gen_queries(
    config: &PipelineConfig,
    sandbox_path: &Path,
    count: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<()> {
    let count = count.unwrap_or(config.queries.count);
    let seed = seed.unwrap_or(config.queries.seed);
    let out = resolve_out(out, config, "queries.jsonl")?;
    let sandbox = load_sandbox(sandbox_path)?;
    let pairs = generate_queries(&sandbox, count, seed, &BTreeSet::new())?;
    save_queries(&pairs, &out)?;
    let by_level = |level: Level| pairs.iter().filter(|(q, _)| q.level == level).count();
    print_summary(&json!({
        "queries": out.display().to_string(),
        "count": pairs.len(),
        "easy": by_level(Level::Easy),
        "medium": by_level(Level::Medium),
        "hard": by_level(Level::Hard),
        "seed": seed,
    }));
    Ok(())
}

/// Runs the protocol over each query in order, `jobs` at a time, keeping
/// output order equal to input order.
fn run_all(
    pairs: &[(Query, ReferenceInformation)],
    backends: &MasBackends,
    jobs: usize,
) -> Result<Vec<MasTrace>> {
    let mut traces = Vec::with_capacity(pairs.len());
    for (chunk_index, chunk) in pairs.chunks(jobs).enumerate() {
        let results: Vec<_> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .enumerate()
                .map(|(offset, (query, reference))| {
                    let id = query_id(chunk_index * jobs + offset);
                    scope.spawn(move || run_mas(&id, query, reference, backends))
                })
                .collect();
            handles
                .into_iter()
                .map(|handle| handle.join().expect("protocol worker panicked"))
                .collect()
        });
        for result in results {
            traces.push(result?);
        }
    }
    Ok(traces)
}

pub fn cmd_run_mas(
    config: &PipelineConfig,
    sandbox_path: &Path,
    queries_path: &Path,
    limit: Option<usize>,
    out: Option<PathBuf>,
    jobs: Option<usize>,
) -> Result<()> {
    let out = resolve_out(out, config, "traces.jsonl")?;
    let sandbox = load_sandbox(sandbox_path)?;
    let mut pairs = load_queries(queries_path)?;
    if let Some(limit) = limit {
        pairs.truncate(limit);
    }
    let backends = build_backends(config, &sandbox, &pairs)?;
    let traces = run_all(&pairs, &backends, effective_jobs(config, jobs))?;
    let mut text = String::new();
    for trace in &traces {
        text.push_str(&serde_json::to_string(trace)?);
        text.push('\n');
    }
    write_text(&out, &text)?;
    print_summary(&json!({
        "traces": out.display().to_string(),
        "count": traces.len(),
        "reflected": traces.iter().filter(|t| t.reflector_invoked).count(),
        "prompt_tokens": traces.iter().map(|t| t.accounting.total_prompt_tokens).sum::<u64>(),
        "completion_tokens": traces.iter().map(|t| t.accounting.total_completion_tokens).sum::<u64>(),
    }));
    Ok(())
}

pub fn cmd_build_sft(
    config: &PipelineConfig,
    sandbox_path: &Path,
    queries_path: &Path,
    limit: Option<usize>,
    out: Option<PathBuf>,
    jobs: Option<usize>,
) -> Result<()> {
    let out = resolve_out(out, config, "dataset.jsonl")?;
    let sandbox = load_sandbox(sandbox_path)?;
    let mut pairs = load_queries(queries_path)?;
    if let Some(limit) = limit {
        pairs.truncate(limit);
    }
    let backends = build_backends(config, &sandbox, &pairs)?;
    let summary = generate_dataset(&pairs, &backends, &out, effective_jobs(config, jobs))?;

    #[derive(Serialize)]
    struct BuildSummary<'a> {
        dataset: String,
        #[serde(flatten)]
        summary: &'a DatasetSummary,
    }
    print_summary(&serde_json::to_value(BuildSummary {
        dataset: out.display().to_string(),
        summary: &summary,
    })?);
    Ok(())
}

/// One response line: either a raw model response or a training-dataset row
/// (whose `completion` field is the response text).
#[derive(Debug, Deserialize)]
struct ResponseRow {
    query_id: String,
    #[serde(alias = "completion")]
    response: String,
}

fn load_responses(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read responses {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: ResponseRow = serde_json::from_str(line)
            .with_context(|| format!("responses {} line {}", path.display(), i + 1))?;
        rows.push((row.query_id, row.response));
    }
    Ok(rows)
}

pub fn cmd_eval(
    config: &PipelineConfig,
    sandbox_path: &Path,
    queries_path: &Path,
    responses_path: &Path,
    out: Option<PathBuf>,
    csv: Option<PathBuf>,
) -> Result<()> {
    let out = resolve_out(out, config, "report.json")?;
    let sandbox = load_sandbox(sandbox_path)?;
    let pairs = load_queries(queries_path)?;
    let known: BTreeSet<String> = (0..pairs.len()).map(query_id).collect();
    let mut by_id: BTreeMap<String, String> = BTreeMap::new();
    for (id, response) in load_responses(responses_path)? {
        if !known.contains(&id) {
            bail!(
                "responses reference unknown query id {id}; the queries file has {} rows",
                pairs.len()
            );
        }
        by_id.insert(id, response);
    }

    let options = config.eval_options();
    let rows: Vec<(String, EvalReport)> = pairs
        .iter()
        .enumerate()
        .map(|(i, (query, _))| {
            let id = query_id(i);
            let report = match by_id.get(&id) {
                Some(response) => evaluate_response(&sandbox, query, response, options),
                None => undelivered_report(query, options),
            };
            (id, report)
        })
        .collect();
    let report = batch_report(rows, options)?;
    write_text(&out, &serde_json::to_string_pretty(&report)?)?;
    if let Some(path) = &csv {
        write_batch_csv(&report, path)?;
    }

    #[derive(Serialize)]
    struct EvalSummary<'a> {
        report: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        csv: Option<String>,
        queries: usize,
        #[serde(flatten)]
        aggregate: &'a AggregateRates,
    }
    print_summary(&serde_json::to_value(EvalSummary {
        report: out.display().to_string(),
        csv: csv.as_ref().map(|p| p.display().to_string()),
        queries: report.per_query.len(),
        aggregate: &report.aggregate,
    })?);
    Ok(())
}

pub fn cmd_reward(
    config: &PipelineConfig,
    sandbox_path: &Path,
    queries_path: &Path,
    responses_path: &Path,
    out: Option<PathBuf>,
) -> Result<()> {
    let out = resolve_out(out, config, "rewards.jsonl")?;
    let sandbox = load_sandbox(sandbox_path)?;
    let pairs = load_queries(queries_path)?;
    let responses = load_responses(responses_path)?;
    let by_id: BTreeMap<String, &Query> = pairs
        .iter()
        .enumerate()
        .map(|(i, (query, _))| (query_id(i), query))
        .collect();

    #[derive(Serialize)]
    struct RewardRow<'a> {
        query_id: &'a str,
        #[serde(flatten)]
        breakdown: RewardBreakdown,
    }
    let options = config.eval_options();
    let mut text = String::new();
    let mut total = 0.0;
    for (id, response) in &responses {
        let query = by_id
            .get(id.as_str())
            .ok_or_else(|| anyhow!("responses reference unknown query id {id}"))?;
        let breakdown = compute_reward_with(&sandbox, query, response, options);
        total += breakdown.total;
        text.push_str(&serde_json::to_string(&RewardRow {
            query_id: id,
            breakdown,
        })?);
        text.push('\n');
    }
    write_text(&out, &text)?;
    let mean = if responses.is_empty() {
        0.0
    } else {
        total / responses.len() as f64
    };
    print_summary(&json!({
        "rewards": out.display().to_string(),
        "count": responses.len(),
        "mean_total": mean,
    }));
    Ok(())
}

pub fn cmd_grpo_demo(
    config: &PipelineConfig,
    steps: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<()> {
    let steps = steps.unwrap_or(config.grpo.steps);
    let mut grpo = config.grpo_config();
    if let Some(seed) = seed {
        grpo.seed = seed;
    }
    let report = grpo_train_demo::<f64>(steps, &grpo)?;

    // The step log is optional: skip it when neither --out nor out_dir is set.
    let out = match out {
        Some(path) => Some(path),
        None => match &config.io.out_dir {
            Some(dir) => {
                fs::create_dir_all(dir)
                    .with_context(|| format!("cannot create output directory {}", dir.display()))?;
                Some(dir.join("grpo_log.jsonl"))
            }
            None => None,
        },
    };
    if let Some(path) = &out {
        let mut text = String::new();
        for row in &report.rows {
            text.push_str(&serde_json::to_string(row)?);
            text.push('\n');
        }
        write_text(path, &text)?;
    }

    let head = report.head_mean_reward(20);
    let tail = report.tail_mean_reward(20);
    print_summary(&json!({
        "log": out.map(|p| p.display().to_string()),
        "steps": report.rows.len(),
        "head_mean_reward": head,
        "tail_mean_reward": tail,
        "lift": tail - head,
    }));
    Ok(())
}

const REPORT_HEADERS: [&str; 7] = [
    "Run",
    "Delivery",
    "CS Micro",
    "CS Macro",
    "Hard Micro",
    "Hard Macro",
    "Final Pass",
];

fn aggregate_cells(aggregate: &AggregateRates) -> [String; 6] {
    [
        percent(aggregate.delivery_rate),
        percent(aggregate.commonsense_micro),
        percent(aggregate.commonsense_macro),
        percent(aggregate.hard_micro),
        percent(aggregate.hard_macro),
        percent(aggregate.final_pass_rate),
    ]
}

fn render_table(rows: &[(String, [String; 6])]) -> String {
    let mut widths: Vec<usize> = REPORT_HEADERS.iter().map(|h| h.chars().count()).collect();
    for (label, cells) in rows {
        widths[0] = widths[0].max(label.chars().count());
        for (i, cell) in cells.iter().enumerate() {
            widths[i + 1] = widths[i + 1].max(cell.chars().count());
        }
    }
    let mut text = String::new();
    let mut push_row = |label: &str, cells: &[String]| {
        text.push_str(&format!("{:<width$}", label, width = widths[0]));
        for (i, cell) in cells.iter().enumerate() {
            text.push_str(&format!("  {:>width$}", cell, width = widths[i + 1]));
        }
        text.push('\n');
    };
    let header: Vec<String> = REPORT_HEADERS[1..].iter().map(|h| h.to_string()).collect();
    push_row(REPORT_HEADERS[0], &header);
    for (label, cells) in rows {
        push_row(label, cells);
    }
    text
}

pub fn cmd_report(inputs: &[PathBuf], out: Option<PathBuf>, csv: Option<PathBuf>) -> Result<()> {
    let mut rows = Vec::new();
    for path in inputs {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read report {}", path.display()))?;
        let report: BatchReport = serde_json::from_str(&text)
            .with_context(|| format!("cannot parse report {}", path.display()))?;
        let label = path
            .file_stem()
            .map(|stem| stem.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        rows.push((label, aggregate_cells(&report.aggregate)));
    }
    let table = render_table(&rows);
    print!("{table}");
    if let Some(path) = &out {
        write_text(path, &table)?;
    }
    if let Some(path) = &csv {
        let mut writer = csv::Writer::from_path(path)
            .with_context(|| format!("cannot write {}", path.display()))?;
        writer.write_record([
            "run",
            "delivery",
            "commonsense_micro",
            "commonsense_macro",
            "hard_micro",
            "hard_macro",
            "final_pass",
        ])?;
        for (label, cells) in &rows {
            let mut record = vec![label.clone()];
            record.extend(cells.iter().cloned());
            writer.write_record(&record)?;
        }
        writer.flush()?;
    }
    Ok(())
}
