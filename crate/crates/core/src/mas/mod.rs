//! Reasoner / two-Judge / Reflector protocol with pluggable agent backends,
//! plus the training-data constructor.
//!
//! The protocol is single-pass: the reasoner drafts reasoning and an answer,
//! two judges independently review the reasoning, and the reflector is
//! invoked iff any judge reports errors. Training examples concatenate the
//! pieces with the connective strings in [`REFLECTION_MARKER`] and
//! [`REFLECTION_CLOSER`] byte-for-byte — no separators are inserted.

pub mod backend;
pub mod oracle;
pub mod prompts;

use std::collections::BTreeSet;
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plan::parse_envelope;
use crate::query_gen::{query_id, Query, ReferenceInformation};
use crate::reward::detect_reflection;
use backend::{AgentBackend, AgentReply, BackendError};

/// Opens the reflection section of a think block.
pub const REFLECTION_MARKER: &str =
    "REFLECTION(Now, I need to reflect on whether there are any errors in my reasoning above):";

/// Closes the reflection section of a think block.
pub const REFLECTION_CLOSER: &str =
    "The reflection is over, now IMMEDIATELY output the final answer!";

/// Exact verdict strings judges are instructed to produce.
pub const JUDGE_ERRORS: &str = "Errors exist.";
pub const JUDGE_NO_ERRORS: &str = "No errors.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentRole {
    Reasoner,
    Judge,
    Reflector,
}

impl std::fmt::Display for AgentRole {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            AgentRole::Reasoner => "reasoner",
            AgentRole::Judge => "judge",
            AgentRole::Reflector => "reflector",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ErrorsExist,
    NoErrors,
}

/// Case-insensitive verdict classification. Anything that does not clearly
/// say "no errors" is treated as errors-exist so that dubious reasoning is
/// always reflected upon.
pub fn parse_verdict(content: &str) -> Verdict {
    let lower = content.to_lowercase();
    if lower.contains("errors exist") {
        Verdict::ErrorsExist
    } else if lower.contains("no errors") {
        Verdict::NoErrors
    } else {
        Verdict::ErrorsExist
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallAccounting {
    pub role: AgentRole,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceAccounting {
    pub calls: Vec<CallAccounting>,
    pub total_prompt_tokens: u64,
    pub total_completion_tokens: u64,
    pub total_latency_ms: u64,
}

impl TraceAccounting {
    fn push(&mut self, role: AgentRole, reply: &AgentReply) {
        self.calls.push(CallAccounting {
            role,
            prompt_tokens: reply.usage.prompt_tokens,
            completion_tokens: reply.usage.completion_tokens,
            latency_ms: reply.latency_ms,
        });
        self.total_prompt_tokens += reply.usage.prompt_tokens;
        self.total_completion_tokens += reply.usage.completion_tokens;
        self.total_latency_ms += reply.latency_ms;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MasTrace {
    pub query_id: String,
    pub reasoner_prompt: String,
    pub reasoner_think: String,
    pub reasoner_answer: String,
    pub judge_verdicts: [Verdict; 2],
    pub reflector_invoked: bool,
    pub reflection_content: Option<String>,
    pub final_answer: String,
    pub accounting: TraceAccounting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Reflected,
    NoErrors,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftExample {
    pub prompt: String,
    pub completion: String,
    pub branch: Branch,
}

/// One dataset line: the training example plus bookkeeping fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub query_id: String,
    pub prompt: String,
    pub completion: String,
    pub branch: Branch,
    pub accounting: TraceAccounting,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DatasetSummary {
    pub total_rows: usize,
    pub new_rows: usize,
    pub skipped_existing: usize,
    pub failed: usize,
    pub reflected_rows: usize,
    pub no_errors_rows: usize,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Error)]
pub enum MasError {
    #[error("{role} backend failed: {source}")]
    Backend {
        role: AgentRole,
        #[source]
        source: BackendError,
    },
    #[error("incomplete trace for {query_id}: {reason}")]
    IncompleteTrace { query_id: String, reason: String },
    #[error("invalid training example for {query_id}: {reason}")]
    InvalidSftExample { query_id: String, reason: String },
    #[error("failed to access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse {path} line {line}: {source}")]
    Parse {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// The four backends of one protocol run. Backends must be shareable across
/// threads: the two judges are invoked concurrently.
pub struct MasBackends {
    pub reasoner: Box<dyn AgentBackend>,
    pub judges: [Box<dyn AgentBackend>; 2],
    pub reflector: Box<dyn AgentBackend>,
}

pub fn run_mas(
    id: &str,
    query: &Query,
    reference: &ReferenceInformation,
    backends: &MasBackends,
) -> Result<MasTrace, MasError> {
    let mut accounting = TraceAccounting::default();
    let reasoner_prompt = prompts::build_reasoner_prompt(query, reference);

    let reasoner_reply = backends
        .reasoner
        .invoke(&reasoner_prompt)
        .map_err(|source| MasError::Backend {
            role: AgentRole::Reasoner,
            source,
        })?;
    accounting.push(AgentRole::Reasoner, &reasoner_reply);
    // Lenient split: a reasoner that skips the think tags still contributes
    // its whole output as the answer.
    let (reasoner_think, reasoner_answer) = match parse_envelope(&reasoner_reply.content) {
        Ok(envelope) => (envelope.think, envelope.answer_raw.trim().to_string()),
        Err(_) => (String::new(), reasoner_reply.content.trim().to_string()),
    };

    let judge_prompt = prompts::build_judge_prompt(query, &reasoner_think, &reasoner_answer);
    let [judge_a, judge_b] = &backends.judges;
    let (reply_a, reply_b) = std::thread::scope(|scope| {
        let handle = scope.spawn(|| judge_b.invoke(&judge_prompt));
        let a = judge_a.invoke(&judge_prompt);
        let b = handle.join().expect("judge thread panicked");
        (a, b)
    });
    let reply_a = reply_a.map_err(|source| MasError::Backend {
        role: AgentRole::Judge,
        source,
    })?;
    let reply_b = reply_b.map_err(|source| MasError::Backend {
        role: AgentRole::Judge,
        source,
    })?;
    accounting.push(AgentRole::Judge, &reply_a);
    accounting.push(AgentRole::Judge, &reply_b);
    let judge_verdicts = [
        parse_verdict(&reply_a.content),
        parse_verdict(&reply_b.content),
    ];

    let reflector_invoked = judge_verdicts.contains(&Verdict::ErrorsExist);
    let (reflection_content, final_answer) = if reflector_invoked {
        let reflector_prompt =
            prompts::build_reflector_prompt(query, reference, &reasoner_think, &reasoner_answer);
        let reply = backends
            .reflector
            .invoke(&reflector_prompt)
            .map_err(|source| MasError::Backend {
                role: AgentRole::Reflector,
                source,
            })?;
        accounting.push(AgentRole::Reflector, &reply);
        let (reflection, answer) = split_reflector_output(&reply.content, &reasoner_answer);
        (Some(reflection), answer)
    } else {
        (None, reasoner_answer.clone())
    };

    Ok(MasTrace {
        query_id: id.to_string(),
        reasoner_prompt,
        reasoner_think,
        reasoner_answer,
        judge_verdicts,
        reflector_invoked,
        reflection_content,
        final_answer,
        accounting,
    })
}

/// Splits reflector output into (reflection content, corrected final answer).
///
/// Preferred form is an explicit "FINAL ANSWER:" marker. Failing that, the
/// longest parseable JSON-array suffix is taken as the answer. Failing both,
/// the whole output is reflection content and the reasoner's answer stands.
fn split_reflector_output(content: &str, reasoner_answer: &str) -> (String, String) {
    if let Some(idx) = content.rfind(prompts::FINAL_ANSWER_MARKER) {
        let reflection = content[..idx].trim_end().to_string();
        let answer = content[idx + prompts::FINAL_ANSWER_MARKER.len()..]
            .trim()
            .to_string();
        if !answer.is_empty() {
            return (reflection, answer);
        }
    }
    let mut search_end = content.len();
    while let Some(start) = content[..search_end].rfind('[') {
        if crate::plan::parse_plan(&content[start..]).is_ok() {
            return (
                content[..start].trim_end().to_string(),
                content[start..].trim().to_string(),
            );
        }
        search_end = start;
    }
    (content.trim().to_string(), reasoner_answer.to_string())
}

pub fn build_sft_example(trace: &MasTrace) -> Result<SftExample, MasError> {
    let incomplete = |reason: &str| MasError::IncompleteTrace {
        query_id: trace.query_id.clone(),
        reason: reason.to_string(),
    };
    if trace.reflector_invoked != trace.judge_verdicts.contains(&Verdict::ErrorsExist) {
        return Err(incomplete("reflector invocation contradicts judge verdicts"));
    }
    if trace.final_answer.trim().is_empty() {
        return Err(incomplete("empty final answer"));
    }
    let (branch, reflection) = if trace.reflector_invoked {
        let content = trace
            .reflection_content
            .as_deref()
            .ok_or_else(|| incomplete("reflector invoked but no reflection content"))?;
        (Branch::Reflected, content)
    } else {
        (Branch::NoErrors, JUDGE_NO_ERRORS)
    };

    let think = format!(
        "{}{}{}{}",
        trace.reasoner_think, REFLECTION_MARKER, reflection, REFLECTION_CLOSER
    );
    let completion = format!("<think>{}</think>{}", think, trace.final_answer);

    let invalid = |reason: String| MasError::InvalidSftExample {
        query_id: trace.query_id.clone(),
        reason,
    };
    let envelope =
        parse_envelope(&completion).map_err(|e| invalid(format!("completion fails format: {e}")))?;
    if !detect_reflection(&envelope.think) {
        return Err(invalid(
            "reflection marker does not land in the trailing region of the think text".to_string(),
        ));
    }

    Ok(SftExample {
        prompt: trace.reasoner_prompt.clone(),
        completion,
        branch,
    })
}

/// Runs the protocol over `queries` and appends one dataset row per success
/// to `path`. Resumable: rows already present are kept and their queries
/// skipped. Per-query failures are logged to stderr and skipped. Up to `jobs`
/// queries are processed concurrently; output order stays ascending by query
/// index.
pub fn generate_dataset(
    queries: &[(Query, ReferenceInformation)],
    backends: &MasBackends,
    path: &Path,
    jobs: usize,
) -> Result<DatasetSummary, MasError> {
    let jobs = jobs.max(1);
    let existing_rows = if path.exists() {
        load_dataset(path)?
    } else {
        Vec::new()
    };
    let done: BTreeSet<String> = existing_rows.iter().map(|r| r.query_id.clone()).collect();

    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|source| MasError::Io {
            path: path.display().to_string(),
            source,
        })?;

    let pending: Vec<usize> = (0..queries.len())
        .filter(|i| !done.contains(&query_id(*i)))
        .collect();

    let mut summary = DatasetSummary {
        skipped_existing: queries.len() - pending.len(),
        ..DatasetSummary::default()
    };
    let mut new_rows = Vec::new();
    for chunk in pending.chunks(jobs) {
        let results: Vec<(usize, Result<DatasetRow, MasError>)> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|&i| {
                    scope.spawn(move || {
                        let id = query_id(i);
                        let (query, reference) = &queries[i];
                        let trace = run_mas(&id, query, reference, backends)?;
                        let example = build_sft_example(&trace)?;
                        Ok(DatasetRow {
                            query_id: id,
                            prompt: example.prompt,
                            completion: example.completion,
                            branch: example.branch,
                            accounting: trace.accounting,
                        })
                    })
                })
                .collect();
            chunk
                .iter()
                .zip(handles)
                .map(|(&i, h)| (i, h.join().expect("worker thread panicked")))
                .collect()
        });
        for (i, result) in results {
            match result {
                Ok(row) => {
                    let line = serde_json::to_string(&row).expect("row serializes");
                    file.write_all(line.as_bytes())
                        .and_then(|_| file.write_all(b"\n"))
                        .map_err(|source| MasError::Io {
                            path: path.display().to_string(),
                            source,
                        })?;
                    new_rows.push(row);
                }
                Err(err) => {
                    eprintln!("query {} failed: {err}", query_id(i));
                    summary.failed += 1;
                }
            }
        }
    }
    file.flush().map_err(|source| MasError::Io {
        path: path.display().to_string(),
        source,
    })?;

    summary.new_rows = new_rows.len();
    for row in existing_rows.iter().chain(new_rows.iter()) {
        summary.total_rows += 1;
        match row.branch {
            Branch::Reflected => summary.reflected_rows += 1,
            Branch::NoErrors => summary.no_errors_rows += 1,
        }
        summary.prompt_tokens += row.accounting.total_prompt_tokens;
        summary.completion_tokens += row.accounting.total_completion_tokens;
    }
    Ok(summary)
}

pub fn load_dataset(path: &Path) -> Result<Vec<DatasetRow>, MasError> {
    let text = std::fs::read_to_string(path).map_err(|source| MasError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: DatasetRow = serde_json::from_str(line).map_err(|source| MasError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            source,
        })?;
        rows.push(row);
    }
    Ok(rows)
}
