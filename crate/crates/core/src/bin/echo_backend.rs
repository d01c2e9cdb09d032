//! Scripted protocol v1 backend used by the test suites.
//!
//! Fills every `[MASK]` with a fixed token and scores `classify` texts by
//! case-insensitive label-name containment (or a fixed vector). Flags make it
//! misbehave on purpose: wrong version, reordered replies, hanging, exiting.

use std::io::{self, BufRead, Write};
use std::process::ExitCode;

use clap::Parser;
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(name = "echo-backend", about = "Scripted backend speaking protocol v1")]
struct Args {
    /// Model name from the registry; accepted and ignored.
    #[arg(long)]
    model: Option<String>,
    /// Token returned for every mask.
    #[arg(long, default_value = "X")]
    fill_token: String,
    /// Capabilities announced in the hello reply.
    #[arg(long, value_delimiter = ',', default_value = "fill")]
    capabilities: Vec<String>,
    /// Score vector returned for every classify text, verbatim.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    classify_constant: Option<Vec<f64>>,
    /// Protocol version announced in the hello reply.
    #[arg(long = "protocol-version", default_value_t = 1)]
    protocol_version: u64,
    /// Buffer this many requests, then answer them in reverse order.
    #[arg(long, default_value_t = 1)]
    reorder: usize,
    /// Stop answering (but keep reading) after this many replies.
    #[arg(long)]
    hang_after: Option<usize>,
    /// Exit after this many replies.
    #[arg(long)]
    exit_after: Option<usize>,
    /// Answer this op with ok:false.
    #[arg(long)]
    fail_op: Option<String>,
}

fn answer(args: &Args, line: &str) -> Value {
    let req: Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(e) => return json!({"id": 0, "ok": false, "error": format!("malformed request: {e}")}),
    };
    let id = req.get("id").and_then(Value::as_u64).unwrap_or(0);
    let op = req.get("op").and_then(Value::as_str).unwrap_or_default();
    let payload = req.get("payload").cloned().unwrap_or(Value::Null);
    if args.fail_op.as_deref() == Some(op) {
        return json!({"id": id, "ok": false, "error": format!("scripted failure for {op}")});
    }
    match op {
        "hello" => json!({"id": id, "ok": true, "result": {
            "version": args.protocol_version,
            "capabilities": args.capabilities,
        }}),
        "fill" => {
            let text = payload.get("text").and_then(Value::as_str).unwrap_or_default();
            let tokens = vec![args.fill_token.clone(); text.matches("[MASK]").count()];
            json!({"id": id, "ok": true, "result": {"tokens": tokens}})
        }
        "classify" => {
            let texts: Vec<String> = payload
                .get("texts")
                .and_then(|v| serde_json::from_value(v.clone()).ok())
                .unwrap_or_default();
            let labels: Vec<String> = payload
                .get("labels")
                .and_then(|v| serde_json::from_value(v.clone()).ok())
                .unwrap_or_default();
            let scores: Vec<Vec<f64>> = texts
                .iter()
                .map(|t| match &args.classify_constant {
                    Some(c) => c.clone(),
                    None => {
                        let t = t.to_lowercase();
                        labels
                            .iter()
                            .map(|l| if t.contains(&l.to_lowercase()) { 1.0 } else { 0.0 })
                            .collect()
                    }
                })
                .collect();
            json!({"id": id, "ok": true, "result": {"scores": scores}})
        }
        other => json!({"id": id, "ok": false, "error": format!("unknown op {other:?}")}),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let stdin = io::stdin();
    let mut out = io::stdout().lock();
    let mut pending = Vec::new();
    let mut sent = 0usize;
    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        pending.push(answer(&args, &line));
        if pending.len() < args.reorder.max(1) {
            continue;
        }
        while let Some(reply) = pending.pop() {
            if args.hang_after.is_some_and(|n| sent >= n) {
                pending.clear();
                break;
            }
            if writeln!(out, "{reply}").and_then(|_| out.flush()).is_err() {
                return ExitCode::FAILURE;
            }
            sent += 1;
            if args.exit_after.is_some_and(|n| sent >= n) {
                return ExitCode::SUCCESS;
            }
        }
    }
    ExitCode::SUCCESS
}
