//! Trace CSV format: `session_id,epoch_index,throughput_kbps`.
//!
//! The header row is required. Rows may interleave sessions, but within a
//! session the epoch indexes must arrive contiguously from 0. Throughput
//! values are written with Rust's shortest round-trip float formatting, so
//! `parse(serialize(traces))` reproduces the samples bit for bit.

use std::collections::HashMap;
use std::path::Path;

use super::SessionTrace;
use crate::{Error, Result};

pub const TRACE_CSV_HEADER: &str = "session_id,epoch_index,throughput_kbps";

/// Parses trace CSV text. `epoch_seconds` applies to every session; the
/// format itself does not carry epoch length.
///
/// Sessions are returned in order of first appearance.
pub fn parse_traces_csv(text: &str, epoch_seconds: u32) -> Result<Vec<SessionTrace>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end_matches('\r') == TRACE_CSV_HEADER => {}
        Some((_, header)) => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header {TRACE_CSV_HEADER:?}, found {header:?}"),
            })
        }
        None => {
            return Err(Error::Parse { line: 1, message: "empty input, header row required".into() })
        }
    }

    // Session order of first appearance, with samples accumulated per session.
    let mut order: Vec<String> = Vec::new();
    let mut samples: HashMap<String, Vec<f64>> = HashMap::new();

    for (idx, raw) in lines {
        let line_no = idx + 1;
        let row = raw.trim_end_matches('\r');
        if row.is_empty() {
            continue;
        }
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 3 comma-separated fields, found {}", fields.len()),
            });
        }
        let session_id = fields[0];
        if session_id.is_empty() {
            return Err(Error::Parse { line: line_no, message: "empty session_id".into() });
        }
        let epoch_index: usize = fields[1].parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("epoch_index {:?} is not a nonnegative integer", fields[1]),
        })?;
        let throughput: f64 = fields[2].parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("throughput_kbps {:?} is not a number", fields[2]),
        })?;
        if !throughput.is_finite() || throughput <= 0.0 {
            return Err(Error::Validation(format!(
                "session {session_id}, epoch {epoch_index}: throughput {throughput} must be positive and finite (line {line_no})"
            )));
        }

        let entry = match samples.get_mut(session_id) {
            Some(entry) => entry,
            None => {
                order.push(session_id.to_string());
                samples.entry(session_id.to_string()).or_default()
            }
        };
        let expected = entry.len();
        if epoch_index < expected {
            return Err(Error::Validation(format!(
                "session {session_id}: duplicate or out-of-order epoch {epoch_index} (line {line_no})"
            )));
        }
        if epoch_index > expected {
            return Err(Error::Validation(format!(
                "session {session_id}: epoch {epoch_index} leaves a gap, expected {expected} (line {line_no})"
            )));
        }
        entry.push(throughput);
    }

    order
        .into_iter()
        .map(|id| {
            let s = samples.remove(&id).expect("grouped above");
            SessionTrace::new(id, epoch_seconds, s)
        })
        .collect()
}

/// Renders traces as CSV, one block of rows per session in input order.
pub fn serialize_traces_csv(traces: &[SessionTrace]) -> String {
    let mut out = String::from(TRACE_CSV_HEADER);
    out.push('\n');
    for trace in traces {
        for (epoch, sample) in trace.samples().iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", trace.session_id(), epoch, sample));
        }
    }
    out
}

/// Reads and parses a trace CSV file.
pub fn read_traces_csv(path: &Path, epoch_seconds: u32) -> Result<Vec<SessionTrace>> {
    let text = std::fs::read_to_string(path)?;
    parse_traces_csv(&text, epoch_seconds)
}

/// Writes traces to a file, creating parent directories as needed.
pub fn write_traces_csv(path: &Path, traces: &[SessionTrace]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, serialize_traces_csv(traces))?;
    Ok(())
}
