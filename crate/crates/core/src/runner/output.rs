use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{RunConfig, RunError};
use crate::types::AgentId;

#[derive(Debug, Serialize, Deserialize)]
struct TraceRow {
    round: u32,
    mean: f64,
    std: f64,
}

/// `round,mean,std`, rounds numbered from 1.
pub fn write_trace_csv(path: &Path, stats: &[(f64, f64)]) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path)?;
    for (i, &(mean, std)) in stats.iter().enumerate() {
        w.serialize(TraceRow {
            round: i as u32 + 1,
            mean,
            std,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `round,mean,std` file; rows are ordered by round.
pub fn read_trace_csv(path: &Path) -> Result<Vec<(f64, f64)>, RunError> {
    let mut rows: Vec<TraceRow> = csv::Reader::from_path(path)?
        .deserialize()
        .collect::<Result<_, _>>()?;
    rows.sort_by_key(|r| r.round);
    Ok(rows.into_iter().map(|r| (r.mean, r.std)).collect())
}

/// One row per round, one column per agent.
pub(crate) fn write_agent_trace(path: &Path, ids: &[AgentId], rounds: &[Vec<f64>]) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["round".to_string()];
    header.extend(ids.iter().map(|id| id.to_string()));
    w.write_record(&header)?;
    for (i, row) in rounds.iter().enumerate() {
        let mut rec = vec![(i + 1).to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<(), RunError> {
    let mut w = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, &item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub seed: u64,
    pub config: RunConfig,
    pub users: usize,
    pub core_users: usize,
    pub edges: usize,
    pub rounds_completed: u32,
    /// Set when the run stopped early.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aborted: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("trace.csv");
        let stats = vec![(0.1, 0.2), (-0.30000000000000004, 0.0)];
        write_trace_csv(&p, &stats).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("round,mean,std\n1,0.1,0.2\n"));
        assert_eq!(read_trace_csv(&p).unwrap(), stats);
    }
}
