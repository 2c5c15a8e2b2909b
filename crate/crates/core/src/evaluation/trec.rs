//! TREC-format qrels and run files.
//!
//! Qrels: `query_id 0 chunk_id relevance` with relevance in {0, 1}.
//! Runs:  `query_id Q0 chunk_id rank score tag`.

use std::collections::BTreeSet;
use std::path::Path;

use crate::error::EngineError;
use crate::index::ScoredItem;

use super::{Qrels, RunResult};

pub fn read_qrels(path: impl AsRef<Path>) -> Result<Qrels, EngineError> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path).map_err(|e| EngineError::io(path.display().to_string(), e))?;
    parse_qrels(&raw)
}

pub fn parse_qrels(raw: &str) -> Result<Qrels, EngineError> {
    let mut qrels = Qrels::default();
    for (idx, line) in raw.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(EngineError::CorpusFormat {
                line: line_no,
                msg: format!("expected 4 whitespace-separated fields, got {}", fields.len()),
            });
        }
        let relevance: u8 = fields[3].parse().map_err(|_| EngineError::CorpusFormat {
            line: line_no,
            msg: format!("relevance '{}' is not 0 or 1", fields[3]),
        })?;
        if relevance > 1 {
            return Err(EngineError::CorpusFormat {
                line: line_no,
                msg: format!("relevance must be 0 or 1, got {relevance}"),
            });
        }
        if fields[0].is_empty() {
            return Err(EngineError::CorpusFormat {
                line: line_no,
                msg: "empty query_id".into(),
            });
        }
        let entry = qrels
            .judgments
            .entry(fields[0].to_string())
            .or_insert_with(BTreeSet::new);
        if relevance == 1 {
            entry.insert(fields[2].to_string());
        }
    }
    Ok(qrels)
}

pub fn read_run(path: impl AsRef<Path>) -> Result<RunResult, EngineError> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path).map_err(|e| EngineError::io(path.display().to_string(), e))?;
    let mut run = RunResult::default();
    let mut order: Vec<(String, usize, ScoredItem)> = Vec::new();
    for (idx, line) in raw.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(EngineError::CorpusFormat {
                line: line_no,
                msg: format!("expected 6 whitespace-separated fields, got {}", fields.len()),
            });
        }
        let rank: usize = fields[3].parse().map_err(|_| EngineError::CorpusFormat {
            line: line_no,
            msg: format!("bad rank '{}'", fields[3]),
        })?;
        let score: f64 = fields[4].parse().map_err(|_| EngineError::CorpusFormat {
            line: line_no,
            msg: format!("bad score '{}'", fields[4]),
        })?;
        order.push((
            fields[0].to_string(),
            rank,
            ScoredItem {
                chunk_id: fields[2].to_string(),
                score,
            },
        ));
    }
    order.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    for (query_id, _, item) in order {
        let list = run.rankings.entry(query_id.clone()).or_default();
        if list.iter().any(|i| i.chunk_id == item.chunk_id) {
            return Err(EngineError::InvalidInput(format!(
                "duplicate chunk '{}' in run for query '{query_id}'",
                item.chunk_id
            )));
        }
        list.push(item);
    }
    Ok(run)
}

pub fn write_run(run: &RunResult, tag: &str, path: impl AsRef<Path>) -> Result<(), EngineError> {
    let path = path.as_ref();
    let mut out = String::new();
    for (query_id, items) in &run.rankings {
        for (pos, item) in items.iter().enumerate() {
            out.push_str(&format!(
                "{query_id} Q0 {} {} {} {tag}\n",
                item.chunk_id,
                pos + 1,
                item.score
            ));
        }
    }
    std::fs::write(path, out).map_err(|e| EngineError::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qrels_parse_and_ignore_zero_relevance() {
        let qrels = parse_qrels("q1 0 a#0 1\nq1 0 b#0 0\nq2 0 c#0 1\n").unwrap();
        assert_eq!(qrels.judgments.len(), 2);
        assert!(qrels.relevant("q1").unwrap().contains("a#0"));
        assert!(!qrels.relevant("q1").unwrap().contains("b#0"));
    }

    #[test]
    fn qrels_reject_graded_relevance_and_short_lines() {
        assert!(parse_qrels("q1 0 a#0 2\n").is_err());
        assert!(parse_qrels("q1 a#0 1\n").is_err());
    }

    #[test]
    fn run_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.txt");
        let mut run = RunResult::default();
        run.rankings.insert(
            "q1".into(),
            vec![
                ScoredItem {
                    chunk_id: "a#0".into(),
                    score: 0.9,
                },
                ScoredItem {
                    chunk_id: "b#0".into(),
                    score: 0.5,
                },
            ],
        );
        write_run(&run, "toy", &path).unwrap();
        let loaded = read_run(&path).unwrap();
        assert_eq!(loaded, run);
    }

    #[test]
    fn run_rejects_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.txt");
        std::fs::write(&path, "q1 Q0 a#0 1 0.9 t\nq1 Q0 a#0 2 0.8 t\n").unwrap();
        assert!(read_run(&path).is_err());
    }
}
