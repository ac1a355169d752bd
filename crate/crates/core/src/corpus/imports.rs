use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::events::parse_timestamp;
use super::CorpusError;

/// Packages a project imported before `cutoff_ts`, de-duplicated in first-seen order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImportSequence {
    pub project_id: String,
    pub packages: Vec<String>,
    pub cutoff_ts: DateTime<Utc>,
}

#[derive(Serialize, Deserialize)]
struct ImportRecord {
    project: String,
    packages: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ts: Option<String>,
}

/// Reads `imports.jsonl`.
///
/// A project may appear on several lines; their packages are concatenated in
/// file order. Lines carrying a `ts` at or after `cutoff` are dropped, lines
/// without one are always kept. Any malformed line is fatal. Output is sorted
/// by project id.
pub fn load_imports<R: BufRead>(source: R, cutoff: DateTime<Utc>) -> Result<Vec<ImportSequence>, CorpusError> {
    let mut merged: BTreeMap<String, (Vec<String>, HashSet<String>)> = BTreeMap::new();
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| CorpusError::Imports { line: idx + 1, reason };
        let record: ImportRecord = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        if record.project.is_empty() {
            return Err(bad("empty project".into()));
        }
        let entry = merged.entry(record.project).or_default();
        if let Some(ts) = &record.ts {
            if parse_timestamp(ts).map_err(bad)? >= cutoff {
                continue;
            }
        }
        for pkg in record.packages {
            if !pkg.is_empty() && entry.1.insert(pkg.clone()) {
                entry.0.push(pkg);
            }
        }
    }
    Ok(merged
        .into_iter()
        .map(|(project_id, (packages, _))| ImportSequence { project_id, packages, cutoff_ts: cutoff })
        .collect())
}

/// Writes the cutoff-applied sequences back out without timestamps.
pub fn write_imports<W: Write>(imports: &[ImportSequence], mut out: W) -> Result<(), CorpusError> {
    for seq in imports {
        let record = ImportRecord { project: seq.project_id.clone(), packages: seq.packages.clone(), ts: None };
        let line = serde_json::to_string(&record).map_err(|e| CorpusError::Imports { line: 0, reason: e.to_string() })?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn cutoff() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2022, 1, 1, 0, 0, 0).unwrap()
    }

    #[test]
    fn dedup_first_seen_and_cutoff() {
        let text = r#"{"project":"p","packages":["numpy","requests","numpy"]}
{"project":"q","packages":["flask"],"ts":"2019-03-01T00:00:00Z"}
{"project":"p","packages":["pandas","requests"],"ts":"2021-12-31T23:59:59Z"}
{"project":"p","packages":["torch"],"ts":"2022-01-01T00:00:00Z"}
"#;
        let seqs = load_imports(text.as_bytes(), cutoff()).unwrap();
        assert_eq!(seqs.len(), 2);
        assert_eq!(seqs[0].project_id, "p");
        assert_eq!(seqs[0].packages, ["numpy", "requests", "pandas"]);
        assert_eq!(seqs[1].packages, ["flask"]);
    }

    #[test]
    fn all_late_records_leave_empty_sequence() {
        let text = r#"{"project":"p","packages":["a"],"ts":"2023-01-01T00:00:00Z"}"#;
        let seqs = load_imports(text.as_bytes(), cutoff()).unwrap();
        assert!(seqs[0].packages.is_empty());
    }

    #[test]
    fn malformed_is_fatal() {
        assert!(load_imports("{\"project\":1}".as_bytes(), cutoff()).is_err());
    }

    #[test]
    fn write_then_read() {
        let seqs = vec![ImportSequence { project_id: "a".into(), packages: vec!["x".into(), "y".into()], cutoff_ts: cutoff() }];
        let mut buf = Vec::new();
        write_imports(&seqs, &mut buf).unwrap();
        assert_eq!(load_imports(buf.as_slice(), cutoff()).unwrap(), seqs);
    }
}
