use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Timelike, Utc};
use serde::{Deserialize, Serialize};

use super::CorpusError;

/// The three developer actions that become project-to-project ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InteractionKind {
    Commit,
    Issue,
    Star,
}

impl InteractionKind {
    pub const ALL: [InteractionKind; 3] = [Self::Commit, Self::Issue, Self::Star];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Commit => "commit",
            Self::Issue => "issue",
            Self::Star => "star",
        }
    }
}

impl fmt::Display for InteractionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InteractionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "commit" => Ok(Self::Commit),
            "issue" => Ok(Self::Issue),
            "star" => Ok(Self::Star),
            other => Err(format!("unknown interaction kind {other:?}")),
        }
    }
}

/// One developer action on a project.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionEvent {
    pub actor_id: String,
    pub project_id: String,
    pub kind: InteractionKind,
    pub timestamp: DateTime<Utc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventRecord<'a> {
    actor: std::borrow::Cow<'a, str>,
    project: std::borrow::Cow<'a, str>,
    kind: InteractionKind,
    ts: std::borrow::Cow<'a, str>,
}

/// Parses an RFC 3339 timestamp and truncates it to whole seconds in UTC.
pub fn parse_timestamp(raw: &str) -> Result<DateTime<Utc>, String> {
    let parsed = DateTime::parse_from_rfc3339(raw).map_err(|e| format!("bad timestamp {raw:?}: {e}"))?;
    let utc = parsed.with_timezone(&Utc);
    Ok(utc.with_nanosecond(0).unwrap_or(utc))
}

pub fn format_timestamp(ts: &DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::Secs, true)
}

impl InteractionEvent {
    fn from_line(line: &str) -> Result<Self, String> {
        let record: EventRecord<'_> = serde_json::from_str(line).map_err(|e| e.to_string())?;
        if record.actor.is_empty() {
            return Err("empty actor".into());
        }
        if record.project.is_empty() {
            return Err("empty project".into());
        }
        Ok(Self {
            actor_id: record.actor.into_owned(),
            project_id: record.project.into_owned(),
            kind: record.kind,
            timestamp: parse_timestamp(&record.ts)?,
        })
    }

    /// Serializes as one `events.jsonl` line (no trailing newline).
    pub fn to_line(&self) -> String {
        let record = EventRecord {
            actor: self.actor_id.as_str().into(),
            project: self.project_id.as_str().into(),
            kind: self.kind,
            ts: format_timestamp(&self.timestamp).into(),
        };
        serde_json::to_string(&record).expect("event record serializes")
    }
}

/// A line of input that failed the events schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RejectedLine {
    pub line_no: usize,
    pub reason: String,
}

/// Events in input order plus the lines that were rejected while loading.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    pub events: Vec<InteractionEvent>,
    pub rejected: Vec<RejectedLine>,
}

impl EventLog {
    pub fn new(events: Vec<InteractionEvent>) -> Self {
        Self { events, rejected: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn of_kind(&self, kind: InteractionKind) -> impl Iterator<Item = &InteractionEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for event in &self.events {
            writeln!(out, "{}", event.to_line())?;
        }
        Ok(())
    }
}

/// Reads `events.jsonl`. Blank lines are skipped; malformed lines are recorded
/// in [`EventLog::rejected`] and do not abort the load.
pub fn load_events<R: BufRead>(source: R) -> Result<EventLog, CorpusError> {
    let mut log = EventLog::default();
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        match InteractionEvent::from_line(trimmed) {
            Ok(event) => log.events.push(event),
            Err(reason) => log.rejected.push(RejectedLine { line_no: idx + 1, reason }),
        }
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: &str = r#"{"actor":"ann","project":"p1","kind":"commit","ts":"2015-03-01T10:00:00Z"}"#;
    const B: &str = r#"{"actor":"bob","project":"p2","kind":"issue","ts":"2014-01-01T00:00:00Z"}"#;
    const C: &str = r#"{"actor":"cat","project":"p1","kind":"star","ts":"2016-07-04T12:30:00Z"}"#;

    #[test]
    fn empty_stream() {
        let log = load_events("".as_bytes()).unwrap();
        assert!(log.is_empty());
        assert!(log.rejected.is_empty());
    }

    #[test]
    fn order_preserved() {
        let input = format!("{A}\n{B}\n{C}\n");
        let log = load_events(input.as_bytes()).unwrap();
        let actors: Vec<_> = log.events.iter().map(|e| e.actor_id.as_str()).collect();
        assert_eq!(actors, ["ann", "bob", "cat"]);
        assert!(log.rejected.is_empty());
    }

    #[test]
    fn unknown_kind_rejected() {
        let fork = r#"{"actor":"dan","project":"p3","kind":"fork","ts":"2016-07-04T12:30:00Z"}"#;
        let input = format!("{A}\n{fork}\n{B}\n");
        let log = load_events(input.as_bytes()).unwrap();
        assert_eq!(log.len(), 2);
        assert_eq!(log.rejected.len(), 1);
        assert_eq!(log.rejected[0].line_no, 2);
    }

    #[test]
    fn bad_fields_rejected() {
        let lines = [
            r#"{"actor":"","project":"p","kind":"star","ts":"2016-07-04T12:30:00Z"}"#,
            r#"{"actor":"a","project":"","kind":"star","ts":"2016-07-04T12:30:00Z"}"#,
            r#"{"actor":"a","project":"p","kind":"star","ts":"yesterday"}"#,
            r#"{"actor":"a","project":"p","kind":"star"}"#,
            "not json",
        ];
        let log = load_events(lines.join("\n").as_bytes()).unwrap();
        assert!(log.is_empty());
        assert_eq!(log.rejected.len(), 5);
    }

    #[test]
    fn offsets_normalised_to_utc() {
        let line = r#"{"actor":"a","project":"p","kind":"star","ts":"2016-07-04T14:30:00+02:00"}"#;
        let log = load_events(line.as_bytes()).unwrap();
        assert_eq!(format_timestamp(&log.events[0].timestamp), "2016-07-04T12:30:00Z");
    }

    #[test]
    fn reserialization_matches_input() {
        let input = format!("{A}\n{B}\n{C}\n");
        let log = load_events(input.as_bytes()).unwrap();
        let mut out = Vec::new();
        log.write_jsonl(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), input);
    }
}
