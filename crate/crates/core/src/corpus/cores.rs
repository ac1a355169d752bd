use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::events::{format_timestamp, parse_timestamp};
use super::{CorpusError, EventLog, InteractionKind};

/// How core developers are picked out of a project's commit history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoreRule {
    /// At least 5% of all commits and at least 10 commits.
    Pct5Min10,
    /// The smallest set of top contributors covering 80% of commits.
    Cum80,
}

impl fmt::Display for CoreRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pct5Min10 => "pct5min10",
            Self::Cum80 => "cum80",
        })
    }
}

impl FromStr for CoreRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pct5min10" => Ok(Self::Pct5Min10),
            "cum80" => Ok(Self::Cum80),
            other => Err(format!("unknown core rule {other:?} (expected pct5min10 or cum80)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreDevAssignment {
    pub project_id: String,
    pub developer_id: String,
    pub first_commit_ts: DateTime<Utc>,
    pub commit_count: u64,
    pub commit_share: f64,
}

/// Core developers per focal project. A focal project may map to an empty list.
pub type CoreSet = BTreeMap<String, Vec<CoreDevAssignment>>;

struct DevTally {
    count: u64,
    first: DateTime<Utc>,
}

fn cores_from_commits<'a>(
    project: &str,
    commits: impl Iterator<Item = (&'a str, DateTime<Utc>)>,
    rule: CoreRule,
) -> Result<Vec<CoreDevAssignment>, CorpusError> {
    let mut tallies: HashMap<&str, DevTally> = HashMap::new();
    let mut total = 0u64;
    for (actor, ts) in commits {
        total += 1;
        let tally = tallies.entry(actor).or_insert(DevTally { count: 0, first: ts });
        tally.count += 1;
        tally.first = tally.first.min(ts);
    }
    if total == 0 {
        return Err(CorpusError::NoCommitHistory(project.to_string()));
    }
    let mut ranked: Vec<(&str, DevTally)> = tallies.into_iter().collect();
    ranked.sort_by(|a, b| b.1.count.cmp(&a.1.count).then_with(|| a.0.cmp(b.0)));

    // Integer comparisons keep the 5% and 80% thresholds exact.
    let chosen: Vec<&(&str, DevTally)> = match rule {
        CoreRule::Pct5Min10 => ranked.iter().filter(|(_, t)| t.count >= 10 && t.count * 20 >= total).collect(),
        CoreRule::Cum80 => {
            let mut cumulative = 0u64;
            let mut prefix = Vec::new();
            for entry in &ranked {
                prefix.push(entry);
                cumulative += entry.1.count;
                if cumulative * 5 >= total * 4 {
                    break;
                }
            }
            prefix
        }
    };
    let mut out: Vec<CoreDevAssignment> = chosen
        .into_iter()
        .map(|(dev, t)| CoreDevAssignment {
            project_id: project.to_string(),
            developer_id: dev.to_string(),
            first_commit_ts: t.first,
            commit_count: t.count,
            commit_share: t.count as f64 / total as f64,
        })
        .collect();
    out.sort_by(|a, b| a.developer_id.cmp(&b.developer_id));
    Ok(out)
}

/// Core developers of one project, sorted by developer id.
pub fn identify_core_developers(
    log: &EventLog,
    project: &str,
    rule: CoreRule,
) -> Result<Vec<CoreDevAssignment>, CorpusError> {
    let commits = log
        .of_kind(InteractionKind::Commit)
        .filter(|e| e.project_id == project)
        .map(|e| (e.actor_id.as_str(), e.timestamp));
    cores_from_commits(project, commits, rule)
}

/// Core developers for every project in `projects`, grouping the log once.
/// Projects without commits get an empty list; their ids are returned separately.
pub fn identify_all_core_developers<'a>(
    log: &EventLog,
    projects: impl IntoIterator<Item = &'a str>,
    rule: CoreRule,
) -> (CoreSet, Vec<String>) {
    let mut by_project: HashMap<&str, Vec<(&str, DateTime<Utc>)>> = HashMap::new();
    for e in log.of_kind(InteractionKind::Commit) {
        by_project.entry(e.project_id.as_str()).or_default().push((e.actor_id.as_str(), e.timestamp));
    }
    let mut cores = CoreSet::new();
    let mut without_history = Vec::new();
    for project in projects {
        let commits = by_project.get(project).map(|v| v.as_slice()).unwrap_or(&[]);
        match cores_from_commits(project, commits.iter().copied(), rule) {
            Ok(devs) => {
                cores.insert(project.to_string(), devs);
            }
            Err(_) => {
                without_history.push(project.to_string());
                cores.insert(project.to_string(), Vec::new());
            }
        }
    }
    (cores, without_history)
}

#[derive(Serialize, Deserialize)]
struct CoreRow {
    project: String,
    developer: String,
    first_commit_ts: String,
    commit_count: u64,
    commit_share: f64,
}

/// Writes `cores.csv`. Focal projects with no core developers appear as a row
/// with empty developer fields so the focal set survives a round trip.
pub fn write_cores_csv<W: Write>(cores: &CoreSet, out: W) -> Result<(), CorpusError> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["project", "developer", "first_commit_ts", "commit_count", "commit_share"])?;
    for (project, devs) in cores {
        if devs.is_empty() {
            writer.write_record([project.as_str(), "", "", "", ""])?;
        }
        for d in devs {
            writer.write_record([
                d.project_id.clone(),
                d.developer_id.clone(),
                format_timestamp(&d.first_commit_ts),
                d.commit_count.to_string(),
                d.commit_share.to_string(),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

pub fn read_cores_csv<R: Read>(source: R) -> Result<CoreSet, CorpusError> {
    let mut reader = csv::Reader::from_reader(source);
    let mut cores = CoreSet::new();
    for (idx, row) in reader.records().enumerate() {
        let row = row?;
        let bad = |reason: String| CorpusError::Cores { row: idx + 2, reason };
        let project = row.get(0).ok_or_else(|| bad("missing project".into()))?.to_string();
        let entry = cores.entry(project.clone()).or_default();
        let developer = row.get(1).unwrap_or("");
        if developer.is_empty() {
            continue;
        }
        let parsed: CoreRow = row.deserialize(None).map_err(|e| bad(e.to_string()))?;
        entry.push(CoreDevAssignment {
            project_id: project,
            developer_id: parsed.developer,
            first_commit_ts: parse_timestamp(&parsed.first_commit_ts).map_err(bad)?,
            commit_count: parsed.commit_count,
            commit_share: parsed.commit_share,
        });
    }
    Ok(cores)
}
