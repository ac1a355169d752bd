use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;

use serde::Serialize;

use super::{CorpusError, EventLog, InteractionKind};

/// Login patterns and an explicit denylist used to drop automated accounts.
///
/// Suffix patterns only match at the end of a login and bracketed tokens such as
/// `[bot]` match anywhere, so `abbott` survives a `-bot` rule while
/// `dependabot-bot` and `renovate[bot]` do not. Matching is case-insensitive.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BotRules {
    pub suffixes: Vec<String>,
    pub tokens: Vec<String>,
    pub denylist: BTreeSet<String>,
}

impl BotRules {
    pub fn defaults() -> Self {
        Self {
            suffixes: vec!["-bot".into(), "-robot".into()],
            tokens: vec!["[bot]".into()],
            denylist: BTreeSet::new(),
        }
    }

    pub fn with_denylist(mut self, ids: impl IntoIterator<Item = String>) -> Self {
        self.denylist.extend(ids);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.suffixes.is_empty() && self.tokens.is_empty() && self.denylist.is_empty()
    }

    pub fn matches(&self, actor: &str) -> bool {
        if self.denylist.contains(actor) {
            return true;
        }
        let lower = actor.to_lowercase();
        self.suffixes.iter().any(|s| lower.ends_with(&s.to_lowercase()))
            || self.tokens.iter().any(|t| lower.contains(&t.to_lowercase()))
    }
}

/// Reads a `bots.txt` denylist: one actor id per line, `#` comments allowed.
pub fn load_denylist<R: BufRead>(source: R) -> Result<BTreeSet<String>, CorpusError> {
    let mut ids = BTreeSet::new();
    for line in source.lines() {
        let line = line?;
        let id = line.trim();
        if !id.is_empty() && !id.starts_with('#') {
            ids.insert(id.to_string());
        }
    }
    Ok(ids)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RemovedActor {
    pub actor: String,
    pub events: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BotReport {
    pub removed: Vec<RemovedActor>,
    pub events_removed: usize,
}

pub fn filter_bots(log: &EventLog, rules: &BotRules) -> (EventLog, BotReport) {
    if rules.is_empty() {
        return (log.clone(), BotReport::default());
    }
    let mut verdicts: HashMap<&str, bool> = HashMap::new();
    let mut removed: BTreeMap<String, usize> = BTreeMap::new();
    let mut kept = Vec::with_capacity(log.events.len());
    for event in &log.events {
        let is_bot = *verdicts
            .entry(event.actor_id.as_str())
            .or_insert_with(|| rules.matches(&event.actor_id));
        if is_bot {
            *removed.entry(event.actor_id.clone()).or_default() += 1;
        } else {
            kept.push(event.clone());
        }
    }
    let events_removed = removed.values().sum();
    let report = BotReport {
        removed: removed.into_iter().map(|(actor, events)| RemovedActor { actor, events }).collect(),
        events_removed,
    };
    (EventLog { events: kept, rejected: log.rejected.clone() }, report)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ActiveActor {
    pub actor: String,
    pub commits: usize,
}

/// The `k` actors with the most commits, for manual review of accounts that
/// slip past the name heuristics. Ties are ordered by actor id.
pub fn top_committers(log: &EventLog, k: usize) -> Vec<ActiveActor> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for event in log.of_kind(InteractionKind::Commit) {
        *counts.entry(event.actor_id.as_str()).or_default() += 1;
    }
    let mut ranked: Vec<_> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked
        .into_iter()
        .take(k)
        .map(|(actor, commits)| ActiveActor { actor: actor.to_string(), commits })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::InteractionEvent;
    use chrono::TimeZone;

    fn ev(actor: &str, kind: InteractionKind) -> InteractionEvent {
        InteractionEvent {
            actor_id: actor.into(),
            project_id: "p".into(),
            kind,
            timestamp: chrono::Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap(),
        }
    }

    #[test]
    fn suffix_and_token_matching() {
        let rules = BotRules::defaults();
        assert!(rules.matches("dependabot-bot"));
        assert!(rules.matches("release-RoBoT"));
        assert!(rules.matches("renovate[bot]"));
        assert!(!rules.matches("abbott"));
        assert!(!rules.matches("robotics-fan"));
        assert!(!rules.matches("bot-builder"));
    }

    #[test]
    fn denylist_is_exact() {
        let rules = BotRules::default().with_denylist(["buildmaster".to_string()]);
        assert!(rules.matches("buildmaster"));
        assert!(!rules.matches("buildmaster2"));
    }

    #[test]
    fn removes_and_reports() {
        let log = EventLog::new(vec![
            ev("ann", InteractionKind::Commit),
            ev("ci-bot", InteractionKind::Commit),
            ev("ci-bot", InteractionKind::Star),
            ev("abbott", InteractionKind::Issue),
        ]);
        let (kept, report) = filter_bots(&log, &BotRules::defaults());
        assert_eq!(kept.len(), 2);
        assert_eq!(report.removed, vec![RemovedActor { actor: "ci-bot".into(), events: 2 }]);
        assert_eq!(report.events_removed, 2);
    }

    #[test]
    fn empty_rules_identity() {
        let log = EventLog::new(vec![ev("x-bot", InteractionKind::Commit), ev("ann", InteractionKind::Star)]);
        let (kept, report) = filter_bots(&log, &BotRules::default());
        assert_eq!(kept, log);
        assert!(report.removed.is_empty());
    }

    #[test]
    fn top_committers_ranked() {
        let log = EventLog::new(vec![
            ev("b", InteractionKind::Commit),
            ev("a", InteractionKind::Commit),
            ev("c", InteractionKind::Commit),
            ev("c", InteractionKind::Commit),
            ev("d", InteractionKind::Star),
        ]);
        let top = top_committers(&log, 2);
        assert_eq!(top[0], ActiveActor { actor: "c".into(), commits: 2 });
        assert_eq!(top[1].actor, "a");
    }

    #[test]
    fn denylist_file() {
        let ids = load_denylist("# header\nfoo\n\n  bar \n".as_bytes()).unwrap();
        assert_eq!(ids.into_iter().collect::<Vec<_>>(), ["bar", "foo"]);
    }
}
