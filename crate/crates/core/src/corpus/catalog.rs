use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{DateTime, Datelike, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use super::events::{format_timestamp, parse_timestamp};
use super::CorpusError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OwnerKind {
    Individual,
    Organization,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectRecord {
    pub project_id: String,
    pub created_at: DateTime<Utc>,
    pub is_fork: bool,
    pub n_python_files: u64,
    pub total_commits: u64,
    pub owner_kind: OwnerKind,
    pub owner_stars_at_creation: u64,
}

impl ProjectRecord {
    pub fn year_created(&self) -> i32 {
        self.created_at.year()
    }
}

#[derive(Serialize, Deserialize)]
struct CatalogRow {
    project: String,
    created_at: String,
    is_fork: bool,
    n_python_files: u64,
    total_commits: u64,
    owner_kind: OwnerKind,
    owner_stars_at_creation: u64,
}

/// Project catalog keyed by id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Catalog {
    records: BTreeMap<String, ProjectRecord>,
}

impl Catalog {
    pub fn from_records(records: impl IntoIterator<Item = ProjectRecord>) -> Self {
        Self { records: records.into_iter().map(|r| (r.project_id.clone(), r)).collect() }
    }

    pub fn get(&self, id: &str) -> Option<&ProjectRecord> {
        self.records.get(id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records in ascending project id order.
    pub fn iter(&self) -> impl Iterator<Item = &ProjectRecord> {
        self.records.values()
    }

    /// Reads `projects.csv`. Unlike the event stream, any bad row is fatal.
    pub fn read_csv<R: Read>(source: R) -> Result<Self, CorpusError> {
        let mut reader = csv::Reader::from_reader(source);
        let mut records = BTreeMap::new();
        for (idx, row) in reader.deserialize::<CatalogRow>().enumerate() {
            let row = row.map_err(|e| CorpusError::Catalog { row: idx + 2, reason: e.to_string() })?;
            let created_at = parse_timestamp(&row.created_at)
                .map_err(|reason| CorpusError::Catalog { row: idx + 2, reason })?;
            if row.project.is_empty() {
                return Err(CorpusError::Catalog { row: idx + 2, reason: "empty project id".into() });
            }
            let record = ProjectRecord {
                project_id: row.project,
                created_at,
                is_fork: row.is_fork,
                n_python_files: row.n_python_files,
                total_commits: row.total_commits,
                owner_kind: row.owner_kind,
                owner_stars_at_creation: row.owner_stars_at_creation,
            };
            if records.insert(record.project_id.clone(), record).is_some() {
                return Err(CorpusError::Catalog { row: idx + 2, reason: "duplicate project id".into() });
            }
        }
        Ok(Self { records })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), CorpusError> {
        let mut writer = csv::Writer::from_writer(out);
        for r in self.records.values() {
            writer
                .serialize(CatalogRow {
                    project: r.project_id.clone(),
                    created_at: format_timestamp(&r.created_at),
                    is_fork: r.is_fork,
                    n_python_files: r.n_python_files,
                    total_commits: r.total_commits,
                    owner_kind: r.owner_kind,
                    owner_stars_at_creation: r.owner_stars_at_creation,
                })
                .map_err(|e| CorpusError::Catalog { row: 0, reason: e.to_string() })?;
        }
        writer.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionRules {
    pub exclude_forks: bool,
    pub min_total_commits: u64,
    /// Projects need strictly more Python files than this.
    pub min_python_files_exclusive: u64,
    pub created_from: DateTime<Utc>,
    pub created_until: DateTime<Utc>,
}

impl Default for SelectionRules {
    fn default() -> Self {
        Self {
            exclude_forks: true,
            min_total_commits: 10,
            min_python_files_exclusive: 10,
            created_from: Utc.with_ymd_and_hms(2008, 1, 1, 0, 0, 0).unwrap(),
            created_until: Utc.with_ymd_and_hms(2022, 12, 31, 23, 59, 59).unwrap(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ExclusionCounts {
    pub fork: usize,
    pub too_few_commits: usize,
    pub too_few_python_files: usize,
    pub created_out_of_range: usize,
    /// Projects failing at least one rule; a project can add to several reasons.
    pub excluded: usize,
}

/// The in-sample projects, ascending by id, with the exclusion tally.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProjectSet {
    pub projects: Vec<ProjectRecord>,
    pub exclusions: ExclusionCounts,
}

impl ProjectSet {
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.projects.iter().map(|p| p.project_id.as_str())
    }

    pub fn contains(&self, id: &str) -> bool {
        self.projects.binary_search_by(|p| p.project_id.as_str().cmp(id)).is_ok()
    }

    pub fn len(&self) -> usize {
        self.projects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projects.is_empty()
    }
}

pub fn select_projects(catalog: &Catalog, rules: &SelectionRules) -> ProjectSet {
    let mut set = ProjectSet::default();
    for record in catalog.iter() {
        let mut ok = true;
        if rules.exclude_forks && record.is_fork {
            set.exclusions.fork += 1;
            ok = false;
        }
        if record.total_commits < rules.min_total_commits {
            set.exclusions.too_few_commits += 1;
            ok = false;
        }
        if record.n_python_files <= rules.min_python_files_exclusive {
            set.exclusions.too_few_python_files += 1;
            ok = false;
        }
        if record.created_at < rules.created_from || record.created_at > rules.created_until {
            set.exclusions.created_out_of_range += 1;
            ok = false;
        }
        if ok {
            set.projects.push(record.clone());
        } else {
            set.exclusions.excluded += 1;
        }
    }
    set
}
