use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::metrics::{FeatureTable, ProjectFeatureRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CohortAxis {
    YearCreation,
    CoreTeamSize,
    Ownership,
}

impl CohortAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            CohortAxis::YearCreation => "year_creation",
            CohortAxis::CoreTeamSize => "core_team_size",
            CohortAxis::Ownership => "ownership",
        }
    }
}

impl fmt::Display for CohortAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CohortAxis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "year_creation" | "year" => Ok(CohortAxis::YearCreation),
            "core_team_size" | "team_size" => Ok(CohortAxis::CoreTeamSize),
            "ownership" => Ok(CohortAxis::Ownership),
            other => Err(format!("unknown cohort axis {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Key {
    Num(i64),
    AtLeast(i64),
    Owner(u8),
}

impl Key {
    fn label(&self) -> String {
        match self {
            Key::Num(v) => v.to_string(),
            Key::AtLeast(v) => format!(">={v}"),
            Key::Owner(0) => "individual".into(),
            Key::Owner(_) => "organization".into(),
        }
    }
}

fn key(row: &ProjectFeatureRow, axis: CohortAxis) -> Key {
    match axis {
        CohortAxis::YearCreation => Key::Num(row.year_creation.into()),
        CohortAxis::CoreTeamSize if row.n_core_devs >= 4 => Key::AtLeast(4),
        CohortAxis::CoreTeamSize => Key::Num(row.n_core_devs as i64),
        CohortAxis::Ownership => Key::Owner(u8::from(row.org_owned != 0)),
    }
}

/// Partitions rows by creation year, core team size (1, 2, 3, >=4) or owner
/// type. Cohorts come in ascending key order and keep the table's row order.
/// The ownership axis always yields both cohorts, possibly empty.
pub fn cohort_split(table: &FeatureTable, axis: CohortAxis) -> Vec<(String, FeatureTable)> {
    let mut groups: BTreeMap<Key, Vec<ProjectFeatureRow>> = BTreeMap::new();
    if axis == CohortAxis::Ownership {
        groups.insert(Key::Owner(0), Vec::new());
        groups.insert(Key::Owner(1), Vec::new());
    }
    for row in &table.rows {
        groups.entry(key(row, axis)).or_default().push(row.clone());
    }
    groups
        .into_iter()
        .map(|(k, rows)| (k.label(), FeatureTable { rows, dropped_packages: 0 }))
        .collect()
}
