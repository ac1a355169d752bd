//! Per-project measures: weighted out-degree, diversity of the out-neighbour
//! set in embedding space, and package-combination innovativeness.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::corpus::{Catalog, CoreSet, ImportSequence, InteractionKind, OwnerKind, ProjectSet};
use crate::embed::{EmbedError, EmbeddingMatrix};
use crate::netbuild::{degree_out, GraphError, ProjectGraph};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("ids missing from embedding vocabulary: {0:?}")]
    MissingEmbeddings(Vec<String>),
    #[error("project {0} is not in the catalog")]
    NotInCatalog(String),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("features.csv row {row}: {reason}")]
    Format { row: usize, reason: String },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiversityScore {
    pub value: f64,
    pub neighbor_count: usize,
}

fn unit_rows(ids: &[&str], emb: &EmbeddingMatrix) -> Result<Vec<Vec<f64>>, MetricsError> {
    let missing: Vec<String> = ids.iter().filter(|id| !emb.contains(id)).map(|s| s.to_string()).collect();
    if !missing.is_empty() {
        return Err(MetricsError::MissingEmbeddings(missing));
    }
    ids.iter()
        .map(|id| {
            let v: Vec<f64> = emb.get(id).expect("checked above").iter().map(|&x| f64::from(x)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(MetricsError::Embed(EmbedError::ZeroVector));
            }
            Ok(v.into_iter().map(|x| x / norm).collect())
        })
        .collect()
}

/// Mean of `-cos(v_i, v_j)` over unordered pairs of distinct ids, which equals
/// the ordered-pair mean because cosine is symmetric.
fn mean_pairwise_distance(ids: &[&str], emb: &EmbeddingMatrix) -> Result<f64, MetricsError> {
    let rows = unit_rows(ids, emb)?;
    let n = rows.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let sim: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
            total -= sim.clamp(-1.0, 1.0);
        }
    }
    Ok(total / (n * (n - 1) / 2) as f64)
}

/// Diversity of the distinct out-neighbours of `project` (weights ignored).
/// `Ok(None)` when there are fewer than two.
pub fn knowledge_diversity(
    graph: &ProjectGraph,
    emb: &EmbeddingMatrix,
    project: &str,
) -> Result<Option<DiversityScore>, MetricsError> {
    if !graph.contains(project) {
        return Err(GraphError::UnknownNode(project.to_string()).into());
    }
    let neighbors: Vec<&str> = graph.out_edges(project).map(|(d, _)| d).collect();
    if neighbors.len() < 2 {
        return Ok(None);
    }
    let value = mean_pairwise_distance(&neighbors, emb)?;
    Ok(Some(DiversityScore { value, neighbor_count: neighbors.len() }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Innovativeness {
    /// `None` when fewer than two packages have embeddings.
    pub value: Option<f64>,
    pub dropped: usize,
}

/// Mean atypicality `-cos(v_p, v_q)` over unordered pairs of imported packages.
/// Packages outside the embedding vocabulary are dropped and counted.
pub fn innovativeness(imports: &ImportSequence, pkg_emb: &EmbeddingMatrix) -> Result<Innovativeness, MetricsError> {
    let usable: Vec<&str> =
        imports.packages.iter().map(String::as_str).filter(|p| pkg_emb.contains(p)).collect();
    let dropped = imports.packages.len() - usable.len();
    let value = if usable.len() < 2 { None } else { Some(mean_pairwise_distance(&usable, pkg_emb)?) };
    Ok(Innovativeness { value, dropped })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectFeatureRow {
    pub project_id: String,
    pub deg_commit: f64,
    pub deg_issue: f64,
    pub deg_star: f64,
    pub div_commit: Option<f64>,
    pub div_issue: Option<f64>,
    pub div_star: Option<f64>,
    pub innov: Option<f64>,
    pub org_owned: u8,
    pub owner_stars: u64,
    pub n_core_devs: u64,
    pub n_packages: u64,
    pub year_creation: i32,
}

impl ProjectFeatureRow {
    pub fn degree(&self, kind: InteractionKind) -> f64 {
        match kind {
            InteractionKind::Commit => self.deg_commit,
            InteractionKind::Issue => self.deg_issue,
            InteractionKind::Star => self.deg_star,
        }
    }

    pub fn diversity(&self, kind: InteractionKind) -> Option<f64> {
        match kind {
            InteractionKind::Commit => self.div_commit,
            InteractionKind::Issue => self.div_issue,
            InteractionKind::Star => self.div_star,
        }
    }

    pub fn has_all_diversity(&self) -> bool {
        self.div_commit.is_some() && self.div_issue.is_some() && self.div_star.is_some()
    }
}

pub const FEATURE_HEADER: [&str; 13] = [
    "project",
    "deg_commit",
    "deg_issue",
    "deg_star",
    "div_commit",
    "div_issue",
    "div_star",
    "innov",
    "org_owned",
    "owner_stars",
    "n_core_devs",
    "n_packages",
    "year_creation",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureTable {
    pub rows: Vec<ProjectFeatureRow>,
    /// Packages dropped from innovativeness for lacking an embedding.
    pub dropped_packages: usize,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl FeatureTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Writes `features.csv`; missing values are empty fields.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), MetricsError> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(FEATURE_HEADER)?;
        for r in &self.rows {
            writer.write_record([
                r.project_id.clone(),
                r.deg_commit.to_string(),
                r.deg_issue.to_string(),
                r.deg_star.to_string(),
                opt(r.div_commit),
                opt(r.div_issue),
                opt(r.div_star),
                opt(r.innov),
                r.org_owned.to_string(),
                r.owner_stars.to_string(),
                r.n_core_devs.to_string(),
                r.n_packages.to_string(),
                r.year_creation.to_string(),
            ])?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(source: R) -> Result<Self, MetricsError> {
        let mut reader = csv::Reader::from_reader(source);
        if reader.headers()?.iter().ne(FEATURE_HEADER) {
            return Err(MetricsError::Format { row: 1, reason: "unexpected header".into() });
        }
        let mut rows = Vec::new();
        for (idx, rec) in reader.records().enumerate() {
            let rec = rec?;
            let row = idx + 2;
            let bad = |col: &str, e: String| MetricsError::Format { row, reason: format!("{col}: {e}") };
            let f = |i: usize| rec[i].parse::<f64>().map_err(|e| bad(FEATURE_HEADER[i], e.to_string()));
            let o = |i: usize| -> Result<Option<f64>, MetricsError> {
                if rec[i].is_empty() {
                    Ok(None)
                } else {
                    f(i).map(Some)
                }
            };
            let u = |i: usize| rec[i].parse::<u64>().map_err(|e| bad(FEATURE_HEADER[i], e.to_string()));
            rows.push(ProjectFeatureRow {
                project_id: rec[0].to_string(),
                deg_commit: f(1)?,
                deg_issue: f(2)?,
                deg_star: f(3)?,
                div_commit: o(4)?,
                div_issue: o(5)?,
                div_star: o(6)?,
                innov: o(7)?,
                org_owned: u(8)? as u8,
                owner_stars: u(9)?,
                n_core_devs: u(10)?,
                n_packages: u(11)?,
                year_creation: rec[12].parse().map_err(|e: std::num::ParseIntError| bad("year_creation", e.to_string()))?,
            });
        }
        Ok(Self { rows, dropped_packages: 0 })
    }
}

/// Network and embedding for one interaction kind.
pub struct NetworkView<'a> {
    pub graph: &'a ProjectGraph,
    pub embedding: &'a EmbeddingMatrix,
}

pub struct FeatureInputs<'a> {
    pub sample: &'a ProjectSet,
    pub catalog: &'a Catalog,
    pub cores: &'a CoreSet,
    pub networks: [NetworkView<'a>; 3],
    pub package_embedding: &'a EmbeddingMatrix,
    pub imports: &'a [ImportSequence],
}

/// One row per in-sample project, ascending by id. Missing values propagate;
/// nothing is imputed.
pub fn build_feature_table(inputs: &FeatureInputs<'_>) -> Result<FeatureTable, MetricsError> {
    let imports: BTreeMap<&str, &ImportSequence> = inputs.imports.iter().map(|s| (s.project_id.as_str(), s)).collect();
    let mut table = FeatureTable::default();
    for project in inputs.sample.ids() {
        let record = inputs.catalog.get(project).ok_or_else(|| MetricsError::NotInCatalog(project.to_string()))?;
        let mut deg = [0.0; 3];
        let mut div = [None; 3];
        for (k, net) in inputs.networks.iter().enumerate() {
            if net.graph.contains(project) {
                deg[k] = degree_out(net.graph, project)? as f64;
                div[k] = knowledge_diversity(net.graph, net.embedding, project)?.map(|d| d.value);
            }
        }
        let (innov, n_packages) = match imports.get(project) {
            Some(seq) => {
                let score = innovativeness(seq, inputs.package_embedding)?;
                table.dropped_packages += score.dropped;
                (score.value, seq.packages.len() as u64)
            }
            None => (None, 0),
        };
        table.rows.push(ProjectFeatureRow {
            project_id: project.to_string(),
            deg_commit: deg[0],
            deg_issue: deg[1],
            deg_star: deg[2],
            div_commit: div[0],
            div_issue: div[1],
            div_star: div[2],
            innov,
            org_owned: u8::from(record.owner_kind == OwnerKind::Organization),
            owner_stars: record.owner_stars_at_creation,
            n_core_devs: inputs.cores.get(project).map_or(0, |c| c.len() as u64),
            n_packages,
            year_creation: record.year_created(),
        });
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{DateTime, Utc};

    fn emb(rows: &[(&str, &[f32])]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(rows.iter().map(|(id, v)| (id.to_string(), v.to_vec())).collect()).unwrap()
    }

    fn fan(neighbors: &[&str]) -> ProjectGraph {
        let mut g = ProjectGraph::new(InteractionKind::Star, 12);
        for n in neighbors {
            g.add_edge_weight("a", n, 1);
        }
        g
    }

    fn seq(pkgs: &[&str]) -> ImportSequence {
        ImportSequence {
            project_id: "p".into(),
            packages: pkgs.iter().map(|s| s.to_string()).collect(),
            cutoff_ts: DateTime::<Utc>::MAX_UTC,
        }
    }

    #[test]
    fn diversity_closed_forms() {
        let e = emb(&[("b", &[1.0, 2.0]), ("c", &[1.0, 2.0]), ("d", &[-2.0, 1.0])]);
        let same = knowledge_diversity(&fan(&["b", "c"]), &e, "a").unwrap().unwrap();
        assert!((same.value + 1.0).abs() < 1e-12);
        assert_eq!(same.neighbor_count, 2);
        let orth = knowledge_diversity(&fan(&["b", "d"]), &e, "a").unwrap().unwrap();
        assert!(orth.value.abs() < 1e-12);
    }

    #[test]
    fn diversity_missing_and_errors() {
        let e = emb(&[("b", &[1.0])]);
        assert_eq!(knowledge_diversity(&fan(&["b"]), &e, "a").unwrap(), None);
        assert_eq!(knowledge_diversity(&fan(&["b"]), &e, "b").unwrap(), None);
        match knowledge_diversity(&fan(&["b", "x", "y"]), &e, "a") {
            Err(MetricsError::MissingEmbeddings(ids)) => assert_eq!(ids, ["x", "y"]),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(knowledge_diversity(&fan(&["b"]), &e, "zz"), Err(MetricsError::Graph(_))));
    }

    #[test]
    fn weights_do_not_matter() {
        let e = emb(&[("b", &[1.0, 0.2]), ("c", &[0.3, 1.0]), ("d", &[-1.0, 0.5])]);
        let g1 = fan(&["b", "c", "d"]);
        let mut g2 = g1.clone();
        g2.add_edge_weight("a", "b", 4);
        assert_eq!(knowledge_diversity(&g1, &e, "a").unwrap(), knowledge_diversity(&g2, &e, "a").unwrap());
    }

    #[test]
    fn innovativeness_cases() {
        let e = emb(&[("p", &[1.0, 0.0]), ("q", &[1.0, 0.0]), ("r", &[0.0, 3.0])]);
        assert!((innovativeness(&seq(&["p", "q"]), &e).unwrap().value.unwrap() + 1.0).abs() < 1e-12);
        assert!(innovativeness(&seq(&["p", "r"]), &e).unwrap().value.unwrap().abs() < 1e-12);
        let single = innovativeness(&seq(&["p"]), &e).unwrap();
        assert_eq!(single, Innovativeness { value: None, dropped: 0 });
        let partial = innovativeness(&seq(&["p", "zzz", "yyy"]), &e).unwrap();
        assert_eq!(partial, Innovativeness { value: None, dropped: 2 });
    }

    #[test]
    fn csv_round_trip_keeps_missing() {
        let table = FeatureTable {
            rows: vec![ProjectFeatureRow {
                project_id: "o/r".into(),
                deg_commit: 3.0,
                deg_issue: 0.0,
                deg_star: 12.0,
                div_commit: Some(-0.25),
                div_issue: None,
                div_star: Some(0.1 + 0.2),
                innov: None,
                org_owned: 1,
                owner_stars: 40,
                n_core_devs: 2,
                n_packages: 1,
                year_creation: 2017,
            }],
            dropped_packages: 0,
        };
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("project,deg_commit,deg_issue,deg_star,div_commit,div_issue,div_star,innov,org_owned,owner_stars,n_core_devs,n_packages,year_creation\n"));
        assert!(text.contains("o/r,3,0,12,-0.25,,0.30000000000000004,,1,40,2,1,2017"));
        assert_eq!(FeatureTable::read_csv(buf.as_slice()).unwrap(), table);
    }
}
