//! In-memory stage bodies. The file-backed runner and the acceptance checks
//! both go through these.

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::corpus::{
    filter_bots, identify_all_core_developers, select_projects, BotReport, BotRules, Catalog, CoreRule, CoreSet,
    EventLog, ExclusionCounts, ImportSequence, InteractionKind, ProjectSet, SelectionRules,
};
use crate::embed::{
    build_package_corpus, sample_walks, train_skipgram_with_report, Corpus, EmbedError, EmbeddingMatrix, SkipGramConfig,
    WalkConfig,
};
use crate::metrics::{build_feature_table, FeatureInputs, FeatureTable, MetricsError, NetworkView, ProjectFeatureRow};
use crate::netbuild::{project_network, ProjectGraph};
use crate::stats::{
    cohort_split, group_ttest, ols_fixed_effects, pca, pca_scores, standardize_log, CohortAxis, ModelFrame, PcaResult,
    RegressionResult, RegressionSpec, StatsError, TTestResult,
};

use super::config::ModelId;

pub const RESPONSE: &str = "innov";
pub const FE_COLUMN: &str = "year_creation";
pub const DEGREE_COLUMNS: [&str; 3] = ["deg_commit", "deg_issue", "deg_star"];
pub const DIVERSITY_COLUMNS: [&str; 3] = ["div_commit", "div_issue", "div_star"];
pub const CONTROLS: [&str; 4] = ["org_owned", "log_owner_stars", "log_n_core_devs", "log_n_packages"];

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub events: EventLog,
    pub bots: BotReport,
    pub sample: ProjectSet,
    pub cores: CoreSet,
    pub without_history: Vec<String>,
    pub imports: Vec<ImportSequence>,
    pub events_after_cutoff: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestReport {
    pub events_read: usize,
    pub rejected_lines: usize,
    pub events_after_cutoff: usize,
    pub bot_events_removed: usize,
    pub bots_removed: Vec<String>,
    pub catalog_rows: usize,
    pub exclusions: ExclusionCounts,
    pub sample_size: usize,
    pub core_rule: String,
    pub projects_with_cores: usize,
    pub core_developers: usize,
    pub projects_without_history: Vec<String>,
    pub projects_with_imports: usize,
}

/// Drops events at or after the cutoff, removes bot accounts, selects the
/// sample and identifies its core developers. Imports are restricted to the
/// sample.
pub fn ingest(
    raw: &EventLog,
    catalog: &Catalog,
    imports: Vec<ImportSequence>,
    bots: &BotRules,
    rule: CoreRule,
    cutoff: DateTime<Utc>,
) -> Ingested {
    let kept: Vec<_> = raw.events.iter().filter(|e| e.timestamp < cutoff).cloned().collect();
    let events_after_cutoff = raw.events.len() - kept.len();
    let mut before = EventLog::new(kept);
    before.rejected = raw.rejected.clone();
    let (events, report) = filter_bots(&before, bots);
    let sample = select_projects(catalog, &SelectionRules::default());
    let (cores, without_history) = identify_all_core_developers(&events, sample.ids(), rule);
    let imports = imports.into_iter().filter(|s| sample.contains(&s.project_id)).collect();
    Ingested { events, bots: report, sample, cores, without_history, imports, events_after_cutoff }
}

impl Ingested {
    pub fn report(&self, events_read: usize, catalog_rows: usize, rule: CoreRule) -> IngestReport {
        IngestReport {
            events_read,
            rejected_lines: self.events.rejected.len(),
            events_after_cutoff: self.events_after_cutoff,
            bot_events_removed: self.bots.events_removed,
            bots_removed: self.bots.removed.iter().map(|r| r.actor.clone()).collect(),
            catalog_rows,
            exclusions: self.sample.exclusions.clone(),
            sample_size: self.sample.len(),
            core_rule: rule.to_string(),
            projects_with_cores: self.cores.values().filter(|v| !v.is_empty()).count(),
            core_developers: self.cores.values().map(Vec::len).sum(),
            projects_without_history: self.without_history.clone(),
            projects_with_imports: self.imports.len(),
        }
    }
}

/// Commit, issue and star networks, built concurrently.
pub fn build_networks(events: &EventLog, cores: &CoreSet, window_months: u32) -> [ProjectGraph; 3] {
    std::thread::scope(|s| {
        let handles = InteractionKind::ALL.map(|kind| s.spawn(move || project_network(events, cores, kind, window_months)));
        handles.map(|h| h.join().expect("network build panicked"))
    })
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed for one randomised step. Walks and training of each corpus get
/// separate salts so changing one setting never shifts another stream.
pub fn derive_seed(seed: u64, salt: &str) -> u64 {
    salt.bytes().fold(splitmix(seed), |acc, b| splitmix(acc ^ u64::from(b)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingSummary {
    pub corpus: String,
    pub tokens: usize,
    pub sequences: usize,
    pub pairs_per_epoch: u64,
    pub epoch_losses: Vec<f64>,
    pub walk_seed: Option<u64>,
    pub train_seed: u64,
}

pub fn train_node_embedding(
    graph: &ProjectGraph,
    walks: &WalkConfig,
    sg: &SkipGramConfig,
    seed: u64,
) -> Result<(EmbeddingMatrix, TrainingSummary), EmbedError> {
    let label = graph.kind.as_str();
    let walk_cfg = WalkConfig { seed: derive_seed(seed, &format!("walks/{label}")), ..*walks };
    let walk_set = sample_walks(graph, &walk_cfg)?;
    let corpus = Corpus::from_walks(&walk_set);
    let cfg = SkipGramConfig { seed: derive_seed(seed, &format!("skipgram/{label}")), ..*sg };
    let (emb, report) = train_skipgram_with_report(&corpus, &cfg)?;
    let summary = TrainingSummary {
        corpus: label.to_string(),
        tokens: corpus.tokens.len(),
        sequences: corpus.sequences.len(),
        pairs_per_epoch: report.pairs_per_epoch,
        epoch_losses: report.epoch_losses,
        walk_seed: Some(walk_cfg.seed),
        train_seed: cfg.seed,
    };
    Ok((emb, summary))
}

pub fn train_package_embedding(
    imports: &[ImportSequence],
    sg: &SkipGramConfig,
    seed: u64,
) -> Result<(EmbeddingMatrix, TrainingSummary), EmbedError> {
    let corpus = build_package_corpus(imports);
    let cfg = SkipGramConfig { seed: derive_seed(seed, "skipgram/packages"), ..*sg };
    let (emb, report) = train_skipgram_with_report(&corpus, &cfg)?;
    let summary = TrainingSummary {
        corpus: "packages".into(),
        tokens: corpus.tokens.len(),
        sequences: corpus.sequences.len(),
        pairs_per_epoch: report.pairs_per_epoch,
        epoch_losses: report.epoch_losses,
        walk_seed: None,
        train_seed: cfg.seed,
    };
    Ok((emb, summary))
}

pub struct Embeddings {
    pub nodes: [EmbeddingMatrix; 3],
    pub packages: EmbeddingMatrix,
    pub summaries: Vec<TrainingSummary>,
}

/// Trains the three node embeddings and the package embedding concurrently.
pub fn train_all_embeddings(
    graphs: &[ProjectGraph; 3],
    imports: &[ImportSequence],
    walks: &WalkConfig,
    node_cfgs: &[SkipGramConfig; 3],
    package_cfg: &SkipGramConfig,
    seed: u64,
) -> Result<Embeddings, EmbedError> {
    let (nodes, packages) = std::thread::scope(|s| {
        let handles: Vec<_> = graphs
            .iter()
            .zip(node_cfgs)
            .map(|(g, cfg)| s.spawn(move || train_node_embedding(g, walks, cfg, seed)))
            .collect();
        let packages = train_package_embedding(imports, package_cfg, seed);
        let nodes: Vec<_> = handles.into_iter().map(|h| h.join().expect("training panicked")).collect();
        (nodes, packages)
    });
    let mut matrices = Vec::with_capacity(3);
    let mut summaries = Vec::with_capacity(4);
    for r in nodes {
        let (m, s) = r?;
        matrices.push(m);
        summaries.push(s);
    }
    let (packages, s) = packages?;
    summaries.push(s);
    let nodes: [EmbeddingMatrix; 3] = matrices.try_into().map_err(|_| EmbedError::EmptyGraph)?;
    Ok(Embeddings { nodes, packages, summaries })
}

pub fn features(
    ingested: &Ingested,
    catalog: &Catalog,
    graphs: &[ProjectGraph; 3],
    embeddings: &Embeddings,
) -> Result<FeatureTable, MetricsError> {
    build_feature_table(&FeatureInputs {
        sample: &ingested.sample,
        catalog,
        cores: &ingested.cores,
        networks: [0, 1, 2].map(|k| NetworkView { graph: &graphs[k], embedding: &embeddings.nodes[k] }),
        package_embedding: &embeddings.packages,
        imports: &ingested.imports,
    })
}

/// Rows a model is estimated on: innovativeness present, plus all three
/// diversity values for Models II to IV.
pub fn model_rows(table: &FeatureTable, model: ModelId) -> Vec<&ProjectFeatureRow> {
    table
        .rows
        .iter()
        .filter(|r| r.innov.is_some() && (!model.needs_diversity_rows() || r.has_all_diversity()))
        .collect()
}

fn fit_components(
    rows: &[&ProjectFeatureRow],
    names: [&str; 3],
    log: bool,
    value: impl Fn(&ProjectFeatureRow, usize) -> f64,
) -> Result<(PcaResult, DMatrix<f64>), StatsError> {
    let raw = DMatrix::from_fn(rows.len(), 3, |i, j| value(rows[i], j));
    let stdz = standardize_log(&raw, &[log; 3], &names)?;
    let result = pca(&stdz)?;
    let scores = pca_scores(&result, &stdz.data)?;
    Ok((result, scores))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelFit {
    pub model: ModelId,
    /// Principal components are fit on the model's own estimation sample.
    pub pca_sample: String,
    pub degree_pca: Option<PcaResult>,
    pub diversity_pca: Option<PcaResult>,
    pub regression: RegressionResult,
}

pub struct ModelData {
    pub model: ModelId,
    pub frame: ModelFrame,
    pub rows: Vec<ProjectFeatureRow>,
    pub degree_pca: Option<PcaResult>,
    pub diversity_pca: Option<PcaResult>,
}

impl ModelData {
    pub fn regressors(&self) -> Vec<&'static str> {
        let mut r = interest_terms(self.model);
        r.extend(CONTROLS);
        r
    }
}

pub fn interest_terms(model: ModelId) -> Vec<&'static str> {
    let mut r = Vec::new();
    if model.uses_degree() {
        r.extend(["deg_ave", "deg_weakness"]);
    }
    if model.uses_diversity() {
        r.extend(["div_ave", "div_weakness"]);
    }
    r
}

/// Estimation frame for a model: component scores for the variables of
/// interest, log-transformed controls and the creation year.
pub fn model_data(table: &FeatureTable, model: ModelId) -> Result<ModelData, StatsError> {
    let rows = model_rows(table, model);
    let mut frame = ModelFrame::new(rows.iter().map(|r| r.project_id.clone()).collect());
    let mut degree_pca = None;
    let mut diversity_pca = None;
    if model.uses_degree() {
        let (res, scores) = fit_components(&rows, DEGREE_COLUMNS, true, |r, j| match j {
            0 => r.deg_commit,
            1 => r.deg_issue,
            _ => r.deg_star,
        })?;
        frame.insert_complete("deg_ave", scores.column(0).iter().copied().collect())?;
        frame.insert_complete("deg_weakness", scores.column(1).iter().copied().collect())?;
        degree_pca = Some(res);
    }
    if model.uses_diversity() {
        let (res, scores) = fit_components(&rows, DIVERSITY_COLUMNS, false, |r, j| {
            [r.div_commit, r.div_issue, r.div_star][j].expect("filtered to complete rows")
        })?;
        frame.insert_complete("div_ave", scores.column(0).iter().copied().collect())?;
        frame.insert_complete("div_weakness", scores.column(1).iter().copied().collect())?;
        diversity_pca = Some(res);
    }
    frame.insert(RESPONSE, rows.iter().map(|r| r.innov).collect())?;
    frame.insert_complete("org_owned", rows.iter().map(|r| f64::from(r.org_owned)).collect())?;
    frame.insert_complete("log_owner_stars", rows.iter().map(|r| (r.owner_stars as f64).ln_1p()).collect())?;
    frame.insert_complete("log_n_core_devs", rows.iter().map(|r| (r.n_core_devs as f64).ln_1p()).collect())?;
    frame.insert_complete("log_n_packages", rows.iter().map(|r| (r.n_packages as f64).ln_1p()).collect())?;
    frame.insert_complete(FE_COLUMN, rows.iter().map(|r| f64::from(r.year_creation)).collect())?;
    Ok(ModelData { model, frame, rows: rows.into_iter().cloned().collect(), degree_pca, diversity_pca })
}

pub fn fit_model(table: &FeatureTable, model: ModelId) -> Result<ModelFit, StatsError> {
    let data = model_data(table, model)?;
    let spec = RegressionSpec::new(RESPONSE, &data.regressors(), Some(FE_COLUMN));
    let regression = ols_fixed_effects(&data.frame, &spec)?;
    Ok(ModelFit {
        model,
        pca_sample: format!("model {model} estimation sample ({} rows)", data.rows.len()),
        degree_pca: data.degree_pca,
        diversity_pca: data.diversity_pca,
        regression,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortFit {
    pub axis: CohortAxis,
    pub label: String,
    pub rows: usize,
    pub regression: Option<RegressionResult>,
    pub error: Option<String>,
}

/// Refits a model inside each cohort, reusing the component scores of the
/// full estimation sample. The control that is constant within a cohort
/// (team size, ownership, or the year effect) is left out.
pub fn fit_cohorts(table: &FeatureTable, model: ModelId, axis: CohortAxis) -> Result<Vec<CohortFit>, StatsError> {
    let data = model_data(table, model)?;
    let sample = FeatureTable { rows: data.rows.clone(), dropped_packages: 0 };
    let cohorts = cohort_split(&sample, axis);
    let mut regressors = data.regressors();
    let fe = match axis {
        CohortAxis::YearCreation => None,
        CohortAxis::CoreTeamSize => {
            regressors.retain(|r| *r != "log_n_core_devs");
            Some(FE_COLUMN)
        }
        CohortAxis::Ownership => {
            regressors.retain(|r| *r != "org_owned");
            Some(FE_COLUMN)
        }
    };
    let spec = RegressionSpec::new(RESPONSE, &regressors, fe);
    let index: std::collections::HashMap<&str, usize> =
        data.frame.row_ids().iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let fits = std::thread::scope(|s| {
        let handles: Vec<_> = cohorts
            .iter()
            .map(|(label, sub)| {
                let (spec, index, frame) = (&spec, &index, &data.frame);
                s.spawn(move || {
                    let rows: Vec<usize> = sub.rows.iter().map(|r| index[r.project_id.as_str()]).collect();
                    let result = ols_fixed_effects(&frame.select_rows(&rows), spec);
                    CohortFit {
                        axis,
                        label: label.clone(),
                        rows: rows.len(),
                        error: result.as_ref().err().map(|e| e.to_string()),
                        regression: result.ok(),
                    }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("cohort fit panicked")).collect()
    });
    Ok(fits)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AwesomeReport {
    pub listed: usize,
    pub matched: usize,
    pub ttest: TTestResult,
    pub regression: RegressionResult,
}

/// Compares innovativeness of listed projects with the rest: a Welch test and
/// a regression on the membership flag with the usual controls.
pub fn awesome_analysis(table: &FeatureTable, listed: &BTreeSet<String>) -> Result<AwesomeReport, StatsError> {
    let rows: Vec<&ProjectFeatureRow> = table.rows.iter().filter(|r| r.innov.is_some()).collect();
    let flags: Vec<bool> = rows.iter().map(|r| listed.contains(&r.project_id)).collect();
    let scores: Vec<f64> = rows.iter().map(|r| r.innov.expect("filtered")).collect();
    let ttest = group_ttest(&scores, &flags)?;
    let mut frame = ModelFrame::new(rows.iter().map(|r| r.project_id.clone()).collect());
    frame.insert_complete(RESPONSE, scores)?;
    frame.insert_complete("is_awesome", flags.iter().map(|f| f64::from(u8::from(*f))).collect())?;
    frame.insert_complete("org_owned", rows.iter().map(|r| f64::from(r.org_owned)).collect())?;
    frame.insert_complete("log_owner_stars", rows.iter().map(|r| (r.owner_stars as f64).ln_1p()).collect())?;
    frame.insert_complete("log_n_core_devs", rows.iter().map(|r| (r.n_core_devs as f64).ln_1p()).collect())?;
    frame.insert_complete("log_n_packages", rows.iter().map(|r| (r.n_packages as f64).ln_1p()).collect())?;
    frame.insert_complete(FE_COLUMN, rows.iter().map(|r| f64::from(r.year_creation)).collect())?;
    let mut regressors = vec!["is_awesome"];
    regressors.extend(CONTROLS);
    let regression = ols_fixed_effects(&frame, &RegressionSpec::new(RESPONSE, &regressors, Some(FE_COLUMN)))?;
    Ok(AwesomeReport { listed: listed.len(), matched: flags.iter().filter(|f| **f).count(), ttest, regression })
}
