use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::analysis::{self, Embeddings, ModelData};
use super::{Classify, FailureKind, PipelineConfig, PipelineError, Stage};
use crate::corpus::{
    load_denylist, load_events, load_imports, read_cores_csv, select_projects, write_cores_csv, write_imports, BotRules,
    Catalog, CoreSet, EventLog, ImportSequence, InteractionKind, SelectionRules,
};
use crate::embed::EmbeddingMatrix;
use crate::metrics::FeatureTable;
use crate::netbuild::{summarize, ProjectGraph};
use crate::stats::format_regression_table;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub wall_seconds: f64,
    pub outputs: Vec<FileRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config: PipelineConfig,
    pub stages: Vec<StageRecord>,
}

impl RunManifest {
    pub fn file(&self, rel: &str) -> Option<&FileRecord> {
        self.stages.iter().flat_map(|s| &s.outputs).find(|f| f.path == rel)
    }
}

const MANIFEST: &str = "manifest.json";

struct Outputs<'a> {
    root: &'a Path,
    stage: Stage,
    files: Vec<FileRecord>,
}

impl<'a> Outputs<'a> {
    fn new(root: &'a Path, stage: Stage) -> Self {
        Outputs { root, stage, files: Vec::new() }
    }

    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), PipelineError> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| io_err(self.stage, &path, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| io_err(self.stage, &path, e))?;
        self.files.push(FileRecord {
            path: rel.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    fn json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<(), PipelineError> {
        let mut text = serde_json::to_vec_pretty(value).map_err(|e| e.at(self.stage))?;
        text.push(b'\n');
        self.write(rel, &text)
    }
}

fn io_err(stage: Stage, path: &Path, e: std::io::Error) -> PipelineError {
    PipelineError::new(stage, FailureKind::Data, format!("{}: {e}", path.display()))
}

fn open(stage: Stage, path: &Path) -> Result<BufReader<File>, PipelineError> {
    File::open(path).map(BufReader::new).map_err(|e| io_err(stage, path, e))
}

fn finish(cfg: &PipelineConfig, out: Outputs<'_>, started: Instant) -> Result<StageRecord, PipelineError> {
    let record = StageRecord {
        stage: out.stage.as_str().to_string(),
        wall_seconds: started.elapsed().as_secs_f64(),
        outputs: out.files,
    };
    update_manifest(cfg, &record)?;
    log::info!("{} stage finished in {:.2}s", record.stage, record.wall_seconds);
    Ok(record)
}

fn read_manifest(path: &Path) -> Option<RunManifest> {
    let text = std::fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

/// Replaces this stage's entry in `manifest.json`, keeping stage order.
fn update_manifest(cfg: &PipelineConfig, record: &StageRecord) -> Result<(), PipelineError> {
    let path = cfg.output_dir.join(MANIFEST);
    let mut manifest = read_manifest(&path)
        .filter(|m| m.config == *cfg)
        .unwrap_or_else(|| RunManifest {
            tool: "weaktie".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: cfg.clone(),
            stages: Vec::new(),
        });
    manifest.stages.retain(|s| s.stage != record.stage);
    manifest.stages.push(record.clone());
    let rank = |name: &str| STAGE_ORDER.iter().position(|s| s.as_str() == name).unwrap_or(usize::MAX);
    manifest.stages.sort_by_key(|s| rank(&s.stage));
    let mut text = serde_json::to_vec_pretty(&manifest).map_err(|e| e.at(Stage::Report))?;
    text.push(b'\n');
    std::fs::write(&path, text).map_err(|e| io_err(Stage::Report, &path, e))
}

const STAGE_ORDER: [Stage; 7] =
    [Stage::Ingest, Stage::Networks, Stage::Embed, Stage::Features, Stage::Pca, Stage::Regress, Stage::Report];

fn validated(cfg: &PipelineConfig) -> Result<(), PipelineError> {
    cfg.validate().map_err(|e| e.at(Stage::Config))?;
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| {
        PipelineError::new(Stage::Config, FailureKind::Config, format!("output dir {}: {e}", cfg.output_dir.display()))
    })
}

fn ingest_path(cfg: &PipelineConfig, name: &str) -> PathBuf {
    cfg.output_dir.join("ingest").join(name)
}

fn network_path(cfg: &PipelineConfig, kind: InteractionKind) -> PathBuf {
    cfg.output_dir.join("networks").join(format!("{kind}.csv"))
}

fn embedding_path(cfg: &PipelineConfig, name: &str) -> PathBuf {
    cfg.output_dir.join("embed").join(format!("{name}.wtem"))
}

pub fn run_ingest(cfg: &PipelineConfig) -> Result<StageRecord, PipelineError> {
    validated(cfg)?;
    let stage = Stage::Ingest;
    let started = Instant::now();
    let raw = load_events(open(stage, &cfg.events)?).map_err(|e| e.at(stage))?;
    for r in raw.rejected.iter().take(5) {
        log::warn!("events line {} rejected: {}", r.line_no, r.reason);
    }
    let catalog = Catalog::read_csv(open(stage, &cfg.projects)?).map_err(|e| e.at(stage))?;
    let imports = load_imports(open(stage, &cfg.imports)?, cfg.cutoff).map_err(|e| e.at(stage))?;
    let mut rules = BotRules::defaults();
    if let Some(path) = &cfg.bots {
        rules = rules.with_denylist(load_denylist(open(stage, path)?).map_err(|e| e.at(stage))?);
    }
    let ingested = analysis::ingest(&raw, &catalog, imports, &rules, cfg.core_rule, cfg.cutoff);

    let mut out = Outputs::new(&cfg.output_dir, stage);
    let mut buf = Vec::new();
    ingested.events.write_jsonl(&mut buf).map_err(|e| e.at(stage))?;
    out.write("ingest/events.jsonl", &buf)?;
    let mut buf = Vec::new();
    Catalog::from_records(ingested.sample.projects.iter().cloned()).write_csv(&mut buf).map_err(|e| e.at(stage))?;
    out.write("ingest/sample.csv", &buf)?;
    let mut buf = Vec::new();
    write_cores_csv(&ingested.cores, &mut buf).map_err(|e| e.at(stage))?;
    out.write("ingest/cores.csv", &buf)?;
    let mut buf = Vec::new();
    write_imports(&ingested.imports, &mut buf).map_err(|e| e.at(stage))?;
    out.write("ingest/imports.jsonl", &buf)?;
    out.json("ingest/report.json", &ingested.report(raw.len(), catalog.len(), cfg.core_rule))?;
    finish(cfg, out, started)
}

fn read_cores(cfg: &PipelineConfig, stage: Stage) -> Result<CoreSet, PipelineError> {
    read_cores_csv(open(stage, &ingest_path(cfg, "cores.csv"))?).map_err(|e| e.at(stage))
}

fn read_graphs(cfg: &PipelineConfig, cores: &CoreSet, stage: Stage) -> Result<[ProjectGraph; 3], PipelineError> {
    let mut graphs = Vec::with_capacity(3);
    for kind in InteractionKind::ALL {
        let source = open(stage, &network_path(cfg, kind))?;
        let g = ProjectGraph::read_csv(source, kind, cfg.window_months, cores.keys().map(String::as_str))
            .map_err(|e| e.at(stage))?;
        graphs.push(g);
    }
    Ok(graphs.try_into().expect("three kinds"))
}

fn read_ingested_imports(cfg: &PipelineConfig, stage: Stage) -> Result<Vec<ImportSequence>, PipelineError> {
    load_imports(open(stage, &ingest_path(cfg, "imports.jsonl"))?, cfg.cutoff).map_err(|e| e.at(stage))
}

pub fn run_networks(cfg: &PipelineConfig) -> Result<StageRecord, PipelineError> {
    validated(cfg)?;
    let stage = Stage::Networks;
    let started = Instant::now();
    let events: EventLog = load_events(open(stage, &ingest_path(cfg, "events.jsonl"))?).map_err(|e| e.at(stage))?;
    let cores = read_cores(cfg, stage)?;
    let graphs = analysis::build_networks(&events, &cores, cfg.window_months);
    let mut out = Outputs::new(&cfg.output_dir, stage);
    for g in &graphs {
        let mut buf = Vec::new();
        g.write_csv(&mut buf).map_err(|e| e.at(stage))?;
        out.write(&format!("networks/{}.csv", g.kind), &buf)?;
    }
    let summaries: Vec<_> = graphs.iter().map(summarize).collect();
    out.json("networks/summary.json", &summaries)?;
    finish(cfg, out, started)
}

pub fn run_embed(cfg: &PipelineConfig) -> Result<StageRecord, PipelineError> {
    validated(cfg)?;
    let stage = Stage::Embed;
    let seed = cfg.require_seed().map_err(|e| e.at(stage))?;
    let started = Instant::now();
    let cores = read_cores(cfg, stage)?;
    let graphs = read_graphs(cfg, &cores, stage)?;
    let imports = read_ingested_imports(cfg, stage)?;
    let node_cfgs = [cfg.commit_embedding, cfg.issue_embedding, cfg.star_embedding];
    let emb = analysis::train_all_embeddings(&graphs, &imports, &cfg.walks, &node_cfgs, &cfg.package_embedding, seed)
        .map_err(|e| e.at(stage))?;
    let mut out = Outputs::new(&cfg.output_dir, stage);
    let names = InteractionKind::ALL.map(|k| k.as_str()).into_iter().chain(["packages"]);
    for (name, m) in names.zip(emb.nodes.iter().chain([&emb.packages])) {
        let mut buf = Vec::new();
        m.write_binary(&mut buf).map_err(|e| e.at(stage))?;
        out.write(&format!("embed/{name}.wtem"), &buf)?;
    }
    out.json("embed/training.json", &emb.summaries)?;
    finish(cfg, out, started)
}

fn read_embedding(cfg: &PipelineConfig, name: &str, stage: Stage) -> Result<EmbeddingMatrix, PipelineError> {
    EmbeddingMatrix::read_binary(open(stage, &embedding_path(cfg, name))?).map_err(|e| e.at(stage))
}

pub fn run_features(cfg: &PipelineConfig) -> Result<StageRecord, PipelineError> {
    validated(cfg)?;
    let stage = Stage::Features;
    let started = Instant::now();
    let catalog = Catalog::read_csv(open(stage, &ingest_path(cfg, "sample.csv"))?).map_err(|e| e.at(stage))?;
    let sample = select_projects(&catalog, &SelectionRules::default());
    let cores = read_cores(cfg, stage)?;
    let graphs = read_graphs(cfg, &cores, stage)?;
    let imports = read_ingested_imports(cfg, stage)?;
    let nodes = [
        read_embedding(cfg, "commit", stage)?,
        read_embedding(cfg, "issue", stage)?,
        read_embedding(cfg, "star", stage)?,
    ];
    let packages = read_embedding(cfg, "packages", stage)?;
    let ingested = analysis::Ingested {
        events: EventLog::default(),
        bots: Default::default(),
        sample,
        cores,
        without_history: Vec::new(),
        imports,
        events_after_cutoff: 0,
    };
    let emb = Embeddings { nodes, packages, summaries: Vec::new() };
    let table = analysis::features(&ingested, &catalog, &graphs, &emb).map_err(|e| e.at(stage))?;
    if table.dropped_packages > 0 {
        log::warn!("{} imported packages had no embedding", table.dropped_packages);
    }
    let mut out = Outputs::new(&cfg.output_dir, stage);
    let mut buf = Vec::new();
    table.write_csv(&mut buf).map_err(|e| e.at(stage))?;
    out.write("features.csv", &buf)?;
    finish(cfg, out, started)
}

fn read_features(cfg: &PipelineConfig, stage: Stage) -> Result<FeatureTable, PipelineError> {
    FeatureTable::read_csv(open(stage, &cfg.output_dir.join("features.csv"))?).map_err(|e| e.at(stage))
}

#[derive(Serialize)]
struct PcaFile<'a> {
    model: String,
    fit_sample: String,
    n_observations: usize,
    degree: Option<&'a crate::stats::PcaResult>,
    diversity: Option<&'a crate::stats::PcaResult>,
}

fn pca_file(data: &ModelData) -> PcaFile<'_> {
    PcaFile {
        model: data.model.to_string(),
        fit_sample: format!("estimation sample of model {}", data.model),
        n_observations: data.rows.len(),
        degree: data.degree_pca.as_ref(),
        diversity: data.diversity_pca.as_ref(),
    }
}

pub fn run_pca(cfg: &PipelineConfig) -> Result<StageRecord, PipelineError> {
    validated(cfg)?;
    let stage = Stage::Pca;
    let started = Instant::now();
    let table = read_features(cfg, stage)?;
    let data = analysis::model_data(&table, cfg.model).map_err(|e| e.at(stage))?;
    let mut out = Outputs::new(&cfg.output_dir, stage);
    out.json("pca.json", &pca_file(&data))?;
    finish(cfg, out, started)
}

#[derive(Serialize)]
struct RegressionFile<'a> {
    model: String,
    pca_sample: &'a str,
    result: &'a crate::stats::RegressionResult,
}

pub fn run_regress(cfg: &PipelineConfig) -> Result<StageRecord, PipelineError> {
    validated(cfg)?;
    let stage = Stage::Regress;
    let started = Instant::now();
    let table = read_features(cfg, stage)?;
    let fit = analysis::fit_model(&table, cfg.model).map_err(|e| e.at(stage))?;
    let mut out = Outputs::new(&cfg.output_dir, stage);
    out.json(
        "regression.json",
        &RegressionFile { model: fit.model.to_string(), pca_sample: &fit.pca_sample, result: &fit.regression },
    )?;
    let mut columns = vec![(format!("Model {}", fit.model), fit.regression.clone())];
    if let Some(axis) = cfg.cohort {
        let cohorts = analysis::fit_cohorts(&table, cfg.model, axis).map_err(|e| e.at(stage))?;
        let mut csv = String::from("axis,cohort,rows,term,coefficient,standard_error,p_value,ci_low,ci_high,error\n");
        for c in &cohorts {
            match &c.regression {
                Some(r) => {
                    for term in analysis::interest_terms(cfg.model) {
                        let t = r.term(term).expect("interest term fitted");
                        let half = 1.96 * t.standard_error;
                        let _ = writeln!(
                            csv,
                            "{},{},{},{},{},{},{},{},{},",
                            c.axis,
                            c.label,
                            c.rows,
                            term,
                            t.coefficient,
                            t.standard_error,
                            t.p_value,
                            t.coefficient - half,
                            t.coefficient + half
                        );
                    }
                    columns.push((format!("{}={}", c.axis, c.label), r.clone()));
                }
                None => {
                    let reason = c.error.clone().unwrap_or_default().replace(',', ";");
                    let _ = writeln!(csv, "{},{},{},,,,,,,{}", c.axis, c.label, c.rows, reason);
                }
            }
        }
        out.write("cohorts.csv", csv.as_bytes())?;
    }
    out.write("regression.txt", format_regression_table(&columns).as_bytes())?;
    finish(cfg, out, started)
}

fn read_id_list(stage: Stage, path: &Path) -> Result<BTreeSet<String>, PipelineError> {
    let mut ids = BTreeSet::new();
    for line in open(stage, path)?.lines() {
        let line = line.map_err(|e| io_err(stage, path, e))?;
        let id = line.trim();
        if !id.is_empty() && !id.starts_with('#') {
            ids.insert(id.to_string());
        }
    }
    Ok(ids)
}

pub fn run_report(cfg: &PipelineConfig) -> Result<StageRecord, PipelineError> {
    validated(cfg)?;
    let stage = Stage::Report;
    let started = Instant::now();
    let table = read_features(cfg, stage)?;
    let data = analysis::model_data(&table, cfg.model).map_err(|e| e.at(stage))?;
    let mut out = Outputs::new(&cfg.output_dir, stage);

    let groups = [("degree", data.degree_pca.as_ref()), ("diversity", data.diversity_pca.as_ref())];
    let mut variance = String::from("group,component,explained_variance_ratio\n");
    let mut loadings = String::from("group,variable,pc1,pc2,pc3\n");
    for (group, pca) in groups {
        let Some(p) = pca else { continue };
        for (k, r) in p.explained_variance_ratio.iter().enumerate() {
            let _ = writeln!(variance, "{group},{},{r}", k + 1);
        }
        for (i, name) in p.names.iter().enumerate() {
            let row = p.loadings.row(i);
            let _ = writeln!(loadings, "{group},{name},{},{},{}", row[0], row[1], row[2]);
        }
    }
    out.write("report/pca_variance.csv", variance.as_bytes())?;
    out.write("report/pca_loadings.csv", loadings.as_bytes())?;

    let (a, b) = if cfg.model.uses_diversity() { ("div_ave", "div_weakness") } else { ("deg_ave", "deg_weakness") };
    let mut quadrants = format!("project,{a},{b},innov\n");
    let (ca, cb, innov) = (data.frame.column(a), data.frame.column(b), data.frame.column(analysis::RESPONSE));
    if let (Some(ca), Some(cb), Some(innov)) = (ca, cb, innov) {
        for (i, id) in data.frame.row_ids().iter().enumerate() {
            let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            let _ = writeln!(quadrants, "{id},{},{},{}", f(ca[i]), f(cb[i]), f(innov[i]));
        }
    }
    out.write("report/component_scores.csv", quadrants.as_bytes())?;

    if let Some(path) = &cfg.awesome {
        let listed = read_id_list(stage, path)?;
        let mut scores = String::from("project,innov,is_awesome\n");
        for r in table.rows.iter().filter(|r| r.innov.is_some()) {
            let _ = writeln!(scores, "{},{},{}", r.project_id, r.innov.unwrap_or_default(), u8::from(listed.contains(&r.project_id)));
        }
        out.write("report/awesome_innovativeness.csv", scores.as_bytes())?;
        match analysis::awesome_analysis(&table, &listed) {
            Ok(report) => out.json("report/awesome.json", &report)?,
            Err(e) => {
                log::warn!("awesome comparison skipped: {e}");
                out.json("report/awesome.json", &serde_json::json!({ "listed": listed.len(), "error": e.to_string() }))?;
            }
        }
    }
    finish(cfg, out, started)
}

/// Runs every stage in order and returns the manifest written alongside the
/// outputs.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunManifest, PipelineError> {
    validated(cfg)?;
    cfg.require_seed().map_err(|e| e.at(Stage::Config))?;
    let _ = std::fs::remove_file(cfg.output_dir.join(MANIFEST));
    run_ingest(cfg)?;
    run_networks(cfg)?;
    run_embed(cfg)?;
    run_features(cfg)?;
    run_pca(cfg)?;
    run_regress(cfg)?;
    run_report(cfg)?;
    read_manifest(&cfg.output_dir.join(MANIFEST))
        .ok_or_else(|| PipelineError::new(Stage::Report, FailureKind::Data, "manifest missing after run"))
}
