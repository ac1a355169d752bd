use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use weaktie::corpus::{parse_timestamp, CoreRule};
use weaktie::pipeline::{
    run_embed, run_features, run_ingest, run_networks, run_pca, run_pipeline, run_regress, run_report, FailureKind,
    ModelId, PipelineConfig, PipelineError, Stage, StageRecord,
};
use weaktie::stats::CohortAxis;
use weaktie::synth::{generate_synthetic_corpus, SynthSpec};

#[derive(Parser)]
#[command(name = "weaktie", version, about = "Collaboration networks, embeddings and innovativeness models for project corpora")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Filter bots, select the sample and identify core developers.
    Ingest(StageArgs),
    /// Build the commit, issue and star project networks.
    Networks(StageArgs),
    /// Train node and package embeddings.
    Embed {
        #[command(flatten)]
        stage: StageArgs,
        #[arg(long)]
        seed: u64,
    },
    /// Compute per-project degree, diversity and innovativeness.
    Features(StageArgs),
    /// Fit principal components for the selected model.
    Pca(StageArgs),
    /// Estimate the selected regression model (and cohort splits).
    Regress(StageArgs),
    /// Write plot-ready tables and the awesome-list comparison.
    Report(StageArgs),
    /// Run every stage in order.
    Pipeline {
        #[command(flatten)]
        stage: StageArgs,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate a synthetic corpus with a planted effect.
    Synth(SynthArgs),
}

#[derive(Args)]
struct StageArgs {
    /// TOML config; flags below override its values.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    events: Option<PathBuf>,
    #[arg(long)]
    projects: Option<PathBuf>,
    #[arg(long)]
    imports: Option<PathBuf>,
    #[arg(long)]
    bots: Option<PathBuf>,
    #[arg(long)]
    awesome: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// 6, 12 or 24.
    #[arg(long)]
    window_months: Option<u32>,
    /// pct5min10 or cum80.
    #[arg(long)]
    core_rule: Option<CoreRule>,
    /// RFC 3339 timestamp.
    #[arg(long, value_parser = parse_timestamp)]
    cutoff: Option<chrono::DateTime<chrono::Utc>>,
    /// I, II, III or IV.
    #[arg(long)]
    model: Option<ModelId>,
    /// year_creation, core_team_size or ownership.
    #[arg(long)]
    cohort: Option<CohortAxis>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 50)]
    n_projects: usize,
    /// Defaults to twice the project count.
    #[arg(long)]
    n_devs: Option<usize>,
    #[arg(long, default_value_t = 3)]
    clusters: usize,
    #[arg(long, default_value_t = 0.5)]
    planted_effect: f64,
    #[arg(long)]
    seed: u64,
}

fn config_error(message: impl std::fmt::Display) -> PipelineError {
    PipelineError::new(Stage::Config, FailureKind::Config, message)
}

impl StageArgs {
    fn resolve(self, seed: Option<u64>) -> Result<PipelineConfig, PipelineError> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::from_file(path).map_err(config_error)?,
            None => {
                let need = |v: &Option<PathBuf>, flag: &str| {
                    v.clone().ok_or_else(|| config_error(format!("--{flag} is required without --config")))
                };
                PipelineConfig::new(
                    need(&self.events, "events")?,
                    need(&self.projects, "projects")?,
                    need(&self.imports, "imports")?,
                    need(&self.output_dir, "output-dir")?,
                )
            }
        };
        if let Some(v) = self.events {
            cfg.events = v;
        }
        if let Some(v) = self.projects {
            cfg.projects = v;
        }
        if let Some(v) = self.imports {
            cfg.imports = v;
        }
        if let Some(v) = self.output_dir {
            cfg.output_dir = v;
        }
        if self.bots.is_some() {
            cfg.bots = self.bots;
        }
        if self.awesome.is_some() {
            cfg.awesome = self.awesome;
        }
        if let Some(v) = self.window_months {
            cfg.window_months = v;
        }
        if let Some(v) = self.core_rule {
            cfg.core_rule = v;
        }
        if let Some(v) = self.cutoff {
            cfg.cutoff = v;
        }
        if let Some(v) = self.model {
            cfg.model = v;
        }
        if self.cohort.is_some() {
            cfg.cohort = self.cohort;
        }
        if seed.is_some() {
            cfg.seed = seed;
        }
        cfg.validate().map_err(config_error)?;
        Ok(cfg)
    }
}

fn print_outputs(record: &StageRecord) {
    for f in &record.outputs {
        println!("{}  {}", f.sha256, f.path);
    }
}

fn synth(args: SynthArgs) -> Result<(), PipelineError> {
    let spec = SynthSpec {
        n_projects: args.n_projects,
        n_devs: args.n_devs.unwrap_or(2 * args.n_projects),
        cluster_count: args.clusters,
        planted_effect: args.planted_effect,
        seed: args.seed,
    };
    let corpus = generate_synthetic_corpus(&spec).map_err(config_error)?;
    let files = corpus
        .write_dir(&args.out)
        .map_err(|e| PipelineError::new(Stage::Config, FailureKind::Data, e))?;
    let mut cfg = PipelineConfig::new(
        "events.jsonl".into(),
        "projects.csv".into(),
        "imports.jsonl".into(),
        "out".into(),
    );
    cfg.bots = Some("bots.txt".into());
    cfg.awesome = Some("awesome.txt".into());
    cfg.seed = Some(args.seed);
    std::fs::write(args.out.join("pipeline.toml"), cfg.to_toml())
        .map_err(|e| PipelineError::new(Stage::Config, FailureKind::Data, e))?;
    println!(
        "wrote {} projects, {} events to {}",
        corpus.catalog.len(),
        corpus.events.len(),
        files.events.parent().unwrap_or(&args.out).display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let record = match cli.command {
        Command::Synth(args) => return synth(args),
        Command::Pipeline { stage, seed } => {
            let cfg = stage.resolve(seed)?;
            let manifest = run_pipeline(&cfg)?;
            for s in &manifest.stages {
                println!("{:<9} {:>8.2}s  {} files", s.stage, s.wall_seconds, s.outputs.len());
            }
            println!("manifest: {}", cfg.output_dir.join("manifest.json").display());
            return Ok(());
        }
        Command::Ingest(a) => run_ingest(&a.resolve(None)?)?,
        Command::Networks(a) => run_networks(&a.resolve(None)?)?,
        Command::Embed { stage, seed } => run_embed(&stage.resolve(Some(seed))?)?,
        Command::Features(a) => run_features(&a.resolve(None)?)?,
        Command::Pca(a) => run_pca(&a.resolve(None)?)?,
        Command::Regress(a) => run_regress(&a.resolve(None)?)?,
        Command::Report(a) => run_report(&a.resolve(None)?)?,
    };
    print_outputs(&record);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
