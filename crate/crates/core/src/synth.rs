//! Seeded synthetic corpora with known structure, for end-to-end checks.
//!
//! Projects are split into contiguous clusters. Commit ties stay inside
//! groups of 8 projects, issue ties inside blocks of 32 and star ties inside
//! blocks of 128, all clipped to the cluster, and each leaks to other
//! clusters with a per-project probability. Two latent propensities drive
//! the leaks: `g` raises all three, `s` only the star leak. Each project
//! imports packages mostly from one topic of its cluster and crosses to other
//! clusters with probability `0.1 + planted_effect * p_star`. Imports come
//! from a separate random stream, so the effect never changes the events and
//! a zero effect leaves package choice independent of the networks.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::{
    format_timestamp, load_imports, Catalog, CorpusError, EventLog, ImportSequence, InteractionEvent,
    InteractionKind, OwnerKind, ProjectRecord,
};

const GROUP: usize = 8;
const NEIGHBOURHOOD: usize = 32;
const STAR_BLOCK: usize = 128;
const TOPICS_PER_CLUSTER: usize = 3;
const PACKAGES_PER_TOPIC: usize = 6;
const BOT_ACCOUNTS: [&str; 3] = ["ci-bot", "dependabot[bot]", "buildmaster"];
const DENYLISTED: &str = "buildmaster";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_projects: usize,
    pub n_devs: usize,
    pub cluster_count: usize,
    pub planted_effect: f64,
    pub seed: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportLine {
    pub project: String,
    pub packages: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ts: Option<String>,
}

/// Latent values behind one generated project, kept for diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectTruth {
    pub project_id: String,
    pub cluster: usize,
    pub g: f64,
    pub s: f64,
    pub p_star: f64,
    pub cross_package_prob: f64,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub spec: SynthSpec,
    pub events: EventLog,
    pub catalog: Catalog,
    pub imports: Vec<ImportLine>,
    pub denylist: Vec<String>,
    pub awesome: Vec<String>,
    pub truth: Vec<ProjectTruth>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthFiles {
    pub events: PathBuf,
    pub projects: PathBuf,
    pub imports: PathBuf,
    pub bots: PathBuf,
    pub awesome: PathBuf,
}

/// Import cutoff the generator writes late records against.
pub fn default_cutoff() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2022, 1, 1, 0, 0, 0).unwrap()
}

fn project_id(i: usize) -> String {
    format!("p{i:05}")
}

fn dev_id(d: usize) -> String {
    format!("dev{d:05}")
}

struct Layout {
    n: usize,
    k: usize,
}

impl Layout {
    fn cluster(&self, i: usize) -> usize {
        i * self.k / self.n
    }

    fn cluster_range(&self, c: usize) -> std::ops::Range<usize> {
        let start = (c * self.n).div_ceil(self.k);
        let end = ((c + 1) * self.n).div_ceil(self.k);
        start..end
    }

    /// Block of `size` projects containing `i`, clipped to its cluster.
    fn block(&self, i: usize, size: usize) -> std::ops::Range<usize> {
        let cr = self.cluster_range(self.cluster(i));
        let offset = (i - cr.start) / size * size;
        let start = cr.start + offset;
        start..(start + size).min(cr.end)
    }

    fn pick_in(&self, rng: &mut ChaCha8Rng, range: std::ops::Range<usize>, exclude: usize) -> Option<usize> {
        if range.len() < 2 {
            return None;
        }
        loop {
            let j = rng.random_range(range.clone());
            if j != exclude {
                return Some(j);
            }
        }
    }

    fn pick_outside(&self, rng: &mut ChaCha8Rng, i: usize) -> Option<usize> {
        if self.k < 2 {
            return None;
        }
        let own = self.cluster_range(self.cluster(i));
        let outside = self.n - own.len();
        let mut j = rng.random_range(0..outside);
        if j >= own.start {
            j += own.len();
        }
        Some(j)
    }
}

fn random_time(rng: &mut ChaCha8Rng, from: DateTime<Utc>, to: DateTime<Utc>) -> DateTime<Utc> {
    let span = (to - from).num_seconds().max(1);
    from + Duration::seconds(rng.random_range(0..span))
}

/// Days before joining for a pre-join interaction: 60% within six months,
/// 25% six to twelve, 15% twelve to twenty-four.
fn prejoin_offset_days(rng: &mut ChaCha8Rng) -> i64 {
    let u: f64 = rng.random();
    if u < 0.6 {
        rng.random_range(1..180)
    } else if u < 0.85 {
        rng.random_range(185..360)
    } else {
        rng.random_range(370..725)
    }
}

fn team_size(rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    if u < 0.45 {
        1
    } else if u < 0.70 {
        2
    } else if u < 0.85 {
        3
    } else {
        rng.random_range(4..=6)
    }
}

pub fn generate_synthetic_corpus(spec: &SynthSpec) -> Result<SynthCorpus, SynthError> {
    if spec.n_projects < 2 || spec.n_devs == 0 || spec.cluster_count == 0 {
        return Err(SynthError::InvalidSpec("sizes must be positive and n_projects >= 2".into()));
    }
    if spec.cluster_count > spec.n_projects || spec.cluster_count > spec.n_devs {
        return Err(SynthError::InvalidSpec("cluster_count exceeds projects or devs".into()));
    }
    if !(spec.planted_effect.is_finite() && spec.planted_effect >= 0.0) {
        return Err(SynthError::InvalidSpec("planted_effect must be a non-negative number".into()));
    }
    let layout = Layout { n: spec.n_projects, k: spec.cluster_count };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let created_from = Utc.with_ymd_and_hms(2012, 1, 1, 0, 0, 0).unwrap();
    let created_until = Utc.with_ymd_and_hms(2021, 10, 31, 0, 0, 0).unwrap();
    let stars = LogNormal::new(3.0f64, 1.5).expect("valid parameters");

    let mut events = Vec::new();
    let mut records = Vec::with_capacity(spec.n_projects);
    let mut truth = Vec::with_capacity(spec.n_projects);
    let mut commit_totals = vec![0u64; spec.n_projects];
    let mut casual = 0usize;

    let devs_in = |c: usize| -> Vec<usize> { (c..spec.n_devs).step_by(spec.cluster_count).collect() };
    let cluster_devs: Vec<Vec<usize>> = (0..spec.cluster_count).map(devs_in).collect();

    for i in 0..spec.n_projects {
        let pid = project_id(i);
        let cluster = layout.cluster(i);
        let created = random_time(&mut rng, created_from, created_until);
        let g: f64 = rng.random();
        let s: f64 = rng.random();
        let p_commit = 0.02 + 0.5 * g;
        let p_issue = 0.02 + 0.5 * g;
        let p_star = 0.02 + 0.25 * g + 0.6 * s;

        let pool = &cluster_devs[cluster];
        let size = team_size(&mut rng).min(pool.len());
        let team: Vec<usize> = sample(&mut rng, pool.len(), size).into_iter().map(|x| pool[x]).collect();
        let n_targets = |rng: &mut ChaCha8Rng, lo: usize, hi: usize| rng.random_range(lo..=hi);
        for &d in &team {
            let actor = dev_id(d);
            let join = created + Duration::seconds(rng.random_range(0..30 * 86_400));
            let commits = rng.random_range(10..=40u64);
            events.push(InteractionEvent {
                actor_id: actor.clone(),
                project_id: pid.clone(),
                kind: InteractionKind::Commit,
                timestamp: join,
            });
            for _ in 1..commits {
                let ts = join + Duration::seconds(rng.random_range(1..60 * 86_400));
                events.push(InteractionEvent {
                    actor_id: actor.clone(),
                    project_id: pid.clone(),
                    kind: InteractionKind::Commit,
                    timestamp: ts,
                });
            }
            commit_totals[i] += commits;

            let plan = [
                (InteractionKind::Commit, n_targets(&mut rng, 3, 5), p_commit, GROUP),
                (InteractionKind::Issue, n_targets(&mut rng, 3, 6), p_issue, NEIGHBOURHOOD),
                (InteractionKind::Star, n_targets(&mut rng, 5, 10), p_star, STAR_BLOCK),
            ];
            for (kind, count, leak, block) in plan {
                for _ in 0..count {
                    let target = if rng.random::<f64>() < leak {
                        layout.pick_outside(&mut rng, i)
                    } else {
                        None
                    };
                    let target = target.or_else(|| layout.pick_in(&mut rng, layout.block(i, block), i));
                    let Some(target) = target else { continue };
                    let repeats = rng.random_range(1..=2);
                    for _ in 0..repeats {
                        let back = Duration::days(prejoin_offset_days(&mut rng)) - Duration::seconds(rng.random_range(0..86_400));
                        events.push(InteractionEvent {
                            actor_id: actor.clone(),
                            project_id: project_id(target),
                            kind,
                            timestamp: join - back,
                        });
                        if kind == InteractionKind::Commit {
                            commit_totals[target] += 1;
                        }
                    }
                }
            }
        }

        for _ in 0..rng.random_range(0..=4) {
            let actor = format!("user{casual:06}");
            casual += 1;
            for _ in 0..rng.random_range(1..=3) {
                events.push(InteractionEvent {
                    actor_id: actor.clone(),
                    project_id: pid.clone(),
                    kind: InteractionKind::Commit,
                    timestamp: created + Duration::seconds(rng.random_range(0..90 * 86_400)),
                });
                commit_totals[i] += 1;
            }
            if rng.random::<f64>() < 0.5 {
                events.push(InteractionEvent {
                    actor_id: actor.clone(),
                    project_id: pid.clone(),
                    kind: InteractionKind::Star,
                    timestamp: created + Duration::seconds(rng.random_range(0..90 * 86_400)),
                });
            }
        }
        for bot in BOT_ACCOUNTS {
            if rng.random::<f64>() < 0.05 {
                let n = rng.random_range(12..=30u64);
                for _ in 0..n {
                    events.push(InteractionEvent {
                        actor_id: bot.to_string(),
                        project_id: pid.clone(),
                        kind: InteractionKind::Commit,
                        timestamp: created + Duration::seconds(rng.random_range(0..60 * 86_400)),
                    });
                }
                commit_totals[i] += n;
            }
        }

        let is_fork = rng.random::<f64>() < 0.03;
        let n_python_files = if rng.random::<f64>() < 0.02 { rng.random_range(1..=10) } else { rng.random_range(11..=400) };
        let owner_kind = if rng.random::<f64>() < 0.4 { OwnerKind::Organization } else { OwnerKind::Individual };
        records.push(ProjectRecord {
            project_id: pid.clone(),
            created_at: created,
            is_fork,
            n_python_files,
            total_commits: 0,
            owner_kind,
            owner_stars_at_creation: stars.sample(&mut rng).floor() as u64,
        });
        truth.push(ProjectTruth { project_id: pid, cluster, g, s, p_star, cross_package_prob: 0.0 });
    }
    for (rec, total) in records.iter_mut().zip(&commit_totals) {
        rec.total_commits = *total;
    }

    // A separate stream, so the planted effect never perturbs the networks.
    let mut prng = ChaCha8Rng::seed_from_u64(spec.seed);
    prng.set_stream(1);
    let package = |c: usize, topic: usize, j: usize| format!("pkg{c:02}_{topic}{j}");
    let late = format_timestamp(&Utc.with_ymd_and_hms(2022, 6, 1, 0, 0, 0).unwrap());
    let mut imports = Vec::new();
    let mut awesome = Vec::new();
    for t in truth.iter_mut() {
        let q = (0.1 + spec.planted_effect * t.p_star).min(0.9);
        t.cross_package_prob = q;
        let count = if prng.random::<f64>() < 0.05 { 1 } else { prng.random_range(3..=12) };
        let home_topic = prng.random_range(0..TOPICS_PER_CLUSTER);
        let mut chosen = BTreeSet::new();
        let mut packages = Vec::with_capacity(count);
        let mut attempts = 0;
        while packages.len() < count && attempts < 100 {
            attempts += 1;
            let (c, topic) = if spec.cluster_count > 1 && prng.random::<f64>() < q {
                let other = prng.random_range(0..spec.cluster_count - 1);
                let other = if other >= t.cluster { other + 1 } else { other };
                (other, prng.random_range(0..TOPICS_PER_CLUSTER))
            } else if prng.random::<f64>() < 0.8 {
                (t.cluster, home_topic)
            } else {
                (t.cluster, prng.random_range(0..TOPICS_PER_CLUSTER))
            };
            let name = package(c, topic, prng.random_range(0..PACKAGES_PER_TOPIC));
            if chosen.insert(name.clone()) {
                packages.push(name);
            }
        }
        imports.push(ImportLine { project: t.project_id.clone(), packages, ts: None });
        if prng.random::<f64>() < 0.1 {
            let c = prng.random_range(0..spec.cluster_count);
            imports.push(ImportLine {
                project: t.project_id.clone(),
                packages: vec![package(c, prng.random_range(0..TOPICS_PER_CLUSTER), prng.random_range(0..PACKAGES_PER_TOPIC))],
                ts: Some(late.clone()),
            });
        }
        if prng.random::<f64>() < 0.01 + 0.04 * t.p_star {
            awesome.push(t.project_id.clone());
        }
    }

    events.sort_by(|a, b| {
        (a.timestamp, &a.actor_id, &a.project_id, a.kind.as_str()).cmp(&(
            b.timestamp,
            &b.actor_id,
            &b.project_id,
            b.kind.as_str(),
        ))
    });
    Ok(SynthCorpus {
        spec: *spec,
        events: EventLog::new(events),
        catalog: Catalog::from_records(records),
        imports,
        denylist: vec![DENYLISTED.to_string()],
        awesome,
        truth,
    })
}

impl SynthCorpus {
    pub fn write_imports<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for line in &self.imports {
            serde_json::to_writer(&mut out, line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Import sequences as the loader would read them back.
    pub fn import_sequences(&self, cutoff: DateTime<Utc>) -> Result<Vec<ImportSequence>, SynthError> {
        let mut buf = Vec::new();
        self.write_imports(&mut buf)?;
        Ok(load_imports(buf.as_slice(), cutoff)?)
    }

    /// Writes `events.jsonl`, `projects.csv`, `imports.jsonl`, `bots.txt` and
    /// `awesome.txt` into `dir`, creating it if needed.
    pub fn write_dir(&self, dir: &Path) -> Result<SynthFiles, SynthError> {
        std::fs::create_dir_all(dir)?;
        let files = SynthFiles {
            events: dir.join("events.jsonl"),
            projects: dir.join("projects.csv"),
            imports: dir.join("imports.jsonl"),
            bots: dir.join("bots.txt"),
            awesome: dir.join("awesome.txt"),
        };
        let mut w = BufWriter::new(File::create(&files.events)?);
        self.events.write_jsonl(&mut w)?;
        w.flush()?;
        self.catalog.write_csv(File::create(&files.projects)?)?;
        let mut w = BufWriter::new(File::create(&files.imports)?);
        self.write_imports(&mut w)?;
        w.flush()?;
        let mut bots = String::from("# manually reviewed automation accounts\n");
        for id in &self.denylist {
            bots.push_str(id);
            bots.push('\n');
        }
        std::fs::write(&files.bots, bots)?;
        let mut listed = String::new();
        for id in &self.awesome {
            listed.push_str(id);
            listed.push('\n');
        }
        std::fs::write(&files.awesome, listed)?;
        Ok(files)
    }
}
