#![allow(dead_code)]

use std::path::{Path, PathBuf};

use weaktie::corpus::{BotRules, CoreRule};
use weaktie::embed::skipgram_loss_and_grad;
use weaktie::pipeline::analysis::{ingest, Ingested};
use weaktie::pipeline::{default_cutoff, PipelineConfig};
use weaktie::synth::SynthCorpus;

pub const MODEL_IV_TERMS: [&str; 8] = [
    "deg_ave",
    "deg_weakness",
    "div_ave",
    "div_weakness",
    "org_owned",
    "log_owner_stars",
    "log_n_core_devs",
    "log_n_packages",
];

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/synthetic50")
}

/// The bundled fixture's config with its output redirected to `out`.
pub fn fixture_config(fixture: &Path, out: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::from_file(&fixture.join("pipeline.toml")).expect("fixture config");
    cfg.output_dir = out.to_path_buf();
    cfg
}

pub fn ingest_synthetic(corpus: &SynthCorpus, rule: CoreRule) -> Ingested {
    let imports = corpus.import_sequences(default_cutoff()).expect("synthetic imports parse");
    let rules = BotRules::defaults().with_denylist(corpus.denylist.clone());
    ingest(&corpus.events, &corpus.catalog, imports, &rules, rule, default_cutoff())
}

/// Largest per-coordinate relative error between the analytic gradient and a
/// central finite difference of the loss.
pub fn max_gradient_error(center: &[f64], context: &[f64], negatives: &[Vec<f64>]) -> f64 {
    let loss = |u: &[f64], v: &[f64], ns: &[Vec<f64>]| {
        let refs: Vec<&[f64]> = ns.iter().map(Vec::as_slice).collect();
        skipgram_loss_and_grad(u, v, &refs).unwrap().loss
    };
    let refs: Vec<&[f64]> = negatives.iter().map(Vec::as_slice).collect();
    let grad = skipgram_loss_and_grad(center, context, &refs).unwrap();
    let h = 1e-5;
    let rel = |a: f64, f: f64| (a - f).abs() / (a.abs() + f.abs()).max(1e-8);
    let mut worst = 0.0f64;
    for i in 0..center.len() {
        let (mut up, mut down) = (center.to_vec(), center.to_vec());
        up[i] += h;
        down[i] -= h;
        let fd = (loss(&up, context, negatives) - loss(&down, context, negatives)) / (2.0 * h);
        worst = worst.max(rel(grad.center[i], fd));

        let (mut up, mut down) = (context.to_vec(), context.to_vec());
        up[i] += h;
        down[i] -= h;
        let fd = (loss(center, &up, negatives) - loss(center, &down, negatives)) / (2.0 * h);
        worst = worst.max(rel(grad.context[i], fd));

        for k in 0..negatives.len() {
            let (mut up, mut down) = (negatives.to_vec(), negatives.to_vec());
            up[k][i] += h;
            down[k][i] -= h;
            let fd = (loss(center, context, &up) - loss(center, context, &down)) / (2.0 * h);
            worst = worst.max(rel(grad.negatives[k][i], fd));
        }
    }
    worst
}

/// Checks that `regression.json` in `dir` holds a Model IV fit with exactly
/// the interest terms, controls and one dummy per non-reference year, all
/// finite.
pub fn regression_is_well_formed(dir: &Path) -> bool {
    let Ok(bytes) = std::fs::read(dir.join("regression.json")) else { return false };
    let Ok(doc) = serde_json::from_slice::<serde_json::Value>(&bytes) else { return false };
    let result = &doc["result"];
    let Some(terms) = result["terms"].as_array() else { return false };
    let fe = &result["fixed_effects"];
    let reference = fe["reference"].as_i64();
    let levels: Vec<i64> = fe["levels"].as_array().map(|l| l.iter().filter_map(|v| v.as_i64()).collect()).unwrap_or_default();
    let mut expected: Vec<String> = MODEL_IV_TERMS.iter().map(|s| s.to_string()).collect();
    expected.extend(levels.iter().filter(|&&l| Some(l) != reference).map(|l| format!("year_creation_{l}")));
    let names: Vec<String> = terms.iter().filter_map(|t| t["name"].as_str().map(str::to_string)).collect();
    let finite = |v: &serde_json::Value| v.as_f64().is_some_and(f64::is_finite);
    let n = result["n_observations"].as_u64().unwrap_or(0) as usize;
    doc["model"] == "IV"
        && names == expected
        && terms.iter().all(|t| finite(&t["coefficient"]) && finite(&t["standard_error"]) && finite(&t["p_value"]))
        && finite(&result["adjusted_r2"])
        && n > terms.len() + 1
}
