//! The `train`, `recommend` and `evaluate` workflows, writing their reports
//! to any `Write` so tests can read them back.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context as _;
use log::{info, warn};
use valrec_core::eval::{evaluate, split, EvalFields, EvalOptions, EvalReport, Method, SplitSpec};
use valrec_core::io::{read_instances, read_mappings, Manifest, ManifestTemplate, RuleStore};
use valrec_core::mapping::MappingRepository;
use valrec_core::mining::{mine_repository, MiningParams};
use valrec_core::model::{Context, FieldSlot, FieldValuePair};
use valrec_core::recommend::{RecommendOptions, Recommendation};

use crate::engine::EngineState;

pub fn load_mappings(path: Option<&Path>) -> anyhow::Result<MappingRepository> {
    match path {
        Some(p) => read_mappings(p).with_context(|| format!("loading mappings from {}", p.display())),
        None => Ok(MappingRepository::default()),
    }
}

pub struct TrainArgs {
    pub instances: PathBuf,
    pub mappings: Option<PathBuf>,
    pub params: MiningParams,
    pub out: PathBuf,
}

/// Mines every template and writes `rules.jsonl` and `manifest.json` into
/// `out`.
pub fn train(args: &TrainArgs, report: &mut impl Write) -> anyhow::Result<Manifest> {
    args.params.validate()?;
    let m = load_mappings(args.mappings.as_deref())?;
    let ingest = read_instances(&args.instances).with_context(|| format!("reading {}", args.instances.display()))?;
    if ingest.dropped_pairs + ingest.dropped_records > 0 {
        warn!("dropped {} empty pair(s) and {} invalid record(s)", ingest.dropped_pairs, ingest.dropped_records);
    }
    let started = Instant::now();
    let mined = mine_repository(&ingest.repository, &args.params, &m)?;
    let elapsed = started.elapsed().as_secs_f64();

    let manifest = Manifest {
        params: (&args.params).into(),
        templates: mined
            .templates
            .iter()
            .map(|(t, s)| {
                let entry = ManifestTemplate {
                    train_count: s.instances,
                    frequent_itemsets: s.frequent_itemsets,
                    rules: s.rules,
                };
                (t.clone(), entry)
            })
            .collect(),
        total_rules: mined.rules.len(),
        wall_time_seconds: elapsed,
    };
    RuleStore::save(&args.out, &mined.rules, &manifest, &m)?;
    info!("wrote {} rules to {}", mined.rules.len(), args.out.display());

    writeln!(report, "{:<24} {:>10} {:>12} {:>10}", "template", "instances", "itemsets", "rules")?;
    for (t, s) in &manifest.templates {
        writeln!(report, "{:<24} {:>10} {:>12} {:>10}", t, s.train_count, s.frequent_itemsets, s.rules)?;
    }
    writeln!(report, "{} rules in {:.2}s -> {}", manifest.total_rules, elapsed, args.out.display())?;
    Ok(manifest)
}

/// `1. brain 100% (score 1.0000, support 3)`, with the term appended for
/// ontology values.
pub fn format_recommendation(r: &Recommendation) -> String {
    let mut line =
        format!("{}. {} {}% (score {:.4}, support {})", r.rank, r.value.label(), r.percent(), r.score, r.support);
    if let Some(t) = r.value.term() {
        line.push_str(&format!(" <{t}>"));
    }
    line
}

pub struct RecommendArgs {
    pub store: PathBuf,
    pub mappings: Option<PathBuf>,
    pub context: Vec<FieldValuePair>,
    pub target: FieldSlot,
    pub options: RecommendOptions,
}

pub fn recommend(args: &RecommendArgs, out: &mut impl Write) -> anyhow::Result<Vec<Recommendation>> {
    let state = EngineState::load(&args.store, args.mappings.as_deref())?;
    let context = Context::new(args.context.clone())?;
    let recs = state.recommend(&context, &args.target, Some(&args.options))?;
    if recs.is_empty() {
        writeln!(out, "no recommendations for {:?}", args.target.label())?;
    }
    for r in &recs {
        writeln!(out, "{}", format_recommendation(r))?;
    }
    Ok(recs)
}

pub struct EvaluateArgs {
    pub instances: PathBuf,
    pub mappings: Option<PathBuf>,
    pub params: MiningParams,
    pub split: SplitSpec,
    pub eval_fields: EvalFields,
    pub max_context_size: Option<usize>,
    pub out: PathBuf,
}

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const EXECUTION_LOG: &str = "executions.jsonl";

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

/// Splits, trains on one side, scores the other, and writes the report as
/// JSON and CSV plus the per-execution log.
pub fn evaluate_command(args: &EvaluateArgs, out: &mut impl Write) -> anyhow::Result<EvalReport> {
    let m = load_mappings(args.mappings.as_deref())?;
    let ingest = read_instances(&args.instances).with_context(|| format!("reading {}", args.instances.display()))?;
    let (train, test) = split(&ingest.repository, &args.split)?;
    info!("split {} instances into {} train / {} test", ingest.repository.len(), train.len(), test.len());
    let opts = EvalOptions { eval_fields: args.eval_fields.clone(), max_context_size: args.max_context_size };
    let evaluation = evaluate(&train, &test, &args.params, &m, &opts)?;

    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut json = create(&args.out.join(REPORT_JSON))?;
    serde_json::to_writer_pretty(&mut json, &evaluation.report)?;
    json.write_all(b"\n")?;
    json.flush()?;
    evaluation.report.write_csv(create(&args.out.join(REPORT_CSV))?)?;
    evaluation.write_log(create(&args.out.join(EXECUTION_LOG))?)?;

    let r = &evaluation.report;
    writeln!(
        out,
        "{} train / {} test, {} rules, {} executions",
        r.train_instances, r.test_instances, r.rules, r.executions
    )?;
    writeln!(out, "{:>12} {:>12} {:>12} {:>10}", "context size", "recommender", "baseline", "n")?;
    let sizes: std::collections::BTreeSet<usize> = r.by_context_size.iter().filter_map(|c| c.context_size).collect();
    for s in sizes {
        let rec = r.mrr_at(Method::Recommender, s).unwrap_or(f64::NAN);
        let base = r.mrr_at(Method::Baseline, s).unwrap_or(f64::NAN);
        let n = r.by_context_size.iter().find(|c| c.context_size == Some(s)).map_or(0, |c| c.n);
        writeln!(out, "{s:>12} {rec:>12.4} {base:>12.4} {n:>10}")?;
    }
    writeln!(
        out,
        "{:>12} {:>12.4} {:>12.4}",
        "all",
        r.overall_mrr(Method::Recommender).unwrap_or(f64::NAN),
        r.overall_mrr(Method::Baseline).unwrap_or(f64::NAN)
    )?;
    writeln!(out, "report written to {}", args.out.display())?;
    Ok(evaluation.report)
}
